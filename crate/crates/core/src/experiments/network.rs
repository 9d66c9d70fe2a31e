//! Disturbance rejection at the hub of a five-neuron network.
//!
//! The network: two half-center oscillators (neurons 1+2 and 4+5, mutual
//! GABA synapses plus a gap junction within each pair) and a hub neuron 3
//! that receives a known synapse from neuron 1 and — from `t_syn_on` on —
//! an unknown-strength synapse from neuron 5. A decentralised adaptive
//! observer watching only the hub estimates that one synaptic conductance;
//! the same rejection law as in the single-neuron experiment cancels the
//! estimated current at the hub's input port.
//!
//! Timeline (three integration segments):
//!
//! * **no_disturbance** `[0, t_syn_on]`: network without the disturbance
//!   synapse; brief stronger hyperpolarizing inputs to one neuron of each
//!   oscillator pair stagger the two rhythms.
//! * **disturbance** `[t_syn_on, t_ctrl_on]`: the synapse from neuron 5 to
//!   the hub appears (gate cold-started at rest) and disrupts the hub
//!   rhythm.
//! * **rejection** `[t_ctrl_on, t_end]`: hub observer and controller on.
//!
//! The hub observer's model is the full five-neuron network including the
//! disturbance synapse; it measures all five voltages but updates only the
//! hub's internal state and the single unknown conductance. Everything
//! else about the hub — its own channels, the known synapse from neuron 1
//! — is part of the observer's known dynamics.

use std::cell::RefCell;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{
    concat_segments, max_abs_diff_from, max_abs_in, transient_mask, Assumption, BurstSummary,
    PhaseSpan, SegmentCheck, DEFAULT_SPIKE_THRESHOLD,
    TRAILING_FRACTION,
};
use crate::control::{estimated_disturbance, synaptic_port_current, SynapseKinetics};
use crate::error::{Error, Result};
use crate::library::{five_neuron_network, gaba_synapse, ConductanceVector};
use crate::model::{
    internal_derivative, steady_internal_state, voltage_derivative, EstimatedConductance,
    NetworkSpec, Parametrisation, StateLayout,
};
use crate::observer::{ObserverGains, ObserverModel, ObserverScratch};
use crate::sim::{
    halvedstep_check_against, simulate_tracked, InputSet, PiecewiseInput, Recorder, SimConfig,
    System, Trajectory, DEFAULT_DT,
};

use super::tracking::REST_VOLTAGE;

/// Index of the hub neuron (0-based).
const HUB: usize = 2;
/// Index of the disturbance's presynaptic neuron (0-based).
const PRE: usize = 4;

/// Longest silence (ms) allowed inside one hub burst.
///
/// The hub is a tonically spiking cell that is periodically silenced by
/// inhibition from the oscillator pairs, and those silences are the hub's
/// burst boundaries. Measured over the default run, the two time scales are
/// cleanly separated: interspike intervals inside a hub train stay below
/// 19 ms, while the shortest inhibition silence (the first, still-weak
/// burst of neuron 1) lasts 95 ms and steady-state silences 154 ms and up.
/// A 50 ms cut splits the difference with a near-2x margin on each side.
/// The library-wide default of [`super::DEFAULT_MAX_INTRABURST_GAP`]
/// targets intrinsic bursters, whose interburst silences run to many
/// hundreds of milliseconds, and would merge all hub activity into a
/// single burst.
const HUB_MAX_INTRABURST_GAP: f64 = 50.0;

/// A stronger input applied to one neuron from the start until `until`,
/// used to stagger the two oscillator pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputTransient {
    /// Neuron index (0-based).
    pub neuron: usize,
    /// Input value during the transient.
    pub early: f64,
    /// End of the transient (ms).
    pub until: f64,
}

/// Configuration of the five-neuron network experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Maximal conductances of the five neurons.
    pub mu: Vec<ConductanceVector<f64>>,
    /// GABA strengths within the two oscillator pairs.
    pub mu_syn_hco: [f64; 2],
    /// GABA strengths onto the hub: `[known 1 -> 3, unknown 5 -> 3]`.
    pub mu_syn_hub: [f64; 2],
    /// Gap-junction conductance within each oscillator pair.
    pub mu_gap: f64,
    /// Constant inputs to the five neurons.
    pub u_bar: Vec<f64>,
    /// Initial input transients.
    pub transients: Vec<InputTransient>,
    /// Observer innovation gain.
    pub gamma: f64,
    /// Observer forgetting rate.
    pub alpha: f64,
    /// Upper saturation bound on the effective synaptic conductance.
    pub beta: f64,
    /// Time the disturbance synapse appears (ms).
    pub t_syn_on: f64,
    /// Time observer and controller start (ms).
    pub t_ctrl_on: f64,
    /// End of the experiment (ms).
    pub t_end: f64,
    /// Integration step (ms).
    pub dt: f64,
    /// Record every this-many steps.
    pub record_stride: usize,
    /// Rerun each segment at half the step and report voltage deviations.
    pub check_numerics: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let pair_neuron = ConductanceVector {
            na: 120.0,
            h: 0.1,
            t: 1.6,
            a: 0.0,
            k: 80.0,
            l: 0.8,
            k_ca: 2.0,
            kir: 0.0,
            leak: 0.1,
        };
        let hub_neuron = ConductanceVector {
            na: 60.0,
            h: 0.1,
            t: 2.0,
            a: 0.0,
            k: 30.0,
            l: 0.0,
            k_ca: 1.0,
            kir: 0.0,
            leak: 0.1,
        };
        let dist_neuron = ConductanceVector {
            na: 130.0,
            h: 0.1,
            t: 3.2,
            a: 0.0,
            k: 80.0,
            l: 1.0,
            k_ca: 2.0,
            kir: 0.0,
            leak: 0.1,
        };
        NetworkConfig {
            mu: vec![pair_neuron, pair_neuron, hub_neuron, dist_neuron, dist_neuron],
            mu_syn_hco: [0.8, 0.6],
            mu_syn_hub: [8.0, 8.0],
            mu_gap: 0.004,
            u_bar: vec![-3.5, -3.5, 38.0, -3.2, -3.2],
            transients: vec![
                InputTransient {
                    neuron: 0,
                    early: -8.0,
                    until: 600.0,
                },
                InputTransient {
                    neuron: 3,
                    early: -7.0,
                    until: 600.0,
                },
            ],
            gamma: 5.0,
            alpha: 0.0004,
            beta: 100.0,
            t_syn_on: 4000.0,
            t_ctrl_on: 10000.0,
            t_end: 16000.0,
            dt: DEFAULT_DT,
            record_stride: 10,
            check_numerics: false,
        }
    }
}

/// Steady-state metrics of a network run.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkMetrics {
    /// Hub burst statistics, one entry per phase with two interior bursts.
    pub hub_bursts: Vec<BurstSummary>,
    /// Peak `|I_d|` during the uncontrolled disturbance phase.
    pub disturbance_peak: f64,
    /// Largest `|I_d - I_d_hat|` over the trailing window of the rejection
    /// phase.
    pub residual_trailing_max: f64,
    /// `residual_trailing_max / disturbance_peak`.
    pub residual_over_peak: f64,
    /// Estimated synaptic strength at the end of the run.
    pub mu_syn_hat_final: f64,
    /// True strength of the disturbance synapse.
    pub mu_syn_true: f64,
}

/// Everything a network run produces.
#[derive(Debug, Clone, Serialize)]
pub struct NetworkReport {
    pub assumptions: Vec<Assumption>,
    pub phases: Vec<PhaseSpan>,
    pub metrics: NetworkMetrics,
    pub checks: Vec<SegmentCheck>,
    /// Recorded signals (not serialized; written separately as CSV).
    #[serde(skip)]
    pub trajectory: Trajectory<f64>,
}

/// The plant network (without the disturbance synapse) and its layout.
struct Net5 {
    net: NetworkSpec<f64>,
    layout: StateLayout,
    n_w: usize,
}

impl Net5 {
    fn plant_dim(&self) -> usize {
        5 + self.n_w
    }

    fn derive(&self, x: &[f64], u_eff: &[f64], dx: &mut [f64]) {
        let n = 5;
        voltage_derivative(
            &self.net,
            &self.layout,
            &x[0..n],
            &x[n..n + self.n_w],
            u_eff,
            &mut dx[0..n],
        );
        internal_derivative(
            &self.net,
            &self.layout,
            &x[0..n],
            &x[n..n + self.n_w],
            &mut dx[n..n + self.n_w],
        );
    }
}

/// Phase 1: the network alone.
struct PhaseA {
    core: Net5,
}

impl System<f64> for PhaseA {
    fn dim(&self) -> usize {
        self.core.plant_dim()
    }

    fn n_inputs(&self) -> usize {
        5
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        self.core.derive(x, u, dx);
    }
}

/// Phase 2: the disturbance synapse is live.
struct PhaseB {
    core: Net5,
    kin: SynapseKinetics<f64>,
    mu_d: f64,
    u_eff: RefCell<Vec<f64>>,
}

impl PhaseB {
    fn s_d_index(&self) -> usize {
        self.core.plant_dim()
    }

    fn disturbance(&self, x: &[f64]) -> f64 {
        synaptic_port_current(self.mu_d, x[self.s_d_index()], x[HUB], self.kin.reversal)
    }
}

impl System<f64> for PhaseB {
    fn dim(&self) -> usize {
        self.core.plant_dim() + 1
    }

    fn n_inputs(&self) -> usize {
        5
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let i_d = self.disturbance(x);
        let mut u_eff = self.u_eff.borrow_mut();
        u_eff.copy_from_slice(u);
        u_eff[HUB] += i_d;
        self.core.derive(x, &u_eff, dx);
        let sd = self.s_d_index();
        dx[sd] = self.kin.gate_derivative(x[PRE], x[sd]);
    }
}

struct NetScratch {
    obs: ObserverScratch<f64>,
    u_eff: Vec<f64>,
}

/// Phase 3: hub observer and rejection controller.
struct PhaseC {
    core: Net5,
    kin: SynapseKinetics<f64>,
    mu_d: f64,
    obs: ObserverModel<f64>,
    gains: ObserverGains<f64>,
    beta: f64,
    scratch: RefCell<NetScratch>,
}

impl PhaseC {
    fn s_d_index(&self) -> usize {
        self.core.plant_dim()
    }

    fn obs_range(&self) -> Range<usize> {
        let start = self.s_d_index() + 1;
        start..start + self.obs.dim()
    }

    fn s_hat_index(&self) -> usize {
        self.obs_range().end
    }

    fn disturbance(&self, x: &[f64]) -> f64 {
        synaptic_port_current(self.mu_d, x[self.s_d_index()], x[HUB], self.kin.reversal)
    }

    fn disturbance_estimate(&self, x: &[f64]) -> f64 {
        let mu_hat = self.obs.theta(&x[self.obs_range()])[0];
        estimated_disturbance(mu_hat, x[self.s_hat_index()], x[HUB], self.kin.reversal, self.beta)
    }
}

impl System<f64> for PhaseC {
    fn dim(&self) -> usize {
        self.core.plant_dim() + 1 + self.obs.dim() + 1
    }

    fn n_inputs(&self) -> usize {
        5
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let or_ = self.obs_range();
        let i_d = self.disturbance(x);
        let i_control = -self.disturbance_estimate(x);

        let mut scr = self.scratch.borrow_mut();
        let scr = &mut *scr;
        scr.u_eff.copy_from_slice(u);
        scr.u_eff[HUB] += i_d + i_control;
        self.core.derive(x, &scr.u_eff, dx);

        let sd = self.s_d_index();
        dx[sd] = self.kin.gate_derivative(x[PRE], x[sd]);

        self.obs.derivative(
            &self.gains,
            &x[0..5],
            &[u[HUB] + i_control],
            &x[or_.clone()],
            &mut dx[or_],
            &mut scr.obs,
        );

        let sh = self.s_hat_index();
        dx[sh] = self.kin.gate_derivative(x[PRE], x[sh]);
    }

    fn post_step(&self, _t: f64, x: &mut [f64]) -> Result<()> {
        let or_ = self.obs_range();
        self.obs.symmetrize_covariance(&mut x[or_]);
        Ok(())
    }

    fn check_recorded(&self, t: f64, x: &[f64]) -> Result<()> {
        self.obs.check_covariance(t, &x[self.obs_range()])
    }
}

/// The five recorded voltage columns of a segment, for step checking the
/// segment against a halved-step rerun.
fn voltage_columns(seg: &Trajectory<f64>) -> Vec<&[f64]> {
    (1..=5)
        .map(|i| seg.column(&format!("v{i}")).unwrap())
        .collect()
}

/// Runs the five-neuron network experiment.
pub fn run_network(cfg: &NetworkConfig) -> Result<NetworkReport> {
    if cfg.mu.len() != 5 || cfg.u_bar.len() != 5 {
        return Err(Error::config(
            "the network experiment needs exactly 5 neurons and 5 inputs",
        ));
    }
    if !(0.0 < cfg.t_syn_on && cfg.t_syn_on < cfg.t_ctrl_on && cfg.t_ctrl_on < cfg.t_end) {
        return Err(Error::config(
            "the network experiment needs 0 < t_syn_on < t_ctrl_on < t_end",
        ));
    }
    for tr in &cfg.transients {
        if tr.neuron >= 5 || !(0.0 < tr.until && tr.until < cfg.t_syn_on) {
            return Err(Error::config(
                "input transients must target a valid neuron and end before t_syn_on",
            ));
        }
    }
    if cfg.beta <= 0.0 || cfg.gamma <= 0.0 || cfg.alpha < 0.0 {
        return Err(Error::config(
            "the network experiment needs beta > 0, gamma > 0, alpha >= 0",
        ));
    }

    let mu: [ConductanceVector<f64>; 5] = [cfg.mu[0], cfg.mu[1], cfg.mu[2], cfg.mu[3], cfg.mu[4]];
    // The observer's model network includes the disturbance synapse; the
    // integrated plant does not — its current is injected at the hub port
    // from the disturbance phase on.
    let full_net = five_neuron_network(&mu, cfg.mu_syn_hco, cfg.mu_syn_hub, cfg.mu_gap);
    let mut plant_net = full_net.clone();
    plant_net.synapses.retain(|s| !(s.pre == PRE && s.post == HUB));
    plant_net.validate()?;

    let dist_syn = gaba_synapse(PRE, HUB, cfg.mu_syn_hub[1]);
    let kin = SynapseKinetics::of(&dist_syn);
    let gains = ObserverGains {
        gamma: cfg.gamma,
        alpha: cfg.alpha,
    };

    let mut per_neuron = vec![Vec::new(); 5];
    per_neuron[HUB] = vec![EstimatedConductance::Synapse { pre: PRE }];
    let obs = ObserverModel::new(full_net.clone(), Parametrisation { per_neuron }, vec![HUB])?;

    let core = || {
        let layout = StateLayout::new(&plant_net);
        Net5 {
            net: plant_net.clone(),
            n_w: layout.n_w(),
            layout,
        }
    };

    let names: Vec<String> = [
        "v1", "v2", "v3", "v4", "v5", "u_hub", "i_d", "i_d_hat", "s_d", "mu_syn_hat", "s_hat",
        "v_hat_hub",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let channels_at = |t0: f64| -> Result<InputSet<f64>> {
        let mut channels = Vec::with_capacity(5);
        for i in 0..5 {
            let tr = cfg
                .transients
                .iter()
                .find(|tr| tr.neuron == i && tr.until > t0);
            channels.push(match tr {
                Some(tr) => {
                    PiecewiseInput::new(vec![(t0, tr.early), (tr.until, cfg.u_bar[i])])?
                }
                None => PiecewiseInput::constant(t0, cfg.u_bar[i]),
            });
        }
        Ok(InputSet { channels })
    };

    let mut trajectory = Trajectory::default();
    let mut checks = Vec::new();

    // --- Segment 1: network alone. ---
    let sys1 = PhaseA { core: core() };
    let mut x0: Vec<f64> = vec![REST_VOLTAGE; 5];
    x0.extend(steady_internal_state(
        &sys1.core.net,
        &sys1.core.layout,
        &x0.clone(),
    ));

    let seg1_cfg = SimConfig {
        dt: cfg.dt,
        t_start: 0.0,
        t_end: cfg.t_syn_on,
        record_stride: cfg.record_stride,
    };
    let seg1_inputs = channels_at(0.0)?;
    {
        let mut rec = Recorder::new(names.clone(), |_t, x: &[f64], u: &[f64], out| {
            out.extend_from_slice(&x[0..5]);
            out.extend_from_slice(&[u[HUB], 0.0, 0.0, 0.0, 0.0, 0.0, x[HUB]]);
        });
        let (seg, x_end) = simulate_tracked(&sys1, &seg1_cfg, &seg1_inputs, &x0, &mut rec)?;
        if cfg.check_numerics {
            let cols = voltage_columns(&seg);
            let r = halvedstep_check_against(
                &sys1,
                &seg1_cfg,
                &seg1_inputs,
                &x0,
                &[0, 1, 2, 3, 4],
                transient_mask(),
                &cols,
            )?;
            checks.push(SegmentCheck::from_report("no_disturbance", &r));
        }
        concat_segments(&mut trajectory, &seg);
        x0 = x_end;
    }

    // --- Segment 2: disturbance synapse live, gate cold-started. ---
    let sys2 = PhaseB {
        core: core(),
        kin,
        mu_d: cfg.mu_syn_hub[1],
        u_eff: RefCell::new(vec![0.0; 5]),
    };
    x0.push(0.0);
    let seg2_cfg = SimConfig {
        dt: cfg.dt,
        t_start: cfg.t_syn_on,
        t_end: cfg.t_ctrl_on,
        record_stride: cfg.record_stride,
    };
    let seg2_inputs = channels_at(cfg.t_syn_on)?;
    {
        let sys2_ref = &sys2;
        let mut rec = Recorder::new(names.clone(), move |_t, x: &[f64], u: &[f64], out| {
            let i_d = sys2_ref.disturbance(x);
            out.extend_from_slice(&x[0..5]);
            out.extend_from_slice(&[
                u[HUB] + i_d,
                i_d,
                0.0,
                x[sys2_ref.s_d_index()],
                0.0,
                0.0,
                x[HUB],
            ]);
        });
        let (seg, x_end) = simulate_tracked(&sys2, &seg2_cfg, &seg2_inputs, &x0, &mut rec)?;
        if cfg.check_numerics {
            let cols = voltage_columns(&seg);
            let r = halvedstep_check_against(
                &sys2,
                &seg2_cfg,
                &seg2_inputs,
                &x0,
                &[0, 1, 2, 3, 4],
                transient_mask(),
                &cols,
            )?;
            checks.push(SegmentCheck::from_report("disturbance", &r));
        }
        concat_segments(&mut trajectory, &seg);
        x0 = x_end;
    }

    // --- Segment 3: hub observer and controller. ---
    let obs_state = obs.initial_state(&x0[0..5]);
    let s_hat0 = kin.gate_steady_state(x0[PRE]);
    let scratch = NetScratch {
        obs: ObserverScratch::new(&obs),
        u_eff: vec![0.0; 5],
    };
    let sys3 = PhaseC {
        core: core(),
        kin,
        mu_d: cfg.mu_syn_hub[1],
        obs,
        gains,
        beta: cfg.beta,
        scratch: RefCell::new(scratch),
    };
    x0.extend_from_slice(&obs_state);
    x0.push(s_hat0);

    let seg3_cfg = SimConfig {
        dt: cfg.dt,
        t_start: cfg.t_ctrl_on,
        t_end: cfg.t_end,
        record_stride: cfg.record_stride,
    };
    let seg3_inputs = channels_at(cfg.t_ctrl_on)?;
    {
        let sys3_ref = &sys3;
        let or_ = sys3.obs_range();
        let mut rec = Recorder::new(names.clone(), move |_t, x: &[f64], u: &[f64], out| {
            let i_d = sys3_ref.disturbance(x);
            let i_d_hat = sys3_ref.disturbance_estimate(x);
            let xo = &x[or_.clone()];
            out.extend_from_slice(&x[0..5]);
            out.extend_from_slice(&[
                u[HUB] + i_d - i_d_hat,
                i_d,
                i_d_hat,
                x[sys3_ref.s_d_index()],
                sys3_ref.obs.theta(xo)[0],
                x[sys3_ref.s_hat_index()],
                sys3_ref.obs.v_hat(xo)[0],
            ]);
        });
        let (seg, _) = simulate_tracked(&sys3, &seg3_cfg, &seg3_inputs, &x0, &mut rec)?;
        if cfg.check_numerics {
            let cols = voltage_columns(&seg);
            let r = halvedstep_check_against(
                &sys3,
                &seg3_cfg,
                &seg3_inputs,
                &x0,
                &[0, 1, 2, 3, 4],
                transient_mask(),
                &cols,
            )?;
            checks.push(SegmentCheck::from_report("rejection", &r));
        }
        concat_segments(&mut trajectory, &seg);
    }

    // --- Metrics. ---
    let phases = vec![
        PhaseSpan::new("no_disturbance", 0.0, cfg.t_syn_on),
        PhaseSpan::new("disturbance", cfg.t_syn_on, cfg.t_ctrl_on),
        PhaseSpan::new("rejection", cfg.t_ctrl_on, cfg.t_end),
    ];

    let times = trajectory.times();
    let v_hub = trajectory.column("v3").unwrap();
    let i_d = trajectory.column("i_d").unwrap();
    let i_d_hat = trajectory.column("i_d_hat").unwrap();
    let mu_hat = trajectory.column("mu_syn_hat").unwrap();

    let hub_bursts: Vec<BurstSummary> = phases
        .iter()
        .map(|ph| {
            BurstSummary::from_phase(
                times,
                v_hub,
                ph,
                DEFAULT_SPIKE_THRESHOLD,
                HUB_MAX_INTRABURST_GAP,
            )
        })
        .collect::<Result<_>>()?;

    let disturbance_peak = max_abs_in(times, i_d, cfg.t_syn_on, cfg.t_ctrl_on);
    let trailing = phases[2].trailing_start(TRAILING_FRACTION);
    let residual_trailing_max = max_abs_diff_from(times, i_d, i_d_hat, trailing);
    let residual_over_peak = residual_trailing_max / disturbance_peak;
    let mu_syn_hat_final = *mu_hat.last().unwrap();

    let assumptions = vec![
        Assumption::new("dt_ms", cfg.dt),
        Assumption::new("record_stride", cfg.record_stride),
        Assumption::new("initial_covariance", "identity"),
        Assumption::new("beta", cfg.beta),
        Assumption::new("gamma", cfg.gamma),
        Assumption::new("alpha", cfg.alpha),
        Assumption::new("t_syn_on_ms", cfg.t_syn_on),
        Assumption::new("t_ctrl_on_ms", cfg.t_ctrl_on),
        Assumption::new("t_end_ms", cfg.t_end),
        Assumption::new("rest_voltage_mv", REST_VOLTAGE),
        Assumption::new("trailing_fraction", TRAILING_FRACTION),
        Assumption::new("spike_threshold_mv", DEFAULT_SPIKE_THRESHOLD),
        Assumption::new("hub_max_intraburst_gap_ms", HUB_MAX_INTRABURST_GAP),
        Assumption::new("introduced_synapse_gate", "starts at rest (0)"),
        Assumption::new("hub_neuron_index", HUB),
        Assumption::new("disturbance_presynaptic_index", PRE),
    ];

    Ok(NetworkReport {
        assumptions,
        phases,
        metrics: NetworkMetrics {
            hub_bursts,
            disturbance_peak,
            residual_trailing_max,
            residual_over_peak,
            mu_syn_hat_final,
            mu_syn_true: cfg.mu_syn_hub[1],
        },
        checks,
        trajectory,
    })
}
