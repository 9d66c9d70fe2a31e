//! Synaptic disturbance rejection on a single bursting neuron.
//!
//! A disturbance neuron, simulated separately and driving a GABA synapse
//! of unknown strength, perturbs the plant's rhythm. An adaptive observer
//! estimates the single unknown — the synaptic maximal conductance — from
//! the plant voltage, the measured presynaptic voltage, and the input the
//! controller knows about; the rejection controller then cancels the
//! estimated synaptic current at the input port.
//!
//! Timeline (three integration segments):
//!
//! * **no_disturbance** `[0, t_syn_on]`: plant and disturbance neuron run
//!   uncoupled.
//! * **disturbance** `[t_syn_on, t_ctrl_on]`: the synapse appears with its
//!   gate at rest (`s_d = 0`) and its current `I_d` enters the plant port.
//! * **rejection** `[t_ctrl_on, t_end]`: observer and controller start;
//!   the plant port receives `u_bar + I_d + I_control` while the observer
//!   is told about `u_bar + I_control` only, so the synaptic current is
//!   exactly the unknown it must attribute to the estimated conductance.
//!
//! The plant's own conductances are known here: the estimation is scalar
//! (`theta_hat = mu_syn_hat`), with every intrinsic current part of the
//! observer's known dynamics.

use std::cell::RefCell;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{
    concat_segments, max_abs_diff_from, max_abs_in, transient_mask, Assumption, BurstSummary,
    PhaseSpan, SegmentCheck, DEFAULT_MAX_INTRABURST_GAP, DEFAULT_SPIKE_THRESHOLD,
    TRAILING_FRACTION,
};
use crate::control::{estimated_disturbance, synaptic_port_current, SynapseKinetics};
use crate::error::{Error, Result};
use crate::library::{bursting_neuron, gaba_synapse, single_neuron_network, ConductanceVector};
use crate::model::{
    internal_derivative, steady_internal_state, voltage_derivative, EstimatedConductance,
    NetworkSpec, Parametrisation, StateLayout,
};
use crate::observer::{ObserverGains, ObserverModel, ObserverScratch};
use crate::sim::{
    halvedstep_check_against, simulate_tracked, InputSet, PiecewiseInput, Recorder, SimConfig,
    System, Trajectory,
};

use super::tracking::REST_VOLTAGE;

/// Configuration of the disturbance-rejection experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RejectionConfig {
    /// Plant maximal conductances (known to the observer).
    pub mu: ConductanceVector<f64>,
    /// Disturbance neuron's maximal conductances.
    pub mu_d: ConductanceVector<f64>,
    /// True synaptic strength of the disturbance (unknown to the observer).
    pub mu_syn: f64,
    /// Constant plant feedforward current.
    pub u_bar: f64,
    /// Disturbance-neuron input before `u_d_switch`.
    pub u_d_early: f64,
    /// Disturbance-neuron input after `u_d_switch`.
    pub u_d_late: f64,
    /// Time at which the disturbance-neuron input switches (ms).
    pub u_d_switch: f64,
    /// Observer innovation gain.
    pub gamma: f64,
    /// Observer forgetting rate.
    pub alpha: f64,
    /// Upper saturation bound on the effective synaptic conductance.
    pub beta: f64,
    /// Time the synapse appears (ms).
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

impl Default for RejectionConfig {
    fn default() -> Self {
        RejectionConfig {
            mu: ConductanceVector {
                na: 60.0,
                h: 0.1,
                t: 2.0,
                a: 0.0,
                k: 80.0,
                l: 0.4,
                k_ca: 2.0,
                kir: 0.0,
                leak: 0.12,
            },
            mu_d: ConductanceVector {
                na: 130.0,
                h: 0.1,
                t: 3.2,
                a: 0.0,
                k: 80.0,
                l: 1.0,
                k_ca: 2.0,
                kir: 0.0,
                leak: 0.1,
            },
            mu_syn: 2.5,
            u_bar: -2.0,
            u_d_early: -7.5,
            u_d_late: -1.0,
            u_d_switch: 400.0,
            gamma: 5.0,
            alpha: 0.001,
            beta: 100.0,
            t_syn_on: 8000.0,
            t_ctrl_on: 16000.0,
            t_end: 24000.0,
            // Finer than the library default: the disturbance neuron fires
            // very long spike trains whose phase decoheres between full- and
            // halved-step reruns at coarser steps.
            dt: 0.001,
            record_stride: 10,
            check_numerics: false,
        }
    }
}

/// Steady-state metrics of a rejection run.
#[derive(Debug, Clone, Serialize)]
pub struct RejectionMetrics {
    /// Burst statistics of the plant voltage, one entry per phase (phases
    /// without two interior bursts are omitted).
    pub plant_bursts: Vec<BurstSummary>,
    /// Peak `|I_d|` during the uncontrolled disturbance phase.
    pub disturbance_peak: f64,
    /// Largest `|I_d - I_d_hat|` over the trailing window of the rejection
    /// phase.
    pub residual_trailing_max: f64,
    /// `residual_trailing_max / disturbance_peak`.
    pub residual_over_peak: f64,
    /// Estimated synaptic strength at the end of the run.
    pub mu_syn_hat_final: f64,
    /// True synaptic strength.
    pub mu_syn_true: f64,
}

/// Everything a rejection run produces.
#[derive(Debug, Clone, Serialize)]
pub struct RejectionReport {
    pub assumptions: Vec<Assumption>,
    pub phases: Vec<PhaseSpan>,
    pub metrics: RejectionMetrics,
    pub checks: Vec<SegmentCheck>,
    /// Recorded signals (not serialized; written separately as CSV).
    #[serde(skip)]
    pub trajectory: Trajectory<f64>,
}

/// Index bookkeeping shared by the three segments. The composite state is
/// `[v, w, v_d, w_d]`, extended by `s_d` from the disturbance phase on and
/// by `[observer, s_hat]` in the rejection phase.
struct Pair {
    plant_net: NetworkSpec<f64>,
    plant_layout: StateLayout,
    dist_net: NetworkSpec<f64>,
    dist_layout: StateLayout,
    n_w_plant: usize,
    n_w_dist: usize,
}

impl Pair {
    fn v_dist_index(&self) -> usize {
        1 + self.n_w_plant
    }

    fn pair_dim(&self) -> usize {
        2 + self.n_w_plant + self.n_w_dist
    }

    /// Writes the uncoupled pair's derivative given each port current.
    fn derive(&self, x: &[f64], u_plant: f64, u_dist: f64, dx: &mut [f64]) {
        let vd = self.v_dist_index();
        let end = self.pair_dim();
        voltage_derivative(
            &self.plant_net,
            &self.plant_layout,
            &x[0..1],
            &x[1..vd],
            &[u_plant],
            &mut dx[0..1],
        );
        internal_derivative(
            &self.plant_net,
            &self.plant_layout,
            &x[0..1],
            &x[1..vd],
            &mut dx[1..vd],
        );
        voltage_derivative(
            &self.dist_net,
            &self.dist_layout,
            &x[vd..vd + 1],
            &x[vd + 1..end],
            &[u_dist],
            &mut dx[vd..vd + 1],
        );
        internal_derivative(
            &self.dist_net,
            &self.dist_layout,
            &x[vd..vd + 1],
            &x[vd + 1..end],
            &mut dx[vd + 1..end],
        );
    }
}

/// Phase 1: plant and disturbance neuron, uncoupled.
struct Uncoupled {
    pair: Pair,
}

impl System<f64> for Uncoupled {
    fn dim(&self) -> usize {
        self.pair.pair_dim()
    }

    fn n_inputs(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        self.pair.derive(x, u[0], u[1], dx);
    }
}

/// Phase 2: the synapse is live; its gate is part of the state and its
/// current enters the plant port.
struct Disturbed {
    pair: Pair,
    kin: SynapseKinetics<f64>,
    mu_syn: f64,
}

impl Disturbed {
    fn s_d_index(&self) -> usize {
        self.pair.pair_dim()
    }

    fn disturbance(&self, x: &[f64]) -> f64 {
        synaptic_port_current(self.mu_syn, x[self.s_d_index()], x[0], self.kin.reversal)
    }
}

impl System<f64> for Disturbed {
    fn dim(&self) -> usize {
        self.pair.pair_dim() + 1
    }

    fn n_inputs(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let i_d = self.disturbance(x);
        self.pair.derive(x, u[0] + i_d, u[1], dx);
        let sd = self.s_d_index();
        dx[sd] = self.kin.gate_derivative(x[self.pair.v_dist_index()], x[sd]);
    }
}

struct RejScratch {
    obs: ObserverScratch<f64>,
    v_meas: [f64; 2],
}

/// Phase 3: observer and rejection controller on top of the disturbed
/// plant.
struct Controlled {
    pair: Pair,
    kin: SynapseKinetics<f64>,
    mu_syn: f64,
    obs: ObserverModel<f64>,
    gains: ObserverGains<f64>,
    beta: f64,
    scratch: RefCell<RejScratch>,
}

impl Controlled {
    fn s_d_index(&self) -> usize {
        self.pair.pair_dim()
    }

    fn obs_range(&self) -> Range<usize> {
        let start = self.s_d_index() + 1;
        start..start + self.obs.dim()
    }

    fn s_hat_index(&self) -> usize {
        self.obs_range().end
    }

    fn disturbance(&self, x: &[f64]) -> f64 {
        synaptic_port_current(self.mu_syn, x[self.s_d_index()], x[0], self.kin.reversal)
    }

    /// The controller's disturbance estimate `I_d_hat`.
    fn disturbance_estimate(&self, x: &[f64]) -> f64 {
        let mu_hat = self.obs.theta(&x[self.obs_range()])[0];
        estimated_disturbance(mu_hat, x[self.s_hat_index()], x[0], self.kin.reversal, self.beta)
    }
}

impl System<f64> for Controlled {
    fn dim(&self) -> usize {
        self.pair.pair_dim() + 1 + self.obs.dim() + 1
    }

    fn n_inputs(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let or_ = self.obs_range();
        let i_d = self.disturbance(x);
        let i_control = -self.disturbance_estimate(x);
        self.pair.derive(x, u[0] + i_d + i_control, u[1], dx);

        let sd = self.s_d_index();
        let vd = self.pair.v_dist_index();
        dx[sd] = self.kin.gate_derivative(x[vd], x[sd]);

        let mut scr = self.scratch.borrow_mut();
        let scr = &mut *scr;
        scr.v_meas = [x[0], x[vd]];
        self.obs.derivative(
            &self.gains,
            &scr.v_meas,
            &[u[0] + i_control],
            &x[or_.clone()],
            &mut dx[or_],
            &mut scr.obs,
        );

        let sh = self.s_hat_index();
        dx[sh] = self.kin.gate_derivative(x[vd], x[sh]);
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

/// Runs the disturbance-rejection experiment.
pub fn run_rejection(cfg: &RejectionConfig) -> Result<RejectionReport> {
    if !(0.0 < cfg.t_syn_on && cfg.t_syn_on < cfg.t_ctrl_on && cfg.t_ctrl_on < cfg.t_end) {
        return Err(Error::config(
            "rejection needs 0 < t_syn_on < t_ctrl_on < t_end",
        ));
    }
    if !(0.0 <= cfg.u_d_switch && cfg.u_d_switch < cfg.t_syn_on) {
        return Err(Error::config(
            "the disturbance-input switch must happen before the synapse appears",
        ));
    }
    if cfg.beta <= 0.0 || cfg.gamma <= 0.0 || cfg.alpha < 0.0 || cfg.mu_syn < 0.0 {
        return Err(Error::config(
            "rejection needs beta > 0, gamma > 0, alpha >= 0, mu_syn >= 0",
        ));
    }

    let plant_net = single_neuron_network(bursting_neuron(&cfg.mu));
    let dist_net = single_neuron_network(bursting_neuron(&cfg.mu_d));
    let syn = gaba_synapse(1, 0, cfg.mu_syn);
    let kin = SynapseKinetics::of(&syn);
    let gains = ObserverGains {
        gamma: cfg.gamma,
        alpha: cfg.alpha,
    };

    // Observer model: the two-neuron network with the synapse, neuron 0
    // covered, the synaptic conductance its only estimated parameter.
    let model_net = NetworkSpec {
        neurons: vec![
            bursting_neuron(&cfg.mu),
            bursting_neuron(&cfg.mu_d),
        ],
        synapses: vec![syn.clone()],
        gaps: vec![],
        reversals: plant_net.reversals.clone(),
    };
    model_net.validate()?;
    let par = Parametrisation {
        per_neuron: vec![vec![EstimatedConductance::Synapse { pre: 1 }], vec![]],
    };
    let obs = ObserverModel::new(model_net, par, vec![0])?;

    let pair = || Pair {
        plant_net: plant_net.clone(),
        plant_layout: StateLayout::new(&plant_net),
        dist_net: dist_net.clone(),
        dist_layout: StateLayout::new(&dist_net),
        n_w_plant: StateLayout::new(&plant_net).n_w(),
        n_w_dist: StateLayout::new(&dist_net).n_w(),
    };

    let names: Vec<String> = [
        "v", "v_d", "u", "i_d", "i_d_hat", "s_d", "mu_syn_hat", "s_hat", "v_hat",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();

    let mut trajectory = Trajectory::default();
    let mut checks = Vec::new();

    // --- Segment 1: uncoupled. ---
    let sys1 = Uncoupled { pair: pair() };
    let vd = sys1.pair.v_dist_index();
    let mut x0 = vec![REST_VOLTAGE];
    x0.extend(steady_internal_state(
        &sys1.pair.plant_net,
        &sys1.pair.plant_layout,
        &[REST_VOLTAGE],
    ));
    x0.push(REST_VOLTAGE);
    x0.extend(steady_internal_state(
        &sys1.pair.dist_net,
        &sys1.pair.dist_layout,
        &[REST_VOLTAGE],
    ));

    let seg1_cfg = SimConfig {
        dt: cfg.dt,
        t_start: 0.0,
        t_end: cfg.t_syn_on,
        record_stride: cfg.record_stride,
    };
    let u_d_input = |t0: f64| -> Result<PiecewiseInput<f64>> {
        if cfg.u_d_switch > t0 {
            PiecewiseInput::new(vec![(t0, cfg.u_d_early), (cfg.u_d_switch, cfg.u_d_late)])
        } else {
            Ok(PiecewiseInput::constant(t0, cfg.u_d_late))
        }
    };
    let seg1_inputs = InputSet {
        channels: vec![PiecewiseInput::constant(0.0, cfg.u_bar), u_d_input(0.0)?],
    };
    {
        let mut rec = Recorder::new(names.clone(), |_t, x: &[f64], u: &[f64], out| {
            out.extend_from_slice(&[x[0], x[vd], u[0], 0.0, 0.0, 0.0, 0.0, 0.0, x[0]]);
        });
        let (seg, x_end) = simulate_tracked(&sys1, &seg1_cfg, &seg1_inputs, &x0, &mut rec)?;
        if cfg.check_numerics {
            let cols = [seg.column("v").unwrap(), seg.column("v_d").unwrap()];
            let r = halvedstep_check_against(
                &sys1,
                &seg1_cfg,
                &seg1_inputs,
                &x0,
                &[0, vd],
                transient_mask(),
                &cols,
            )?;
            checks.push(SegmentCheck::from_report("no_disturbance", &r));
        }
        concat_segments(&mut trajectory, &seg);
        x0 = x_end;
    }

    // --- Segment 2: synapse live, gate cold-started at rest. ---
    let sys2 = Disturbed {
        pair: pair(),
        kin,
        mu_syn: cfg.mu_syn,
    };
    x0.push(0.0);
    let seg2_cfg = SimConfig {
        dt: cfg.dt,
        t_start: cfg.t_syn_on,
        t_end: cfg.t_ctrl_on,
        record_stride: cfg.record_stride,
    };
    let seg2_inputs = InputSet {
        channels: vec![
            PiecewiseInput::constant(cfg.t_syn_on, cfg.u_bar),
            u_d_input(cfg.t_syn_on)?,
        ],
    };
    {
        let sys2_ref = &sys2;
        let mut rec = Recorder::new(names.clone(), move |_t, x: &[f64], u: &[f64], out| {
            let i_d = sys2_ref.disturbance(x);
            let sd = sys2_ref.s_d_index();
            out.extend_from_slice(&[x[0], x[vd], u[0] + i_d, i_d, 0.0, x[sd], 0.0, 0.0, x[0]]);
        });
        let (seg, x_end) = simulate_tracked(&sys2, &seg2_cfg, &seg2_inputs, &x0, &mut rec)?;
        if cfg.check_numerics {
            let cols = [seg.column("v").unwrap(), seg.column("v_d").unwrap()];
            let r = halvedstep_check_against(
                &sys2,
                &seg2_cfg,
                &seg2_inputs,
                &x0,
                &[0, vd],
                transient_mask(),
                &cols,
            )?;
            checks.push(SegmentCheck::from_report("disturbance", &r));
        }
        concat_segments(&mut trajectory, &seg);
        x0 = x_end;
    }

    // --- Segment 3: observer and controller. ---
    let scratch = RejScratch {
        obs: ObserverScratch::new(&obs),
        v_meas: [0.0; 2],
    };
    let obs_state = obs.initial_state(&[x0[0], x0[vd]]);
    let s_hat0 = kin.gate_steady_state(x0[vd]);
    let sys3 = Controlled {
        pair: pair(),
        kin,
        mu_syn: cfg.mu_syn,
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
    let seg3_inputs = InputSet {
        channels: vec![
            PiecewiseInput::constant(cfg.t_ctrl_on, cfg.u_bar),
            u_d_input(cfg.t_ctrl_on)?,
        ],
    };
    {
        let sys3_ref = &sys3;
        let or_ = sys3.obs_range();
        let mut rec = Recorder::new(names.clone(), move |_t, x: &[f64], u: &[f64], out| {
            let i_d = sys3_ref.disturbance(x);
            let i_d_hat = sys3_ref.disturbance_estimate(x);
            let xo = &x[or_.clone()];
            out.extend_from_slice(&[
                x[0],
                x[vd],
                u[0] + i_d - i_d_hat,
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
            let cols = [seg.column("v").unwrap(), seg.column("v_d").unwrap()];
            let r = halvedstep_check_against(
                &sys3,
                &seg3_cfg,
                &seg3_inputs,
                &x0,
                &[0, vd],
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
    let v = trajectory.column("v").unwrap();
    let i_d = trajectory.column("i_d").unwrap();
    let i_d_hat = trajectory.column("i_d_hat").unwrap();
    let mu_hat = trajectory.column("mu_syn_hat").unwrap();

    let plant_bursts: Vec<BurstSummary> = phases
        .iter()
        .filter_map(|ph| {
            BurstSummary::from_phase(
                times,
                v,
                ph,
                DEFAULT_SPIKE_THRESHOLD,
                DEFAULT_MAX_INTRABURST_GAP,
            )
            .ok()
        })
        .collect();

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
        Assumption::new("max_intraburst_gap_ms", DEFAULT_MAX_INTRABURST_GAP),
        Assumption::new("introduced_synapse_gate", "starts at rest (0)"),
        Assumption::new(
            "observer_known_input",
            "feedforward plus control, excluding the disturbance",
        ),
    ];

    Ok(RejectionReport {
        assumptions,
        phases,
        metrics: RejectionMetrics {
            plant_bursts,
            disturbance_peak,
            residual_trailing_max,
            residual_over_peak,
            mu_syn_hat_final,
            mu_syn_true: cfg.mu_syn,
        },
        checks,
        trajectory,
    })
}
