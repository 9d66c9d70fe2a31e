//! Reference-tracking experiment: an adaptive controller drives a passive
//! membrane to reproduce the bursting of a reference neuron with unknown
//! maximal conductances.
//!
//! Timeline (two integration segments):
//!
//! * **pre_roll** `[-t_pre, 0]`: the reference neuron bursts under its
//!   constant input `u_r`; the plant receives no input and sits at rest.
//!   No observer exists yet.
//! * **closed_loop** `[0, t_horizon]`: two adaptive observers start — one
//!   estimating the reference neuron's conductances from `(v_r, u_r)`, one
//!   estimating the plant's (true value: zero for a passive membrane) from
//!   its measured voltage and *full* applied input — and the tracking
//!   controller shapes the plant's input from both running estimates.
//!
//! Both observers use the same gains and unit initial covariance. The
//! plant observer must see the full applied input, control current
//! included: feeding it the feedforward alone would make it attribute the
//! synthesized currents to intrinsic conductances, settle at half the
//! reference values, and halve the realized conductances.

use std::cell::RefCell;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{
    concat_segments, max_abs_diff_from, norm, rms_from, transient_mask, Assumption, BurstSummary,
    PhaseSpan, SegmentCheck, DEFAULT_MAX_INTRABURST_GAP, DEFAULT_SPIKE_THRESHOLD,
    TRAILING_FRACTION,
};
use crate::control::{current_regressor_row, rectify, saturate, tracking_control};
use crate::error::{Error, Result};
use crate::library::{bursting_neuron, single_neuron_network, ConductanceVector};
use crate::model::{
    internal_derivative, steady_internal_state, voltage_derivative, EstimatedConductance,
    NetworkSpec, Parametrisation, StateLayout,
};
use crate::observer::{ObserverGains, ObserverModel, ObserverScratch};
use crate::sim::{
    halvedstep_check_against, simulate_tracked, InputSet, PiecewiseInput, Recorder, SimConfig,
    System, Trajectory,
};

/// Resting potential used as the initial condition everywhere (mV).
pub const REST_VOLTAGE: f64 = -65.0;

/// Configuration of the reference-tracking experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackingConfig {
    /// Reference neuron's maximal conductances (unknown to the controller).
    pub mu_r: ConductanceVector<f64>,
    /// True plant conductances; zero for the passive membrane of the
    /// nominal experiment.
    pub mu_plant: ConductanceVector<f64>,
    /// Reference feedforward current.
    pub u_r: f64,
    /// Output-feedback gain of the tracking controller.
    pub kappa: f64,
    /// Upper saturation bound on effective conductances.
    pub beta: f64,
    /// Observer innovation gain (both observers).
    pub gamma: f64,
    /// Observer forgetting rate (both observers).
    pub alpha: f64,
    /// Pre-roll duration before the controller starts (ms).
    pub t_pre: f64,
    /// Closed-loop duration (ms).
    pub t_horizon: f64,
    /// Integration step (ms).
    pub dt: f64,
    /// Record every this-many steps.
    pub record_stride: usize,
    /// Start both observers at the true parameters instead of zero
    /// (synchronized-start and stationarity checks).
    pub preset_estimates: bool,
    /// Rerun each segment at half the step and report voltage deviations.
    pub check_numerics: bool,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        TrackingConfig {
            mu_r: ConductanceVector {
                na: 120.0,
                h: 0.1,
                t: 2.0,
                a: 0.0,
                k: 80.0,
                l: 0.4,
                k_ca: 2.0,
                kir: 0.0,
                leak: 0.1,
            },
            mu_plant: zero_conductances(),
            u_r: -2.0,
            kappa: 0.04,
            beta: 150.0,
            gamma: 2.0,
            alpha: 0.0008,
            t_pre: 8000.0,
            t_horizon: 16000.0,
            // Coarser than the library default: the reference and plant burst
            // at moderate spike rates, and the halved-step deviation stays two
            // orders of magnitude below the acceptance bound at this step.
            dt: 0.005,
            record_stride: 10,
            preset_estimates: false,
            check_numerics: false,
        }
    }
}

/// All-zero maximal conductances (a passive membrane).
pub fn zero_conductances() -> ConductanceVector<f64> {
    ConductanceVector {
        na: 0.0,
        h: 0.0,
        t: 0.0,
        a: 0.0,
        k: 0.0,
        l: 0.0,
        k_ca: 0.0,
        kir: 0.0,
        leak: 0.0,
    }
}

/// Steady-state and convergence metrics of a tracking run.
#[derive(Debug, Clone, Serialize)]
pub struct TrackingMetrics {
    /// RMS of `v - v_r` over the trailing window of the closed-loop phase
    /// (mV).
    pub tracking_rms_trailing: f64,
    /// Largest `|v - v_r|` over the trailing window (mV).
    pub tracking_max_trailing: f64,
    /// Largest relative mismatch, over the trailing window, between the
    /// conductances realized on the plant (true plant conductances plus
    /// `rectify(theta_r_hat) - saturate(theta_hat, beta)`) and the
    /// reference estimate `theta_r_hat`.
    pub effective_theta_err_trailing_max: f64,
    /// Estimated parameter names, in order.
    pub theta_names: Vec<String>,
    /// True reference conductances.
    pub theta_r_target: Vec<f64>,
    /// Reference estimate at the end of the horizon.
    pub theta_r_final: Vec<f64>,
    /// True plant conductances.
    pub theta_plant_target: Vec<f64>,
    /// Plant estimate at the end of the horizon.
    pub theta_plant_final: Vec<f64>,
    /// Burst statistics of the reference voltage in the closed-loop phase.
    pub reference_bursts: Option<BurstSummary>,
    /// Burst statistics of the plant voltage in the closed-loop phase.
    pub plant_bursts: Option<BurstSummary>,
}

/// Everything a tracking run produces.
#[derive(Debug, Clone, Serialize)]
pub struct TrackingReport {
    pub assumptions: Vec<Assumption>,
    pub phases: Vec<PhaseSpan>,
    pub metrics: TrackingMetrics,
    /// Step-halving checks, one per integration segment (empty unless
    /// requested).
    pub checks: Vec<SegmentCheck>,
    /// Recorded signals (not serialized; written separately as CSV).
    #[serde(skip)]
    pub trajectory: Trajectory<f64>,
}

/// Open-loop segment: reference and plant integrate side by side with
/// constant port inputs and no estimation. State: `[v_r, w_r, v, w]`.
struct OpenLoop {
    ref_net: NetworkSpec<f64>,
    ref_layout: StateLayout,
    plant_net: NetworkSpec<f64>,
    plant_layout: StateLayout,
    n_w: usize,
}

impl OpenLoop {
    fn v_plant_index(&self) -> usize {
        1 + self.n_w
    }
}

impl System<f64> for OpenLoop {
    fn dim(&self) -> usize {
        2 + 2 * self.n_w
    }

    fn n_inputs(&self) -> usize {
        2
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let pv = self.v_plant_index();
        let (xr, xp) = x.split_at(pv);
        let (dxr, dxp) = dx.split_at_mut(pv);
        voltage_derivative(
            &self.ref_net,
            &self.ref_layout,
            &xr[0..1],
            &xr[1..],
            &u[0..1],
            &mut dxr[0..1],
        );
        internal_derivative(&self.ref_net, &self.ref_layout, &xr[0..1], &xr[1..], &mut dxr[1..]);
        voltage_derivative(
            &self.plant_net,
            &self.plant_layout,
            &xp[0..1],
            &xp[1..],
            &u[1..2],
            &mut dxp[0..1],
        );
        internal_derivative(
            &self.plant_net,
            &self.plant_layout,
            &xp[0..1],
            &xp[1..],
            &mut dxp[1..],
        );
    }
}

struct ClosedLoopScratch {
    obs_r: ObserverScratch<f64>,
    obs_p: ObserverScratch<f64>,
    phi: Vec<f64>,
}

/// Closed-loop segment: reference, plant, both observers, and the tracking
/// controller. State: `[v_r, w_r, v, w, observer_r, observer]`.
struct ClosedLoop {
    ref_net: NetworkSpec<f64>,
    ref_layout: StateLayout,
    plant_net: NetworkSpec<f64>,
    plant_layout: StateLayout,
    obs_r: ObserverModel<f64>,
    obs_p: ObserverModel<f64>,
    items: Vec<EstimatedConductance>,
    gains: ObserverGains<f64>,
    kappa: f64,
    beta: f64,
    n_w: usize,
    scratch: RefCell<ClosedLoopScratch>,
}

impl ClosedLoop {
    fn v_plant_index(&self) -> usize {
        1 + self.n_w
    }

    fn obs_r_range(&self) -> Range<usize> {
        let start = 2 + 2 * self.n_w;
        start..start + self.obs_r.dim()
    }

    fn obs_p_range(&self) -> Range<usize> {
        let start = self.obs_r_range().end;
        start..start + self.obs_p.dim()
    }

    /// The full plant input for a composite state: synthesized conductance
    /// currents plus output feedback plus the reference feedforward.
    fn plant_input(&self, x: &[f64], u_r: f64, phi: &mut [f64]) -> f64 {
        let v_r = x[0];
        let v_p = x[self.v_plant_index()];
        let xr = &x[self.obs_r_range()];
        let xp = &x[self.obs_p_range()];
        current_regressor_row(
            &self.plant_net,
            &self.plant_layout,
            0,
            &self.items,
            v_p,
            self.obs_p.w_hat(xp),
            phi,
        );
        tracking_control(
            phi,
            self.obs_r.theta(xr),
            self.obs_p.theta(xp),
            self.kappa,
            v_r,
            v_p,
            u_r,
            self.beta,
        )
    }
}

impl System<f64> for ClosedLoop {
    fn dim(&self) -> usize {
        2 + 2 * self.n_w + self.obs_r.dim() + self.obs_p.dim()
    }

    fn n_inputs(&self) -> usize {
        1
    }

    fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
        let u_r = u[0];
        let pv = self.v_plant_index();
        let or_ = self.obs_r_range();
        let op = self.obs_p_range();

        let mut scr = self.scratch.borrow_mut();
        let scr = &mut *scr;
        let u_plant = self.plant_input(x, u_r, &mut scr.phi);

        // Reference neuron.
        voltage_derivative(
            &self.ref_net,
            &self.ref_layout,
            &x[0..1],
            &x[1..pv],
            &[u_r],
            &mut dx[0..1],
        );
        internal_derivative(
            &self.ref_net,
            &self.ref_layout,
            &x[0..1],
            &x[1..pv],
            &mut dx[1..pv],
        );

        // Controlled plant.
        voltage_derivative(
            &self.plant_net,
            &self.plant_layout,
            &x[pv..pv + 1],
            &x[pv + 1..or_.start],
            &[u_plant],
            &mut dx[pv..pv + 1],
        );
        internal_derivative(
            &self.plant_net,
            &self.plant_layout,
            &x[pv..pv + 1],
            &x[pv + 1..or_.start],
            &mut dx[pv + 1..or_.start],
        );

        // Reference observer: sees the reference voltage and feedforward.
        self.obs_r.derivative(
            &self.gains,
            &x[0..1],
            &[u_r],
            &x[or_.clone()],
            &mut dx[or_],
            &mut scr.obs_r,
        );

        // Plant observer: sees the plant voltage and the full applied input.
        self.obs_p.derivative(
            &self.gains,
            &x[pv..pv + 1],
            &[u_plant],
            &x[op.clone()],
            &mut dx[op],
            &mut scr.obs_p,
        );
    }

    fn post_step(&self, _t: f64, x: &mut [f64]) -> Result<()> {
        let or_ = self.obs_r_range();
        let op = self.obs_p_range();
        self.obs_r.symmetrize_covariance(&mut x[or_]);
        self.obs_p.symmetrize_covariance(&mut x[op]);
        Ok(())
    }

    fn check_recorded(&self, t: f64, x: &[f64]) -> Result<()> {
        self.obs_r.check_covariance(t, &x[self.obs_r_range()])?;
        self.obs_p.check_covariance(t, &x[self.obs_p_range()])?;
        Ok(())
    }
}

/// Runs the reference-tracking experiment.
pub fn run_tracking(cfg: &TrackingConfig) -> Result<TrackingReport> {
    if cfg.t_horizon <= 0.0 {
        return Err(Error::config("tracking horizon must be positive"));
    }
    if cfg.beta <= 0.0 || cfg.gamma <= 0.0 || cfg.alpha < 0.0 {
        return Err(Error::config(
            "tracking needs beta > 0, gamma > 0, alpha >= 0",
        ));
    }

    let ref_net = single_neuron_network(bursting_neuron(&cfg.mu_r));
    let plant_net = single_neuron_network(bursting_neuron(&cfg.mu_plant));
    let ref_layout = StateLayout::new(&ref_net);
    let plant_layout = StateLayout::new(&plant_net);
    let n_w = ref_layout.n_w();
    let gains = ObserverGains {
        gamma: cfg.gamma,
        alpha: cfg.alpha,
    };

    let obs_r = ObserverModel::full(ref_net.clone(), Parametrisation::full(&ref_net))?;
    let obs_p = ObserverModel::full(plant_net.clone(), Parametrisation::full(&plant_net))?;
    let theta_names = obs_r.theta_names();
    let n_theta = obs_r.n_theta();

    // Column set shared by both segments. Before the observers start, the
    // estimate columns hold their initial values (zero) and the voltage
    // estimates mirror the measurements.
    let mut names: Vec<String> = ["v_r", "v", "u", "v_hat_r", "v_hat"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend(theta_names.iter().map(|n| format!("ref.{n}")));
    names.extend(theta_names.iter().map(|n| format!("plant.{n}")));

    // --- Segment 1: pre-roll, no observers. ---
    let open = OpenLoop {
        ref_net: ref_net.clone(),
        ref_layout: ref_layout.clone(),
        plant_net: plant_net.clone(),
        plant_layout: plant_layout.clone(),
        n_w,
    };
    let pv = open.v_plant_index();
    let mut x0 = vec![REST_VOLTAGE];
    x0.extend(steady_internal_state(&ref_net, &ref_layout, &[REST_VOLTAGE]));
    x0.push(REST_VOLTAGE);
    x0.extend(steady_internal_state(
        &plant_net,
        &plant_layout,
        &[REST_VOLTAGE],
    ));

    let mut trajectory = Trajectory::default();
    let mut checks = Vec::new();

    if cfg.t_pre > 0.0 {
        let sim_cfg = SimConfig {
            dt: cfg.dt,
            t_start: -cfg.t_pre,
            t_end: 0.0,
            record_stride: cfg.record_stride,
        };
        let inputs = InputSet {
            channels: vec![
                PiecewiseInput::constant(-cfg.t_pre, cfg.u_r),
                PiecewiseInput::constant(-cfg.t_pre, 0.0),
            ],
        };
        let pad = vec![0.0; 2 * n_theta];
        let mut rec = Recorder::new(names.clone(), |_t, x: &[f64], u: &[f64], out| {
            out.push(x[0]);
            out.push(x[pv]);
            out.push(u[1]);
            out.push(x[0]);
            out.push(x[pv]);
            out.extend_from_slice(&pad);
        });
        let (seg, x_end) = simulate_tracked(&open, &sim_cfg, &inputs, &x0, &mut rec)?;
        if cfg.check_numerics {
            let cols = [seg.column("v_r").unwrap(), seg.column("v").unwrap()];
            let r = halvedstep_check_against(
                &open,
                &sim_cfg,
                &inputs,
                &x0,
                &[0, pv],
                transient_mask(),
                &cols,
            )?;
            checks.push(SegmentCheck::from_report("pre_roll", &r));
        }
        concat_segments(&mut trajectory, &seg);
        x0 = x_end;
    }

    // --- Segment 2: observers and controller on. ---
    let scratch = ClosedLoopScratch {
        obs_r: ObserverScratch::new(&obs_r),
        obs_p: ObserverScratch::new(&obs_p),
        phi: vec![0.0; n_theta],
    };
    let mut obs_r_state = obs_r.initial_state(&x0[0..1]);
    let mut obs_p_state = obs_p.initial_state(&x0[pv..pv + 1]);
    if cfg.preset_estimates {
        let th_r = Parametrisation::full(&ref_net).theta_true(&ref_net);
        let th_p = Parametrisation::full(&plant_net).theta_true(&plant_net);
        obs_r_state[obs_r.theta_range()].copy_from_slice(&th_r);
        obs_p_state[obs_p.theta_range()].copy_from_slice(&th_p);
    }

    let closed = ClosedLoop {
        ref_net: ref_net.clone(),
        ref_layout,
        plant_net: plant_net.clone(),
        plant_layout,
        obs_r,
        obs_p,
        items: Parametrisation::full(&plant_net).per_neuron[0].clone(),
        gains,
        kappa: cfg.kappa,
        beta: cfg.beta,
        n_w,
        scratch: RefCell::new(scratch),
    };

    let mut x1 = Vec::with_capacity(closed.dim());
    x1.extend_from_slice(&x0);
    x1.extend_from_slice(&obs_r_state);
    x1.extend_from_slice(&obs_p_state);

    let sim_cfg = SimConfig {
        dt: cfg.dt,
        t_start: 0.0,
        t_end: cfg.t_horizon,
        record_stride: cfg.record_stride,
    };
    let inputs = InputSet {
        channels: vec![PiecewiseInput::constant(0.0, cfg.u_r)],
    };
    {
        let closed_ref = &closed;
        let or_ = closed.obs_r_range();
        let op = closed.obs_p_range();
        let mut phi = vec![0.0; n_theta];
        let mut rec = Recorder::new(names.clone(), move |_t, x: &[f64], u: &[f64], out| {
            let u_plant = closed_ref.plant_input(x, u[0], &mut phi);
            out.push(x[0]);
            out.push(x[closed_ref.v_plant_index()]);
            out.push(u_plant);
            let xr = &x[or_.clone()];
            let xp = &x[op.clone()];
            out.push(closed_ref.obs_r.v_hat(xr)[0]);
            out.push(closed_ref.obs_p.v_hat(xp)[0]);
            out.extend_from_slice(closed_ref.obs_r.theta(xr));
            out.extend_from_slice(closed_ref.obs_p.theta(xp));
        });
        let (seg, _) = simulate_tracked(&closed, &sim_cfg, &inputs, &x1, &mut rec)?;
        if cfg.check_numerics {
            let cols = [seg.column("v_r").unwrap(), seg.column("v").unwrap()];
            let r = halvedstep_check_against(
                &closed,
                &sim_cfg,
                &inputs,
                &x1,
                &[0, closed.v_plant_index()],
                transient_mask(),
                &cols,
            )?;
            checks.push(SegmentCheck::from_report("closed_loop", &r));
        }
        concat_segments(&mut trajectory, &seg);
    }

    // --- Metrics. ---
    let mut phases = Vec::new();
    if cfg.t_pre > 0.0 {
        phases.push(PhaseSpan::new("pre_roll", -cfg.t_pre, 0.0));
    }
    phases.push(PhaseSpan::new("closed_loop", 0.0, cfg.t_horizon));
    let closed_phase = phases.last().unwrap().clone();
    let trailing = closed_phase.trailing_start(TRAILING_FRACTION);

    let times = trajectory.times();
    let v_r = trajectory.column("v_r").unwrap();
    let v_p = trajectory.column("v").unwrap();
    let tracking_rms_trailing = rms_from(times, v_r, v_p, trailing);
    let tracking_max_trailing = max_abs_diff_from(times, v_r, v_p, trailing);

    let th_r_cols: Vec<&[f64]> = theta_names
        .iter()
        .map(|n| trajectory.column(&format!("ref.{n}")).unwrap())
        .collect();
    let th_p_cols: Vec<&[f64]> = theta_names
        .iter()
        .map(|n| trajectory.column(&format!("plant.{n}")).unwrap())
        .collect();

    // Realized effective conductances vs. the reference estimate, over the
    // trailing window.
    let theta_plant_target = Parametrisation::full(&plant_net).theta_true(&plant_net);
    let lo = times.partition_point(|&t| t < trailing);
    let mut effective_theta_err_trailing_max = 0.0f64;
    let mut diff = vec![0.0; n_theta];
    let mut th_r = vec![0.0; n_theta];
    for k in lo..times.len() {
        for j in 0..n_theta {
            th_r[j] = th_r_cols[j][k];
            let effective =
                theta_plant_target[j] + rectify(th_r[j]) - saturate(th_p_cols[j][k], cfg.beta);
            diff[j] = effective - th_r[j];
        }
        let denom = norm(&th_r);
        if denom > 0.0 {
            effective_theta_err_trailing_max =
                effective_theta_err_trailing_max.max(norm(&diff) / denom);
        }
    }

    let theta_r_final: Vec<f64> = th_r_cols.iter().map(|c| *c.last().unwrap()).collect();
    let theta_plant_final: Vec<f64> = th_p_cols.iter().map(|c| *c.last().unwrap()).collect();

    let reference_bursts = BurstSummary::from_phase(
        times,
        v_r,
        &closed_phase,
        DEFAULT_SPIKE_THRESHOLD,
        DEFAULT_MAX_INTRABURST_GAP,
    )
    .ok();
    let plant_bursts = BurstSummary::from_phase(
        times,
        v_p,
        &closed_phase,
        DEFAULT_SPIKE_THRESHOLD,
        DEFAULT_MAX_INTRABURST_GAP,
    )
    .ok();

    let assumptions = vec![
        Assumption::new("dt_ms", cfg.dt),
        Assumption::new("record_stride", cfg.record_stride),
        Assumption::new("initial_covariance", "identity"),
        Assumption::new("beta", cfg.beta),
        Assumption::new("kappa", cfg.kappa),
        Assumption::new("gamma", cfg.gamma),
        Assumption::new("alpha", cfg.alpha),
        Assumption::new("pre_roll_ms", cfg.t_pre),
        Assumption::new("horizon_ms", cfg.t_horizon),
        Assumption::new("rest_voltage_mv", REST_VOLTAGE),
        Assumption::new("trailing_fraction", TRAILING_FRACTION),
        Assumption::new("spike_threshold_mv", DEFAULT_SPIKE_THRESHOLD),
        Assumption::new("max_intraburst_gap_ms", DEFAULT_MAX_INTRABURST_GAP),
        Assumption::new(
            "plant_observer_input",
            "full applied input including control",
        ),
    ];

    Ok(TrackingReport {
        assumptions,
        phases,
        metrics: TrackingMetrics {
            tracking_rms_trailing,
            tracking_max_trailing,
            effective_theta_err_trailing_max,
            theta_names,
            theta_r_target: cfg.mu_r.as_array().to_vec(),
            theta_r_final,
            theta_plant_target,
            theta_plant_final,
            reference_bursts,
            plant_bursts,
        },
        checks,
        trajectory,
    })
}
