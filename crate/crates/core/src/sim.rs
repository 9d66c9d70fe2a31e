//! Fixed-step integration, inputs, and recording.
//!
//! The integrator is the classical fourth-order Runge–Kutta scheme on a
//! uniform grid `t_k = t_start + k * dt`. Grid times are always computed from
//! the integer step index, never by accumulating `dt`, so recorded times are
//! exact and reruns are bit-identical.
//!
//! External inputs are piecewise-constant signals whose breakpoints must lie
//! on the step grid; each input is sampled once at the start of a step and
//! held for all four stages. That convention keeps the integrator's classical
//! order on every interval between breakpoints (the right-hand side never
//! changes discontinuously inside a step) and gives closed-loop experiments a
//! well-defined meaning for "the controller switches on at time t".
//!
//! Any non-finite stage derivative or state component aborts integration with
//! a divergence error naming the time and component: output never contains
//! NaN or infinity rows.

use crate::error::{Error, Result};
use crate::num::Real;

/// Default integration step (ms).
///
/// Chosen by a step-halving study on the stock bursting neurons: at 2 µs the
/// classical Runge–Kutta step keeps the slow-manifold voltage deviation
/// against a halved-step rerun below a millivolt's thousandth part over a
/// ten-second horizon, with burst counts, spike counts, and burst periods
/// already identical from 5 µs down. Cells producing very long spike trains
/// (a hundred-plus spikes per burst) decohere in spike phase over long
/// horizons and warrant 1 µs; the experiment configs that contain such cells
/// override this default.
pub const DEFAULT_DT: f64 = 0.002;

/// Integration window and recording cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<R> {
    /// Step size (ms).
    pub dt: R,
    /// Start time (ms); may be negative (pre-roll phases).
    pub t_start: R,
    /// End time (ms). `t_end - t_start` must be a whole number of steps.
    pub t_end: R,
    /// Record every this many steps (1 = every step).
    pub record_stride: usize,
}

impl<R: Real> SimConfig<R> {
    /// Number of integration steps, validating the window.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt > R::zero()) || !self.dt.is_finite() {
            return Err(Error::config("dt must be positive and finite"));
        }
        if self.record_stride == 0 {
            return Err(Error::config("record_stride must be >= 1"));
        }
        let span = self.t_end - self.t_start;
        if span < R::zero() {
            return Err(Error::config("t_end must be >= t_start"));
        }
        let steps = (span / self.dt).round();
        let n = steps
            .to_f64()
            .filter(|s| s.is_finite() && *s >= 0.0 && *s < 9.0e15)
            .map(|s| s as usize)
            .ok_or_else(|| Error::config("horizon does not fit in a step count"))?;
        // The window must be a whole number of steps (to machine precision).
        let reconstructed = self.t_start + R::of_usize(n) * self.dt;
        let tol = self.dt * R::of(1e-9);
        if (reconstructed - self.t_end).abs() > tol {
            return Err(Error::config(
                "t_end - t_start is not a whole number of steps",
            ));
        }
        Ok(n)
    }

    /// Grid time of step `k`.
    #[inline]
    pub fn time_at(&self, k: usize) -> R {
        self.t_start + R::of_usize(k) * self.dt
    }
}

/// A piecewise-constant signal: holds `value` from each breakpoint time until
/// the next breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseInput<R> {
    breakpoints: Vec<(R, R)>,
}

impl<R: Real> PiecewiseInput<R> {
    /// Builds from `(time, value)` pairs; times must be strictly increasing.
    pub fn new(breakpoints: Vec<(R, R)>) -> Result<Self> {
        if breakpoints.is_empty() {
            return Err(Error::config("input needs at least one breakpoint"));
        }
        for pair in breakpoints.windows(2) {
            if !(pair[1].0 > pair[0].0) {
                return Err(Error::config(
                    "input breakpoint times must be strictly increasing",
                ));
            }
        }
        Ok(PiecewiseInput { breakpoints })
    }

    /// A signal that holds `value` from `t0` onward.
    pub fn constant(t0: R, value: R) -> Self {
        PiecewiseInput {
            breakpoints: vec![(t0, value)],
        }
    }

    /// The breakpoints.
    pub fn breakpoints(&self) -> &[(R, R)] {
        &self.breakpoints
    }

    /// Value at time `t` (the last breakpoint at or before `t`).
    /// Panics if `t` precedes the first breakpoint.
    pub fn value_at(&self, t: R) -> R {
        let pos = self.breakpoints.partition_point(|&(bt, _)| bt <= t);
        assert!(pos > 0, "input sampled before its first breakpoint");
        self.breakpoints[pos - 1].1
    }
}

/// The full set of input channels for a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InputSet<R> {
    pub channels: Vec<PiecewiseInput<R>>,
}

impl<R: Real> InputSet<R> {
    /// Checks that every breakpoint lies on the step grid and that no
    /// breakpoint precedes the window start.
    pub fn validate_on_grid(&self, cfg: &SimConfig<R>) -> Result<()> {
        let tol = cfg.dt * R::of(1e-9);
        for (c, input) in self.channels.iter().enumerate() {
            let (first, _) = input.breakpoints[0];
            if (first - cfg.t_start).abs() > tol {
                return Err(Error::config(format!(
                    "input {c}: first breakpoint must be at t_start"
                )));
            }
            for &(t, _) in input.breakpoints() {
                let k = ((t - cfg.t_start) / cfg.dt).round();
                if (cfg.t_start + k * cfg.dt - t).abs() > tol {
                    return Err(Error::config(format!(
                        "input {c}: breakpoint at t = {t} is off the step grid"
                    )));
                }
            }
        }
        Ok(())
    }

    fn sample(&self, t: R, u: &mut [R]) {
        debug_assert_eq!(u.len(), self.channels.len());
        for (slot, channel) in u.iter_mut().zip(&self.channels) {
            *slot = channel.value_at(t);
        }
    }
}

/// A dynamical system `dx/dt = f(t, x, u)` with piecewise-constant inputs.
pub trait System<R: Real> {
    /// State dimension.
    fn dim(&self) -> usize;
    /// Number of input channels.
    fn n_inputs(&self) -> usize;
    /// Writes the state derivative into `dx`.
    fn derivative(&self, t: R, x: &[R], u: &[R], dx: &mut [R]);
    /// Hook run once after each accepted step (e.g. re-symmetrizing a
    /// covariance block). Default: nothing.
    fn post_step(&self, _t: R, _x: &mut [R]) -> Result<()> {
        let _ = self;
        Ok(())
    }
    /// Consistency check run at every recorded step (e.g. positive
    /// definiteness of a covariance block). Default: nothing.
    fn check_recorded(&self, _t: R, _x: &[R]) -> Result<()> {
        let _ = self;
        Ok(())
    }
}

/// Scratch buffers for in-place Runge–Kutta steps.
#[derive(Debug)]
pub struct Rk4Scratch<R> {
    k1: Vec<R>,
    k2: Vec<R>,
    k3: Vec<R>,
    k4: Vec<R>,
    xtmp: Vec<R>,
}

impl<R: Real> Rk4Scratch<R> {
    /// Buffers for a state of dimension `dim`.
    pub fn new(dim: usize) -> Self {
        Rk4Scratch {
            k1: vec![R::zero(); dim],
            k2: vec![R::zero(); dim],
            k3: vec![R::zero(); dim],
            k4: vec![R::zero(); dim],
            xtmp: vec![R::zero(); dim],
        }
    }
}

/// One classical Runge–Kutta step in place. The derivative closure is called
/// with the same input-held `t`-dependence the caller provides; any
/// non-finite stage derivative or updated state component yields a
/// divergence error.
pub fn rk4_step_in_place<R: Real>(
    mut f: impl FnMut(R, &[R], &mut [R]),
    t: R,
    dt: R,
    x: &mut [R],
    scratch: &mut Rk4Scratch<R>,
) -> Result<()> {
    let dim = x.len();
    debug_assert_eq!(scratch.k1.len(), dim);
    let half = R::of(0.5);
    let sixth = R::of(1.0 / 6.0);
    let two = R::of(2.0);

    f(t, x, &mut scratch.k1);
    for i in 0..dim {
        scratch.xtmp[i] = x[i] + half * dt * scratch.k1[i];
    }
    f(t + half * dt, &scratch.xtmp, &mut scratch.k2);
    for i in 0..dim {
        scratch.xtmp[i] = x[i] + half * dt * scratch.k2[i];
    }
    f(t + half * dt, &scratch.xtmp, &mut scratch.k3);
    for i in 0..dim {
        scratch.xtmp[i] = x[i] + dt * scratch.k3[i];
    }
    f(t + dt, &scratch.xtmp, &mut scratch.k4);
    for i in 0..dim {
        let incr = scratch.k1[i] + two * (scratch.k2[i] + scratch.k3[i]) + scratch.k4[i];
        x[i] = x[i] + dt * sixth * incr;
        if !x[i].is_finite() {
            return Err(Error::Divergence {
                t: (t + dt).to_f64().unwrap_or(f64::NAN),
                component: i,
            });
        }
    }
    Ok(())
}

/// Single allocating Runge–Kutta step; convenience for tests and callers
/// outside the main loop.
pub fn rk4_step<R: Real>(
    f: impl FnMut(R, &[R], &mut [R]),
    x0: &[R],
    t: R,
    dt: R,
) -> Result<Vec<R>> {
    let mut x = x0.to_vec();
    let mut scratch = Rk4Scratch::new(x0.len());
    rk4_step_in_place(f, t, dt, &mut x, &mut scratch)?;
    Ok(x)
}

/// Named signals extracted from the trajectory while it is integrated.
///
/// The sampling closure receives `(t, x, u)` and pushes one value per name;
/// it may capture the system to compute derived signals such as individual
/// currents.
pub struct Recorder<'a, R> {
    names: Vec<String>,
    sample: Box<dyn FnMut(R, &[R], &[R], &mut Vec<R>) + 'a>,
}

impl<'a, R: Real> Recorder<'a, R> {
    /// A recorder with explicit signal names and sampling closure.
    pub fn new(
        names: Vec<String>,
        sample: impl FnMut(R, &[R], &[R], &mut Vec<R>) + 'a,
    ) -> Self {
        Recorder {
            names,
            sample: Box::new(sample),
        }
    }

    /// Records selected state components under the given names.
    pub fn state_components(names: Vec<String>, indices: Vec<usize>) -> Self {
        Recorder::new(names, move |_t, x, _u, out| {
            for &i in &indices {
                out.push(x[i]);
            }
        })
    }

    /// Records the full state vector as `x0..x{dim-1}`.
    pub fn full_state(dim: usize) -> Self {
        Recorder::state_components(
            (0..dim).map(|i| format!("x{i}")).collect(),
            (0..dim).collect(),
        )
    }
}

/// A recorded trajectory: a shared time grid plus named signal columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory<R> {
    names: Vec<String>,
    times: Vec<R>,
    columns: Vec<Vec<R>>,
}

impl<R: Real> Trajectory<R> {
    /// Signal names, in column order.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Recorded times.
    pub fn times(&self) -> &[R] {
        &self.times
    }

    /// Number of recorded samples.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    /// Whether nothing was recorded (possible only for an empty window with
    /// zero samples — a zero-length horizon still records its initial state).
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// All columns, in name order.
    pub fn columns(&self) -> &[Vec<R>] {
        &self.columns
    }

    /// Column by name.
    pub fn column(&self, name: &str) -> Option<&[R]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.columns[j].as_slice())
    }

    /// Drops the last recorded sample (used when abutting segments share a
    /// boundary sample).
    pub fn truncate_last(&mut self) {
        self.times.pop();
        for col in &mut self.columns {
            col.pop();
        }
    }

    /// Appends all samples of `other`, which must have identical columns.
    pub fn extend_from(&mut self, other: &Trajectory<R>) {
        assert_eq!(self.names, other.names, "column mismatch");
        self.times.extend_from_slice(&other.times);
        for (col, src) in self.columns.iter_mut().zip(&other.columns) {
            col.extend_from_slice(src);
        }
    }
}

/// Integrates `system` over the window in `cfg` from the initial state `x0`,
/// sampling `recorder` every `record_stride` steps (including step 0, and
/// the final step when the step count is a stride multiple).
pub fn simulate<R: Real, S: System<R>>(
    system: &S,
    cfg: &SimConfig<R>,
    inputs: &InputSet<R>,
    x0: &[R],
    recorder: &mut Recorder<'_, R>,
) -> Result<Trajectory<R>> {
    Ok(simulate_tracked(system, cfg, inputs, x0, recorder)?.0)
}

/// Like [`simulate`], but also returns the full state at the end of the
/// window, so a multi-segment experiment can hand one segment's final state
/// to the next without re-integrating or recording every component.
pub fn simulate_tracked<R: Real, S: System<R>>(
    system: &S,
    cfg: &SimConfig<R>,
    inputs: &InputSet<R>,
    x0: &[R],
    recorder: &mut Recorder<'_, R>,
) -> Result<(Trajectory<R>, Vec<R>)> {
    let n_steps = cfg.n_steps()?;
    inputs.validate_on_grid(cfg)?;
    if x0.len() != system.dim() {
        return Err(Error::config(format!(
            "initial state has {} components, system has {}",
            x0.len(),
            system.dim()
        )));
    }
    if inputs.channels.len() != system.n_inputs() {
        return Err(Error::config(format!(
            "{} input channels supplied, system expects {}",
            inputs.channels.len(),
            system.n_inputs()
        )));
    }

    let n_cols = recorder.names.len();
    let mut times = Vec::new();
    let mut columns: Vec<Vec<R>> = vec![Vec::new(); n_cols];
    let mut row: Vec<R> = Vec::with_capacity(n_cols);

    let mut x = x0.to_vec();
    let mut u = vec![R::zero(); inputs.channels.len()];
    let mut scratch = Rk4Scratch::new(x.len());

    for k in 0..=n_steps {
        let t = cfg.time_at(k);
        inputs.sample(t, &mut u);
        if k % cfg.record_stride == 0 {
            system.check_recorded(t, &x)?;
            row.clear();
            (recorder.sample)(t, &x, &u, &mut row);
            debug_assert_eq!(row.len(), n_cols, "recorder row width drifted");
            for (j, &value) in row.iter().enumerate() {
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        t: t.to_f64().unwrap_or(f64::NAN),
                        component: j,
                    });
                }
                columns[j].push(value);
            }
            times.push(t);
        }
        if k == n_steps {
            break;
        }
        // Inputs sampled at the step start are held for all four stages.
        rk4_step_in_place(
            |ts, xs, dxs| system.derivative(ts, xs, &u, dxs),
            t,
            cfg.dt,
            &mut x,
            &mut scratch,
        )?;
        system.post_step(cfg.time_at(k + 1), &mut x)?;
    }

    Ok((
        Trajectory {
            names: recorder.names.clone(),
            times,
            columns,
        },
        x,
    ))
}

/// Result of a step-halving accuracy check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCheckReport<R> {
    /// Largest deviation between the two runs over compared samples, after
    /// masking samples near steep transients.
    pub max_deviation: R,
    /// Largest deviation with no masking.
    pub max_deviation_unmasked: R,
    /// Number of compared samples per component.
    pub n_samples: usize,
    /// Number of samples masked by the slope criterion (summed over
    /// components).
    pub n_masked: usize,
    /// Recording time of the unmasked sample attaining `max_deviation`,
    /// if any sample survived the mask.
    pub worst_time: Option<R>,
    /// Index into the compared components of that worst sample.
    pub worst_component: Option<usize>,
}

/// Exclusion rule for fast transients in [`halvedstep_check`].
///
/// A sample is masked when the local slope of the compared component exceeds
/// `threshold` in *either* run, or lies within `halfwidth` time units of such
/// a sample. The dilation matters because the pointwise error near a spike is
/// dominated by a tiny timing shift between the two runs: the steep upstroke
/// itself crosses any slope threshold, but the downstroke and the walls of
/// the following trough are timing-slaved to it and carry the same shift, so
/// a neighborhood of the fast samples is the honest exclusion zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeMask<R> {
    /// Absolute slope above which a sample counts as a fast transient.
    pub threshold: R,
    /// Half-width, in time units, of the masked neighborhood around each
    /// fast sample. Zero masks only the fast samples themselves.
    pub halfwidth: R,
}

impl<R: Real> SlopeMask<R> {
    /// A mask with the given slope threshold and dilation half-width.
    pub fn new(threshold: R, halfwidth: R) -> Self {
        Self {
            threshold,
            halfwidth,
        }
    }
}

/// Reruns the simulation with a halved step and reports the deviation of the
/// selected state components at the shared recording times.
///
/// Samples inside fast transients — where the local slope (estimated from
/// adjacent recorded samples of either run) exceeds `mask.threshold`, dilated
/// by `mask.halfwidth` time units — are excluded from `max_deviation`: around
/// a spike a time shift of a fraction of a step produces a large pointwise
/// voltage difference that says nothing about trajectory accuracy. The
/// unmasked maximum is reported alongside for diagnostics.
pub fn halvedstep_check<R: Real, S: System<R>>(
    system: &S,
    cfg: &SimConfig<R>,
    inputs: &InputSet<R>,
    x0: &[R],
    components: &[usize],
    mask: SlopeMask<R>,
) -> Result<StepCheckReport<R>> {
    let names = (0..components.len()).map(|j| format!("c{j}")).collect();
    let mut coarse_rec = Recorder::state_components(names, components.to_vec());
    let coarse = simulate(system, cfg, inputs, x0, &mut coarse_rec)?;
    let coarse_cols: Vec<&[R]> = coarse.columns().iter().map(|c| c.as_slice()).collect();
    halvedstep_check_against(system, cfg, inputs, x0, components, mask, &coarse_cols)
}

/// Like [`halvedstep_check`], but compares against already-recorded columns
/// of the coarse run instead of re-simulating it.
///
/// `coarse_columns[j]` must hold the recorded samples of state component
/// `components[j]` from a run of `system` under exactly `cfg` and `inputs`
/// from `x0` — typically columns of the production trajectory, which makes
/// the check certify the very run being reported, at two thirds of the cost.
pub fn halvedstep_check_against<R: Real, S: System<R>>(
    system: &S,
    cfg: &SimConfig<R>,
    inputs: &InputSet<R>,
    x0: &[R],
    components: &[usize],
    mask: SlopeMask<R>,
    coarse_columns: &[&[R]],
) -> Result<StepCheckReport<R>> {
    assert_eq!(
        coarse_columns.len(),
        components.len(),
        "one coarse column per compared component"
    );
    let half = SimConfig {
        dt: cfg.dt * R::of(0.5),
        t_start: cfg.t_start,
        t_end: cfg.t_end,
        record_stride: cfg.record_stride * 2,
    };
    let names = (0..components.len()).map(|j| format!("c{j}")).collect();
    let mut fine_rec = Recorder::state_components(names, components.to_vec());
    let fine = simulate(system, &half, inputs, x0, &mut fine_rec)?;

    let n = fine.len();
    if coarse_columns.iter().any(|c| c.len() != n) {
        return Err(Error::config(
            "step-halving produced mismatched sample counts",
        ));
    }
    let sample_dt = cfg.dt * R::of_usize(cfg.record_stride);
    let dilation = (mask.halfwidth / sample_dt).ceil().to_usize().unwrap_or(0);
    let mut max_masked = R::zero();
    let mut max_unmasked = R::zero();
    let mut n_masked = 0usize;
    let mut worst: Option<(usize, usize)> = None;
    // Prefix counts of fast samples, so the dilated mask query for sample k
    // ("any fast sample within `dilation` indices?") is O(1).
    let mut fast_prefix = vec![0usize; n + 1];
    for j in 0..components.len() {
        let a = coarse_columns[j];
        let b = &fine.columns()[j];
        let fast = |col: &[R], k: usize| -> bool {
            let before = if k > 0 {
                (col[k] - col[k - 1]).abs() / sample_dt
            } else {
                R::zero()
            };
            let after = if k + 1 < n {
                (col[k + 1] - col[k]).abs() / sample_dt
            } else {
                R::zero()
            };
            before.max(after) > mask.threshold
        };
        for k in 0..n {
            let hit = fast(a, k) || fast(b, k);
            fast_prefix[k + 1] = fast_prefix[k] + usize::from(hit);
        }
        for k in 0..n {
            let dev = (a[k] - b[k]).abs();
            max_unmasked = max_unmasked.max(dev);
            let lo = k.saturating_sub(dilation);
            let hi = (k + dilation + 1).min(n);
            if fast_prefix[hi] > fast_prefix[lo] {
                n_masked += 1;
            } else if dev > max_masked {
                max_masked = dev;
                worst = Some((j, k));
            }
        }
    }
    Ok(StepCheckReport {
        max_deviation: max_masked,
        max_deviation_unmasked: max_unmasked,
        n_samples: n,
        n_masked,
        worst_time: worst.map(|(_, k)| fine.times()[k]),
        worst_component: worst.map(|(j, _)| j),
    })
}
