//! Closed-loop experiments: reference tracking, synaptic disturbance
//! rejection, and disturbance rejection at the hub of a five-neuron
//! network.
//!
//! Each experiment integrates a plant together with adaptive observers and
//! a controller, in consecutive time segments. Components that switch on
//! mid-run (observers, controllers, introduced synapses) are not simulated
//! before their activation time: each segment integrates exactly the
//! components that exist during it, and the next segment's initial state
//! extends the previous segment's final state with freshly initialized
//! components. Within a segment the vector field is smooth except at
//! piecewise-constant input breakpoints, which sit on the integration grid.
//!
//! Experiments run at fixed double precision; the generic-scalar core is
//! exercised through the systems they build.

pub mod metrics;
mod network;
mod rejection;
mod tracking;

pub use metrics::{
    burst_overlap_fraction, Burst, BurstMetrics, DEFAULT_MAX_INTRABURST_GAP,
    DEFAULT_SPIKE_THRESHOLD,
};
pub use network::{run_network, InputTransient, NetworkConfig, NetworkMetrics, NetworkReport};
pub use rejection::{run_rejection, RejectionConfig, RejectionMetrics, RejectionReport};
pub use tracking::{run_tracking, TrackingConfig, TrackingMetrics, TrackingReport};

use crate::error::{Error, Result};
use crate::sim::{SlopeMask, StepCheckReport, Trajectory};
use serde::{Deserialize, Serialize};

/// One named, assumption-bearing default echoed into every report header,
/// so a report is interpretable without the code that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assumption {
    pub name: String,
    pub value: String,
}

impl Assumption {
    pub fn new(name: &str, value: impl std::fmt::Display) -> Self {
        Assumption {
            name: name.to_string(),
            value: value.to_string(),
        }
    }
}

/// A named, half-open-by-convention time span `[start, end]` of an
/// experiment. Phases exactly tile the experiment horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpan {
    pub name: String,
    /// Phase start (ms).
    pub start: f64,
    /// Phase end (ms).
    pub end: f64,
}

impl PhaseSpan {
    pub fn new(name: &str, start: f64, end: f64) -> Self {
        PhaseSpan {
            name: name.to_string(),
            start,
            end,
        }
    }

    /// Start of the trailing `fraction` of the phase, the window used for
    /// steady-state metrics.
    pub fn trailing_start(&self, fraction: f64) -> f64 {
        self.end - (self.end - self.start) * fraction
    }
}

/// Fraction of each phase used for steady-state (converged) metrics.
pub const TRAILING_FRACTION: f64 = 0.2;

/// Burst statistics of one phase of one voltage trace, with burst-edge
/// effects removed (bursts touching the phase boundaries are dropped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BurstSummary {
    pub phase: String,
    pub n_bursts: usize,
    pub n_spikes: usize,
    /// Mean interval between burst starts (ms).
    pub period: f64,
    /// Largest relative deviation of the last three bursts' start
    /// intervals from their mean.
    pub period_stability_last3: Option<f64>,
    pub mean_spikes_per_burst: f64,
    /// Mean first-to-last-spike burst length (ms).
    pub mean_burst_length: f64,
    /// Coefficient of variation of burst lengths.
    pub length_cv: f64,
    /// Largest relative deviation of any burst length from the mean.
    pub length_spread: f64,
    pub duty_cycle: f64,
}

impl BurstSummary {
    /// Summarizes one phase of a trace; the phase must contain at least two
    /// interior bursts.
    pub fn from_phase(
        times: &[f64],
        v: &[f64],
        phase: &PhaseSpan,
        threshold: f64,
        max_gap: f64,
    ) -> Result<Self> {
        let m = BurstMetrics::detect_windowed(times, v, threshold, max_gap, phase.start, phase.end);
        let lengths = m.burst_lengths();
        let mean_len = if lengths.is_empty() {
            0.0
        } else {
            lengths.iter().sum::<f64>() / lengths.len() as f64
        };
        let length_spread = if mean_len > 0.0 {
            lengths
                .iter()
                .map(|&l| ((l - mean_len) / mean_len).abs())
                .fold(0.0, f64::max)
        } else {
            0.0
        };
        Ok(BurstSummary {
            phase: phase.name.clone(),
            n_bursts: m.n_bursts(),
            n_spikes: m.spikes.len(),
            period: m.period().map_err(|e| {
                Error::InsufficientData(format!("phase {}: {e}", phase.name))
            })?,
            period_stability_last3: m.period_stability(3).ok(),
            mean_spikes_per_burst: m.mean_spikes_per_burst()?,
            mean_burst_length: mean_len,
            length_cv: m.length_cv()?,
            length_spread,
            duty_cycle: m.duty_cycle()?,
        })
    }
}

/// Step-halving error estimate for one integration segment of an
/// experiment (recorded voltages only, spike upstrokes masked).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCheck {
    pub segment: String,
    /// Largest deviation between the run and a halved-step rerun, away
    /// from spike upstrokes (mV).
    pub max_deviation: f64,
    /// Largest deviation including upstroke samples (mV).
    pub max_deviation_unmasked: f64,
    pub n_samples: usize,
    pub n_masked: usize,
    /// Recording time (ms) of the worst unmasked sample, if any.
    pub worst_time: Option<f64>,
    /// Compared-component index of the worst unmasked sample, if any.
    pub worst_component: Option<usize>,
}

impl SegmentCheck {
    pub fn from_report(segment: &str, r: &StepCheckReport<f64>) -> Self {
        SegmentCheck {
            segment: segment.to_string(),
            max_deviation: r.max_deviation,
            max_deviation_unmasked: r.max_deviation_unmasked,
            n_samples: r.n_samples,
            n_masked: r.n_masked,
            worst_time: r.worst_time,
            worst_component: r.worst_component,
        }
    }
}

/// Voltage slope (mV/ms) above which a sample counts as a fast transient —
/// a spike upstroke or any stretch slaved to one — and is masked from
/// step-halving deviation checks.
///
/// Frozen from a convergence study of the step-halving deviation across the
/// experiment repertoire. On every stretch steeper than a few mV/ms the
/// pointwise difference between a run and its halved-step rerun is dominated
/// by a sub-step *timing* shift, not a level error: long spike trains
/// amplify roundoff-scale perturbations into a phase drift that floors near
/// 0.1–0.2 ms regardless of step size, and any sample on a slope `s` then
/// deviates by roughly `drift × s` however accurate the integration is.
/// Spike upstrokes (hundreds of mV/ms) are the extreme case, but downstrokes,
/// burst-envelope edges, and the steep hyperpolarization driven by a bursting
/// presynaptic cell (≈ 9.5 mV/ms here) are slaved to the same timing. The
/// threshold is set so that timing-induced deviation at the steepest unmasked
/// sample stays well under the accuracy bound, while level errors on slow
/// stretches — plateaus, troughs, interburst crawls, equilibria — pass
/// through unmasked and are certified pointwise.
pub const FAST_TRANSIENT_SLOPE: f64 = 2.5;

/// Half-width (ms) of the masked neighborhood around each fast sample in
/// step-halving deviation checks. Inside a dense spike train every sample —
/// downstroke, after-spike trough, and the recovery ramp toward the next
/// spike — is phase-slaved to the neighboring upstrokes, so the window must
/// span the shortest interspike interval that occurs in practice. The fastest
/// cell exercised here (the strong-burster disturbance neuron) fires with
/// ~18 ms intra-burst intervals; ten milliseconds on each side closes the
/// gap between consecutive spikes' windows with margin. The slow interburst
/// trajectory, which carries the burst-pattern claims, is never masked, and
/// burst-envelope divergence beyond the window still registers because the
/// mask is shared between the two runs.
pub const TRANSIENT_MASK_HALFWIDTH: f64 = 10.0;

/// The fast-transient exclusion rule shared by all experiment step checks.
pub fn transient_mask() -> SlopeMask<f64> {
    SlopeMask::new(FAST_TRANSIENT_SLOPE, TRANSIENT_MASK_HALFWIDTH)
}

/// Appends segment `b` to trajectory `a`.
///
/// Both must share column names; `b`'s first sample must coincide in time
/// with `a`'s last (the segment boundary is recorded once, with the
/// *later* segment's values — components re-initialized at the boundary
/// appear with their fresh values).
pub(crate) fn concat_segments(a: &mut Trajectory<f64>, b: &Trajectory<f64>) {
    if a.names().is_empty() || a.is_empty() {
        *a = b.clone();
        return;
    }
    assert_eq!(a.names(), b.names(), "segment columns must match");
    if b.is_empty() {
        return;
    }
    assert!(
        (a.times().last().unwrap() - b.times().first().unwrap()).abs() < 1e-9,
        "segments must abut in time"
    );
    a.truncate_last();
    a.extend_from(b);
}

/// Root-mean-square of `|x - y|` over samples with `times[k] >= t0`.
pub(crate) fn rms_from(times: &[f64], x: &[f64], y: &[f64], t0: f64) -> f64 {
    let lo = times.partition_point(|&t| t < t0);
    let n = times.len() - lo;
    assert!(n > 0, "empty RMS window");
    let sum: f64 = (lo..times.len()).map(|k| (x[k] - y[k]) * (x[k] - y[k])).sum();
    (sum / n as f64).sqrt()
}

/// Largest `|x - y|` over samples with `times[k] >= t0`.
pub(crate) fn max_abs_diff_from(times: &[f64], x: &[f64], y: &[f64], t0: f64) -> f64 {
    let lo = times.partition_point(|&t| t < t0);
    assert!(lo < times.len(), "empty max window");
    (lo..times.len())
        .map(|k| (x[k] - y[k]).abs())
        .fold(0.0, f64::max)
}

/// Largest `|x|` over samples with `t0 <= times[k] < t1`.
pub(crate) fn max_abs_in(times: &[f64], x: &[f64], t0: f64, t1: f64) -> f64 {
    let lo = times.partition_point(|&t| t < t0);
    let hi = times.partition_point(|&t| t < t1);
    assert!(lo < hi, "empty max window");
    x[lo..hi].iter().fold(0.0, |a, &b| a.max(b.abs()))
}

/// Euclidean norm.
pub(crate) fn norm(xs: &[f64]) -> f64 {
    xs.iter().map(|&x| x * x).sum::<f64>().sqrt()
}
