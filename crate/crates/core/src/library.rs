//! Ready-made neurons, synapses, and networks.
//!
//! The building blocks here carry the standard constants: the shared
//! reversal-potential table and capacitance, the eight-current bursting
//! neuron
//!
//! ```text
//! c dv/dt = - mu_na  m_na^3 h_na (v - E_na)   - mu_h   m_h        (v - E_h)
//!           - mu_t   m_t^2 h_t   (v - E_ca)   - mu_a   m_a^4 h_a  (v - E_k)
//!           - mu_k   m_k^4       (v - E_k)    - mu_l   m_l        (v - E_ca)
//!           - mu_kca (ca/(15+ca))^4 (v - E_k) - mu_kir sigma_kir(v) (v - E_k)
//!           - mu_leak (v - E_leak) + u
//! ```
//!
//! the two-current Hodgkin–Huxley neuron, the graded GABA synapse, and the
//! standard network motifs built from them (mutually inhibiting half-center
//! pair; the five-neuron hub network of the neuromodulation experiment).

use serde::{Deserialize, Serialize};

use crate::model::types::{
    ChannelSpec, CurrentLabel, GapJunctionSpec, GateKind, GateSpec, LeakSpec,
    NetworkSpec, NeuronChannel, NeuronSpec, Reversal, ReversalTable, SynapseSpec,
};
use crate::num::Real;
use crate::rates::{SteadyStateId, TimeConstantId};

/// Shared physical constants of the standard model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsTable<R> {
    pub reversals: ReversalTable<R>,
    /// Membrane capacitance shared by all standard neurons.
    pub capacitance: R,
}

/// The standard values: `E_na = 45`, `E_h = -43`, `E_ca = 120`,
/// `E_k = -90`, `E_leak = -55`, `E_syn = -90` (mV) and `c = 0.1`.
pub fn standard_constants<R: Real>() -> ConstantsTable<R> {
    ConstantsTable {
        reversals: ReversalTable {
            na: R::of(45.0),
            h: R::of(-43.0),
            ca: R::of(120.0),
            k: R::of(-90.0),
            leak: R::of(-55.0),
            syn: R::of(-90.0),
        },
        capacitance: R::of(0.1),
    }
}

/// Maximal conductances of the eight-current neuron plus leak, in the
/// canonical order `(na, h, t, a, k, l, k_ca, kir, leak)`. This matches the
/// parameter ordering of a full single-neuron estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductanceVector<R> {
    pub na: R,
    pub h: R,
    pub t: R,
    pub a: R,
    pub k: R,
    pub l: R,
    pub k_ca: R,
    pub kir: R,
    pub leak: R,
}

impl<R: Real> ConductanceVector<R> {
    /// The canonical array form `(na, h, t, a, k, l, k_ca, kir, leak)`.
    pub fn as_array(&self) -> [R; 9] {
        [
            self.na, self.h, self.t, self.a, self.k, self.l, self.k_ca, self.kir,
            self.leak,
        ]
    }

    /// Builds from the canonical array form.
    pub fn from_array(a: [R; 9]) -> Self {
        ConductanceVector {
            na: a[0],
            h: a[1],
            t: a[2],
            a: a[3],
            k: a[4],
            l: a[5],
            k_ca: a[6],
            kir: a[7],
            leak: a[8],
        }
    }

    /// Parameter names in canonical order.
    pub fn names() -> [&'static str; 9] {
        [
            "mu_na", "mu_h", "mu_t", "mu_a", "mu_k", "mu_l", "mu_k_ca", "mu_kir",
            "mu_leak",
        ]
    }
}

fn activation(ss: SteadyStateId, tc: TimeConstantId, exponent: u32) -> GateSpec {
    GateSpec {
        kind: GateKind::Activation,
        exponent,
        steady_state: Some(ss),
        time_constant: Some(tc),
    }
}

fn inactivation(ss: SteadyStateId, tc: TimeConstantId) -> GateSpec {
    GateSpec {
        kind: GateKind::Inactivation,
        exponent: 1,
        steady_state: Some(ss),
        time_constant: Some(tc),
    }
}

/// The eight-current bursting neuron with the given maximal conductances.
///
/// Channel order (which fixes state and parameter order): Na, H, T, A, K, L,
/// KCa, KIR, then leak. The KCa conductance follows the calcium pool through
/// the built-in Hill term; the KIR gate is an instantaneous function of
/// voltage.
pub fn bursting_neuron<R: Real>(mu: &ConductanceVector<R>) -> NeuronSpec<R> {
    use SteadyStateId as S;
    use TimeConstantId as T;
    let channel = |label, reversal, gates| ChannelSpec {
        label,
        reversal,
        gates,
    };
    NeuronSpec {
        capacitance: standard_constants::<R>().capacitance,
        channels: vec![
            NeuronChannel {
                mu: mu.na,
                channel: channel(
                    CurrentLabel::Na,
                    Reversal::Na,
                    vec![activation(S::MNa, T::MNa, 3), inactivation(S::HNa, T::HNa)],
                ),
            },
            NeuronChannel {
                mu: mu.h,
                channel: channel(
                    CurrentLabel::H,
                    Reversal::H,
                    vec![activation(S::MH, T::MH, 1)],
                ),
            },
            NeuronChannel {
                mu: mu.t,
                channel: channel(
                    CurrentLabel::T,
                    Reversal::Ca,
                    vec![activation(S::MT, T::MT, 2), inactivation(S::HT, T::HT)],
                ),
            },
            NeuronChannel {
                mu: mu.a,
                channel: channel(
                    CurrentLabel::A,
                    Reversal::K,
                    vec![activation(S::MA, T::MA, 4), inactivation(S::HA, T::HA)],
                ),
            },
            NeuronChannel {
                mu: mu.k,
                channel: channel(
                    CurrentLabel::K,
                    Reversal::K,
                    vec![activation(S::MK, T::MK, 4)],
                ),
            },
            NeuronChannel {
                mu: mu.l,
                channel: channel(
                    CurrentLabel::L,
                    Reversal::Ca,
                    vec![activation(S::ML, T::ML, 1)],
                ),
            },
            NeuronChannel {
                mu: mu.k_ca,
                channel: channel(
                    CurrentLabel::KCa,
                    Reversal::K,
                    vec![GateSpec {
                        kind: GateKind::CalciumDriven,
                        exponent: 4,
                        steady_state: None,
                        time_constant: None,
                    }],
                ),
            },
            NeuronChannel {
                mu: mu.kir,
                channel: channel(
                    CurrentLabel::Kir,
                    Reversal::K,
                    vec![GateSpec {
                        kind: GateKind::StaticVoltage,
                        exponent: 1,
                        steady_state: Some(S::MKir),
                        time_constant: None,
                    }],
                ),
            },
        ],
        leak: LeakSpec {
            mu: mu.leak,
            reversal: Reversal::Leak,
        },
    }
}

/// The two-current Hodgkin–Huxley neuron: transient sodium (`m^3 h`),
/// delayed-rectifier potassium (`m^4`), and leak.
pub fn hh_neuron<R: Real>(mu_na: R, mu_k: R, mu_leak: R) -> NeuronSpec<R> {
    use SteadyStateId as S;
    use TimeConstantId as T;
    NeuronSpec {
        capacitance: standard_constants::<R>().capacitance,
        channels: vec![
            NeuronChannel {
                mu: mu_na,
                channel: ChannelSpec {
                    label: CurrentLabel::Na,
                    reversal: Reversal::Na,
                    gates: vec![
                        activation(S::MNa, T::MNa, 3),
                        inactivation(S::HNa, T::HNa),
                    ],
                },
            },
            NeuronChannel {
                mu: mu_k,
                channel: ChannelSpec {
                    label: CurrentLabel::K,
                    reversal: Reversal::K,
                    gates: vec![activation(S::MK, T::MK, 4)],
                },
            },
        ],
        leak: LeakSpec {
            mu: mu_leak,
            reversal: Reversal::Leak,
        },
    }
}

/// A graded inhibitory GABA synapse:
/// `I = mu * s * (v_post + 90)` with
/// `ds/dt = 0.53 * sigma(v_pre) * (1 - s) - 0.18 * s` and
/// `sigma(v) = 1 / (1 + exp(-(v - 2)/5))`.
pub fn gaba_synapse<R: Real>(pre: usize, post: usize, mu: R) -> SynapseSpec<R> {
    SynapseSpec {
        pre,
        post,
        mu,
        reversal: standard_constants::<R>().reversals.syn,
        a1: R::of(0.53),
        a2: R::of(0.18),
        act_offset: R::of(2.0),
        act_slope: R::of(5.0),
    }
}

/// Wraps a single neuron into a network with the standard reversal table.
pub fn single_neuron_network<R: Real>(neuron: NeuronSpec<R>) -> NetworkSpec<R> {
    NetworkSpec {
        neurons: vec![neuron],
        synapses: Vec::new(),
        gaps: Vec::new(),
        reversals: standard_constants::<R>().reversals,
    }
}

/// A half-center oscillator: two identical bursting neurons coupled by
/// mutual GABA synapses of strength `mu_syn`.
pub fn half_center_oscillator<R: Real>(
    mu: &ConductanceVector<R>,
    mu_syn: R,
) -> NetworkSpec<R> {
    NetworkSpec {
        neurons: vec![bursting_neuron(mu), bursting_neuron(mu)],
        synapses: vec![gaba_synapse(0, 1, mu_syn), gaba_synapse(1, 0, mu_syn)],
        gaps: Vec::new(),
        reversals: standard_constants::<R>().reversals,
    }
}

/// The five-neuron hub network of the neuromodulation experiment.
///
/// Neurons 0–1 and 3–4 form two half-center pairs; neuron 2 is the hub,
/// inhibited by neuron 0 of the first pair and neuron 4 of the second, and
/// electrically coupled by gap junctions to the inner cell of each pair
/// (neurons 1 and 3). The hub is thus the only pathway between the pairs:
/// each pair reaches it through one synapse (from its outer cell) and one
/// gap junction (from its inner cell), and there is no direct connection
/// between the pairs. `mu_syn_hco` gives the mutual inhibition within pair
/// (0,1) and pair (3,4); `mu_syn_hub` the strengths of the synapses 0→2
/// and 4→2.
pub fn five_neuron_network<R: Real>(
    mu: &[ConductanceVector<R>; 5],
    mu_syn_hco: [R; 2],
    mu_syn_hub: [R; 2],
    mu_gap: R,
) -> NetworkSpec<R> {
    NetworkSpec {
        neurons: mu.iter().map(bursting_neuron).collect(),
        synapses: vec![
            gaba_synapse(0, 1, mu_syn_hco[0]),
            gaba_synapse(1, 0, mu_syn_hco[0]),
            gaba_synapse(3, 4, mu_syn_hco[1]),
            gaba_synapse(4, 3, mu_syn_hco[1]),
            gaba_synapse(0, 2, mu_syn_hub[0]),
            gaba_synapse(4, 2, mu_syn_hub[1]),
        ],
        gaps: vec![
            GapJunctionSpec {
                a: 1,
                b: 2,
                mu: mu_gap,
            },
            GapJunctionSpec {
                a: 2,
                b: 3,
                mu: mu_gap,
            },
        ],
        reversals: standard_constants::<R>().reversals,
    }
}
