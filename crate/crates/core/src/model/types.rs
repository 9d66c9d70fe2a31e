//! Network description types.
//!
//! A [`NetworkSpec`] is a purely declarative description of a network: the
//! neurons with their channel complements and maximal conductances, the
//! graded chemical synapses, the gap junctions, and the table of reversal
//! potentials. Evaluation (vector fields, regressors) lives in
//! [`super::eval`]; the mapping from a spec to a flat state vector lives in
//! [`super::layout`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;
use crate::rates::{SteadyStateId, TimeConstantId};

/// Identifier of an ionic current type.
///
/// `Leak` and `Syn` appear as labels in estimation bookkeeping; intrinsic
/// channels on a neuron use the first eight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentLabel {
    Na,
    H,
    T,
    A,
    K,
    L,
    KCa,
    Kir,
    Leak,
    Syn,
}

impl CurrentLabel {
    /// Registry name of this label.
    pub const fn name(self) -> &'static str {
        match self {
            Self::Na => "na",
            Self::H => "h",
            Self::T => "t",
            Self::A => "a",
            Self::K => "k",
            Self::L => "l",
            Self::KCa => "k_ca",
            Self::Kir => "kir",
            Self::Leak => "leak",
            Self::Syn => "syn",
        }
    }
}

/// Identifier of a reversal potential; values live in [`ReversalTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reversal {
    Na,
    H,
    Ca,
    K,
    Leak,
    Syn,
}

/// Reversal potentials (mV) shared by every neuron in a network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReversalTable<R> {
    pub na: R,
    pub h: R,
    pub ca: R,
    pub k: R,
    pub leak: R,
    pub syn: R,
}

impl<R: Real> ReversalTable<R> {
    /// Looks up a reversal potential by identifier.
    pub fn get(&self, id: Reversal) -> R {
        match id {
            Reversal::Na => self.na,
            Reversal::H => self.h,
            Reversal::Ca => self.ca,
            Reversal::K => self.k,
            Reversal::Leak => self.leak,
            Reversal::Syn => self.syn,
        }
    }
}

/// How a gating variable evolves and enters the channel conductance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// Dynamic gate with an increasing steady-state curve (opens with
    /// depolarization, or with hyperpolarization for H/KIR-type currents).
    Activation,
    /// Dynamic gate with a decreasing steady-state curve.
    Inactivation,
    /// Instantaneous function of voltage; contributes `sigma(v)^exponent`
    /// with no state variable.
    StaticVoltage,
    /// Instantaneous function of the calcium pool; contributes the hard-coded
    /// Hill term `(ca / (15 + ca))^exponent` with no state variable.
    CalciumDriven,
}

/// One gating variable of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub kind: GateKind,
    /// Power to which the gate value is raised in the conductance product.
    pub exponent: u32,
    /// Steady-state curve; present for every kind except `CalciumDriven`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_state: Option<SteadyStateId>,
    /// Time-constant curve; present only for the dynamic kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_constant: Option<TimeConstantId>,
}

impl GateSpec {
    /// Whether this gate carries a state variable.
    pub fn is_dynamic(&self) -> bool {
        matches!(self.kind, GateKind::Activation | GateKind::Inactivation)
    }

    fn validate(&self, context: &str) -> Result<()> {
        if self.exponent == 0 {
            return Err(Error::config(format!("{context}: gate exponent must be >= 1")));
        }
        match self.kind {
            GateKind::Activation | GateKind::Inactivation => {
                if self.steady_state.is_none() || self.time_constant.is_none() {
                    return Err(Error::config(format!(
                        "{context}: dynamic gate needs steady-state and time-constant curves"
                    )));
                }
            }
            GateKind::StaticVoltage => {
                if self.steady_state.is_none() {
                    return Err(Error::config(format!(
                        "{context}: static gate needs a steady-state curve"
                    )));
                }
                if self.time_constant.is_some() {
                    return Err(Error::config(format!(
                        "{context}: static gate cannot have a time constant"
                    )));
                }
            }
            GateKind::CalciumDriven => {
                if self.steady_state.is_some() || self.time_constant.is_some() {
                    return Err(Error::config(format!(
                        "{context}: calcium-driven gate uses the built-in Hill form only"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// An ionic channel: an ohmic current `mu * (product of gates) * (v - E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub label: CurrentLabel,
    pub reversal: Reversal,
    pub gates: Vec<GateSpec>,
}

/// A channel instance on a neuron with its maximal conductance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronChannel<R> {
    pub mu: R,
    pub channel: ChannelSpec,
}

/// The ohmic leak current `mu * (v - E)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakSpec<R> {
    pub mu: R,
    pub reversal: Reversal,
}

/// A single-compartment neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronSpec<R> {
    /// Membrane capacitance (model units).
    pub capacitance: R,
    /// Ionic channels in declaration order; the order fixes both the state
    /// layout and the conductance-parameter ordering.
    pub channels: Vec<NeuronChannel<R>>,
    pub leak: LeakSpec<R>,
}

/// A graded chemical synapse `mu * s * (v_post - E)` with first-order gate
/// kinetics driven by the presynaptic voltage:
/// `ds/dt = a1 * sigma(v_pre) * (1 - s) - a2 * s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynapseSpec<R> {
    pub pre: usize,
    pub post: usize,
    pub mu: R,
    /// Synaptic reversal potential (mV).
    pub reversal: R,
    /// Opening rate constant (1/ms).
    pub a1: R,
    /// Closing rate constant (1/ms).
    pub a2: R,
    /// Half-activation voltage (mV) of the presynaptic sigmoid.
    pub act_offset: R,
    /// Slope factor (mV) of the presynaptic sigmoid.
    pub act_slope: R,
}

impl<R: Real> SynapseSpec<R> {
    /// Presynaptic activation sigmoid `1 / (1 + exp(-(v - offset)/slope))`.
    pub fn activation(&self, v_pre: R) -> R {
        R::one() / (R::one() + (-(v_pre - self.act_offset) / self.act_slope).exp())
    }
}

/// A resistive gap junction between neurons `a` and `b`: neuron `a` receives
/// the current `mu * (v_a - v_b)` on the intrinsic side of its balance and
/// `b` the opposite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapJunctionSpec<R> {
    pub a: usize,
    pub b: usize,
    pub mu: R,
}

/// A complete network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec<R> {
    pub neurons: Vec<NeuronSpec<R>>,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub synapses: Vec<SynapseSpec<R>>,
    #[serde(default = "Vec::new", skip_serializing_if = "Vec::is_empty")]
    pub gaps: Vec<GapJunctionSpec<R>>,
    pub reversals: ReversalTable<R>,
}

impl<R: Real> NetworkSpec<R> {
    /// Number of neurons.
    pub fn n(&self) -> usize {
        self.neurons.len()
    }

    /// Checks structural consistency; every constructor in the library
    /// produces specs that pass, and deserialized specs must be run through
    /// this before use.
    pub fn validate(&self) -> Result<()> {
        if self.neurons.is_empty() {
            return Err(Error::config("network has no neurons"));
        }
        let n = self.n();
        for (i, neuron) in self.neurons.iter().enumerate() {
            if !(neuron.capacitance > R::zero()) {
                return Err(Error::config(format!("neuron {i}: capacitance must be positive")));
            }
            if !(neuron.leak.mu >= R::zero()) {
                return Err(Error::config(format!("neuron {i}: leak conductance must be >= 0")));
            }
            let mut labels = Vec::new();
            for (c, nc) in neuron.channels.iter().enumerate() {
                let ctx = format!("neuron {i}, channel {c} ({})", nc.channel.label.name());
                if !(nc.mu >= R::zero()) {
                    return Err(Error::config(format!("{ctx}: conductance must be >= 0")));
                }
                if matches!(nc.channel.label, CurrentLabel::Leak | CurrentLabel::Syn) {
                    return Err(Error::config(format!(
                        "{ctx}: leak/syn are not channel labels"
                    )));
                }
                if labels.contains(&nc.channel.label) {
                    return Err(Error::config(format!("{ctx}: duplicate channel label")));
                }
                labels.push(nc.channel.label);
                if nc.channel.gates.is_empty() {
                    return Err(Error::config(format!("{ctx}: channel needs at least one gate")));
                }
                for gate in &nc.channel.gates {
                    gate.validate(&ctx)?;
                }
            }
        }
        let mut seen_edges = Vec::new();
        for (s, syn) in self.synapses.iter().enumerate() {
            let ctx = format!("synapse {s}");
            if syn.pre >= n || syn.post >= n {
                return Err(Error::config(format!("{ctx}: neuron index out of range")));
            }
            if seen_edges.contains(&(syn.pre, syn.post)) {
                return Err(Error::config(format!(
                    "{ctx}: duplicate synapse from {} to {}",
                    syn.pre, syn.post
                )));
            }
            seen_edges.push((syn.pre, syn.post));
            if !(syn.mu >= R::zero()) {
                return Err(Error::config(format!("{ctx}: conductance must be >= 0")));
            }
            if !(syn.a1 > R::zero()) || !(syn.a2 > R::zero()) {
                return Err(Error::config(format!("{ctx}: rate constants must be positive")));
            }
            if !(syn.act_slope > R::zero()) {
                return Err(Error::config(format!("{ctx}: activation slope must be positive")));
            }
        }
        let mut seen_pairs = Vec::new();
        for (g, gap) in self.gaps.iter().enumerate() {
            let ctx = format!("gap junction {g}");
            if gap.a >= n || gap.b >= n {
                return Err(Error::config(format!("{ctx}: neuron index out of range")));
            }
            if gap.a == gap.b {
                return Err(Error::config(format!("{ctx}: endpoints must differ")));
            }
            let key = (gap.a.min(gap.b), gap.a.max(gap.b));
            if seen_pairs.contains(&key) {
                return Err(Error::config(format!(
                    "{ctx}: duplicate pair ({}, {})",
                    key.0, key.1
                )));
            }
            seen_pairs.push(key);
            if !(gap.mu >= R::zero()) {
                return Err(Error::config(format!("{ctx}: conductance must be >= 0")));
            }
        }
        Ok(())
    }

    /// Index of the channel with the given label on neuron `i`, if any.
    pub fn channel_index(&self, i: usize, label: CurrentLabel) -> Option<usize> {
        self.neurons[i]
            .channels
            .iter()
            .position(|nc| nc.channel.label == label)
    }

    /// Indices of synapses onto neuron `i`, sorted by presynaptic index.
    /// This is the canonical ordering of synaptic gates and parameters.
    pub fn incoming_synapses(&self, i: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.synapses.len())
            .filter(|&s| self.synapses[s].post == i)
            .collect();
        idx.sort_by_key(|&s| self.synapses[s].pre);
        idx
    }
}
