//! Canonical mapping from a network description to a flat state vector.
//!
//! The network state splits into the measured voltages `v` (one per neuron,
//! in neuron order) and the internal states `w`. Within `w`, each neuron owns
//! one contiguous block, ordered as:
//!
//! 1. the dynamic intrinsic gates, in channel declaration order, within a
//!    channel in gate declaration order (activation before inactivation);
//! 2. the gates of incoming synapses, sorted by presynaptic index;
//! 3. the calcium concentration, if the neuron carries a calcium pool.
//!
//! A neuron carries a calcium pool exactly when it has an L-type channel or a
//! calcium-driven gate. Slot indices are relative to the neuron's block, so
//! per-neuron routines (the decentralized observers) can work on a block
//! slice directly; full-network routines slice `w` at `w_offset`. The layout
//! is computed once per network and reused by every evaluation, keeping index
//! arithmetic out of the hot loops.

use crate::model::types::{CurrentLabel, GateKind, NetworkSpec};
use crate::num::Real;

/// Location of one dynamic intrinsic gate within a neuron's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateSlot {
    /// Channel position in the neuron's declaration order.
    pub channel: usize,
    /// Gate position within the channel.
    pub gate: usize,
    /// Index relative to the neuron's block.
    pub w_index: usize,
}

/// Location of one synaptic gate within a neuron's block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynSlot {
    /// Index into `NetworkSpec::synapses`.
    pub synapse: usize,
    /// Index relative to the neuron's block.
    pub w_index: usize,
}

/// Per-neuron portion of the layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeuronLayout {
    /// First index of this neuron's block in the full `w` vector.
    pub w_offset: usize,
    /// Length of the block.
    pub n_w: usize,
    /// Dynamic intrinsic gates in canonical order.
    pub gates: Vec<GateSlot>,
    /// Incoming synaptic gates, sorted by presynaptic index.
    pub syn_gates: Vec<SynSlot>,
    /// Block-relative index of the calcium concentration, if present.
    pub ca: Option<usize>,
    /// Block-relative index of the L-channel activation gate, if present;
    /// it drives the calcium influx.
    pub l_gate: Option<usize>,
}

/// Complete state layout of a network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateLayout {
    neurons: Vec<NeuronLayout>,
    n_w: usize,
}

impl StateLayout {
    /// Computes the canonical layout of `net`. The spec must be valid.
    pub fn new<R: Real>(net: &NetworkSpec<R>) -> Self {
        let mut neurons = Vec::with_capacity(net.n());
        let mut offset = 0usize;
        for (i, neuron) in net.neurons.iter().enumerate() {
            let mut local = 0usize;
            let mut gates = Vec::new();
            let mut l_gate = None;
            let mut has_calcium_gate = false;
            for (c, nc) in neuron.channels.iter().enumerate() {
                for (g, gate) in nc.channel.gates.iter().enumerate() {
                    if gate.kind == GateKind::CalciumDriven {
                        has_calcium_gate = true;
                    }
                    if gate.is_dynamic() {
                        if nc.channel.label == CurrentLabel::L && g == 0 {
                            l_gate = Some(local);
                        }
                        gates.push(GateSlot {
                            channel: c,
                            gate: g,
                            w_index: local,
                        });
                        local += 1;
                    }
                }
            }
            let mut syn_gates = Vec::new();
            for s in net.incoming_synapses(i) {
                syn_gates.push(SynSlot {
                    synapse: s,
                    w_index: local,
                });
                local += 1;
            }
            let has_l = net.channel_index(i, CurrentLabel::L).is_some();
            let ca = if has_l || has_calcium_gate {
                let idx = local;
                local += 1;
                Some(idx)
            } else {
                None
            };
            neurons.push(NeuronLayout {
                w_offset: offset,
                n_w: local,
                gates,
                syn_gates,
                ca,
                l_gate,
            });
            offset += local;
            debug_assert_eq!(neurons.len(), i + 1);
        }
        StateLayout {
            neurons,
            n_w: offset,
        }
    }

    /// Total number of internal states.
    pub fn n_w(&self) -> usize {
        self.n_w
    }

    /// Number of neurons.
    pub fn n_neurons(&self) -> usize {
        self.neurons.len()
    }

    /// Layout of neuron `i`'s block.
    pub fn neuron(&self, i: usize) -> &NeuronLayout {
        &self.neurons[i]
    }

    /// Absolute `w` index of the gate of synapse `s` (it lives in the
    /// postsynaptic neuron's block). Panics if `s` is not a synapse index of
    /// the network.
    pub fn synapse_gate(&self, s: usize) -> usize {
        for nl in &self.neurons {
            for slot in &nl.syn_gates {
                if slot.synapse == s {
                    return nl.w_offset + slot.w_index;
                }
            }
        }
        panic!("synapse {s} not in layout");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{self, ConductanceVector};

    /// The two-neuron inhibitory pair: each neuron has the eight-channel
    /// complement (nine dynamic intrinsic gates), one synaptic gate, and a
    /// calcium pool.
    #[test]
    fn half_center_layout_matches_canonical_order() {
        let mu = ConductanceVector {
            na: 120.0,
            h: 0.1,
            t: 2.0,
            a: 0.0,
            k: 80.0,
            l: 0.4,
            k_ca: 2.0,
            kir: 0.0,
            leak: 0.1,
        };
        let net = library::half_center_oscillator(&mu, 0.8);
        net.validate().unwrap();
        let layout = StateLayout::new(&net);
        assert_eq!(layout.n_neurons(), 2);
        // Per neuron: m_na h_na m_h m_t h_t m_a h_a m_k m_l, s, ca = 11.
        assert_eq!(layout.n_w(), 22);
        let nl = layout.neuron(0);
        assert_eq!(nl.w_offset, 0);
        assert_eq!(nl.n_w, 11);
        // Channel order Na(2), H(1), T(2), A(2), K(1), L(1); KCa and KIR
        // contribute no dynamic gate.
        let chan_gate: Vec<(usize, usize)> =
            nl.gates.iter().map(|s| (s.channel, s.gate)).collect();
        assert_eq!(
            chan_gate,
            [(0, 0), (0, 1), (1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (4, 0), (5, 0)]
        );
        assert_eq!(nl.syn_gates.len(), 1);
        assert_eq!(nl.syn_gates[0].w_index, 9);
        assert_eq!(nl.ca, Some(10));
        assert_eq!(nl.l_gate, Some(8));
        let nl1 = layout.neuron(1);
        assert_eq!(nl1.w_offset, 11);
        // Neuron 1's synaptic gate sits at absolute index 11 + 9.
        assert_eq!(layout.synapse_gate(nl1.syn_gates[0].synapse), 20);
    }
}
