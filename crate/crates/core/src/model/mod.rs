//! Network descriptions, canonical state layout, and dynamics evaluation.
//!
//! [`types`] declares what a network *is* (neurons, channels, gates,
//! synapses, gap junctions, reversal potentials), [`layout`] fixes the
//! canonical ordering of the internal-state vector, and [`eval`] evaluates
//! the dynamics — both as direct current summation and in the factored
//! regressor form `dv/dt = Phi theta + b` that the adaptive observer is
//! built on.

pub mod eval;
pub mod layout;
pub mod system;
pub mod types;

pub use eval::{
    calcium_activation, channel_current, gap_current, gate_kinetics,
    gate_steady_state, gate_time_constant, internal_derivative,
    neuron_current_shape, neuron_internal_derivative, neuron_intrinsic_current,
    neuron_known_current, neuron_regressor_row, neuron_synaptic_current,
    regressor, steady_internal_state, voltage_derivative,
    EstimatedConductance, Parametrisation, CA_DECAY_RATE, CA_HILL_KD,
    CA_INFLUX_GAIN,
};
pub use layout::{GateSlot, NeuronLayout, StateLayout, SynSlot};
pub use system::NetworkSystem;
pub use types::{
    ChannelSpec, CurrentLabel, GapJunctionSpec, GateKind, GateSpec, LeakSpec,
    NetworkSpec, NeuronChannel, NeuronSpec, Reversal, ReversalTable, SynapseSpec,
};
