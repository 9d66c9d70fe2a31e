//! Conductance-based neuronal networks with online parameter estimation and
//! adaptive conductance control.
//!
//! The crate simulates networks of single-compartment neurons whose membrane
//! dynamics are sums of ohmic ionic currents gated by first-order kinetics,
//! coupled through graded inhibitory synapses and resistive gap junctions.
//! Because every current is linear in its maximal conductance, the voltage
//! dynamics factor as `dv/dt = Phi(v, w, u) theta + b(v, w, u)` and the
//! conductance vector `theta` can be estimated online by an adaptive observer
//! with recursive-least-squares adaptation and exponential forgetting. On top
//! of the estimator sit two certainty-equivalence controllers: a
//! model-reference scheme that drives a neuron's conductance profile toward
//! that of a reference neuron, and a disturbance-rejection scheme that
//! cancels an unwanted synaptic current.
//!
//! Module map:
//!
//! - [`rates`]: registry of gating steady-state and time-constant curves;
//! - [`model`]: network description, canonical state layout, and the vector
//!   field / regressor evaluations;
//! - [`library`]: ready-made neurons, synapses, and networks with the
//!   standard constants;
//! - [`sim`]: fixed-step fourth-order Runge–Kutta integration, piecewise-
//!   constant inputs, recording, and a step-halving accuracy check;
//! - [`observer`]: the adaptive observer;
//! - [`control`]: the conductance-matching and disturbance-rejection laws;
//! - [`experiments`]: scripted closed-loop experiments and burst metrics.
//!
//! All numerics are generic over the scalar type through [`Real`]; the
//! aliases below pin the common double-precision case. Units follow the
//! biophysical convention: time in ms, voltage in mV.

pub mod control;
pub mod error;
pub mod experiments;
pub mod library;
pub mod linalg;
pub mod model;
pub mod num;
pub mod observer;
pub mod rates;
pub mod sim;

pub use error::{Error, Result};
pub use num::Real;

/// Double-precision network description.
pub type Network = model::NetworkSpec<f64>;
/// Double-precision neuron description.
pub type Neuron = model::NeuronSpec<f64>;
/// Double-precision trajectory record.
pub type Trajectory = sim::Trajectory<f64>;
/// Double-precision named conductance set.
pub type Conductances = library::ConductanceVector<f64>;
