//! A network wired up as a plain dynamical system for the integrator.

use crate::num::Real;
use crate::sim::System;

use super::eval::{internal_derivative, steady_internal_state, voltage_derivative};
use super::layout::StateLayout;
use super::types::NetworkSpec;

/// A network integrated as-is: state `[v | w]`, one external current input
/// per neuron, no estimation or control attached.
#[derive(Debug, Clone)]
pub struct NetworkSystem<R: Real> {
    net: NetworkSpec<R>,
    layout: StateLayout,
}

impl<R: Real> NetworkSystem<R> {
    /// Wraps a network; the canonical state layout is computed once here.
    pub fn new(net: NetworkSpec<R>) -> Self {
        let layout = StateLayout::new(&net);
        NetworkSystem { net, layout }
    }

    /// The wrapped network.
    pub fn net(&self) -> &NetworkSpec<R> {
        &self.net
    }

    /// The canonical state layout of the wrapped network.
    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    /// Full state `[v | w]` with every internal variable at its fixed point
    /// under clamped voltages `v`.
    pub fn initial_state(&self, v: &[R]) -> Vec<R> {
        debug_assert_eq!(v.len(), self.net.n());
        let mut x = v.to_vec();
        x.extend(steady_internal_state(&self.net, &self.layout, v));
        x
    }
}

impl<R: Real> System<R> for NetworkSystem<R> {
    fn dim(&self) -> usize {
        self.net.n() + self.layout.n_w()
    }

    fn n_inputs(&self) -> usize {
        self.net.n()
    }

    fn derivative(&self, _t: R, x: &[R], u: &[R], dx: &mut [R]) {
        let n = self.net.n();
        let n_w = self.layout.n_w();
        voltage_derivative(
            &self.net,
            &self.layout,
            &x[0..n],
            &x[n..n + n_w],
            u,
            &mut dx[0..n],
        );
        internal_derivative(
            &self.net,
            &self.layout,
            &x[0..n],
            &x[n..n + n_w],
            &mut dx[n..n + n_w],
        );
    }
}
