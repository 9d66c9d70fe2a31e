//! Adaptive conductance control laws: reference tracking and synaptic
//! disturbance rejection.
//!
//! Both laws follow the certainty-equivalence principle: they treat the
//! running estimates of an adaptive observer as if they were the true
//! parameters. Estimates are passed through a rectifier
//! `rectify(x) = max(0, x)` and a saturation `saturate(x, beta) = min(x,
//! beta)` *at the point of use only* — the observer itself never sees the
//! clipped values — which keeps the controlled neuron's solutions in a
//! positively invariant set.
//!
//! Reference tracking drives a controlled neuron to behave like a reference
//! neuron with unknown conductances: the control current synthesizes the
//! conductance difference through the current-scale regressor and adds a
//! resistive coupling to the reference voltage,
//!
//! ```text
//! u = Phi_I(v, w_hat) (rectify(theta_r_hat) - saturate(theta_hat, beta))
//!     + kappa (v_r - v) + u_r.
//! ```
//!
//! `Phi_I` here is the regressor at *current* scale: `Phi_I = c * Phi`,
//! where `Phi` is the voltage-derivative-scale regressor of the estimation
//! problem. Only at current scale does `Phi_I theta` have the dimension of
//! a port current, which is what makes the synthesized term act exactly
//! like a bank of intrinsic conductances of magnitude
//! `rectify(theta_r_hat) - saturate(theta_hat, beta)`.
//!
//! Disturbance rejection cancels a measured-presynaptic synaptic current:
//!
//! ```text
//! I_control = -I_d_hat,
//! I_d_hat   = -saturate(mu_syn_hat, beta) * s_hat * (v - E_syn),
//! ds_hat/dt = a1 sigma_s(v_d) (1 - s_hat) - a2 s_hat,
//! ```
//!
//! where the controller integrates its own copy `s_hat` of the synaptic
//! gate, driven by the measured presynaptic voltage. The true disturbance
//! and its estimate are computed by one shared helper so that perfect
//! parameter knowledge yields bit-exact cancellation.

use crate::model::{neuron_current_shape, EstimatedConductance, NetworkSpec, StateLayout, SynapseSpec};
use crate::num::Real;

/// Elementwise rectifier `max(0, x)`, applied to estimates before they are
/// used as synthesized conductances.
#[inline]
pub fn rectify<R: Real>(x: R) -> R {
    x.max(R::zero())
}

/// Elementwise saturation `min(x, beta)`, bounding effective conductances
/// from above.
#[inline]
pub fn saturate<R: Real>(x: R, beta: R) -> R {
    x.min(beta)
}

/// The conductance offsets a tracking controller applies:
/// `rectify(theta_r_hat) - saturate(theta_hat, beta)`, elementwise into
/// `out`.
pub fn conductance_offsets<R: Real>(
    theta_r_hat: &[R],
    theta_hat: &[R],
    beta: R,
    out: &mut [R],
) {
    debug_assert_eq!(theta_r_hat.len(), theta_hat.len());
    debug_assert_eq!(theta_r_hat.len(), out.len());
    for j in 0..out.len() {
        out[j] = rectify(theta_r_hat[j]) - saturate(theta_hat[j], beta);
    }
}

/// Regressor row of neuron `i` at *current* scale: `row[j] = -shape_j`,
/// where `shape_j` is the estimated conductance's current per unit of
/// conductance. This equals the capacitance times the voltage-scale
/// regressor row used by the observer.
pub fn current_regressor_row<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    items: &[EstimatedConductance],
    v_i: R,
    w_i: &[R],
    row: &mut [R],
) {
    debug_assert_eq!(row.len(), items.len());
    for (j, &item) in items.iter().enumerate() {
        row[j] = -neuron_current_shape(net, layout, i, item, v_i, w_i);
    }
}

/// The reference-tracking control current
/// `u = phi_i . offsets + kappa (v_r - v) + u_r`, with
/// `offsets = rectify(theta_r_hat) - saturate(theta_hat, beta)`.
///
/// `phi_i` must be the current-scale regressor row of the controlled
/// neuron, evaluated at its measured voltage and its observer's internal
/// state estimate (see [`current_regressor_row`]).
#[allow(clippy::too_many_arguments)]
pub fn tracking_control<R: Real>(
    phi_i: &[R],
    theta_r_hat: &[R],
    theta_hat: &[R],
    kappa: R,
    v_r: R,
    v: R,
    u_r: R,
    beta: R,
) -> R {
    debug_assert_eq!(phi_i.len(), theta_r_hat.len());
    debug_assert_eq!(phi_i.len(), theta_hat.len());
    let mut u = R::zero();
    for j in 0..phi_i.len() {
        u = u + phi_i[j] * (rectify(theta_r_hat[j]) - saturate(theta_hat[j], beta));
    }
    u + kappa * (v_r - v) + u_r
}

/// The synaptic current `-mu s (v_post - E_syn)` as seen from the input
/// port of the postsynaptic neuron (negative of the outward model current).
///
/// Single source of truth for a disturbance current and its estimate: the
/// rejection experiments compute both the true `I_d` and the controller's
/// `I_d_hat` through this helper, so equal arguments cancel bit-exactly.
#[inline]
pub fn synaptic_port_current<R: Real>(mu: R, s: R, v_post: R, e_syn: R) -> R {
    -mu * s * (v_post - e_syn)
}

/// Kinetics of a graded synaptic gate, shared between a physical synapse,
/// an observer's gate estimate, and a rejection controller's own copy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseKinetics<R> {
    /// Binding rate (1/ms).
    pub a1: R,
    /// Unbinding rate (1/ms).
    pub a2: R,
    /// Activation midpoint (mV).
    pub act_offset: R,
    /// Activation slope (mV).
    pub act_slope: R,
    /// Synaptic reversal potential (mV).
    pub reversal: R,
}

impl<R: Real> SynapseKinetics<R> {
    /// Copies the kinetic constants of a synapse specification.
    pub fn of(syn: &SynapseSpec<R>) -> Self {
        SynapseKinetics {
            a1: syn.a1,
            a2: syn.a2,
            act_offset: syn.act_offset,
            act_slope: syn.act_slope,
            reversal: syn.reversal,
        }
    }

    /// Presynaptic activation `sigma_s(v_pre)`.
    pub fn activation(&self, v_pre: R) -> R {
        R::one() / (R::one() + (-(v_pre - self.act_offset) / self.act_slope).exp())
    }

    /// Gate derivative `a1 sigma_s(v_pre) (1 - s) - a2 s`.
    pub fn gate_derivative(&self, v_pre: R, s: R) -> R {
        self.a1 * self.activation(v_pre) * (R::one() - s) - self.a2 * s
    }

    /// Gate rest value under a clamped presynaptic voltage.
    pub fn gate_steady_state(&self, v_pre: R) -> R {
        let drive = self.a1 * self.activation(v_pre);
        drive / (drive + self.a2)
    }
}

/// The rejection controller's estimate of the disturbance current,
/// `I_d_hat = -saturate(mu_syn_hat, beta) * s_hat * (v - E_syn)`.
pub fn estimated_disturbance<R: Real>(
    mu_syn_hat: R,
    s_hat: R,
    v_post: R,
    e_syn: R,
    beta: R,
) -> R {
    synaptic_port_current(saturate(mu_syn_hat, beta), s_hat, v_post, e_syn)
}

/// The disturbance-rejection control current `I_control = -I_d_hat`.
pub fn rejection_control<R: Real>(
    mu_syn_hat: R,
    s_hat: R,
    v_post: R,
    e_syn: R,
    beta: R,
) -> R {
    -estimated_disturbance(mu_syn_hat, s_hat, v_post, e_syn, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{bursting_neuron, gaba_synapse, single_neuron_network, ConductanceVector};
    use crate::model::{voltage_derivative, Parametrisation};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rectifier_and_saturation_match_their_definitions() {
        assert_eq!(rectify(-3.0), 0.0);
        assert_eq!(rectify(5.0), 5.0);
        assert_eq!(saturate(150.0, 100.0), 100.0);
        assert_eq!(saturate(42.0, 100.0), 42.0);
    }

    proptest! {
        #[test]
        fn rectifier_is_idempotent_and_composition_is_boxed(x in -1e4f64..1e4) {
            let beta = 100.0;
            prop_assert_eq!(rectify(rectify(x)), rectify(x));
            let boxed = saturate(rectify(x), beta);
            prop_assert!((0.0..=beta).contains(&boxed));
        }

        #[test]
        fn offsets_stay_in_the_design_range(
            tr in -200f64..300.0,
            tp in -200f64..300.0,
        ) {
            // rectify(theta_r) - saturate(theta, beta) >= 0 - beta, with the
            // subtrahend never exceeding beta.
            let beta = 150.0;
            let mut out = [0.0];
            conductance_offsets(&[tr], &[tp], beta, &mut out);
            prop_assert!(out[0] >= -beta);
            prop_assert!(saturate(tp, beta) <= beta);
        }
    }

    #[test]
    fn matched_estimates_reduce_tracking_control_to_the_reference_input() {
        let phi = [3.0, -7.0, 0.5];
        let theta = [10.0, 20.0, 0.0];
        let u = tracking_control(&phi, &theta, &theta, 0.04, -55.0, -55.0, -2.0, 150.0);
        assert_eq!(u, -2.0);
    }

    #[test]
    fn output_feedback_term_scales_with_the_voltage_gap() {
        let u = tracking_control(&[], &[], &[], 0.04, -45.0, -55.0, -2.0, 150.0);
        assert_relative_eq!(u, 0.4 - 2.0, max_relative = 1e-15);
    }

    #[test]
    fn controlled_passive_membrane_matches_the_reference_vector_field() {
        // With kappa = 0, converged estimates (theta_r_hat = theta_r,
        // theta_hat = 0), and matching internal states, the passive plant's
        // controlled voltage derivative equals the reference model's
        // derivative at the same state — the tracking law synthesizes the
        // reference conductances exactly.
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
        let reference = single_neuron_network(bursting_neuron(&mu));
        let layout = crate::model::StateLayout::new(&reference);
        let par = Parametrisation::full(&reference);
        let theta_r = par.theta_true(&reference);
        let theta_plant = vec![0.0; theta_r.len()];
        let u_r = -2.0;

        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..50 {
            let v = vec![rng.random_range(-90.0..20.0)];
            let mut w = vec![0.0; layout.n_w()];
            for (k, z) in w.iter_mut().enumerate() {
                *z = if Some(k) == layout.neuron(0).ca {
                    rng.random_range(0.0..20.0)
                } else {
                    rng.random_range(1e-3..0.999)
                };
            }

            // Reference vector field at this state.
            let mut dv_ref = [0.0];
            voltage_derivative(&reference, &layout, &v, &w, &[u_r], &mut dv_ref);

            // Controlled passive plant: c dv = u with u from the tracking law.
            let mut phi_i = vec![0.0; theta_r.len()];
            current_regressor_row(
                &reference,
                &layout,
                0,
                &par.per_neuron[0],
                v[0],
                &w,
                &mut phi_i,
            );
            let u = tracking_control(
                &phi_i,
                &theta_r,
                &theta_plant,
                0.0,
                v[0],
                v[0],
                u_r,
                150.0,
            );
            let dv_plant = u / reference.neurons[0].capacitance;
            assert_relative_eq!(dv_plant, dv_ref[0], max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn perfect_parameter_knowledge_cancels_the_disturbance_bit_exactly() {
        let syn = gaba_synapse(1, 0, 2.5);
        let kin = SynapseKinetics::of(&syn);
        let mut rng = StdRng::seed_from_u64(17);
        for _ in 0..200 {
            let v = rng.random_range(-90.0..30.0);
            let s = rng.random_range(0.0..1.0);
            let i_d = synaptic_port_current(syn.mu, s, v, kin.reversal);
            let i_control = rejection_control(syn.mu, s, v, kin.reversal, 100.0);
            assert_eq!(i_control + i_d, 0.0);
        }
    }

    #[test]
    fn saturation_bounds_the_effective_rejection_conductance() {
        let v = -30.0;
        let s = 0.5;
        let e_syn = -90.0;
        let capped = estimated_disturbance(150.0, s, v, e_syn, 100.0);
        let at_bound = synaptic_port_current(100.0, s, v, e_syn);
        assert_eq!(capped, at_bound);
    }

    #[test]
    fn synapse_kinetics_copy_matches_the_synapse_it_came_from() {
        let syn = gaba_synapse(0, 1, 0.8);
        let kin = SynapseKinetics::of(&syn);
        for v in [-80.0, -40.0, 2.0, 10.0] {
            assert_eq!(kin.activation(v), syn.activation(v));
        }
        assert_eq!(kin.activation(2.0), 0.5);
        // Rest value balances binding against unbinding.
        let s_inf: f64 = kin.gate_steady_state(-10.0);
        assert!(kin.gate_derivative(-10.0, s_inf).abs() < 1e-15);
    }
}
