//! Adaptive observer: joint state and parameter estimation with
//! exponential forgetting.
//!
//! The voltage dynamics of a conductance-based network are linear in the
//! maximal conductances:
//!
//! ```text
//! dv/dt = Phi(v, w, u) theta + b(v, w, u),
//! ```
//!
//! with a block-diagonal regressor `Phi` (one block per neuron). Driven by
//! the measured voltages `v`, the observer integrates
//!
//! ```text
//! dv_hat/dt = Phi(v, w_hat, u) theta_hat + b(v, w_hat, u)
//!             + gamma (I + Psi P Psi') (v - v_hat)
//! dw_hat/dt = g(v, w_hat)                     (internal-state dynamics)
//! dtheta_hat/dt = gamma P Psi' (v - v_hat)
//! dPsi/dt   = -gamma Psi + Phi(v, w_hat, u)
//! dP/dt     = alpha P - P Psi' Psi P
//! ```
//!
//! from `v_hat(0) = v(0)`, `w_hat(0)` at the gating fixed point,
//! `theta_hat(0) = 0`, `Psi(0) = 0`, `P(0) = I`. `Psi` is a low-pass
//! filtered copy of the regressor and `P` a covariance-like gain whose
//! forgetting rate `alpha` keeps the estimator responsive to parameters
//! that drift (neuromodulation) at the cost of `P` growing along directions
//! the trajectory does not excite.
//!
//! Because the internal states are driven by the *measured* voltages, and
//! because `w_hat(0) = w(0)` whenever the plant itself starts at the gating
//! fixed point, the innovation obeys `v - v_hat = Psi (theta - theta_hat)`
//! exactly along trajectories, and `theta_hat` is the recursive solution of
//! an exponentially weighted least-squares fit of the filtered regressor
//! equation (exact when `gamma = 1`; see the estimator tests).
//!
//! An observer may cover all neurons of a network or any subset; covering a
//! single neuron gives the decentralised estimator used by the per-neuron
//! adaptive controllers. The covered blocks of `Phi`, `Psi`, and `P` are
//! block-diagonal, so a network observer and the corresponding per-neuron
//! observers integrate identical estimates.
//!
//! The observer never constrains `theta_hat`: rectification and saturation
//! are applied by control laws at the point of use, never fed back into the
//! estimator.

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, gram, mat_mat, mat_vec, symmetrize};
use crate::model::{
    neuron_internal_derivative, neuron_regressor_row, steady_internal_state, NetworkSpec,
    Parametrisation, StateLayout,
};
use crate::num::Real;
use std::ops::Range;

/// Estimator gains: `gamma` scales the innovation and regressor filter,
/// `alpha` is the exponential forgetting rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverGains<R> {
    /// Innovation and filter gain (1/ms).
    pub gamma: R,
    /// Forgetting rate (1/ms).
    pub alpha: R,
}

/// Dimensions of one adaptive-estimator block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RlsDims {
    /// Number of measured outputs (voltages) the estimator tracks.
    pub n_v: usize,
    /// Number of estimated parameters.
    pub n_theta: usize,
}

/// Scratch buffers for [`rls_derivative`].
#[derive(Debug)]
pub struct RlsScratch<R> {
    psi_t_e: Vec<R>,
    p_psi_t_e: Vec<R>,
    phi_theta: Vec<R>,
    psi_gain: Vec<R>,
    psi_p: Vec<R>,
}

impl<R: Real> RlsScratch<R> {
    /// Buffers for the given block dimensions.
    pub fn new(dims: RlsDims) -> Self {
        RlsScratch {
            psi_t_e: vec![R::zero(); dims.n_theta],
            p_psi_t_e: vec![R::zero(); dims.n_theta],
            phi_theta: vec![R::zero(); dims.n_v],
            psi_gain: vec![R::zero(); dims.n_v],
            psi_p: vec![R::zero(); dims.n_v * dims.n_theta],
        }
    }
}

/// Core estimator equations, independent of where the regressor comes from.
///
/// Given the current regressor `phi` (`n_v x n_theta`, row-major), offset
/// `b`, and innovation `e = v - v_hat`, writes the derivatives of the
/// estimator states:
///
/// ```text
/// dv_hat = phi theta + b + gamma (e + Psi P Psi' e)
/// dtheta = gamma P Psi' e
/// dpsi   = -gamma psi + phi
/// dp     = alpha p - (psi p)' (psi p)
/// ```
///
/// The covariance derivative is formed as `(Psi P)' (Psi P)` (using the
/// symmetry of `P`), which keeps `dp` symmetric to the last bit.
#[allow(clippy::too_many_arguments)]
pub fn rls_derivative<R: Real>(
    gains: &ObserverGains<R>,
    dims: RlsDims,
    phi: &[R],
    b: &[R],
    e: &[R],
    theta: &[R],
    psi: &[R],
    p: &[R],
    dv_hat: &mut [R],
    dtheta: &mut [R],
    dpsi: &mut [R],
    dp: &mut [R],
    scratch: &mut RlsScratch<R>,
) {
    let (s, nt) = (dims.n_v, dims.n_theta);
    debug_assert_eq!(phi.len(), s * nt);
    debug_assert_eq!(psi.len(), s * nt);
    debug_assert_eq!(p.len(), nt * nt);

    // psi_t_e = Psi' e
    for x in scratch.psi_t_e.iter_mut() {
        *x = R::zero();
    }
    for r in 0..s {
        let row = &psi[r * nt..(r + 1) * nt];
        for j in 0..nt {
            scratch.psi_t_e[j] = scratch.psi_t_e[j] + row[j] * e[r];
        }
    }
    // p_psi_t_e = P Psi' e
    mat_vec(p, &scratch.psi_t_e, &mut scratch.p_psi_t_e, nt, nt);
    // dtheta = gamma P Psi' e
    for j in 0..nt {
        dtheta[j] = gains.gamma * scratch.p_psi_t_e[j];
    }
    // dv_hat = phi theta + b + gamma (e + Psi (P Psi' e))
    mat_vec(phi, theta, &mut scratch.phi_theta, s, nt);
    mat_vec(psi, &scratch.p_psi_t_e, &mut scratch.psi_gain, s, nt);
    for r in 0..s {
        dv_hat[r] = scratch.phi_theta[r] + b[r]
            + gains.gamma * (e[r] + scratch.psi_gain[r]);
    }
    // dpsi = -gamma psi + phi
    for k in 0..s * nt {
        dpsi[k] = phi[k] - gains.gamma * psi[k];
    }
    // dp = alpha p - (Psi P)' (Psi P)
    mat_mat(psi, p, &mut scratch.psi_p, s, nt, nt);
    gram(&scratch.psi_p, dp, s, nt);
    for k in 0..nt * nt {
        dp[k] = gains.alpha * p[k] - dp[k];
    }
}

/// An adaptive observer for some or all neurons of a network.
///
/// The model network may differ from the physical plant — for instance it
/// may include a synapse that models an external disturbance current whose
/// conductance is to be estimated. The observer's state vector is laid out
/// as `[v_hat | w_hat | theta_hat | Psi (row-major) | P (row-major)]`.
#[derive(Debug, Clone)]
pub struct ObserverModel<R: Real> {
    net: NetworkSpec<R>,
    layout: StateLayout,
    par: Parametrisation,
    covered: Vec<usize>,
    /// Per covered neuron: its internal block within `w_hat`.
    w_spans: Vec<Range<usize>>,
    /// Per covered neuron: its parameter block within `theta_hat`.
    th_spans: Vec<Range<usize>>,
    n_w: usize,
    n_theta: usize,
}

impl<R: Real> ObserverModel<R> {
    /// An observer covering the listed neurons (strictly increasing
    /// indices) of the model network, estimating the conductances that
    /// `par` selects on those neurons.
    pub fn new(
        net: NetworkSpec<R>,
        par: Parametrisation,
        covered: Vec<usize>,
    ) -> Result<Self> {
        net.validate()?;
        par.validate(&net)?;
        if covered.is_empty() {
            return Err(Error::config("observer must cover at least one neuron"));
        }
        for pair in covered.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::config(
                    "covered neuron indices must be strictly increasing",
                ));
            }
        }
        if *covered.last().unwrap() >= net.n() {
            return Err(Error::config("covered neuron index out of range"));
        }
        let layout = StateLayout::new(&net);
        let mut w_spans = Vec::with_capacity(covered.len());
        let mut th_spans = Vec::with_capacity(covered.len());
        let (mut w_off, mut th_off) = (0usize, 0usize);
        for &i in &covered {
            let nw = layout.neuron(i).n_w;
            w_spans.push(w_off..w_off + nw);
            w_off += nw;
            let nt = par.per_neuron[i].len();
            th_spans.push(th_off..th_off + nt);
            th_off += nt;
        }
        Ok(ObserverModel {
            net,
            layout,
            par,
            covered,
            w_spans,
            th_spans,
            n_w: w_off,
            n_theta: th_off,
        })
    }

    /// An observer covering every neuron of the network.
    pub fn full(net: NetworkSpec<R>, par: Parametrisation) -> Result<Self> {
        let n = net.n();
        ObserverModel::new(net, par, (0..n).collect())
    }

    /// A decentralised observer covering a single neuron.
    pub fn single(net: NetworkSpec<R>, par: Parametrisation, neuron: usize) -> Result<Self> {
        ObserverModel::new(net, par, vec![neuron])
    }

    /// The model network.
    pub fn net(&self) -> &NetworkSpec<R> {
        &self.net
    }

    /// The model network's internal-state layout.
    pub fn layout(&self) -> &StateLayout {
        &self.layout
    }

    /// The estimated-conductance selection.
    pub fn par(&self) -> &Parametrisation {
        &self.par
    }

    /// Indices of the covered neurons.
    pub fn covered(&self) -> &[usize] {
        &self.covered
    }

    /// Number of covered voltages.
    pub fn n_v(&self) -> usize {
        self.covered.len()
    }

    /// Length of the observer's internal-state block.
    pub fn n_w(&self) -> usize {
        self.n_w
    }

    /// Number of estimated parameters.
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    /// Estimator block dimensions.
    pub fn dims(&self) -> RlsDims {
        RlsDims {
            n_v: self.n_v(),
            n_theta: self.n_theta,
        }
    }

    /// Total state dimension:
    /// `n_v + n_w + n_theta + n_v * n_theta + n_theta^2`.
    pub fn dim(&self) -> usize {
        let (s, nt) = (self.n_v(), self.n_theta);
        s + self.n_w + nt + s * nt + nt * nt
    }

    /// Range of `v_hat` within the observer state.
    pub fn v_hat_range(&self) -> Range<usize> {
        0..self.n_v()
    }

    /// Range of `w_hat` within the observer state.
    pub fn w_hat_range(&self) -> Range<usize> {
        let s = self.n_v();
        s..s + self.n_w
    }

    /// Range of `theta_hat` within the observer state.
    pub fn theta_range(&self) -> Range<usize> {
        let start = self.n_v() + self.n_w;
        start..start + self.n_theta
    }

    /// Range of the filtered regressor `Psi` within the observer state.
    pub fn psi_range(&self) -> Range<usize> {
        let start = self.n_v() + self.n_w + self.n_theta;
        start..start + self.n_v() * self.n_theta
    }

    /// Range of the covariance `P` within the observer state.
    pub fn p_range(&self) -> Range<usize> {
        let start = self.n_v() + self.n_w + self.n_theta + self.n_v() * self.n_theta;
        start..start + self.n_theta * self.n_theta
    }

    /// The parameter block of covered neuron `r` within `theta_hat`.
    pub fn theta_span(&self, r: usize) -> Range<usize> {
        self.th_spans[r].clone()
    }

    /// The internal block of covered neuron `r` within `w_hat`.
    pub fn w_span(&self, r: usize) -> Range<usize> {
        self.w_spans[r].clone()
    }

    /// `v_hat` slice of an observer state.
    pub fn v_hat<'a>(&self, x: &'a [R]) -> &'a [R] {
        &x[self.v_hat_range()]
    }

    /// `w_hat` slice of an observer state.
    pub fn w_hat<'a>(&self, x: &'a [R]) -> &'a [R] {
        &x[self.w_hat_range()]
    }

    /// `theta_hat` slice of an observer state.
    pub fn theta<'a>(&self, x: &'a [R]) -> &'a [R] {
        &x[self.theta_range()]
    }

    /// `Psi` slice (row-major `n_v x n_theta`) of an observer state.
    pub fn psi<'a>(&self, x: &'a [R]) -> &'a [R] {
        &x[self.psi_range()]
    }

    /// `P` slice (row-major `n_theta x n_theta`) of an observer state.
    pub fn p<'a>(&self, x: &'a [R]) -> &'a [R] {
        &x[self.p_range()]
    }

    /// Names of the estimated parameters, in `theta_hat` order.
    pub fn theta_names(&self) -> Vec<String> {
        let all = self.par.names();
        let mut out = Vec::with_capacity(self.n_theta);
        for &i in &self.covered {
            out.extend_from_slice(&all[self.par.block_range(i)]);
        }
        out
    }

    /// Initial observer state for measured voltages `v_meas`:
    /// `v_hat` copies the measurement, `w_hat` sits at the gating fixed
    /// point, `theta_hat = 0`, `Psi = 0`, `P = I`.
    pub fn initial_state(&self, v_meas: &[R]) -> Vec<R> {
        assert_eq!(v_meas.len(), self.net.n(), "measurement length");
        let mut x = vec![R::zero(); self.dim()];
        for (r, &i) in self.covered.iter().enumerate() {
            x[r] = v_meas[i];
        }
        let w_full = steady_internal_state(&self.net, &self.layout, v_meas);
        let w_hat = &mut x[self.w_hat_range()];
        for (r, &i) in self.covered.iter().enumerate() {
            let nl = self.layout.neuron(i);
            w_hat[self.w_spans[r].clone()]
                .copy_from_slice(&w_full[nl.w_offset..nl.w_offset + nl.n_w]);
        }
        let p_range = self.p_range();
        let nt = self.n_theta;
        let p = &mut x[p_range];
        for j in 0..nt {
            p[j * nt + j] = R::one();
        }
        x
    }

    /// Time derivative of the observer state.
    ///
    /// `v_meas` is the full measured voltage vector of the model network
    /// (covered and uncovered neurons alike; presynaptic voltages are always
    /// taken from the measurement). `u_known` holds, per covered neuron, the
    /// input current the observer knows about — the applied port current
    /// minus any component it is supposed to treat as unknown.
    pub fn derivative(
        &self,
        gains: &ObserverGains<R>,
        v_meas: &[R],
        u_known: &[R],
        x: &[R],
        dx: &mut [R],
        scratch: &mut ObserverScratch<R>,
    ) {
        let (s, nt) = (self.n_v(), self.n_theta);
        assert_eq!(v_meas.len(), self.net.n(), "measurement length");
        assert_eq!(u_known.len(), s, "known-input length");
        assert_eq!(x.len(), self.dim(), "observer state length");
        assert_eq!(dx.len(), self.dim(), "observer derivative length");

        let v_hat = self.v_hat(x);
        let w_hat = &x[self.w_hat_range()];

        // Regressor, offset, innovation.
        for z in scratch.phi.iter_mut() {
            *z = R::zero();
        }
        for (r, &i) in self.covered.iter().enumerate() {
            let w_i = &w_hat[self.w_spans[r].clone()];
            let row = &mut scratch.phi[r * nt..(r + 1) * nt];
            scratch.b[r] = neuron_regressor_row(
                &self.net,
                &self.layout,
                i,
                &self.par.per_neuron[i],
                v_meas,
                w_i,
                u_known[r],
                &mut row[self.th_spans[r].clone()],
            );
            scratch.e[r] = v_meas[i] - v_hat[r];
        }

        // Internal-state dynamics, driven by the measurement.
        {
            let (head, _) = dx.split_at_mut(self.w_hat_range().end);
            let dw_hat = &mut head[self.w_hat_range()];
            for (r, &i) in self.covered.iter().enumerate() {
                let span = self.w_spans[r].clone();
                // Split to satisfy the borrow checker: read w, write dw.
                neuron_internal_derivative(
                    &self.net,
                    &self.layout,
                    i,
                    v_meas,
                    &w_hat[span.clone()],
                    &mut dw_hat[span],
                );
            }
        }

        // Estimator blocks.
        let theta = &x[self.theta_range()];
        let psi = &x[self.psi_range()];
        let p = &x[self.p_range()];
        let (dv_hat, rest) = dx.split_at_mut(s);
        let (_, rest) = rest.split_at_mut(self.n_w);
        let (dtheta, rest) = rest.split_at_mut(nt);
        let (dpsi, dp) = rest.split_at_mut(s * nt);
        rls_derivative(
            gains,
            self.dims(),
            &scratch.phi,
            &scratch.b,
            &scratch.e,
            theta,
            psi,
            p,
            dv_hat,
            dtheta,
            dpsi,
            dp,
            &mut scratch.rls,
        );
    }

    /// Re-symmetrizes the covariance block in place; call once per accepted
    /// integration step to stop round-off from accumulating asymmetry.
    pub fn symmetrize_covariance(&self, x: &mut [R]) {
        let nt = self.n_theta;
        let range = self.p_range();
        symmetrize(&mut x[range], nt);
    }

    /// Checks that the covariance block is positive definite, returning a
    /// numerical-degradation error naming the failing pivot otherwise.
    pub fn check_covariance(&self, t: R, x: &[R]) -> Result<()> {
        let nt = self.n_theta;
        let mut copy = self.p(x).to_vec();
        match cholesky_in_place(&mut copy, nt) {
            Ok(()) => Ok(()),
            Err(pivot) => Err(Error::NumericalDegradation(format!(
                "estimator covariance lost positive definiteness at t = {t} ms (pivot {pivot})"
            ))),
        }
    }
}

/// Scratch buffers for [`ObserverModel::derivative`].
#[derive(Debug)]
pub struct ObserverScratch<R> {
    phi: Vec<R>,
    b: Vec<R>,
    e: Vec<R>,
    rls: RlsScratch<R>,
}

impl<R: Real> ObserverScratch<R> {
    /// Buffers sized for the given observer.
    pub fn new(model: &ObserverModel<R>) -> Self {
        let dims = model.dims();
        ObserverScratch {
            phi: vec![R::zero(); dims.n_v * dims.n_theta],
            b: vec![R::zero(); dims.n_v],
            e: vec![R::zero(); dims.n_v],
            rls: RlsScratch::new(dims),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{half_center_oscillator, hh_neuron, single_neuron_network, ConductanceVector};
    use crate::linalg::solve_cholesky;
    use crate::model::{internal_derivative, regressor, voltage_derivative};
    use crate::sim::{simulate, InputSet, Recorder, SimConfig, System};
    use approx::assert_relative_eq;

    /// Scalar plant `dv = phi . theta_true` with the estimator equations on
    /// a frozen regressor row `phi`. State: `[v, v_hat, theta(3), psi(3),
    /// p(9)]`.
    struct FrozenRegressor {
        phi: [f64; 3],
        theta_true: [f64; 3],
        gains: ObserverGains<f64>,
    }

    impl FrozenRegressor {
        const DIM: usize = 1 + 1 + 3 + 3 + 9;
    }

    impl System<f64> for FrozenRegressor {
        fn dim(&self) -> usize {
            Self::DIM
        }
        fn n_inputs(&self) -> usize {
            0
        }
        fn derivative(&self, _t: f64, x: &[f64], _u: &[f64], dx: &mut [f64]) {
            let dims = RlsDims { n_v: 1, n_theta: 3 };
            let mut scratch = RlsScratch::new(dims);
            let v = x[0];
            let v_hat = x[1];
            let theta = &x[2..5];
            let psi = &x[5..8];
            let p = &x[8..17];
            let e = [v - v_hat];
            let b = [0.0];
            dx[0] = self.phi.iter().zip(&self.theta_true).map(|(a, t)| a * t).sum();
            let (dv_hat, rest) = dx[1..].split_at_mut(1);
            let (dtheta, rest) = rest.split_at_mut(3);
            let (dpsi, dp) = rest.split_at_mut(3);
            rls_derivative(
                &self.gains,
                dims,
                &self.phi,
                &b,
                &e,
                theta,
                psi,
                p,
                dv_hat,
                dtheta,
                dpsi,
                dp,
                &mut scratch,
            );
        }
    }

    fn frozen_initial() -> Vec<f64> {
        let mut x0 = vec![0.0; FrozenRegressor::DIM];
        x0[8] = 1.0;
        x0[12] = 1.0;
        x0[16] = 1.0;
        x0
    }

    /// Exponentially weighted batch fit for the frozen-regressor system at
    /// `gamma = 1`: with `k(s) = 1 - exp(-s)`, the filtered-regressor
    /// normal equations at time `T` are
    /// `(exp(-alpha T) I + A(T) phi' phi) theta = A(T) phi' phi theta_true`
    /// with `A(T) = int_0^T exp(-alpha (T - s)) k(s)^2 ds` in closed form.
    fn batch_estimate(phi: [f64; 3], theta_true: [f64; 3], alpha: f64, t_end: f64) -> Vec<f64> {
        let g = 1.0;
        let a1 = (f64::exp(alpha * t_end) - 1.0) / alpha;
        let a2 = (f64::exp((alpha - g) * t_end) - 1.0) / (alpha - g);
        let a3 = (f64::exp((alpha - 2.0 * g) * t_end) - 1.0) / (alpha - 2.0 * g);
        let a = f64::exp(-alpha * t_end) * (a1 - 2.0 * a2 + a3);

        let mut m = vec![0.0; 9];
        let mut rhs = vec![0.0; 3];
        let prior = f64::exp(-alpha * t_end);
        let drive: f64 = phi.iter().zip(&theta_true).map(|(x, t)| x * t).sum();
        for i in 0..3 {
            for j in 0..3 {
                m[i * 3 + j] = a * phi[i] * phi[j];
            }
            m[i * 3 + i] += prior;
            rhs[i] = a * phi[i] * drive;
        }
        cholesky_in_place(&mut m, 3).expect("normal equations are positive definite");
        solve_cholesky(&m, &mut rhs, 3);
        rhs
    }

    #[test]
    fn estimate_matches_batch_least_squares_at_unit_filter_gain() {
        let sys = FrozenRegressor {
            phi: [0.8, -0.5, 0.3],
            theta_true: [2.0, -1.0, 0.5],
            gains: ObserverGains {
                gamma: 1.0,
                alpha: 0.02,
            },
        };
        let cfg = SimConfig {
            dt: 0.01,
            t_start: 0.0,
            t_end: 200.0,
            record_stride: 1000,
        };
        let mut rec = Recorder::full_state(FrozenRegressor::DIM);
        let traj = simulate(&sys, &cfg, &InputSet::default(), &frozen_initial(), &mut rec)
            .unwrap();
        let last = traj.len() - 1;
        let theta_hat: Vec<f64> = (2..5)
            .map(|i| traj.columns()[i][last])
            .collect();
        let batch = batch_estimate(sys.phi, sys.theta_true, sys.gains.alpha, cfg.t_end);
        let err: f64 = theta_hat
            .iter()
            .zip(&batch)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = batch.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(
            err <= 1e-6 * scale,
            "recursive {theta_hat:?} vs batch {batch:?} (rel err {})",
            err / scale
        );

        // The filtered regressor itself has the closed form
        // Psi(t) = phi (1 - exp(-gamma t)).
        let mid = traj
            .times()
            .iter()
            .position(|&t| t == 100.0)
            .expect("mid sample");
        for j in 0..3 {
            let psi_j = traj.columns()[5 + j][mid];
            let expect = sys.phi[j] * (1.0 - f64::exp(-100.0));
            assert_relative_eq!(psi_j, expect, max_relative = 1e-6);
        }
    }

    #[test]
    fn estimate_converges_along_the_excited_direction_at_other_filter_gains() {
        // At gamma != 1 the recursive estimate is no longer the exact batch
        // minimizer, but with a frozen regressor it must still converge to
        // the true parameters along the excited direction and never move
        // orthogonally to it.
        let sys = FrozenRegressor {
            phi: [0.8, -0.5, 0.3],
            theta_true: [2.0, -1.0, 0.5],
            gains: ObserverGains {
                gamma: 2.0,
                alpha: 0.02,
            },
        };
        let cfg = SimConfig {
            dt: 0.01,
            t_start: 0.0,
            t_end: 400.0,
            record_stride: 2000,
        };
        let mut rec = Recorder::full_state(FrozenRegressor::DIM);
        let traj = simulate(&sys, &cfg, &InputSet::default(), &frozen_initial(), &mut rec)
            .unwrap();
        let last = traj.len() - 1;
        let theta_hat: Vec<f64> = (2..5).map(|i| traj.columns()[i][last]).collect();

        let norm2: f64 = sys.phi.iter().map(|x| x * x).sum();
        let along_hat: f64 =
            theta_hat.iter().zip(&sys.phi).map(|(a, b)| a * b).sum::<f64>() / norm2;
        let along_true: f64 =
            sys.theta_true.iter().zip(&sys.phi).map(|(a, b)| a * b).sum::<f64>() / norm2;
        assert_relative_eq!(along_hat, along_true, max_relative = 1e-3);
        for j in 0..3 {
            let orth = theta_hat[j] - along_hat * sys.phi[j];
            assert!(orth.abs() <= 1e-9, "orthogonal drift {orth} in component {j}");
        }
    }

    /// A plant network with a full-coverage observer, integrated as one
    /// coupled system: state `[v | w | observer block]`.
    struct PlantWithObserver {
        net: NetworkSpec<f64>,
        layout: StateLayout,
        obs: ObserverModel<f64>,
        gains: ObserverGains<f64>,
        scratch: std::cell::RefCell<ObserverScratch<f64>>,
    }

    impl PlantWithObserver {
        fn new(net: NetworkSpec<f64>, gains: ObserverGains<f64>) -> Self {
            let layout = StateLayout::new(&net);
            let par = Parametrisation::full(&net);
            let obs = ObserverModel::full(net.clone(), par).unwrap();
            let scratch = std::cell::RefCell::new(ObserverScratch::new(&obs));
            PlantWithObserver {
                net,
                layout,
                obs,
                gains,
                scratch,
            }
        }

        fn plant_dim(&self) -> usize {
            self.net.n() + self.layout.n_w()
        }
    }

    impl System<f64> for PlantWithObserver {
        fn dim(&self) -> usize {
            self.plant_dim() + self.obs.dim()
        }
        fn n_inputs(&self) -> usize {
            self.net.n()
        }
        fn derivative(&self, _t: f64, x: &[f64], u: &[f64], dx: &mut [f64]) {
            let n = self.net.n();
            let nw = self.layout.n_w();
            let (v, rest) = x.split_at(n);
            let (w, x_obs) = rest.split_at(nw);
            let (dv, rest) = dx.split_at_mut(n);
            let (dw, dx_obs) = rest.split_at_mut(nw);
            voltage_derivative(&self.net, &self.layout, v, w, u, dv);
            internal_derivative(&self.net, &self.layout, v, w, dw);
            self.obs.derivative(
                &self.gains,
                v,
                u,
                x_obs,
                dx_obs,
                &mut self.scratch.borrow_mut(),
            );
        }
        fn post_step(&self, _t: f64, x: &mut [f64]) -> Result<()> {
            let start = self.plant_dim();
            self.obs.symmetrize_covariance(&mut x[start..]);
            Ok(())
        }
        fn check_recorded(&self, t: f64, x: &[f64]) -> Result<()> {
            self.obs.check_covariance(t, &x[self.plant_dim()..])
        }
    }

    #[test]
    fn matched_estimates_stay_stationary_under_zero_innovation() {
        // Start the observer at the true parameters with matched internal
        // state: the innovation is identically zero in exact arithmetic, so
        // the estimates must stay put to round-off even while the neuron
        // spikes.
        let net = single_neuron_network(hh_neuron(120.0, 36.0, 0.3));
        let sys = PlantWithObserver::new(
            net,
            ObserverGains {
                gamma: 2.0,
                alpha: 0.001,
            },
        );
        let theta_true = sys.obs.par().theta_true(&sys.net);

        let v0 = vec![-65.0];
        let w0 = steady_internal_state(&sys.net, &sys.layout, &v0);
        let mut x0 = Vec::new();
        x0.extend_from_slice(&v0);
        x0.extend_from_slice(&w0);
        let mut obs0 = sys.obs.initial_state(&v0);
        obs0[sys.obs.theta_range()].copy_from_slice(&theta_true);
        x0.extend_from_slice(&obs0);

        let cfg = SimConfig {
            dt: 0.001,
            t_start: 0.0,
            t_end: 20.0,
            record_stride: 100,
        };
        let inputs = InputSet {
            channels: vec![crate::sim::PiecewiseInput::constant(0.0, 10.0)],
        };
        let plant_dim = sys.plant_dim();
        let theta_cols: Vec<usize> = sys
            .obs
            .theta_range()
            .map(|j| plant_dim + j)
            .collect();
        let mut indices = vec![0usize, plant_dim];
        indices.extend_from_slice(&theta_cols);
        let names = vec![
            "v".to_string(),
            "v_hat".to_string(),
            "th0".to_string(),
            "th1".to_string(),
            "th2".to_string(),
        ];
        let mut rec = Recorder::state_components(names, indices);
        let traj = simulate(&sys, &cfg, &inputs, &x0, &mut rec).unwrap();

        let v = traj.column("v").unwrap();
        let v_hat = traj.column("v_hat").unwrap();
        let spiked = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 0.0;
        assert!(spiked, "stationarity test should exercise spiking dynamics");
        let innovation = v
            .iter()
            .zip(v_hat)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(innovation <= 1e-6, "innovation drift {innovation}");
        for (j, &truth) in theta_true.iter().enumerate() {
            let col = traj.column(["th0", "th1", "th2"][j]).unwrap();
            let drift = col.iter().map(|x| (x - truth).abs()).fold(0.0, f64::max);
            assert!(drift <= 1e-6, "theta component {j} drift {drift}");
        }
    }

    fn hco_net() -> NetworkSpec<f64> {
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
        half_center_oscillator(&mu, 0.8)
    }

    #[test]
    fn unfiltered_regressor_state_grows_covariance_at_the_forgetting_rate() {
        // With Psi = 0 the estimator's covariance derivative reduces to
        // dP = alpha P and the parameter estimate is frozen; the filtered
        // regressor's derivative equals the regressor itself, which must
        // agree with the block-diagonal network regressor.
        let net = hco_net();
        let layout = StateLayout::new(&net);
        let par = Parametrisation::full(&net);
        let n_theta = par.n_theta();
        let obs = ObserverModel::full(net.clone(), par.clone()).unwrap();
        let gains = ObserverGains {
            gamma: 5.0,
            alpha: 0.0008,
        };

        let v_meas = vec![-48.0, -71.0];
        let u = vec![-1.0, 2.0];
        let mut x = obs.initial_state(&v_meas);
        // Perturb v_hat and theta_hat so the innovation and drive terms are
        // nonzero; leave Psi at zero.
        x[0] = -50.0;
        x[1] = -69.0;
        for (j, z) in x[obs.theta_range()].iter_mut().enumerate() {
            *z = 0.1 * (j as f64 + 1.0);
        }

        let mut dx = vec![0.0; obs.dim()];
        obs.derivative(&gains, &v_meas, &u, &x, &mut dx, &mut ObserverScratch::new(&obs));

        // dtheta = 0 and dP = alpha P exactly.
        for d in &dx[obs.theta_range()] {
            assert_eq!(*d, 0.0);
        }
        let p = &x[obs.p_range()];
        let dp = &dx[obs.p_range()];
        for k in 0..n_theta * n_theta {
            assert_eq!(dp[k], gains.alpha * p[k]);
        }

        // dPsi = Phi: cross-check the observer's internal assembly against
        // the standalone block-diagonal regressor on the same arguments.
        let w_hat = &x[obs.w_hat_range()];
        let mut phi = vec![0.0; net.n() * n_theta];
        let mut b = vec![0.0; net.n()];
        regressor(&net, &layout, &par, &v_meas, w_hat, &u, &mut phi, &mut b);
        let dpsi = &dx[obs.psi_range()];
        assert_eq!(dpsi, &phi[..]);

        // dv_hat = Phi theta + b + gamma e with the Psi-dependent gain gone.
        let theta = &x[obs.theta_range()];
        for r in 0..2 {
            let drive: f64 = (0..n_theta).map(|j| phi[r * n_theta + j] * theta[j]).sum();
            let expect = drive + b[r] + gains.gamma * (v_meas[r] - x[r]);
            assert_relative_eq!(dx[r], expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn single_neuron_observers_reproduce_the_network_observer_blocks() {
        // With block-diagonal Psi and P, the network observer's derivative
        // restricted to one neuron's blocks must equal the derivative of
        // that neuron's standalone observer — additions of structural zeros
        // aside, the arithmetic is identical, so we demand bitwise equality.
        let net = hco_net();
        let par = Parametrisation::full(&net);
        let full = ObserverModel::full(net.clone(), par.clone()).unwrap();
        let gains = ObserverGains {
            gamma: 5.0,
            alpha: 0.0008,
        };

        let v_meas = vec![-43.0, -77.0];
        let u = vec![0.5, -2.0];
        let mut x = full.initial_state(&v_meas);
        // Drive every block away from its trivial initial value, keeping
        // Psi and P block-diagonal.
        x[0] = -44.5;
        x[1] = -76.0;
        for (j, z) in x[full.theta_range()].iter_mut().enumerate() {
            *z = 0.3 + 0.05 * j as f64;
        }
        let nt = full.n_theta();
        {
            let spans = [full.theta_span(0), full.theta_span(1)];
            let psi = &mut x[full.psi_range()];
            for r in 0..2 {
                for j in spans[r].clone() {
                    psi[r * nt + j] = 0.01 * (r as f64 + 1.0) * (j as f64 - 4.0);
                }
            }
        }
        {
            let spans = [full.theta_span(0), full.theta_span(1)];
            let p = &mut x[full.p_range()];
            for span in &spans {
                for i in span.clone() {
                    for j in span.clone() {
                        if i != j {
                            p[i * nt + j] = 0.002 * ((i + 2 * j) as f64);
                            p[j * nt + i] = p[i * nt + j];
                        }
                    }
                }
            }
        }
        let mut dx = vec![0.0; full.dim()];
        full.derivative(&gains, &v_meas, &u, &x, &mut dx, &mut ObserverScratch::new(&full));

        for neuron in 0..2 {
            let single = ObserverModel::single(net.clone(), par.clone(), neuron).unwrap();
            let snt = single.n_theta();
            let mut xs = vec![0.0; single.dim()];
            xs[0] = x[neuron];
            let w_span = full.w_span(neuron);
            let w_hat_full = &x[full.w_hat_range()];
            xs[single.w_hat_range()].copy_from_slice(&w_hat_full[w_span]);
            let th_span = full.theta_span(neuron);
            xs[single.theta_range()]
                .copy_from_slice(&x[full.theta_range()][th_span.clone()]);
            {
                let psi_full = &x[full.psi_range()];
                let psi_s = &mut xs[single.psi_range()];
                for (jj, j) in th_span.clone().enumerate() {
                    psi_s[jj] = psi_full[neuron * nt + j];
                }
            }
            {
                let p_full = &x[full.p_range()];
                let p_s = &mut xs[single.p_range()];
                for (ii, i) in th_span.clone().enumerate() {
                    for (jj, j) in th_span.clone().enumerate() {
                        p_s[ii * snt + jj] = p_full[i * nt + j];
                    }
                }
            }
            let mut dxs = vec![0.0; single.dim()];
            single.derivative(
                &gains,
                &v_meas,
                &u[neuron..neuron + 1],
                &xs,
                &mut dxs,
                &mut ObserverScratch::new(&single),
            );

            assert_eq!(dxs[0], dx[neuron], "dv_hat of neuron {neuron}");
            let w_span = full.w_span(neuron);
            let dw_full = &dx[full.w_hat_range()];
            assert_eq!(
                &dxs[single.w_hat_range()],
                &dw_full[w_span],
                "dw_hat of neuron {neuron}"
            );
            let dth_full = &dx[full.theta_range()][th_span.clone()];
            assert_eq!(
                &dxs[single.theta_range()],
                dth_full,
                "dtheta of neuron {neuron}"
            );
            let dpsi_full = &dx[full.psi_range()];
            let dpsi_s = &dxs[single.psi_range()];
            for (jj, j) in th_span.clone().enumerate() {
                assert_eq!(dpsi_s[jj], dpsi_full[neuron * nt + j], "dPsi col {j}");
            }
            let dp_full = &dx[full.p_range()];
            let dp_s = &dxs[single.p_range()];
            for (ii, i) in th_span.clone().enumerate() {
                for (jj, j) in th_span.clone().enumerate() {
                    assert_eq!(dp_s[ii * snt + jj], dp_full[i * nt + j], "dP ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn initial_state_has_unit_covariance_and_copied_measurement() {
        let net = hco_net();
        let obs = ObserverModel::single(net.clone(), Parametrisation::full(&net), 1).unwrap();
        let v = vec![-60.0, -52.0];
        let x = obs.initial_state(&v);
        assert_eq!(x.len(), obs.dim());
        assert_eq!(obs.v_hat(&x), &[-52.0]);
        assert!(obs.theta(&x).iter().all(|&z| z == 0.0));
        assert!(obs.psi(&x).iter().all(|&z| z == 0.0));
        let nt = obs.n_theta();
        assert_eq!(nt, 10);
        let p = obs.p(&x);
        for i in 0..nt {
            for j in 0..nt {
                assert_eq!(p[i * nt + j], if i == j { 1.0 } else { 0.0 });
            }
        }
        obs.check_covariance(0.0, &x).unwrap();
    }
}
