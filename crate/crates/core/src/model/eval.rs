//! Vector-field and regressor evaluation.
//!
//! The membrane dynamics of neuron `i` are
//!
//! ```text
//! c_i dv_i/dt = -sum_ion mu_ion prod(gates) (v_i - E_ion)
//!               - mu_leak (v_i - E_leak)
//!               - sum_syn mu_syn s (v_i - E_syn)
//!               - sum_gap mu_gap (v_i - v_j)
//!               + u_i
//! ```
//!
//! Because every term is linear in its conductance, the voltage dynamics can
//! be rewritten as `dv/dt = Phi(v, w, u) theta + b(v, w, u)` for any chosen
//! subset `theta` of conductances (a [`Parametrisation`]); the regressor
//! `Phi` is block-diagonal, one row per neuron, and `b` collects the input
//! plus all currents whose conductances are not estimated. This module
//! provides both evaluation routes — direct current summation and the
//! factored regressor form — which agree to rounding error; tests and the
//! acceptance suite exploit that redundancy.
//!
//! Per-neuron variants (`neuron_*`) operate on one neuron's internal-state
//! block so a decentralized observer can run on a single neuron while
//! treating the other measured voltages as exogenous inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::layout::StateLayout;
use crate::model::types::{CurrentLabel, GateKind, GateSpec, NetworkSpec};
use crate::num::Real;

/// Dissociation constant of the hard-coded calcium Hill term.
pub const CA_HILL_KD: f64 = 15.0;
/// Gain of the calcium influx `-0.01 * m_L * (v - E_Ca)`.
pub const CA_INFLUX_GAIN: f64 = 0.01;
/// Linear decay rate of the calcium pool (1/ms).
pub const CA_DECAY_RATE: f64 = 0.0025;

/// Steady-state value of a voltage-dependent gate.
///
/// Panics if called on a calcium-driven gate, which has no voltage curve.
pub fn gate_steady_state<R: Real>(gate: &GateSpec, v: R) -> R {
    gate.steady_state
        .expect("calcium-driven gate has no voltage steady state")
        .eval(v)
}

/// Time constant of a dynamic gate.
///
/// Panics if called on a static or calcium-driven gate.
pub fn gate_time_constant<R: Real>(gate: &GateSpec, v: R) -> R {
    gate.time_constant
        .expect("gate has no time constant")
        .eval(v)
}

/// Steady state and time constant of a dynamic gate, evaluated together so
/// curves composed from a shared rate pair pay for it once (bit-identical to
/// the two separate calls).
pub fn gate_kinetics<R: Real>(gate: &GateSpec, v: R) -> (R, R) {
    crate::rates::sigma_tau(
        gate.steady_state
            .expect("calcium-driven gate has no voltage steady state"),
        gate.time_constant.expect("gate has no time constant"),
        v,
    )
}

/// Saturation of the calcium pool, `ca / (15 + ca)`; maps `[0, inf)` into
/// `[0, 1)`.
pub fn calcium_activation<R: Real>(ca: R) -> R {
    ca / (R::of(CA_HILL_KD) + ca)
}

/// Calls `f(channel_index, mu, gate_product, v_i - E)` for every channel of
/// neuron `i`. `w_i` is the neuron's internal block.
fn for_each_channel<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    v_i: R,
    w_i: &[R],
    mut f: impl FnMut(usize, R, R, R),
) {
    let nl = layout.neuron(i);
    let ca = nl.ca.map_or(R::zero(), |ix| w_i[ix]);
    let mut slot = nl.gates.iter().peekable();
    for (c, nc) in net.neurons[i].channels.iter().enumerate() {
        let mut product = R::one();
        for (g, gate) in nc.channel.gates.iter().enumerate() {
            let value = match gate.kind {
                GateKind::Activation | GateKind::Inactivation => {
                    let s = slot.next().expect("layout gate slots exhausted");
                    debug_assert_eq!((s.channel, s.gate), (c, g));
                    w_i[s.w_index]
                }
                GateKind::StaticVoltage => gate_steady_state(gate, v_i),
                GateKind::CalciumDriven => calcium_activation(ca),
            };
            product = product * value.powi(gate.exponent as i32);
        }
        f(c, nc.mu, product, v_i - net.reversals.get(nc.channel.reversal));
    }
    debug_assert!(slot.peek().is_none(), "layout gate slots not consumed");
}

/// Total intrinsic current of neuron `i` (channels plus leak, no synapses or
/// gap junctions), positive outward.
pub fn neuron_intrinsic_current<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    v_i: R,
    w_i: &[R],
) -> R {
    let mut total = R::zero();
    for_each_channel(net, layout, i, v_i, w_i, |_, mu, product, driving| {
        total = total + mu * product * driving;
    });
    let leak = &net.neurons[i].leak;
    total + leak.mu * (v_i - net.reversals.get(leak.reversal))
}

/// Current of channel `c` on neuron `i`.
pub fn channel_current<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    c: usize,
    v_i: R,
    w_i: &[R],
) -> R {
    let mut out = R::zero();
    for_each_channel(net, layout, i, v_i, w_i, |ci, mu, product, driving| {
        if ci == c {
            out = mu * product * driving;
        }
    });
    out
}

/// Total synaptic current into neuron `i`, positive outward.
pub fn neuron_synaptic_current<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    v_i: R,
    w_i: &[R],
) -> R {
    let mut total = R::zero();
    for slot in &layout.neuron(i).syn_gates {
        let syn = &net.synapses[slot.synapse];
        total = total + syn.mu * w_i[slot.w_index] * (v_i - syn.reversal);
    }
    total
}

/// Total gap-junction current out of neuron `i`, `sum_j mu (v_i - v_j)`.
pub fn gap_current<R: Real>(net: &NetworkSpec<R>, i: usize, v: &[R]) -> R {
    let mut total = R::zero();
    for gap in &net.gaps {
        if gap.a == i {
            total = total + gap.mu * (v[i] - v[gap.b]);
        } else if gap.b == i {
            total = total + gap.mu * (v[i] - v[gap.a]);
        }
    }
    total
}

/// Time derivative of neuron `i`'s internal block `w_i` (gates, synaptic
/// gates, calcium). Needs the full measured voltage vector for presynaptic
/// voltages.
pub fn neuron_internal_derivative<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    v: &[R],
    w_i: &[R],
    dw_i: &mut [R],
) {
    let nl = layout.neuron(i);
    debug_assert_eq!(w_i.len(), nl.n_w);
    debug_assert_eq!(dw_i.len(), nl.n_w);
    let v_i = v[i];
    let channels = &net.neurons[i].channels;
    for slot in &nl.gates {
        let gate = &channels[slot.channel].channel.gates[slot.gate];
        let x = w_i[slot.w_index];
        let (sigma, tau) = gate_kinetics(gate, v_i);
        dw_i[slot.w_index] = (sigma - x) / tau;
    }
    for slot in &nl.syn_gates {
        let syn = &net.synapses[slot.synapse];
        let s = w_i[slot.w_index];
        dw_i[slot.w_index] =
            syn.a1 * syn.activation(v[syn.pre]) * (R::one() - s) - syn.a2 * s;
    }
    if let Some(ca_ix) = nl.ca {
        let ca = w_i[ca_ix];
        let influx = match nl.l_gate {
            Some(l_ix) => {
                R::of(-CA_INFLUX_GAIN) * w_i[l_ix] * (v_i - net.reversals.ca)
            }
            None => R::zero(),
        };
        dw_i[ca_ix] = influx - R::of(CA_DECAY_RATE) * ca;
    }
}

/// Time derivative of the full internal-state vector `w`.
pub fn internal_derivative<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    v: &[R],
    w: &[R],
    dw: &mut [R],
) {
    debug_assert_eq!(w.len(), layout.n_w());
    debug_assert_eq!(dw.len(), layout.n_w());
    for i in 0..net.n() {
        let nl = layout.neuron(i);
        let range = nl.w_offset..nl.w_offset + nl.n_w;
        neuron_internal_derivative(net, layout, i, v, &w[range.clone()], &mut dw[range]);
    }
}

/// Voltage derivative by direct current summation,
/// `dv_i/dt = (-I_intrinsic - I_syn - I_gap + u_i) / c_i`.
pub fn voltage_derivative<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    v: &[R],
    w: &[R],
    u: &[R],
    dv: &mut [R],
) {
    debug_assert_eq!(v.len(), net.n());
    debug_assert_eq!(u.len(), net.n());
    debug_assert_eq!(dv.len(), net.n());
    for i in 0..net.n() {
        let nl = layout.neuron(i);
        let w_i = &w[nl.w_offset..nl.w_offset + nl.n_w];
        let total = neuron_intrinsic_current(net, layout, i, v[i], w_i)
            + neuron_synaptic_current(net, layout, i, v[i], w_i)
            + gap_current(net, i, v);
        dv[i] = (u[i] - total) / net.neurons[i].capacitance;
    }
}

/// Internal state at the gating fixed point for clamped voltages `v`:
/// every gate at its steady-state value, every synaptic gate at its rest
/// value under the presynaptic voltage, calcium at the balance of influx and
/// decay.
pub fn steady_internal_state<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    v: &[R],
) -> Vec<R> {
    let mut w = vec![R::zero(); layout.n_w()];
    for i in 0..net.n() {
        let nl = layout.neuron(i);
        let v_i = v[i];
        let block = &mut w[nl.w_offset..nl.w_offset + nl.n_w];
        let channels = &net.neurons[i].channels;
        for slot in &nl.gates {
            let gate = &channels[slot.channel].channel.gates[slot.gate];
            block[slot.w_index] = gate_steady_state(gate, v_i);
        }
        for slot in &nl.syn_gates {
            let syn = &net.synapses[slot.synapse];
            let drive = syn.a1 * syn.activation(v[syn.pre]);
            block[slot.w_index] = drive / (drive + syn.a2);
        }
        if let Some(ca_ix) = nl.ca {
            block[ca_ix] = match nl.l_gate {
                Some(l_ix) => {
                    -R::of(CA_INFLUX_GAIN / CA_DECAY_RATE)
                        * block[l_ix]
                        * (v_i - net.reversals.ca)
                }
                None => R::zero(),
            };
        }
    }
    w
}

/// One conductance selected for estimation on a given neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatedConductance {
    /// An intrinsic channel, identified by its current label.
    Channel(CurrentLabel),
    /// An incoming synapse, identified by its presynaptic neuron.
    Synapse { pre: usize },
    /// The leak conductance.
    Leak,
}

/// Choice of which conductances form the estimated parameter vector.
///
/// Per neuron, the canonical ordering is: channels in declaration order,
/// then incoming synapses by presynaptic index, then leak. The global
/// parameter vector concatenates the per-neuron blocks in neuron order,
/// which makes the regressor block-diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parametrisation {
    pub per_neuron: Vec<Vec<EstimatedConductance>>,
}

impl Parametrisation {
    /// Every conductance of every neuron, in canonical order.
    pub fn full<R: Real>(net: &NetworkSpec<R>) -> Self {
        let per_neuron = (0..net.n())
            .map(|i| {
                let mut items: Vec<EstimatedConductance> = net.neurons[i]
                    .channels
                    .iter()
                    .map(|nc| EstimatedConductance::Channel(nc.channel.label))
                    .collect();
                for s in net.incoming_synapses(i) {
                    items.push(EstimatedConductance::Synapse {
                        pre: net.synapses[s].pre,
                    });
                }
                items.push(EstimatedConductance::Leak);
                items
            })
            .collect();
        Parametrisation { per_neuron }
    }

    /// Total number of estimated parameters.
    pub fn n_theta(&self) -> usize {
        self.per_neuron.iter().map(Vec::len).sum()
    }

    /// Column range of neuron `i`'s block in the global parameter vector.
    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.per_neuron[..i].iter().map(Vec::len).sum();
        start..start + self.per_neuron[i].len()
    }

    /// Checks that every item refers to something present on its neuron.
    pub fn validate<R: Real>(&self, net: &NetworkSpec<R>) -> Result<()> {
        if self.per_neuron.len() != net.n() {
            return Err(Error::config(format!(
                "parametrisation covers {} neurons, network has {}",
                self.per_neuron.len(),
                net.n()
            )));
        }
        for (i, items) in self.per_neuron.iter().enumerate() {
            for (j, item) in items.iter().enumerate() {
                if items[..j].contains(item) {
                    return Err(Error::config(format!(
                        "neuron {i}: duplicate estimated conductance"
                    )));
                }
                match *item {
                    EstimatedConductance::Channel(label) => {
                        if net.channel_index(i, label).is_none() {
                            return Err(Error::config(format!(
                                "neuron {i}: no channel labeled {}",
                                label.name()
                            )));
                        }
                    }
                    EstimatedConductance::Synapse { pre } => {
                        let found = net
                            .incoming_synapses(i)
                            .iter()
                            .any(|&s| net.synapses[s].pre == pre);
                        if !found {
                            return Err(Error::config(format!(
                                "neuron {i}: no synapse from neuron {pre}"
                            )));
                        }
                    }
                    EstimatedConductance::Leak => {}
                }
            }
        }
        Ok(())
    }

    /// The true parameter vector of `net` under this parametrisation.
    pub fn theta_true<R: Real>(&self, net: &NetworkSpec<R>) -> Vec<R> {
        let mut theta = Vec::with_capacity(self.n_theta());
        for (i, items) in self.per_neuron.iter().enumerate() {
            for item in items {
                theta.push(match *item {
                    EstimatedConductance::Channel(label) => {
                        let c = net
                            .channel_index(i, label)
                            .expect("validated parametrisation");
                        net.neurons[i].channels[c].mu
                    }
                    EstimatedConductance::Synapse { pre } => {
                        let s = net
                            .incoming_synapses(i)
                            .into_iter()
                            .find(|&s| net.synapses[s].pre == pre)
                            .expect("validated parametrisation");
                        net.synapses[s].mu
                    }
                    EstimatedConductance::Leak => net.neurons[i].leak.mu,
                });
            }
        }
        theta
    }

    /// Human-readable parameter names, prefixed with the neuron index when
    /// the parametrisation spans more than one neuron.
    pub fn names(&self) -> Vec<String> {
        let multi = self.per_neuron.len() > 1;
        let mut out = Vec::with_capacity(self.n_theta());
        for (i, items) in self.per_neuron.iter().enumerate() {
            for item in items {
                let base = match *item {
                    EstimatedConductance::Channel(label) => {
                        format!("mu_{}", label.name())
                    }
                    EstimatedConductance::Synapse { pre } => format!("mu_syn_{pre}"),
                    EstimatedConductance::Leak => "mu_leak".to_string(),
                };
                out.push(if multi { format!("n{i}.{base}") } else { base });
            }
        }
        out
    }
}

/// Current shape of one estimated item on neuron `i`: the factor multiplying
/// its conductance in the current balance (`gate product * (v_i - E)` for a
/// channel, `s * (v_i - E_syn)` for a synapse, `v_i - E_leak` for leak).
/// No capacitance scaling.
pub fn neuron_current_shape<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    item: EstimatedConductance,
    v_i: R,
    w_i: &[R],
) -> R {
    match item {
        EstimatedConductance::Channel(label) => {
            let target = net
                .channel_index(i, label)
                .expect("validated parametrisation");
            let mut shape = R::zero();
            for_each_channel(net, layout, i, v_i, w_i, |c, _, product, driving| {
                if c == target {
                    shape = product * driving;
                }
            });
            shape
        }
        EstimatedConductance::Synapse { pre } => {
            let nl = layout.neuron(i);
            let slot = nl
                .syn_gates
                .iter()
                .find(|slot| net.synapses[slot.synapse].pre == pre)
                .expect("validated parametrisation");
            w_i[slot.w_index] * (v_i - net.synapses[slot.synapse].reversal)
        }
        EstimatedConductance::Leak => v_i - net.reversals.get(net.neurons[i].leak.reversal),
    }
}

/// Sum of the currents on neuron `i` whose conductances are *not* in
/// `items`, including gap junctions (never estimated), positive outward.
pub fn neuron_known_current<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    items: &[EstimatedConductance],
    v: &[R],
    w_i: &[R],
) -> R {
    let v_i = v[i];
    let mut total = R::zero();
    let channels = &net.neurons[i].channels;
    for_each_channel(net, layout, i, v_i, w_i, |c, mu, product, driving| {
        let label = channels[c].channel.label;
        if !items.contains(&EstimatedConductance::Channel(label)) {
            total = total + mu * product * driving;
        }
    });
    for slot in &layout.neuron(i).syn_gates {
        let syn = &net.synapses[slot.synapse];
        if !items.contains(&EstimatedConductance::Synapse { pre: syn.pre }) {
            total = total + syn.mu * w_i[slot.w_index] * (v_i - syn.reversal);
        }
    }
    if !items.contains(&EstimatedConductance::Leak) {
        let leak = &net.neurons[i].leak;
        total = total + leak.mu * (v_i - net.reversals.get(leak.reversal));
    }
    total + gap_current(net, i, v)
}

/// Regressor row of neuron `i` at voltage-derivative scale: fills
/// `row[j] = -shape_j / c_i` and returns
/// `b_i = (u_i - known currents) / c_i`, so that
/// `dv_i/dt = row . theta_block + b_i`.
pub fn neuron_regressor_row<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    i: usize,
    items: &[EstimatedConductance],
    v: &[R],
    w_i: &[R],
    u_i: R,
    row: &mut [R],
) -> R {
    debug_assert_eq!(row.len(), items.len());
    let c = net.neurons[i].capacitance;
    for (j, &item) in items.iter().enumerate() {
        row[j] = -neuron_current_shape(net, layout, i, item, v[i], w_i) / c;
    }
    (u_i - neuron_known_current(net, layout, i, items, v, w_i)) / c
}

/// Full block-diagonal regressor: fills `phi` (row-major, `n x n_theta`)
/// and `b` (length `n`) such that `dv/dt = phi theta + b`.
pub fn regressor<R: Real>(
    net: &NetworkSpec<R>,
    layout: &StateLayout,
    par: &Parametrisation,
    v: &[R],
    w: &[R],
    u: &[R],
    phi: &mut [R],
    b: &mut [R],
) {
    let n = net.n();
    let n_theta = par.n_theta();
    debug_assert_eq!(phi.len(), n * n_theta);
    debug_assert_eq!(b.len(), n);
    for x in phi.iter_mut() {
        *x = R::zero();
    }
    for i in 0..n {
        let nl = layout.neuron(i);
        let w_i = &w[nl.w_offset..nl.w_offset + nl.n_w];
        let cols = par.block_range(i);
        b[i] = neuron_regressor_row(
            net,
            layout,
            i,
            &par.per_neuron[i],
            v,
            w_i,
            u[i],
            &mut phi[i * n_theta + cols.start..i * n_theta + cols.end],
        );
    }
}
