//! Cross-checks the library's bursting-neuron vector field against a fully
//! hand-spelled restatement of the model equations that shares no code with
//! the library: every rate function, current, and state derivative is written
//! out verbatim below. Agreement at random states certifies the assembled
//! field (channel currents, gate kinetics, calcium dynamics, input scaling)
//! in one shot.

use conductance::library::{bursting_neuron, single_neuron_network, ConductanceVector};
use conductance::model::NetworkSystem;
use conductance::sim::System;

/// Everything below 1e-12 relative is bookkeeping noise from operation
/// order; anything above means the two restatements disagree.
const FIELD_MATCH_TOL: f64 = 1e-12;

// ---- Hand-spelled kinetics ----

fn alpha_m_na(v: f64) -> f64 {
    -0.025 * (v + 40.0) / (f64::exp(-(v + 40.0) / 10.0) - 1.0)
}
fn beta_m_na(v: f64) -> f64 {
    f64::exp(-(v + 65.0) / 18.0)
}
fn alpha_h_na(v: f64) -> f64 {
    0.0175 * f64::exp(-(v + 65.0) / 20.0)
}
fn beta_h_na(v: f64) -> f64 {
    0.25 / (1.0 + f64::exp(-(v + 35.0) / 10.0))
}
fn alpha_m_k(v: f64) -> f64 {
    0.0025 * (v + 55.0) / (1.0 - f64::exp(-(v + 55.0) / 10.0))
}
fn beta_m_k(v: f64) -> f64 {
    0.03125 * f64::exp(-(v + 65.0) / 80.0)
}
fn alpha_m_h(v: f64) -> f64 {
    f64::exp(-14.59 - 0.086 * v)
}
fn beta_m_h(v: f64) -> f64 {
    f64::exp(-1.87 + 0.0701 * v)
}

struct Gate {
    sigma: f64,
    tau: f64,
}

fn gates(v: f64) -> [Gate; 9] {
    // Order: m_na, h_na, m_k, m_h, m_a, h_a, m_t, h_t, m_l.
    let mna = Gate {
        sigma: alpha_m_na(v) / (alpha_m_na(v) + beta_m_na(v)),
        tau: 0.2 / (alpha_m_na(v) + beta_m_na(v)),
    };
    let hna = Gate {
        sigma: alpha_h_na(v) / (alpha_h_na(v) + beta_h_na(v)),
        tau: 0.2 / (alpha_h_na(v) + beta_h_na(v)),
    };
    let vk = v - 10.0;
    let mk = Gate {
        sigma: alpha_m_k(vk) / (alpha_m_k(vk) + beta_m_k(vk)),
        tau: 0.2 / (alpha_m_k(vk) + beta_m_k(vk)),
    };
    let mh = Gate {
        sigma: alpha_m_h(v) / (alpha_m_h(v) + beta_m_h(v)),
        tau: 1.0 / (alpha_m_h(v) + beta_m_h(v)),
    };
    let ma = Gate {
        sigma: 1.0 / (1.0 + f64::exp(-(v + 90.0) / 8.5)),
        tau: 0.37
            + 1.0 / (0.2 * (f64::exp((v + 35.82) / 19.697) + f64::exp((v + 79.69) / -12.7))),
    };
    let ha = Gate {
        sigma: 1.0 / (1.0 + f64::exp((v + 78.0) / 6.0)),
        tau: if v < -63.0 {
            1.0 / (0.2 * (f64::exp((v + 46.05) / 5.0) + f64::exp((v + 238.4) / -37.45)))
        } else {
            19.0
        },
    };
    let mt = Gate {
        sigma: 1.0 / (1.0 + f64::exp(-(v + 57.0) / 6.2)),
        tau: 0.612 + 1.0 / (f64::exp(-(v + 131.6) / 16.7) + f64::exp((v + 16.8) / 18.2)),
    };
    let ht = Gate {
        sigma: 1.0 / (1.0 + f64::exp((v + 81.0) / 4.03)),
        tau: if v < -80.0 {
            f64::exp((v + 467.0) / 66.6)
        } else {
            f64::exp(-(v + 21.88) / 10.2) + 28.0
        },
    };
    let ml = Gate {
        sigma: 1.0 / (1.0 + f64::exp(-(v + 55.0) / 3.0)),
        tau: 72.0 * f64::exp(-(v + 45.0) * (v + 45.0) / 400.0) + 6.0,
    };
    [mna, hna, mk, mh, ma, ha, mt, ht, ml]
}

fn sigma_kir(v: f64) -> f64 {
    1.0 / (1.0 + f64::exp((v + 107.9) / 9.7))
}

/// Hand-spelled field. State: [v, m_na, h_na, m_k, m_h, m_a, h_a, m_t, h_t,
/// m_l, ca].
fn hand_field(mu: &[f64; 9], x: &[f64], u: f64, dx: &mut [f64]) {
    let (e_na, e_h, e_ca, e_k, e_leak, c) = (45.0, -43.0, 120.0, -90.0, -55.0, 0.1);
    let v = x[0];
    let (m_na, h_na, m_k, m_h, m_a, h_a, m_t, h_t, m_l, ca) = (
        x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8], x[9], x[10],
    );
    let i = mu[0] * m_na.powi(3) * h_na * (v - e_na)
        + mu[1] * m_h * (v - e_h)
        + mu[2] * m_t.powi(2) * h_t * (v - e_ca)
        + mu[3] * m_a.powi(4) * h_a * (v - e_k)
        + mu[4] * m_k.powi(4) * (v - e_k)
        + mu[5] * m_l * (v - e_ca)
        + mu[6] * (ca / (15.0 + ca)).powi(4) * (v - e_k)
        + mu[7] * sigma_kir(v) * (v - e_k)
        + mu[8] * (v - e_leak);
    dx[0] = (-i + u) / c;
    let g = gates(v);
    let state = [m_na, h_na, m_k, m_h, m_a, h_a, m_t, h_t, m_l];
    for (k, (gk, xk)) in g.iter().zip(state).enumerate() {
        dx[1 + k] = (gk.sigma - xk) / gk.tau;
    }
    dx[10] = -0.01 * m_l * (v - e_ca) - 0.0025 * ca;
}

#[test]
fn vector_field_matches_a_hand_spelled_restatement() {
    let mu = ConductanceVector {
        na: 120.0,
        h: 0.1,
        t: 2.0,
        a: 3.0,
        k: 80.0,
        l: 0.4,
        k_ca: 2.0,
        kir: 1.5,
        leak: 0.1,
    };
    let net = single_neuron_network(bursting_neuron(&mu));
    let sys = NetworkSystem::new(net);
    let layout = sys.layout().clone();
    let nl = layout.neuron(0);

    // Map the hand-state order (m_na, h_na, m_k, m_h, m_a, h_a, m_t, h_t,
    // m_l) onto the library's per-(channel, gate) slots.
    let by_channel_gate = |c: usize, g: usize| -> usize {
        nl.gates
            .iter()
            .find(|s| s.channel == c && s.gate == g)
            .map(|s| s.w_index)
            .unwrap()
    };
    let hand_to_lib = [
        by_channel_gate(0, 0), // m_na
        by_channel_gate(0, 1), // h_na
        by_channel_gate(4, 0), // m_k
        by_channel_gate(1, 0), // m_h
        by_channel_gate(3, 0), // m_a
        by_channel_gate(3, 1), // h_a
        by_channel_gate(2, 0), // m_t
        by_channel_gate(2, 1), // h_t
        by_channel_gate(5, 0), // m_l
    ];
    let ca_ix = nl.ca.unwrap();

    // Deterministic pseudo-random states across the physiological range.
    let mut seed = 0x243f6a8885a308d3u64;
    let mut rand = move || {
        seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (seed >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let v = -100.0 + 160.0 * rand();
        let mut hand_x = vec![v];
        for _ in 0..9 {
            hand_x.push(rand());
        }
        hand_x.push(40.0 * rand());
        let u = -5.0 + 10.0 * rand();

        let mut lib_x = vec![0.0; 1 + nl.n_w];
        lib_x[0] = v;
        for (h, &w_ix) in hand_to_lib.iter().enumerate() {
            lib_x[1 + w_ix] = hand_x[1 + h];
        }
        lib_x[1 + ca_ix] = hand_x[10];

        let mut hand_dx = vec![0.0; 11];
        hand_field(&mu.as_array(), &hand_x, u, &mut hand_dx);
        let mut lib_dx = vec![0.0; lib_x.len()];
        sys.derivative(0.0, &lib_x, &[u], &mut lib_dx);

        let mut pairs = vec![(hand_dx[0], lib_dx[0])];
        for (h, &w_ix) in hand_to_lib.iter().enumerate() {
            pairs.push((hand_dx[1 + h], lib_dx[1 + w_ix]));
        }
        pairs.push((hand_dx[10], lib_dx[1 + ca_ix]));
        for (k, (a, b)) in pairs.iter().enumerate() {
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-12);
            assert!(
                rel <= FIELD_MATCH_TOL,
                "component {k} disagrees at v = {v:.3}: hand {a:.12e}, library {b:.12e}"
            );
            worst = worst.max(rel);
        }
    }
    assert!(worst <= FIELD_MATCH_TOL);
}
