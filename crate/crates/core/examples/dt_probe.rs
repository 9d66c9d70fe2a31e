//! Step-size calibration probe: integrate the stock bursting neurons at
//! several fixed steps and compare spike/burst statistics and the
//! step-halving deviation. Not part of the test suite.

use std::time::Instant;

use conductance::experiments::metrics::BurstMetrics;
use conductance::library::{bursting_neuron, single_neuron_network, ConductanceVector};
use conductance::model::NetworkSystem;
use conductance::sim::{
    halvedstep_check, simulate, InputSet, PiecewiseInput, Recorder, SimConfig,
};

fn probe(label: &str, mu: [f64; 9], u: f64) {
    println!("{label}: mu = {mu:?}, u = {u}");
    let net = single_neuron_network(bursting_neuron(&ConductanceVector::from_array(mu)));
    let sys = NetworkSystem::new(net);
    let x0 = sys.initial_state(&[-65.0]);

    let inputs = InputSet {
        channels: vec![PiecewiseInput::constant(0.0, u)],
    };
    let t_end = 10_000.0;

    for dt in [0.005f64, 0.002, 0.001, 0.0005] {
        let stride = (0.1 / dt).round() as usize;
        let cfg = SimConfig {
            dt,
            t_start: 0.0,
            t_end,
            record_stride: stride,
        };
        let mut rec = Recorder::new(vec!["v".to_string()], |_t, x: &[f64], _u, out| {
            out.push(x[0]);
        });
        let start = Instant::now();
        let traj = match simulate(&sys, &cfg, &inputs, &x0, &mut rec) {
            Ok(t) => t,
            Err(e) => {
                println!("  dt = {dt}: FAILED: {e}");
                continue;
            }
        };
        let elapsed = start.elapsed();
        let v = traj.column("v").unwrap();
        let m = BurstMetrics::detect(traj.times(), v, 0.0, 300.0);
        let spb = m.spikes_per_burst();
        print!(
            "  dt = {dt}: {} bursts, spikes/burst {:?}, period {}, stability(3) {:.5}, {:.2} s wall",
            m.n_bursts(),
            &spb[..spb.len().min(6)],
            m.period().map(|p| format!("{p:.2} ms")).unwrap_or("n/a".into()),
            m.period_stability(3).unwrap_or(f64::NAN),
            elapsed.as_secs_f64(),
        );
        match halvedstep_check(&sys, &cfg, &inputs, &x0, &[0], conductance::experiments::transient_mask()) {
            Ok(r) => println!(
                "; halved-step masked {:.3e} mV, unmasked {:.3e} mV ({}/{} masked)",
                r.max_deviation, r.max_deviation_unmasked, r.n_masked, r.n_samples
            ),
            Err(e) => println!("; halved-step FAILED: {e}"),
        }
    }
}

fn main() {
    probe("reference", [120.0, 0.1, 2.0, 0.0, 80.0, 0.4, 2.0, 0.0, 0.1], -2.0);
    probe("slow plant", [60.0, 0.1, 2.0, 0.0, 80.0, 0.4, 2.0, 0.0, 0.12], -2.0);
    probe("strong burster", [130.0, 0.1, 3.2, 0.0, 80.0, 1.0, 2.0, 0.0, 0.1], -1.0);
}
