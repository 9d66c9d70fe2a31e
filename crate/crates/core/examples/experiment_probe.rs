//! End-to-end smoke probe: run each stock experiment with its default
//! configuration (step-halving checks on) and print the serialized report
//! and wall time. Not part of the test suite.

use std::time::Instant;

use conductance::experiments::{
    run_network, run_rejection, run_tracking, NetworkConfig, RejectionConfig, TrackingConfig,
};

fn show<T: serde::Serialize>(label: &str, started: Instant, report: &T) {
    println!(
        "==== {label}: {:.1} s wall ====",
        started.elapsed().as_secs_f64()
    );
    println!("{}", serde_json::to_string_pretty(report).unwrap());
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".to_string());

    if which == "all" || which == "tracking" {
        let mut cfg = TrackingConfig {
            check_numerics: true,
            ..TrackingConfig::default()
        };
        if let Some(dt) = std::env::args().nth(2).and_then(|s| s.parse().ok()) {
            cfg.dt = dt;
        }
        let t0 = Instant::now();
        match run_tracking(&cfg) {
            Ok(r) => show("tracking", t0, &r),
            Err(e) => println!("tracking FAILED: {e}"),
        }
    }

    if which == "all" || which == "rejection" {
        let cfg = RejectionConfig {
            check_numerics: true,
            ..RejectionConfig::default()
        };
        let t0 = Instant::now();
        match run_rejection(&cfg) {
            Ok(r) => show("rejection", t0, &r),
            Err(e) => println!("rejection FAILED: {e}"),
        }
    }

    if which == "all" || which == "network" {
        let cfg = NetworkConfig {
            check_numerics: true,
            ..NetworkConfig::default()
        };
        let t0 = Instant::now();
        match run_network(&cfg) {
            Ok(r) => show("network", t0, &r),
            Err(e) => println!("network FAILED: {e}"),
        }
    }
}
