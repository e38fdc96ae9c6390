//! Damped ringing of a series RLC driven by a step: measure the oscillation
//! frequency from zero crossings and compare with 1/(2π√(LC)), under both
//! integration rules.
//!
//!     cargo run --example rlc_ringing

use spicelet::analysis::{transient, NewtonOptions};
use spicelet::corpus;
use spicelet::mna::IntegrationMethod;
use spicelet::topology::build_node_map;

fn measure(method: IntegrationMethod) -> f64 {
    let deck = corpus::load("rlc.cir");
    let nodes = build_node_map(&deck);
    let b = nodes.index_of("b").unwrap();
    let r = transient(&deck, 5e-7, 2e-3, method, false, &NewtonOptions::default()).unwrap();
    let trace: Vec<f64> = r.rows.iter().map(|row| row[b]).collect();
    let mut crossings = Vec::new();
    for k in 1..trace.len() {
        let (a, v) = (trace[k - 1] - 1.0, trace[k] - 1.0);
        if a.signum() != v.signum() && a != 0.0 {
            crossings.push(r.time[k - 1] + a / (a - v) * 5e-7);
        }
        if crossings.len() >= 9 {
            break;
        }
    }
    let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    1.0 / (2.0 * gaps.iter().sum::<f64>() / gaps.len() as f64)
}

fn main() {
    let f0 = 1.0 / (2.0 * std::f64::consts::PI * (1e-3f64 * 1e-6).sqrt());
    println!("closed form 1/(2π√(LC)) = {f0:.1} Hz  (ζ = 0.0316)");
    for (label, method) in [
        ("trapezoidal   ", IntegrationMethod::Trapezoidal),
        ("backward euler", IntegrationMethod::BackwardEuler),
    ] {
        let f = measure(method);
        println!(
            "{label}  measured {f:.1} Hz   ({:+.3}%)",
            (f - f0) / f0 * 100.0
        );
    }
}
