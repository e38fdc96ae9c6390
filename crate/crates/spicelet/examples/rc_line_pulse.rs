//! Pulse distortion along an RC line: the 10-90% rise time stretches at
//! every stage.
//!
//!     cargo run --example rc_line_pulse

use spicelet::analysis::{transient, NewtonOptions};
use spicelet::corpus;
use spicelet::mna::IntegrationMethod;
use spicelet::topology::build_node_map;

fn crossing(time: &[f64], trace: &[f64], level: f64) -> f64 {
    for k in 1..trace.len() {
        if trace[k - 1] < level && trace[k] >= level {
            let frac = (level - trace[k - 1]) / (trace[k] - trace[k - 1]);
            return time[k - 1] + frac * (time[k] - time[k - 1]);
        }
    }
    f64::NAN
}

fn main() {
    let deck = corpus::load("rcline.cir");
    let nodes = build_node_map(&deck);
    let r = transient(
        &deck,
        2e-7,
        1e-4,
        IntegrationMethod::Trapezoidal,
        false,
        &NewtonOptions::default(),
    )
    .unwrap();

    println!("stage   t(10%) [us]   t(90%) [us]   rise [us]");
    for k in 1..=5 {
        let idx = nodes.index_of(&format!("s{k}")).unwrap();
        let trace: Vec<f64> = r.rows.iter().map(|row| row[idx]).collect();
        let t10 = crossing(&r.time, &trace, 0.5);
        let t90 = crossing(&r.time, &trace, 4.5);
        println!(
            "  s{k}    {:>8.3}      {:>8.3}      {:>7.3}",
            t10 * 1e6,
            t90 * 1e6,
            (t90 - t10) * 1e6
        );
    }
}
