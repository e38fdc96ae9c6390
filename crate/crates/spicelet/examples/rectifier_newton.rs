//! Newton solution of the diode rectifier: iteration count, the solved
//! junction point, and a bisection cross-check of the diode voltage.
//!
//!     cargo run --example rectifier_newton

use spicelet::analysis::{solve_op, DeviceOpInfo, NewtonOptions};
use spicelet::corpus;
use spicelet::topology::build_node_map;

fn main() {
    let deck = corpus::load("rectifier.cir");
    let nodes = build_node_map(&deck);
    let op = solve_op(&deck, &NewtonOptions::default()).unwrap();

    println!(
        "converged in {} iterations ({:?})",
        op.iterations, op.homotopy
    );
    let v_d = op.voltage(&nodes, "d").unwrap();
    for dev in &op.devices {
        if let DeviceOpInfo::Diode { v, i, g } = dev.info {
            println!(
                "{}: v = {v:.6} V, i = {:.4} mA, g = {:.4} mS",
                dev.name,
                i * 1e3,
                g * 1e3
            );
        }
    }

    // independent route: bisection on Is*(exp(v/Vt)-1) = (5-v)/R
    let f = |v: f64| 1e-14 * ((v / 0.025852).exp() - 1.0) - (5.0 - v) / 1000.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    println!("bisection oracle:  v = {:.6} V", 0.5 * (lo + hi));
    println!("difference:        {:.2e} V", (v_d - 0.5 * (lo + hi)).abs());
    println!(
        "kcl worst residual: {:.2e} A at node {}",
        op.kcl.worst_sum, op.kcl.worst_node
    );
}
