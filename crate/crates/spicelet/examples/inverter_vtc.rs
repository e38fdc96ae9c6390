//! CMOS inverter voltage transfer characteristic at three pull-up/pull-down
//! width ratios; the switching threshold follows the ratio.
//!
//!     cargo run --example inverter_vtc

use spicelet::analysis::{dc_sweep, NewtonOptions};
use spicelet::corpus;
use spicelet::topology::build_node_map;

fn main() {
    for (deck_name, ratio) in [
        ("inverter_wp05.cir", 0.5),
        ("inverter.cir", 1.0),
        ("inverter_wp20.cir", 2.0),
    ] {
        let deck = corpus::load(deck_name);
        let nodes = build_node_map(&deck);
        let out = nodes.index_of("out").unwrap();
        let sweep = dc_sweep(&deck, "VIN", 0.0, 5.0, 0.01, &NewtonOptions::default()).unwrap();

        // where the curve meets vout = vin
        let mut crossing = f64::NAN;
        for k in 1..sweep.axis.len() {
            let d0 = sweep.rows[k - 1][out] - sweep.axis[k - 1];
            let d1 = sweep.rows[k][out] - sweep.axis[k];
            if d0 >= 0.0 && d1 < 0.0 {
                crossing = sweep.axis[k - 1] + d0 / (d0 - d1) * 0.01;
                break;
            }
        }
        println!("Wp/Wn = {ratio:<3}  switching threshold = {crossing:.4} V");

        // a coarse picture of the curve itself
        if ratio == 1.0 {
            println!("\n  vin [V]  vout [V]   (matched inverter)");
            for k in (0..sweep.axis.len()).step_by(50) {
                println!("  {:>5.2}    {:>6.3}", sweep.axis[k], sweep.rows[k][out]);
            }
            println!();
        }
    }
}
