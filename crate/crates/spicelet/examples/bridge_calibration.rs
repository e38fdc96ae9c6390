//! Calibration curve for a fixed Wheatstone bridge: sweep the measured arm
//! through balance and record the bridge output.
//!
//!     cargo run --example bridge_calibration

use spicelet::analysis::{solve_op, NewtonOptions};
use spicelet::corpus;
use spicelet::netlist::Element;
use spicelet::topology::build_node_map;

fn main() {
    let base = corpus::load("wheatstone.cir");
    let nodes = build_node_map(&base);
    println!("R4 [ohm]   V(left)-V(right) [V]");
    let mut r4 = 500.0;
    while r4 <= 2000.0 {
        let mut deck = base.clone();
        for e in &mut deck.elements {
            if let Element::Resistor { name, ohms, .. } = e {
                if name == "R4" {
                    *ohms = r4;
                }
            }
        }
        let op = solve_op(&deck, &NewtonOptions::default()).unwrap();
        let out = op.voltage(&nodes, "left").unwrap() - op.voltage(&nodes, "right").unwrap();
        println!("{r4:>7}    {out:+.6}");
        r4 += 125.0;
    }
    println!();
    println!("the output nulls where R1*R4 = R2*R3, here at R4 = 1000 ohm");
}
