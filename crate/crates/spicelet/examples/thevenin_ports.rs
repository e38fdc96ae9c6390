//! One-port reductions: Thevenin voltage and resistance seen from a few
//! corpus-deck ports, measured with a test current source.
//!
//!     cargo run --example thevenin_ports

use spicelet::analysis::{thevenin_port, NewtonOptions};
use spicelet::corpus;

fn main() {
    let opts = NewtonOptions::default();
    println!("deck            port        v_th [V]      r_th [ohm]");
    for (deck_name, a, b) in [
        ("divider3.cir", "a", "0"),
        ("divider3.cir", "b", "0"),
        ("ladder.cir", "n3", "0"),
        ("wheatstone.cir", "left", "right"),
    ] {
        let deck = corpus::load(deck_name);
        let (v_th, r_th) = thevenin_port(&deck, a, b, &opts).unwrap();
        println!("{deck_name:<15} {a:>5}-{b:<5} {v_th:>10.6}    {r_th:>10.4}");
    }
    println!();
    println!("the balanced bridge port shows 0 V behind 1 kohm (two 500-ohm halves)");
}
