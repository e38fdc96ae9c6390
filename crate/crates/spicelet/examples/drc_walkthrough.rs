//! Walk the malformed-deck corpus through the design-rule checks: each deck
//! trips exactly the guard it was written to demonstrate.
//!
//!     cargo run --example drc_walkthrough

use spicelet::corpus::{deck_path, malformed_decks};
use spicelet::netlist::parse_netlist;
use spicelet::topology::check_drc;

fn main() {
    for (name, _) in malformed_decks() {
        let text = std::fs::read_to_string(deck_path(name)).unwrap();
        println!("{name}:");
        match parse_netlist(&text) {
            Ok(deck) => {
                for v in check_drc(&deck) {
                    println!("  {v}");
                }
            }
            Err(e) => {
                for d in &e.diagnostics {
                    println!("  parse: {d}");
                }
            }
        }
        println!();
    }
}
