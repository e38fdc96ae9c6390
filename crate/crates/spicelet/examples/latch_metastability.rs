//! Metastability of a cross-coupled CMOS latch: start both internal nodes
//! near the unstable midpoint and watch the resolution time grow as the
//! initial imbalance shrinks.
//!
//!     cargo run --example latch_metastability

use spicelet::analysis::{transient, NewtonOptions};
use spicelet::corpus;
use spicelet::mna::IntegrationMethod;
use spicelet::netlist::Directive;
use spicelet::topology::build_node_map;

fn main() {
    let base = corpus::load("latch.cir");
    let nodes = build_node_map(&base);
    let q = nodes.index_of("q").unwrap();
    let qb = nodes.index_of("qb").unwrap();

    println!("imbalance [V]   resolution time [ns]   resolved state");
    let mut previous: Option<f64> = None;
    for decade in 1..=6 {
        let eps = 10f64.powi(-decade);
        let mut deck = base.clone();
        for d in &mut deck.directives {
            if let Directive::Ic(map) = d {
                map.insert("q".into(), 2.5 + eps);
                map.insert("qb".into(), 2.5 - eps);
            }
        }
        // backward Euler: trapezoidal ringing artifacts would only confuse
        // the picture near the metastable point
        let r = transient(
            &deck,
            1e-9,
            2e-6,
            IntegrationMethod::BackwardEuler,
            true,
            &NewtonOptions::default(),
        )
        .unwrap();
        let t_res = r
            .rows
            .iter()
            .enumerate()
            .find(|(_, row)| (row[q] - row[qb]).abs() >= 4.5)
            .map(|(k, _)| r.time[k])
            .unwrap_or(f64::NAN);
        let last = r.rows.last().unwrap();
        let state = if last[q] > last[qb] {
            "q high"
        } else {
            "q low"
        };
        let delta = previous.map_or(String::new(), |p| {
            format!("   (+{:.0} ns per decade)", (t_res - p) * 1e9)
        });
        println!(
            "   1e-{decade}           {:>7.1}            {state}{delta}",
            t_res * 1e9
        );
        previous = Some(t_res);
    }
}
