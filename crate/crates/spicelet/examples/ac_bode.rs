//! Bode data for an RC lowpass with its corner at 1 kHz, plus the midband
//! gain of the common-source stage from the corpus.
//!
//!     cargo run --example ac_bode

use spicelet::analysis::{ac_analysis, solve_op, DeviceOpInfo, NewtonOptions};
use spicelet::corpus;
use spicelet::netlist::{parse_netlist, AcScale};
use spicelet::topology::build_node_map;

fn main() {
    let deck =
        parse_netlist("rc lowpass\nV1 in 0 0 AC 1\nR1 in out 1k\nC1 out 0 159.155n\n").unwrap();
    let nodes = build_node_map(&deck);
    let out = nodes.index_of("out").unwrap();
    let r = ac_analysis(&deck, AcScale::Dec, 4, 10.0, 1e6, &NewtonOptions::default()).unwrap();

    println!("RC lowpass, f_c = 1 kHz");
    println!("   f [Hz]      |H| [dB]    phase [deg]");
    for (f, row) in r.freq.iter().zip(&r.rows) {
        let h = row[out];
        println!(
            "{f:>10.1}   {:>8.3}    {:>8.3}",
            20.0 * h.norm().log10(),
            h.arg().to_degrees()
        );
    }

    let amp = corpus::load("common_source.cir");
    let amp_nodes = build_node_map(&amp);
    let d = amp_nodes.index_of("d").unwrap();
    let op = solve_op(&amp, &NewtonOptions::default()).unwrap();
    let (gm, gds) = op
        .devices
        .iter()
        .find_map(|dev| match dev.info {
            DeviceOpInfo::Mosfet { gm, gds, .. } => Some((gm, gds)),
            _ => None,
        })
        .unwrap();
    let ac = ac_analysis(&amp, AcScale::Dec, 10, 1.0, 1e5, &NewtonOptions::default()).unwrap();
    let h = ac.rows[30][d]; // 1 kHz
    println!();
    println!("common-source stage at 1 kHz:");
    println!("  simulated gain    {:.4}", h.norm());
    println!(
        "  -gm*(RD || ro)    {:.4}   (gm, gds taken at the solved OP)",
        gm / (1.0 / 2000.0 + gds)
    );
}
