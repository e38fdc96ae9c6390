//! Cross-validate the simulator against the finite-difference Poisson
//! solver on resistor lattices, and measure a few effective resistances.
//!
//!     cargo run --example lattice_vs_poisson

use std::collections::BTreeMap;

use spicelet::analysis::{solve_op, NewtonOptions};
use spicelet::lattice::{
    effective_resistance, gen_lattice, poisson_fd_solve, Boundary, FdProblem, LatticeSpec,
};
use spicelet::netlist::{Element, Netlist, Waveform};
use spicelet::topology::build_node_map;

fn main() {
    println!("grid      worst |v_mna - v_fd| / max|v|");
    for n in [2usize, 3, 5, 10, 20] {
        let spec = LatticeSpec {
            rows: n,
            cols: n,
            r_link: 1.0,
            grounded_periphery: false,
        };
        let inject = (n / 2, n / 2);
        let pin = (0, 0);

        // independent route: five-point stencil, Neumann boundary, gauge
        // fixed by pinning the return node
        let mut injections = BTreeMap::new();
        injections.insert(inject, 1.0);
        injections.insert(pin, -1.0);
        let fd = poisson_fd_solve(&FdProblem {
            rows: n,
            cols: n,
            g_link: 1.0,
            injections,
            boundary: Boundary::Neumann { pin },
        })
        .unwrap();

        // simulator route: the same grid as a netlist with a test source
        let pin_name = spec.node_name(pin.0, pin.1);
        let mut deck = Netlist::new("lattice drive");
        for e in &gen_lattice(&spec).elements {
            if let Element::Resistor { name, n1, n2, ohms } = e {
                let fix = |s: &str| {
                    if *s == pin_name {
                        "0".into()
                    } else {
                        s.to_string()
                    }
                };
                deck.push_element(Element::Resistor {
                    name: name.clone(),
                    n1: fix(n1),
                    n2: fix(n2),
                    ohms: *ohms,
                });
            }
        }
        deck.push_element(Element::ISource {
            name: "I1".into(),
            np: "0".into(),
            nn: spec.node_name(inject.0, inject.1),
            waveform: Waveform::Dc(1.0),
            ac_mag: None,
            ac_phase: None,
        });
        let op = solve_op(&deck, &NewtonOptions::default()).unwrap();
        let nodes = build_node_map(&deck);

        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mna = if (i, j) == pin {
                    0.0
                } else {
                    op.voltage(&nodes, &spec.node_name(i, j)).unwrap()
                };
                worst = worst.max((mna - fd[i * n + j]).abs() / scale);
            }
        }
        println!("{n:>2}x{n:<2}     {worst:.3e}");
    }

    let grid = gen_lattice(&LatticeSpec {
        rows: 2,
        cols: 2,
        r_link: 1.0,
        grounded_periphery: false,
    });
    println!();
    println!(
        "2x2 adjacent pair: {} ohm (series-parallel says 0.75)",
        effective_resistance(&grid, "n0_0", "n0_1").unwrap()
    );
    println!(
        "2x2 diagonal pair: {} ohm (two 2-ohm paths say 1.0)",
        effective_resistance(&grid, "n0_0", "n1_1").unwrap()
    );
}
