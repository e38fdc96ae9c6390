//! Rectangular resistor lattices and the finite-difference Poisson oracle.
//!
//! [`gen_lattice`] emits a deck for a rows×cols grid of equal link resistors,
//! node `(i, j)` named `n{i}_{j}`; the grounded variant ties every boundary
//! node to `0` through one extra link resistor. The ungrounded deck contains
//! no ground reference at all — a source and a ground still have to be added
//! before it can be simulated.
//!
//! [`poisson_fd_solve`] solves the same grid as a five-point-stencil linear
//! system assembled directly from the lattice geometry, with Dirichlet or
//! Neumann boundary handling. It never touches the MNA stamping path, which
//! is the point: node potentials computed both ways must agree, and the test
//! suite holds them to 1e-9 relative on grids up to 20×20.

use std::collections::BTreeMap;

use crate::analysis::{solve_op, AnalysisError, NewtonOptions};
use crate::linalg::{lu_factor, DenseMatrix, LinalgError};
use crate::netlist::{same_name, Element, Netlist, Waveform, GROUND};
use crate::topology::build_node_map;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSpec {
    pub rows: usize,
    pub cols: usize,
    pub r_link: f64,
    pub grounded_periphery: bool,
}

impl LatticeSpec {
    pub fn node_name(&self, row: usize, col: usize) -> String {
        format!("n{row}_{col}")
    }
}

/// Generate the lattice deck: row-major over nodes, the right-going link
/// first, then the down-going one; periphery resistors (grounded variant)
/// follow in the same node order. All links share `r_link`.
pub fn gen_lattice(spec: &LatticeSpec) -> Netlist {
    assert!(
        spec.rows >= 1 && spec.cols >= 1,
        "lattice needs rows, cols ≥ 1"
    );
    assert!(spec.r_link > 0.0, "link resistance must be positive");
    let mut netlist = Netlist::new(format!(
        "resistor lattice {}x{} r={}{}",
        spec.rows,
        spec.cols,
        spec.r_link,
        if spec.grounded_periphery {
            " grounded"
        } else {
            ""
        }
    ));
    let mut push = |name: String, n1: String, n2: String, ohms: f64| {
        netlist.push_element(Element::Resistor { name, n1, n2, ohms });
    };
    for i in 0..spec.rows {
        for j in 0..spec.cols {
            if j + 1 < spec.cols {
                push(
                    format!("Rh{i}_{j}"),
                    spec.node_name(i, j),
                    spec.node_name(i, j + 1),
                    spec.r_link,
                );
            }
            if i + 1 < spec.rows {
                push(
                    format!("Rv{i}_{j}"),
                    spec.node_name(i, j),
                    spec.node_name(i + 1, j),
                    spec.r_link,
                );
            }
        }
    }
    if spec.grounded_periphery {
        for i in 0..spec.rows {
            for j in 0..spec.cols {
                let boundary = i == 0 || j == 0 || i + 1 == spec.rows || j + 1 == spec.cols;
                if boundary {
                    push(
                        format!("Rg{i}_{j}"),
                        spec.node_name(i, j),
                        GROUND.to_string(),
                        spec.r_link,
                    );
                }
            }
        }
    }
    netlist
}

/// Boundary handling for the finite-difference problem.
#[derive(Debug, Clone)]
pub enum Boundary {
    /// Listed nodes are held at fixed potentials (at least one required).
    Dirichlet(BTreeMap<(usize, usize), f64>),
    /// Pure current injections; the gauge is fixed by pinning one reference
    /// node to zero, and Σ injections must vanish (within 1e-12).
    Neumann { pin: (usize, usize) },
}

/// Five-point-stencil Poisson problem on the lattice graph.
#[derive(Debug, Clone)]
pub struct FdProblem {
    pub rows: usize,
    pub cols: usize,
    /// Link conductance (1/r_link).
    pub g_link: f64,
    /// Current injected into each node, amps.
    pub injections: BTreeMap<(usize, usize), f64>,
    pub boundary: Boundary,
}

#[derive(Debug, thiserror::Error)]
pub enum LatticeError {
    #[error("Neumann problem needs balanced injections (Σ = {0:e} A)")]
    UnbalancedNeumann(f64),
    #[error("node ({0}, {1}) outside the {2}x{3} grid")]
    OutOfGrid(usize, usize, usize, usize),
    #[error("Dirichlet problem needs at least one fixed node")]
    NoFixedNode,
    #[error(transparent)]
    Singular(#[from] LinalgError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("effective resistance needs a resistor-only deck (found '{0}')")]
    NotResistive(String),
    #[error("unknown lattice node '{0}'")]
    UnknownNode(String),
}

/// Solve the discrete Poisson problem; returns one potential per grid node,
/// row-major.
pub fn poisson_fd_solve(p: &FdProblem) -> Result<Vec<f64>, LatticeError> {
    let dim = p.rows * p.cols;
    let at = |i: usize, j: usize| i * p.cols + j;
    let check = |&(i, j): &(usize, usize)| -> Result<(), LatticeError> {
        if i >= p.rows || j >= p.cols {
            Err(LatticeError::OutOfGrid(i, j, p.rows, p.cols))
        } else {
            Ok(())
        }
    };
    for node in p.injections.keys() {
        check(node)?;
    }

    let mut a = DenseMatrix::<f64>::zeros(dim);
    let mut b = vec![0.0; dim];
    for i in 0..p.rows {
        for j in 0..p.cols {
            let m = at(i, j);
            // graph Laplacian of the grid: degree on the diagonal, −g to
            // each of the (up to four) neighbors
            let mut neighbors = Vec::with_capacity(4);
            if i > 0 {
                neighbors.push(at(i - 1, j));
            }
            if i + 1 < p.rows {
                neighbors.push(at(i + 1, j));
            }
            if j > 0 {
                neighbors.push(at(i, j - 1));
            }
            if j + 1 < p.cols {
                neighbors.push(at(i, j + 1));
            }
            for n in neighbors {
                a.add(m, m, p.g_link);
                a.add(m, n, -p.g_link);
            }
        }
    }
    for (&(i, j), &inj) in &p.injections {
        b[at(i, j)] += inj;
    }

    match &p.boundary {
        Boundary::Dirichlet(fixed) => {
            if fixed.is_empty() {
                return Err(LatticeError::NoFixedNode);
            }
            for (node, &value) in fixed {
                check(node)?;
                let m = at(node.0, node.1);
                for k in 0..dim {
                    a[(m, k)] = 0.0;
                }
                a[(m, m)] = 1.0;
                b[m] = value;
            }
        }
        Boundary::Neumann { pin } => {
            check(pin)?;
            let total: f64 = p.injections.values().sum();
            if total.abs() > 1e-12 {
                return Err(LatticeError::UnbalancedNeumann(total));
            }
            let m = at(pin.0, pin.1);
            for k in 0..dim {
                a[(m, k)] = 0.0;
            }
            a[(m, m)] = 1.0;
            b[m] = 0.0;
        }
    }

    Ok(lu_factor(&a)?.solve(&b)?)
}

/// Two-point resistance of a resistor-only deck, measured the simulator way:
/// inject 1 A from `node_b` into `node_a` and read the voltage drop. When
/// the deck has no ground, `node_b` is grounded for the solve (gauge choice;
/// the resistance of a resistive network does not depend on it).
pub fn effective_resistance(
    netlist: &Netlist,
    node_a: &str,
    node_b: &str,
) -> Result<f64, LatticeError> {
    for e in &netlist.elements {
        if !matches!(e, Element::Resistor { .. }) {
            return Err(LatticeError::NotResistive(e.name().to_string()));
        }
    }
    let nodes = build_node_map(netlist);
    for n in [node_a, node_b] {
        if !nodes.contains(n) && !same_name(n, GROUND) {
            return Err(LatticeError::UnknownNode(n.to_string()));
        }
    }

    let has_ground = netlist
        .elements
        .iter()
        .any(|e| e.nodes().iter().any(|n| same_name(n, GROUND)));

    let mut deck = Netlist::new("effective resistance probe");
    let rename = |n: &str| -> String {
        if !has_ground && same_name(n, node_b) {
            GROUND.to_string()
        } else {
            n.to_string()
        }
    };
    for e in &netlist.elements {
        if let Element::Resistor { name, n1, n2, ohms } = e {
            deck.push_element(Element::Resistor {
                name: name.clone(),
                n1: rename(n1),
                n2: rename(n2),
                ohms: *ohms,
            });
        }
    }
    let b_label = rename(node_b);
    deck.push_element(Element::ISource {
        name: "itest".into(),
        np: b_label.clone(),
        nn: node_a.to_string(),
        waveform: Waveform::Dc(1.0),
        ac_mag: None,
        ac_phase: None,
    });

    let op = solve_op(&deck, &NewtonOptions::default())?;
    let probe_nodes = build_node_map(&deck);
    let v = |name: &str| op.voltage(&probe_nodes, name).unwrap_or(0.0);
    Ok(v(node_a) - v(&b_label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, write_netlist};

    #[test]
    fn edge_counts() {
        let ungrounded = gen_lattice(&LatticeSpec {
            rows: 2,
            cols: 3,
            r_link: 1.0,
            grounded_periphery: false,
        });
        // 2·2 horizontal + 3·1 vertical
        assert_eq!(ungrounded.elements.len(), 7);
        assert!(!ungrounded
            .elements
            .iter()
            .any(|e| e.nodes().iter().any(|n| same_name(n, GROUND))));

        let grounded = gen_lattice(&LatticeSpec {
            rows: 2,
            cols: 3,
            r_link: 1.0,
            grounded_periphery: true,
        });
        // all six nodes are boundary nodes
        assert_eq!(grounded.elements.len(), 13);
    }

    #[test]
    fn generated_deck_round_trips() {
        let deck = gen_lattice(&LatticeSpec {
            rows: 3,
            cols: 4,
            r_link: 2.2,
            grounded_periphery: true,
        });
        let reparsed = parse_netlist(&write_netlist(&deck)).unwrap();
        assert_eq!(deck, reparsed);
    }

    #[test]
    fn neumann_2x2_adjacent_pair() {
        // unit grid, +1 A at (0,0), −1 A at (0,1): the drop equals the
        // 1 Ω ∥ 3 Ω series-parallel reduction, 0.75 Ω
        let mut injections = BTreeMap::new();
        injections.insert((0, 0), 1.0);
        injections.insert((0, 1), -1.0);
        let v = poisson_fd_solve(&FdProblem {
            rows: 2,
            cols: 2,
            g_link: 1.0,
            injections,
            boundary: Boundary::Neumann { pin: (1, 1) },
        })
        .unwrap();
        assert!((v[0] - v[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn neumann_rejects_unbalanced() {
        let mut injections = BTreeMap::new();
        injections.insert((0, 0), 1.0);
        let err = poisson_fd_solve(&FdProblem {
            rows: 2,
            cols: 2,
            g_link: 1.0,
            injections,
            boundary: Boundary::Neumann { pin: (1, 1) },
        });
        assert!(matches!(err, Err(LatticeError::UnbalancedNeumann(_))));
    }

    #[test]
    fn dirichlet_homogeneous_is_zero() {
        let mut fixed = BTreeMap::new();
        for j in 0..3 {
            fixed.insert((0, j), 0.0);
            fixed.insert((2, j), 0.0);
        }
        for i in 0..3 {
            fixed.insert((i, 0), 0.0);
            fixed.insert((i, 2), 0.0);
        }
        let v = poisson_fd_solve(&FdProblem {
            rows: 3,
            cols: 3,
            g_link: 1.0,
            injections: BTreeMap::new(),
            boundary: Boundary::Dirichlet(fixed),
        })
        .unwrap();
        for x in v {
            assert_eq!(x, 0.0);
        }
    }

    #[test]
    fn oracle_matches_mna_on_3x3() {
        // center → corner injection, both routes, node for node
        let spec = LatticeSpec {
            rows: 3,
            cols: 3,
            r_link: 1.0,
            grounded_periphery: false,
        };
        let mut injections = BTreeMap::new();
        injections.insert((1, 1), 1.0);
        injections.insert((2, 2), -1.0);
        let fd = poisson_fd_solve(&FdProblem {
            rows: 3,
            cols: 3,
            g_link: 1.0,
            injections,
            boundary: Boundary::Neumann { pin: (2, 2) },
        })
        .unwrap();

        // simulator route: same grid, (2,2) renamed to ground, 1 A test source
        let mut deck = Netlist::new("3x3 lattice drive");
        for e in &gen_lattice(&spec).elements {
            if let Element::Resistor { name, n1, n2, ohms } = e {
                let fix = |n: &str| {
                    if n == "n2_2" {
                        "0".to_string()
                    } else {
                        n.to_string()
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
            nn: "n1_1".into(),
            waveform: Waveform::Dc(1.0),
            ac_mag: None,
            ac_phase: None,
        });
        let op = solve_op(&deck, &NewtonOptions::default()).unwrap();
        let nodes = build_node_map(&deck);
        let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..3 {
            for j in 0..3 {
                let fd_v = fd[i * 3 + j];
                let name = if (i, j) == (2, 2) {
                    "0".to_string()
                } else {
                    spec.node_name(i, j)
                };
                let mna_v = op.voltage(&nodes, &name).unwrap();
                assert!(
                    (fd_v - mna_v).abs() <= 1e-9 * scale,
                    "node ({i},{j}): fd {fd_v} vs mna {mna_v}"
                );
            }
        }
    }

    #[test]
    fn effective_resistance_anchors() {
        let grid = gen_lattice(&LatticeSpec {
            rows: 2,
            cols: 2,
            r_link: 1.0,
            grounded_periphery: false,
        });
        let adjacent = effective_resistance(&grid, "n0_0", "n0_1").unwrap();
        assert!((adjacent - 0.75).abs() < 1e-12, "adjacent = {adjacent}");
        let diagonal = effective_resistance(&grid, "n0_0", "n1_1").unwrap();
        assert!((diagonal - 1.0).abs() < 1e-12, "diagonal = {diagonal}");
    }

    #[test]
    fn effective_resistance_scales_and_commutes() {
        let unit = gen_lattice(&LatticeSpec {
            rows: 3,
            cols: 3,
            r_link: 1.0,
            grounded_periphery: false,
        });
        let scaled = gen_lattice(&LatticeSpec {
            rows: 3,
            cols: 3,
            r_link: 47.0,
            grounded_periphery: false,
        });
        let r1 = effective_resistance(&unit, "n0_0", "n2_1").unwrap();
        let r47 = effective_resistance(&scaled, "n0_0", "n2_1").unwrap();
        assert!((r47 - 47.0 * r1).abs() < 1e-9 * r47);

        let swapped = effective_resistance(&unit, "n2_1", "n0_0").unwrap();
        assert!((r1 - swapped).abs() < 1e-12);
    }

    #[test]
    fn five_by_five_center_to_edge_matches_oracle() {
        let grid = gen_lattice(&LatticeSpec {
            rows: 5,
            cols: 5,
            r_link: 1.0,
            grounded_periphery: false,
        });
        let simulated = effective_resistance(&grid, "n2_2", "n0_2").unwrap();

        // oracle figure: +1 A at the center, −1 A at the edge midpoint,
        // resistance is the potential difference
        let mut injections = BTreeMap::new();
        injections.insert((2, 2), 1.0);
        injections.insert((0, 2), -1.0);
        let fd = poisson_fd_solve(&FdProblem {
            rows: 5,
            cols: 5,
            g_link: 1.0,
            injections,
            boundary: Boundary::Neumann { pin: (0, 2) },
        })
        .unwrap();
        let oracle = fd[2 * 5 + 2] - fd[2];
        assert!(
            (simulated - oracle).abs() <= 1e-9 * oracle,
            "simulated {simulated} vs oracle {oracle}"
        );
    }

    #[test]
    fn grounding_periphery_never_increases_resistance() {
        // Rayleigh monotonicity, spot-checked
        for size in 3..=6 {
            let open = gen_lattice(&LatticeSpec {
                rows: size,
                cols: size,
                r_link: 1.0,
                grounded_periphery: false,
            });
            let grounded = gen_lattice(&LatticeSpec {
                rows: size,
                cols: size,
                r_link: 1.0,
                grounded_periphery: true,
            });
            let pairs = [("n0_0", "n1_1"), ("n0_0", "n2_2"), ("n1_0", "n1_1")];
            for (a, b) in pairs {
                let r_open = effective_resistance(&open, a, b).unwrap();
                let r_gnd = effective_resistance(&grounded, a, b).unwrap();
                assert!(
                    r_gnd <= r_open + 1e-12,
                    "{size}x{size} {a}-{b}: grounded {r_gnd} > open {r_open}"
                );
            }
        }
    }

    #[test]
    fn rejects_non_resistive_decks() {
        let n = parse_netlist("t\nV1 a 0 5\nR1 a 0 1k\n").unwrap();
        assert!(matches!(
            effective_resistance(&n, "a", "0"),
            Err(LatticeError::NotResistive(_))
        ));
    }
}
