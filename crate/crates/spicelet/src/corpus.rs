//! The built-in circuit corpus: every deck under `decks/` with its golden
//! expectations.
//!
//! Scalar operating-point expectations live here together with a note on how
//! each number was obtained, so a reviewer can re-derive them; behavioral
//! expectations (rise-time ordering, ringing frequency, latch resolution)
//! are exercised by the integration tests that need whole waveforms.

use std::path::PathBuf;

use crate::netlist::{parse_netlist, Netlist};
use crate::topology::DrcKind;

/// How a golden value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// Follows from the deck by inspection (symmetry, equal division,
    /// series-parallel reduction).
    Analytic,
    /// Computed by an independent oracle named in the check's note.
    Oracle,
}

/// One scalar operating-point expectation.
#[derive(Debug, Clone)]
pub struct OpCheck {
    /// Node probed after `.OP`.
    pub node: &'static str,
    pub expected: f64,
    pub tol: f64,
    pub origin: Origin,
    /// How `expected` was derived.
    pub note: &'static str,
}

/// A corpus deck plus everything the test suite pins on it.
#[derive(Debug, Clone)]
pub struct GoldenCase {
    /// File name under `decks/`.
    pub deck: &'static str,
    pub note: &'static str,
    pub op_checks: Vec<OpCheck>,
}

pub fn deck_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("decks")
}

pub fn deck_path(name: &str) -> PathBuf {
    deck_dir().join(name)
}

/// Parse a corpus deck by file name.
pub fn load(name: &str) -> Netlist {
    let path = deck_path(name);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    parse_netlist(&text).unwrap_or_else(|e| panic!("{} does not parse:\n{e}", path.display()))
}

/// The full corpus with golden scalar checks.
pub fn corpus_decks() -> Vec<GoldenCase> {
    let check = |node, expected, tol, origin, note| OpCheck {
        node,
        expected,
        tol,
        origin,
        note,
    };
    vec![
        GoldenCase {
            deck: "divider3.cir",
            note: "three equal resistors divide 3 V into thirds",
            op_checks: vec![
                check("a", 2.0, 1e-9, Origin::Analytic, "equal division"),
                check("b", 1.0, 1e-9, Origin::Analytic, "equal division"),
            ],
        },
        GoldenCase {
            deck: "wheatstone.cir",
            note: "balanced bridge: both mid nodes sit at half the drive",
            op_checks: vec![
                check("left", 5.0, 1e-9, Origin::Analytic, "balance"),
                check("right", 5.0, 1e-9, Origin::Analytic, "balance"),
            ],
        },
        GoldenCase {
            deck: "ladder.cir",
            note: "terminated r-2r ladder halves every tap",
            op_checks: vec![
                check("n1", 4.0, 1e-9, Origin::Analytic, "8 / 2"),
                check("n2", 2.0, 1e-9, Origin::Analytic, "8 / 4"),
                check("n3", 1.0, 1e-9, Origin::Analytic, "8 / 8"),
            ],
        },
        GoldenCase {
            deck: "lattice2x2_adjacent.cir",
            note: "unit 2x2 grid, adjacent pair",
            op_checks: vec![check(
                "n0_0",
                0.75,
                1e-12,
                Origin::Analytic,
                "1 Ω in parallel with the 3 Ω detour",
            )],
        },
        GoldenCase {
            deck: "lattice2x2_diagonal.cir",
            note: "unit 2x2 grid, diagonal pair",
            op_checks: vec![check(
                "n0_0",
                1.0,
                1e-12,
                Origin::Analytic,
                "two 2 Ω paths in parallel",
            )],
        },
        GoldenCase {
            deck: "lattice3x3.cir",
            note: "cross-checked node-for-node against the Poisson oracle",
            op_checks: vec![],
        },
        GoldenCase {
            deck: "lattice5x5.cir",
            note: "center to edge-midpoint; cross-checked against the Poisson oracle",
            op_checks: vec![],
        },
        GoldenCase {
            deck: "rcline.cir",
            note: "10-90% rise time must grow strictly along the line",
            op_checks: vec![],
        },
        GoldenCase {
            deck: "rectifier.cir",
            note: "diode voltage against a scalar bisection oracle",
            op_checks: vec![check(
                "d",
                0.6925436331805307,
                1e-6,
                Origin::Oracle,
                "bisection on Is·(exp(v/Vt)−1) = (5−v)/1k to 1e-12",
            )],
        },
        GoldenCase {
            deck: "common_source.cir",
            note: "saturation with channel-length modulation",
            op_checks: vec![check(
                "d",
                3.0 / 1.04,
                1e-6,
                Origin::Oracle,
                "vd = 5 − 2k·1mA·(1+0.02·vd), solved exactly",
            )],
        },
        GoldenCase {
            deck: "long_tailed.cir",
            note: "symmetric inputs give equal drain voltages",
            op_checks: vec![
                check(
                    "d1",
                    7.186140661634507,
                    1e-6,
                    Origin::Oracle,
                    "tail equation 2u² + u − 4 = 0, vd = 10 − 2u²",
                ),
                check(
                    "d2",
                    7.186140661634507,
                    1e-6,
                    Origin::Oracle,
                    "symmetry with d1",
                ),
            ],
        },
        GoldenCase {
            deck: "inverter.cir",
            note: "matched inverter held at half the rail",
            op_checks: vec![check(
                "out",
                2.5,
                1e-3,
                Origin::Analytic,
                "symmetry fixed point (Newton stopping tolerance)",
            )],
        },
        GoldenCase {
            deck: "inverter_wp05.cir",
            note: "weak pull-up variant for the width-ratio study",
            op_checks: vec![],
        },
        GoldenCase {
            deck: "inverter_wp20.cir",
            note: "strong pull-up variant for the width-ratio study",
            op_checks: vec![],
        },
        GoldenCase {
            deck: "latch.cir",
            note: "metastability study seed deck; tests vary the .IC imbalance",
            op_checks: vec![],
        },
        GoldenCase {
            deck: "rlc.cir",
            note: "light damping: rings near 1/(2π√(LC))",
            op_checks: vec![],
        },
        GoldenCase {
            deck: "ringosc.cir",
            note: "oscillation presence only; no period golden value",
            op_checks: vec![],
        },
    ]
}

/// The malformed-deck corpus: file name plus what must be diagnosed.
/// `Some(kind)` means a design-rule violation of that kind; `None` means the
/// deck must fail to parse.
pub fn malformed_decks() -> Vec<(&'static str, Option<DrcKind>)> {
    vec![
        ("bad/noground.cir", Some(DrcKind::NoGround)),
        ("bad/floating.cir", Some(DrcKind::FloatingIsland)),
        ("bad/vloop.cir", Some(DrcKind::VsourceLoop)),
        ("bad/icutset.cir", Some(DrcKind::IsourceCutset)),
        ("bad/parse_error.cir", None),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::write_netlist;
    use crate::topology::check_drc;

    #[test]
    fn corpus_parses_round_trips_and_passes_drc() {
        for case in corpus_decks() {
            let deck = load(case.deck);
            let reparsed = parse_netlist(&write_netlist(&deck))
                .unwrap_or_else(|e| panic!("{} loses round-trip:\n{e}", case.deck));
            assert_eq!(deck, reparsed, "{} round-trip", case.deck);
            let violations = check_drc(&deck);
            assert!(
                violations.is_empty(),
                "{}: unexpected violations {violations:?}",
                case.deck
            );
        }
    }

    #[test]
    fn malformed_corpus_is_present() {
        for (name, _) in malformed_decks() {
            assert!(deck_path(name).exists(), "{name} missing");
        }
    }
}
