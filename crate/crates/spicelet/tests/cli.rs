//! Contract tests for the `spicelet` binary beyond what the acceptance
//! suite pins: output formats, method selection, and error paths.

use std::process::Command;

use spicelet::corpus::deck_path;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spicelet"))
}

#[test]
fn run_emits_ac_csv_with_mag_and_phase_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("run")
        .arg(deck_path("common_source.cir"))
        .arg("-o")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    // the deck's .PRINT binds to the nearest analysis above it (.AC)
    let csv = std::fs::read_to_string(dir.path().join("common_source.ac.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "freq,mag(V(d)),phase(V(d))");
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "1"); // sweep starts at 1 Hz
    let mag: f64 = first[1].parse().unwrap();
    assert!(mag > 3.5 && mag < 4.5, "midband-ish gain, got {mag}");
}

#[test]
fn run_method_flag_switches_integration() {
    // BE visibly overdamps the RLC ringing relative to TR at the same dt,
    // so the two CSVs must differ while both stay finite
    let read = |method: &str| -> Vec<f64> {
        let dir = tempfile::tempdir().unwrap();
        let out = bin()
            .arg("run")
            .arg(deck_path("rlc.cir"))
            .arg("-o")
            .arg(dir.path())
            .args(["--method", method])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "method {method}");
        let csv = std::fs::read_to_string(dir.path().join("rlc.tran.csv")).unwrap();
        csv.lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let tr = read("tr");
    let be = read("be");
    assert_eq!(tr.len(), be.len());
    let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, &x| m.max(x));
    assert!(
        peak(&tr) > peak(&be),
        "TR {} vs BE {}",
        peak(&tr),
        peak(&be)
    );
}

#[test]
fn matrix_text_mode_lists_legend() {
    let out = bin()
        .arg("matrix")
        .arg(deck_path("divider3.cir"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let header = text.lines().next().unwrap();
    assert!(header.contains("V(vin)") && header.contains("I(V1)") && header.contains("rhs"));
}

#[test]
fn missing_deck_is_exit_2() {
    let out = bin().arg("run").arg("no_such_deck.cir").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn lattice_grounded_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.cir");
    let out = bin()
        .args(["lattice", "3", "3", "2.5", "--grounded", "-o"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let deck = spicelet::netlist::parse_netlist(&std::fs::read_to_string(&path).unwrap()).unwrap();
    // 12 links + 8 boundary ties
    assert_eq!(deck.elements.len(), 20);
    assert!(spicelet::topology::check_drc(&deck).is_empty());
}

#[test]
fn thevenin_lattice_anchor() {
    // grounded run: the 2x2 lattice deck already has a ground, so the port
    // resistance comes straight out of the simulator route
    let out = bin()
        .arg("thevenin")
        .arg(deck_path("ladder.cir"))
        .args(["n3", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let grab = |prefix: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(prefix))
            .and_then(|rest| rest.split_whitespace().next())
            .and_then(|v| v.parse().ok())
            .unwrap_or_else(|| panic!("missing {prefix} in: {text}"))
    };
    assert!((grab("v_th = ") - 1.0).abs() < 1e-12);
    // hand reduction: 2k∥2k in parallel with 1k + (2k ∥ (1k + 2k∥1k))
    assert!((grab("r_th = ") - 656.25).abs() < 1e-9);
}
