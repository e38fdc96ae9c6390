//! Batch front door: run decks, check decks, generate lattices, dump
//! matrices, extract Thevenin equivalents.
//!
//! The `spicelet` binary is a thin argument parser over these functions.
//! Exit codes: 0 all directives succeeded and DRC was clean; 1 design-rule
//! violations; 2 unreadable or malformed deck (including unresolved
//! references); 3 numerical failure (no convergence, singular system).
//!
//! Every `.PRINT` card produces one CSV file named
//! `<deckstem>.<analysis>.csv` (the second analysis of the same kind gets
//! `<analysis>2`, a second print on the same analysis gets a `.p2` suffix).
//! A print card binds to the nearest analysis directive above it, or the
//! first one below when it precedes them all. CSV numbers are written with
//! the shortest representation that round-trips, so outputs are
//! byte-deterministic.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::analysis::{
    ac_analysis, dc_sweep, solve_op, thevenin_port, transient, AnalysisError, NewtonOptions,
};
use crate::lattice::{gen_lattice, LatticeSpec};
use crate::mna::{assemble_linear_dc, IntegrationMethod};
use crate::netlist::{parse_netlist, write_netlist, Directive, Netlist, Probe};
use crate::topology::{build_node_map, check_drc, DrcViolation, NodeMap};

#[derive(Debug, Clone)]
pub struct RunFlags {
    /// Where CSV files land; default is the current directory.
    pub out_dir: Option<PathBuf>,
    /// Transient integration method (trapezoidal unless overridden).
    pub method: IntegrationMethod,
}

impl Default for RunFlags {
    fn default() -> Self {
        RunFlags {
            out_dir: None,
            method: IntegrationMethod::Trapezoidal,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DirectiveStatus {
    pub directive: String,
    pub outcome: String,
}

/// Everything one deck run produced.
#[derive(Debug)]
pub struct RunReport {
    pub deck: PathBuf,
    pub statuses: Vec<DirectiveStatus>,
    pub violations: Vec<DrcViolation>,
    /// Parse/IO/reference problems, one line each.
    pub load_errors: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub wall: Duration,
    pub exit_code: i32,
}

impl RunReport {
    /// Human-readable report lines (stdout of the `run` subcommand, which
    /// appends its own elapsed-time line after these). Deterministic.
    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for e in &self.load_errors {
            out.push(e.clone());
        }
        for v in &self.violations {
            out.push(v.to_string());
        }
        for s in &self.statuses {
            out.push(format!("{}: {}", s.directive, s.outcome));
        }
        for p in &self.outputs {
            out.push(format!("wrote {}", p.display()));
        }
        out
    }
}

fn exit_code_for(err: &AnalysisError) -> i32 {
    match err {
        AnalysisError::Drc(_) => 1,
        AnalysisError::UnknownSource(_)
        | AnalysisError::UnknownNode(_)
        | AnalysisError::InvalidSweep(_)
        | AnalysisError::NonlinearDeck(_) => 2,
        AnalysisError::Singular { .. }
        | AnalysisError::NoConvergence { .. }
        | AnalysisError::SweepAborted { .. } => 3,
    }
}

fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        "0".into() // fold −0 into 0
    } else {
        format!("{x}")
    }
}

enum AnalysisOutput {
    Op(crate::analysis::OpResult),
    Dc(crate::analysis::SweepResult, String),
    Tran(crate::analysis::TranResult),
    Ac(crate::analysis::AcResult),
}

fn analysis_kind(d: &Directive) -> Option<&'static str> {
    match d {
        Directive::Op => Some("op"),
        Directive::Dc { .. } => Some("dc"),
        Directive::Tran { .. } => Some("tran"),
        Directive::Ac { .. } => Some("ac"),
        _ => None,
    }
}

fn render_directive(d: &Directive) -> String {
    match d {
        Directive::Op => ".OP".into(),
        Directive::Dc {
            source,
            start,
            stop,
            step,
        } => {
            format!(".DC {source} {start} {stop} {step}")
        }
        Directive::Tran { tstep, tstop, uic } => {
            format!(".TRAN {tstep} {tstop}{}", if *uic { " UIC" } else { "" })
        }
        Directive::Ac {
            npoints,
            fstart,
            fstop,
            ..
        } => {
            format!(".AC {npoints} {fstart} {fstop}")
        }
        Directive::Ic(_) => ".IC".into(),
        Directive::Print(_) => ".PRINT".into(),
    }
}

/// Probe values for one solution row; ground probes read 0.
fn probe_value(
    probe: &Probe,
    nodes: &NodeMap,
    legend: &crate::mna::UnknownLegend,
    row: &[f64],
) -> f64 {
    match probe {
        Probe::NodeVoltage(n) => nodes.index_of(n).map_or(0.0, |i| row[i]),
        Probe::SourceCurrent(s) => legend.branch_of(s).map_or(0.0, |k| row[k]),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

/// Run every directive of a deck in order, emitting one CSV per `.PRINT`.
pub fn run_deck(path: &Path, flags: &RunFlags) -> RunReport {
    let start = Instant::now();
    let mut report = RunReport {
        deck: path.to_path_buf(),
        statuses: Vec::new(),
        violations: Vec::new(),
        load_errors: Vec::new(),
        outputs: Vec::new(),
        wall: Duration::ZERO,
        exit_code: 0,
    };
    let finish = |mut r: RunReport, t0: Instant| {
        r.wall = t0.elapsed();
        r
    };

    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            report
                .load_errors
                .push(format!("cannot read {}: {e}", path.display()));
            report.exit_code = 2;
            return finish(report, start);
        }
    };
    let netlist = match parse_netlist(&text) {
        Ok(n) => n,
        Err(e) => {
            for d in &e.diagnostics {
                report.load_errors.push(d.to_string());
            }
            report.exit_code = 2;
            return finish(report, start);
        }
    };

    report.violations = check_drc(&netlist);
    if !report.violations.is_empty() {
        report.exit_code = 1;
        return finish(report, start);
    }

    // bind each .PRINT card to an analysis directive: nearest above, else
    // first below; every card yields one CSV file
    let directives = &netlist.directives;
    let analysis_positions: Vec<usize> = directives
        .iter()
        .enumerate()
        .filter_map(|(i, d)| analysis_kind(d).map(|_| i))
        .collect();
    let mut prints_for: Vec<Vec<Vec<&Probe>>> = vec![Vec::new(); directives.len()];
    for (p, d) in directives.iter().enumerate() {
        let Directive::Print(probes) = d else {
            continue;
        };
        let target = analysis_positions
            .iter()
            .rev()
            .find(|&&a| a < p)
            .or_else(|| analysis_positions.iter().find(|&&a| a > p));
        match target {
            Some(&a) => prints_for[a].push(probes.iter().collect()),
            None => {
                report
                    .load_errors
                    .push(".PRINT with no analysis directive in the deck".into());
                report.exit_code = 2;
                return finish(report, start);
            }
        }
    }

    let nodes = build_node_map(&netlist);
    let opts = NewtonOptions::default();
    let out_dir = flags.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        report
            .load_errors
            .push(format!("cannot create {}: {e}", out_dir.display()));
        report.exit_code = 2;
        return finish(report, start);
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "deck".into());

    let mut kind_counts: std::collections::HashMap<&str, usize> = Default::default();
    for (idx, d) in directives.iter().enumerate() {
        let Some(kind) = analysis_kind(d) else {
            continue;
        };
        let ordinal = {
            let c = kind_counts.entry(kind).or_insert(0);
            *c += 1;
            *c
        };
        let label = render_directive(d);
        let outcome = run_directive(&netlist, d, flags, &opts);
        match outcome {
            Ok(output) => {
                let summary = match &output {
                    AnalysisOutput::Op(op) => {
                        format!("converged in {} iteration(s)", op.iterations)
                    }
                    AnalysisOutput::Dc(s, _) => format!("{} sweep points", s.axis.len()),
                    AnalysisOutput::Tran(t) => format!("{} time points", t.time.len()),
                    AnalysisOutput::Ac(a) => format!("{} frequency points", a.freq.len()),
                };
                report.statuses.push(DirectiveStatus {
                    directive: label,
                    outcome: summary,
                });
                if let AnalysisOutput::Op(op) = &output {
                    // .OP results go to stdout even without a .PRINT card
                    for (i, lab) in op.legend.labels().iter().enumerate() {
                        report.statuses.push(DirectiveStatus {
                            directive: format!("  {lab}"),
                            outcome: fmt_num(op.solution[i]),
                        });
                    }
                }
                for (print_no, probes) in prints_for[idx].iter().enumerate() {
                    let mut name = String::new();
                    let _ = write!(name, "{stem}.{kind}");
                    if ordinal > 1 {
                        let _ = write!(name, "{ordinal}");
                    }
                    if print_no > 0 {
                        let _ = write!(name, ".p{}", print_no + 1);
                    }
                    name.push_str(".csv");
                    let file = out_dir.join(name);
                    match render_csv(&output, probes, &nodes)
                        .and_then(|csv| write_file(&file, &csv))
                    {
                        Ok(()) => report.outputs.push(file),
                        Err(e) => {
                            report.load_errors.push(e);
                            report.exit_code = 2;
                            return finish(report, start);
                        }
                    }
                }
            }
            Err(err) => {
                report.statuses.push(DirectiveStatus {
                    directive: label,
                    outcome: format!("failed: {err}"),
                });
                report.exit_code = exit_code_for(&err);
                return finish(report, start);
            }
        }
    }
    finish(report, start)
}

fn run_directive(
    netlist: &Netlist,
    d: &Directive,
    flags: &RunFlags,
    opts: &NewtonOptions,
) -> Result<AnalysisOutput, AnalysisError> {
    match d {
        Directive::Op => solve_op(netlist, opts).map(AnalysisOutput::Op),
        Directive::Dc {
            source,
            start,
            stop,
            step,
        } => dc_sweep(netlist, source, *start, *stop, *step, opts)
            .map(|s| AnalysisOutput::Dc(s, source.clone())),
        Directive::Tran { tstep, tstop, uic } => {
            transient(netlist, *tstep, *tstop, flags.method, *uic, opts).map(AnalysisOutput::Tran)
        }
        Directive::Ac {
            scale,
            npoints,
            fstart,
            fstop,
        } => ac_analysis(netlist, *scale, *npoints, *fstart, *fstop, opts).map(AnalysisOutput::Ac),
        _ => unreachable!("not an analysis directive"),
    }
}

fn render_csv(
    output: &AnalysisOutput,
    probes: &[&Probe],
    nodes: &NodeMap,
) -> Result<String, String> {
    let mut csv = String::new();
    match output {
        AnalysisOutput::Op(op) => {
            let header: Vec<String> = probes.iter().map(|p| p.to_string()).collect();
            csv.push_str(&header.join(","));
            csv.push('\n');
            let row: Vec<String> = probes
                .iter()
                .map(|p| fmt_num(probe_value(p, nodes, &op.legend, &op.solution)))
                .collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        AnalysisOutput::Dc(sweep, source) => {
            let mut header = vec![source.clone()];
            header.extend(probes.iter().map(|p| p.to_string()));
            csv.push_str(&header.join(","));
            csv.push('\n');
            for (x, row) in sweep.axis.iter().zip(&sweep.rows) {
                let mut cells = vec![fmt_num(*x)];
                cells.extend(
                    probes
                        .iter()
                        .map(|p| fmt_num(probe_value(p, nodes, &sweep.legend, row))),
                );
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
        }
        AnalysisOutput::Tran(tran) => {
            let mut header = vec!["time".to_string()];
            header.extend(probes.iter().map(|p| p.to_string()));
            csv.push_str(&header.join(","));
            csv.push('\n');
            for (t, row) in tran.time.iter().zip(&tran.rows) {
                let mut cells = vec![fmt_num(*t)];
                cells.extend(
                    probes
                        .iter()
                        .map(|p| fmt_num(probe_value(p, nodes, &tran.legend, row))),
                );
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
        }
        AnalysisOutput::Ac(ac) => {
            let mut header = vec!["freq".to_string()];
            for p in probes {
                header.push(format!("mag({p})"));
                header.push(format!("phase({p})"));
            }
            csv.push_str(&header.join(","));
            csv.push('\n');
            for (f, row) in ac.freq.iter().zip(&ac.rows) {
                let mut cells = vec![fmt_num(*f)];
                for p in probes {
                    let v = match p {
                        Probe::NodeVoltage(n) => nodes
                            .index_of(n)
                            .map_or(num_complex::Complex64::new(0.0, 0.0), |i| row[i]),
                        Probe::SourceCurrent(s) => ac
                            .legend
                            .branch_of(s)
                            .map_or(num_complex::Complex64::new(0.0, 0.0), |k| row[k]),
                    };
                    cells.push(fmt_num(v.norm()));
                    cells.push(fmt_num(v.arg().to_degrees()));
                }
                csv.push_str(&cells.join(","));
                csv.push('\n');
            }
        }
    }
    Ok(csv)
}

/// DRC-only check. Returns (exit code, report lines).
pub fn check_deck(path: &Path) -> (i32, Vec<String>) {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return (2, vec![format!("cannot read {}: {e}", path.display())]),
    };
    let netlist = match parse_netlist(&text) {
        Ok(n) => n,
        Err(e) => return (2, e.diagnostics.iter().map(|d| d.to_string()).collect()),
    };
    let violations = check_drc(&netlist);
    if violations.is_empty() {
        (0, vec!["DRC clean".into()])
    } else {
        (1, violations.iter().map(|v| v.to_string()).collect())
    }
}

/// Generate a lattice deck (the `lattice` subcommand).
pub fn lattice_deck(rows: usize, cols: usize, r_link: f64, grounded: bool) -> String {
    write_netlist(&gen_lattice(&LatticeSpec {
        rows,
        cols,
        r_link,
        grounded_periphery: grounded,
    }))
}

/// Assemble the linear DC system of a deck and render it as a text table or
/// as a single HTML table whose first row and column carry the legend.
pub fn matrix_dump(path: &Path, html: bool) -> Result<String, (i32, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (2, format!("cannot read {}: {e}", path.display())))?;
    let netlist = parse_netlist(&text).map_err(|e| (2, e.to_string()))?;
    let nodes = build_node_map(&netlist);
    let sys = assemble_linear_dc(&netlist, &nodes);
    let labels = sys.legend.labels();
    let n = sys.dim();
    let mut out = String::new();
    if html {
        out.push_str("<!DOCTYPE html>\n<html>\n<body>\n<table border=\"1\">\n<tr><th></th>");
        for l in labels {
            let _ = write!(out, "<th>{l}</th>");
        }
        out.push_str("<th>rhs</th></tr>\n");
        for (i, label) in labels.iter().enumerate() {
            let _ = write!(out, "<tr><th>{label}</th>");
            for j in 0..n {
                let _ = write!(out, "<td>{}</td>", fmt_num(sys.matrix[(i, j)]));
            }
            let _ = writeln!(out, "<td>{}</td></tr>", fmt_num(sys.rhs[i]));
        }
        out.push_str("</table>\n</body>\n</html>\n");
    } else {
        out.push('\t');
        out.push_str(&labels.join("\t"));
        out.push_str("\trhs\n");
        for (i, label) in labels.iter().enumerate() {
            let _ = write!(out, "{label}");
            for j in 0..n {
                let _ = write!(out, "\t{}", fmt_num(sys.matrix[(i, j)]));
            }
            let _ = writeln!(out, "\t{}", fmt_num(sys.rhs[i]));
        }
    }
    Ok(out)
}

/// Thevenin extraction for the `thevenin` subcommand.
pub fn thevenin_lines(path: &Path, a: &str, b: &str) -> Result<Vec<String>, (i32, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (2, format!("cannot read {}: {e}", path.display())))?;
    let netlist = parse_netlist(&text).map_err(|e| (2, e.to_string()))?;
    match thevenin_port(&netlist, a, b, &NewtonOptions::default()) {
        Ok((v_th, r_th)) => Ok(vec![
            format!("v_th = {} V", fmt_num(v_th)),
            format!("r_th = {} ohm", fmt_num(r_th)),
        ]),
        Err(e) => Err((exit_code_for(&e), e.to_string())),
    }
}
