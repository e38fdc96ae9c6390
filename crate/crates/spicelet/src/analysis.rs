//! Analysis drivers: operating point, DC sweep, transient, AC and Thevenin
//! port extraction.
//!
//! The operating-point solver is Newton–Raphson over the linearized device
//! stamps. The linear part of the system is assembled once per solve; each
//! iterate re-stamps the devices, solves, and applies junction limiting as a
//! damping factor on the whole step. Convergence requires both small
//! unknown changes and a per-node current residual computed from the element
//! equations (never from the matrix rows). On failure the solver retries
//! with gmin stepping and then source stepping, warm-starting each level.
//!
//! Every converged result carries a [`KclReport`]: the worst node-current
//! residual over the whole run, measured against `reltol·max|i| + abstol`.

use num_complex::Complex64;

use crate::devices::{diode_eval, mosfet_eval, DiodeParams, MosRegion};
use crate::linalg::{lu_factor, LinalgError};
use crate::mna::{
    advance_state, assemble_ac, assemble_linear_dc_with, assemble_transient_step, companion_cap,
    companion_ind, device_touched_nodes, resolved_devices, stamp_gmin, stamp_linearized_devices,
    CompanionState, IntegrationMethod, LegendMode, MnaSystem, ReactiveState, ResolvedDevice,
    SourceEval, UnknownLegend, GMIN,
};
use crate::netlist::{same_name, AcScale, Element, Netlist, GROUND};
use crate::topology::{build_node_map, check_drc, DrcViolation, NodeMap};

/// Newton tolerances and homotopy budgets (SPICE-conventional defaults).
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub reltol: f64,
    pub vntol: f64,
    pub abstol: f64,
    pub max_iter: usize,
    pub gmin_steps: usize,
    pub source_steps: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            reltol: 1e-3,
            vntol: 1e-6,
            abstol: 1e-12,
            max_iter: 100,
            gmin_steps: 10,
            source_steps: 10,
        }
    }
}

/// Which fallback finally produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomotopyLevel {
    Direct,
    GminStepping,
    SourceStepping,
}

/// Worst element-equation current residual seen over a run.
#[derive(Debug, Clone, Default)]
pub struct KclReport {
    /// max over nodes of `|Σi| − (reltol·max|i| + abstol)`; certified ≤ 0.
    pub worst_excess: f64,
    /// The raw `|Σi|` at the worst node.
    pub worst_sum: f64,
    pub worst_node: String,
}

impl KclReport {
    pub fn certified(&self) -> bool {
        self.worst_excess <= 0.0
    }

    fn merge(&mut self, other: KclReport) {
        if other.worst_excess > self.worst_excess || self.worst_node.is_empty() {
            *self = other;
        }
    }
}

/// Per-device operating data recorded at the solved point.
#[derive(Debug, Clone)]
pub struct DeviceOp {
    pub name: String,
    pub info: DeviceOpInfo,
}

#[derive(Debug, Clone)]
pub enum DeviceOpInfo {
    Diode {
        v: f64,
        i: f64,
        g: f64,
    },
    Mosfet {
        region: MosRegion,
        vgs: f64,
        vds: f64,
        id: f64,
        gm: f64,
        gds: f64,
    },
}

#[derive(Debug, Clone)]
pub struct OpResult {
    pub solution: Vec<f64>,
    pub legend: UnknownLegend,
    pub devices: Vec<DeviceOp>,
    pub iterations: usize,
    pub homotopy: HomotopyLevel,
    pub kcl: KclReport,
}

impl OpResult {
    /// Voltage of a node by name (ground is 0).
    pub fn voltage(&self, nodes: &NodeMap, name: &str) -> Option<f64> {
        if same_name(name, GROUND) {
            return Some(0.0);
        }
        nodes.index_of(name).map(|i| self.solution[i])
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub legend: UnknownLegend,
    pub kcl: KclReport,
}

#[derive(Debug, Clone)]
pub struct TranResult {
    pub time: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub legend: UnknownLegend,
    pub kcl: KclReport,
}

#[derive(Debug, Clone)]
pub struct AcResult {
    pub freq: Vec<f64>,
    pub rows: Vec<Vec<Complex64>>,
    pub legend: UnknownLegend,
    pub kcl: KclReport,
}

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("{} design-rule violation(s); analysis refused", .0.len())]
    Drc(Vec<DrcViolation>),
    #[error("singular system {context}: {source}")]
    Singular {
        context: String,
        source: LinalgError,
    },
    #[error("no convergence {context} (best residual {best_residual:e} A)")]
    NoConvergence { context: String, best_residual: f64 },
    #[error("unknown source '{0}'")]
    UnknownSource(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("nonlinear deck: {0}")]
    NonlinearDeck(String),
    #[error("sweep aborted at {at}: {reason}")]
    SweepAborted {
        at: f64,
        partial: Box<SweepResult>,
        reason: Box<AnalysisError>,
    },
}

fn ensure_drc(netlist: &Netlist) -> Result<(), AnalysisError> {
    let violations = check_drc(netlist);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(AnalysisError::Drc(violations))
    }
}

fn singular(context: impl Into<String>) -> impl FnOnce(LinalgError) -> AnalysisError {
    move |source| AnalysisError::Singular {
        context: context.into(),
        source,
    }
}

// ───────────────────────── element-current certificate ─────────────────────────

/// Companion context for transient current evaluation.
struct TranCtx<'a> {
    method: IntegrationMethod,
    dt: f64,
    state: &'a CompanionState,
}

/// Per-node (Σi, max|i|) accumulated from the element constitutive equations
/// at the solution `x`. Branch currents (V sources, inductors at DC) are the
/// element's own current unknowns; everything else is evaluated from its law.
/// This deliberately shares no code with the stamping path.
fn node_current_sums(
    netlist: &Netlist,
    nodes: &NodeMap,
    legend: &UnknownLegend,
    x: &[f64],
    eval: &SourceEval,
    tran: Option<&TranCtx>,
) -> Vec<(f64, f64)> {
    let mut sums = vec![(0.0f64, 0.0f64); nodes.len()];
    let v_at = |name: &str| -> f64 { nodes.index_of(name).map_or(0.0, |i| x[i]) };
    let mut push = |name: &str, into: f64| {
        if let Some(i) = nodes.index_of(name) {
            sums[i].0 += into;
            sums[i].1 = sums[i].1.max(into.abs());
        }
    };
    let mut cap_i = 0;
    let mut ind_i = 0;
    for e in &netlist.elements {
        match e {
            Element::Resistor { n1, n2, ohms, .. } => {
                let i = (v_at(n1) - v_at(n2)) / ohms;
                push(n1, -i);
                push(n2, i);
            }
            Element::Capacitor { n1, n2, farads, .. } => {
                let i = match tran {
                    Some(ctx) => {
                        let (g, i_eq) =
                            companion_cap(*farads, ctx.method, ctx.dt, &ctx.state.caps[cap_i]);
                        g * (v_at(n1) - v_at(n2)) - i_eq
                    }
                    None => 0.0, // open at DC
                };
                cap_i += 1;
                push(n1, -i);
                push(n2, i);
            }
            Element::Inductor {
                name,
                n1,
                n2,
                henries,
                ..
            } => {
                let i = match tran {
                    Some(ctx) => {
                        let (g, i_eq) =
                            companion_ind(*henries, ctx.method, ctx.dt, &ctx.state.inds[ind_i]);
                        g * (v_at(n1) - v_at(n2)) + i_eq
                    }
                    None => legend.branch_of(name).map_or(0.0, |k| x[k]),
                };
                ind_i += 1;
                push(n1, -i);
                push(n2, i);
            }
            Element::VSource { name, np, nn, .. } => {
                let i = legend.branch_of(name).map_or(0.0, |k| x[k]);
                push(np, -i);
                push(nn, i);
            }
            Element::ISource {
                name,
                np,
                nn,
                waveform,
                ..
            } => {
                let i = eval.value_of(name, waveform);
                push(np, -i);
                push(nn, i);
            }
            Element::Diode { .. } | Element::Mosfet { .. } => {}
        }
    }
    for dev in resolved_devices(netlist, nodes) {
        match dev {
            ResolvedDevice::Diode { np, nn, params, .. } => {
                let v = np.map_or(0.0, |i| x[i]) - nn.map_or(0.0, |i| x[i]);
                let (i, _) = diode_eval(&params, v);
                if let Some(n) = np {
                    sums[n].0 -= i;
                    sums[n].1 = sums[n].1.max(i.abs());
                }
                if let Some(n) = nn {
                    sums[n].0 += i;
                    sums[n].1 = sums[n].1.max(i.abs());
                }
            }
            ResolvedDevice::Mosfet {
                nd, ng, ns, params, ..
            } => {
                let v = |idx: Option<usize>| idx.map_or(0.0, |i| x[i]);
                let (id, _, _, _) = mosfet_eval(&params, v(ng) - v(ns), v(nd) - v(ns));
                if let Some(n) = nd {
                    sums[n].0 -= id;
                    sums[n].1 = sums[n].1.max(id.abs());
                }
                if let Some(n) = ns {
                    sums[n].0 += id;
                    sums[n].1 = sums[n].1.max(id.abs());
                }
            }
        }
    }
    sums
}

fn report_from_sums(sums: &[(f64, f64)], nodes: &NodeMap, opts: &NewtonOptions) -> KclReport {
    let mut report = KclReport::default();
    for (i, &(sum, max_i)) in sums.iter().enumerate() {
        let bound = opts.reltol * max_i + opts.abstol;
        let excess = sum.abs() - bound;
        if excess > report.worst_excess || report.worst_node.is_empty() {
            report = KclReport {
                worst_excess: excess,
                worst_sum: sum.abs(),
                worst_node: nodes.names()[i].clone(),
            };
        }
    }
    report
}

/// Element-equation KCL certificate for a DC (or sweep-point) solution.
pub fn kcl_certificate_dc(
    netlist: &Netlist,
    nodes: &NodeMap,
    legend: &UnknownLegend,
    x: &[f64],
    eval: &SourceEval,
    opts: &NewtonOptions,
) -> KclReport {
    let sums = node_current_sums(netlist, nodes, legend, x, eval, None);
    report_from_sums(&sums, nodes, opts)
}

/// Complex KCL certificate for one AC solution point.
pub fn kcl_certificate_ac(
    netlist: &Netlist,
    nodes: &NodeMap,
    legend: &UnknownLegend,
    x: &[Complex64],
    op_voltages: &[f64],
    omega: f64,
    opts: &NewtonOptions,
) -> KclReport {
    let mut sums = vec![(Complex64::new(0.0, 0.0), 0.0f64); nodes.len()];
    let v_at = |name: &str| -> Complex64 {
        nodes
            .index_of(name)
            .map_or(Complex64::new(0.0, 0.0), |i| x[i])
    };
    let mut push = |name: &str, into: Complex64| {
        if let Some(i) = nodes.index_of(name) {
            sums[i].0 += into;
            sums[i].1 = sums[i].1.max(into.norm());
        }
    };
    for e in &netlist.elements {
        match e {
            Element::Resistor { n1, n2, ohms, .. } => {
                let i = (v_at(n1) - v_at(n2)) / ohms;
                push(n1, -i);
                push(n2, i);
            }
            Element::Capacitor { n1, n2, farads, .. } => {
                let i = (v_at(n1) - v_at(n2)) * Complex64::new(0.0, omega * farads);
                push(n1, -i);
                push(n2, i);
            }
            Element::Inductor { name, n1, n2, .. }
            | Element::VSource {
                name,
                np: n1,
                nn: n2,
                ..
            } => {
                let i = legend
                    .branch_of(name)
                    .map_or(Complex64::new(0.0, 0.0), |k| x[k]);
                push(n1, -i);
                push(n2, i);
            }
            Element::ISource {
                np,
                nn,
                ac_mag,
                ac_phase,
                ..
            } => {
                if let Some(m) = ac_mag {
                    let i = Complex64::from_polar(*m, ac_phase.unwrap_or(0.0).to_radians());
                    push(np, -i);
                    push(nn, i);
                }
            }
            Element::Diode { .. } | Element::Mosfet { .. } => {}
        }
    }
    for dev in resolved_devices(netlist, nodes) {
        match dev {
            ResolvedDevice::Diode { np, nn, params, .. } => {
                let v_op = np.map_or(0.0, |i| op_voltages[i]) - nn.map_or(0.0, |i| op_voltages[i]);
                let (_, g) = diode_eval(&params, v_op);
                let v = np.map_or(Complex64::new(0.0, 0.0), |i| x[i])
                    - nn.map_or(Complex64::new(0.0, 0.0), |i| x[i]);
                let i = v * g;
                if let Some(n) = np {
                    sums[n].0 -= i;
                    sums[n].1 = sums[n].1.max(i.norm());
                }
                if let Some(n) = nn {
                    sums[n].0 += i;
                    sums[n].1 = sums[n].1.max(i.norm());
                }
            }
            ResolvedDevice::Mosfet {
                nd, ng, ns, params, ..
            } => {
                let vo = |idx: Option<usize>| idx.map_or(0.0, |i| op_voltages[i]);
                let (_, gm, gds, _) = mosfet_eval(&params, vo(ng) - vo(ns), vo(nd) - vo(ns));
                let vc = |idx: Option<usize>| idx.map_or(Complex64::new(0.0, 0.0), |i| x[i]);
                let i = (vc(ng) - vc(ns)) * gm + (vc(nd) - vc(ns)) * gds;
                if let Some(n) = nd {
                    sums[n].0 -= i;
                    sums[n].1 = sums[n].1.max(i.norm());
                }
                if let Some(n) = ns {
                    sums[n].0 += i;
                    sums[n].1 = sums[n].1.max(i.norm());
                }
            }
        }
    }
    let mut report = KclReport::default();
    for (i, &(sum, max_i)) in sums.iter().enumerate() {
        let bound = opts.reltol * max_i + opts.abstol;
        let excess = sum.norm() - bound;
        if excess > report.worst_excess || report.worst_node.is_empty() {
            report = KclReport {
                worst_excess: excess,
                worst_sum: sum.norm(),
                worst_node: nodes.names()[i].clone(),
            };
        }
    }
    report
}

// ───────────────────────────── Newton iteration ─────────────────────────────

struct NewtonOutcome {
    x: Vec<f64>,
    iterations: usize,
}

/// One Newton run at fixed `gmin` against a pre-assembled linear base.
/// The gmin leak is folded into the in-loop residual check so the homotopy
/// leak itself is not misread as device error.
#[allow(clippy::too_many_arguments)]
fn newton_run(
    netlist: &Netlist,
    nodes: &NodeMap,
    base: &MnaSystem<f64>,
    eval: &SourceEval,
    touched: &[usize],
    diodes: &[(Option<usize>, Option<usize>, DiodeParams)],
    tran: Option<&TranCtx>,
    x0: &[f64],
    gmin: f64,
    opts: &NewtonOptions,
    best_residual: &mut f64,
) -> Result<NewtonOutcome, AnalysisError> {
    let num_nodes = base.legend.num_nodes();
    let mut x = x0.to_vec();
    for iteration in 1..=opts.max_iter.max(1) {
        let mut sys = base.clone();
        stamp_linearized_devices(&mut sys, netlist, nodes, &x);
        if gmin > 0.0 {
            stamp_gmin(&mut sys, touched, gmin);
        }
        let factors = lu_factor(&sys.matrix).map_err(singular("during Newton iteration"))?;
        let x_new = factors
            .solve(&sys.rhs)
            .map_err(singular("during Newton iteration"))?;

        // junction limiting, applied as one damping factor on the step
        let mut alpha = 1.0f64;
        for &(np, nn, ref params) in diodes {
            let v = |vec: &[f64], idx: Option<usize>| idx.map_or(0.0, |i| vec[i]);
            let vj_old = v(&x, np) - v(&x, nn);
            let vj_new = v(&x_new, np) - v(&x_new, nn);
            let vj_lim = crate::devices::diode_limit(vj_new, vj_old, params);
            let dv = vj_new - vj_old;
            if (vj_lim - vj_new).abs() > 0.0 && dv.abs() > 1e-30 {
                alpha = alpha.min(((vj_lim - vj_old) / dv).clamp(0.0, 1.0));
            }
        }

        let mut x_next = vec![0.0; x.len()];
        for i in 0..x.len() {
            x_next[i] = x[i] + alpha * (x_new[i] - x[i]);
        }

        // convergence: small unknown changes …
        let mut deltas_ok = true;
        for i in 0..x.len() {
            let tol = if i < num_nodes {
                opts.reltol * x_next[i].abs() + opts.vntol
            } else {
                opts.reltol * x_next[i].abs() + opts.abstol
            };
            if (x_next[i] - x[i]).abs() > tol {
                deltas_ok = false;
                break;
            }
        }
        // … and element-equation KCL at the accepted point, with the homotopy
        // leak counted as a known current
        let mut sums = node_current_sums(netlist, nodes, &base.legend, &x_next, eval, tran);
        if gmin > 0.0 {
            for &i in touched {
                sums[i].0 -= gmin * x_next[i];
            }
        }
        let worst = sums
            .iter()
            .map(|&(sum, max_i)| (sum.abs(), opts.reltol * max_i + opts.abstol))
            .fold((0.0f64, f64::INFINITY), |acc, (s, b)| {
                if s - b > acc.0 - acc.1 {
                    (s, b)
                } else {
                    acc
                }
            });
        *best_residual = best_residual.min(worst.0);
        let kcl_ok = worst.0 <= worst.1;

        x = x_next;
        if deltas_ok && kcl_ok {
            return Ok(NewtonOutcome {
                x,
                iterations: iteration,
            });
        }
    }
    Err(AnalysisError::NoConvergence {
        context: String::new(),
        best_residual: *best_residual,
    })
}

/// Homotopy leak levels: from 1e-2 S down to the base gmin, `steps` equal
/// factors apart (exact decades at the default of 10 steps).
fn gmin_ladder(steps: usize) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps)
        .map(|i| 10f64.powf(-2.0 + (i as f64) * -10.0 / steps as f64))
        .collect()
}

/// Full nonlinear solve: direct attempt, then gmin stepping, then source
/// stepping; each successful path finishes with a gmin-free polish so the
/// returned point carries no artificial leak.
#[allow(clippy::too_many_arguments)]
fn solve_nonlinear(
    netlist: &Netlist,
    nodes: &NodeMap,
    eval: &SourceEval,
    tran: Option<&TranCtx>,
    assemble: &dyn Fn(&SourceEval) -> MnaSystem<f64>,
    warm: Option<&[f64]>,
    opts: &NewtonOptions,
    allow_source_stepping: bool,
) -> Result<(Vec<f64>, usize, HomotopyLevel), AnalysisError> {
    let touched = device_touched_nodes(netlist, nodes);
    let diodes: Vec<(Option<usize>, Option<usize>, DiodeParams)> = resolved_devices(netlist, nodes)
        .into_iter()
        .filter_map(|d| match d {
            ResolvedDevice::Diode { np, nn, params, .. } => Some((np, nn, params)),
            _ => None,
        })
        .collect();
    let base = assemble(eval);
    let dim = base.legend.dim();
    let zeros = vec![0.0; dim];
    let x0: &[f64] = warm.unwrap_or(&zeros);
    let mut best = f64::INFINITY;

    let polish = |x: Vec<f64>, iterations: usize, level: HomotopyLevel, best: &mut f64| {
        match newton_run(
            netlist, nodes, &base, eval, &touched, &diodes, tran, &x, 0.0, opts, best,
        ) {
            Ok(out) => (out.x, iterations + out.iterations, level),
            // keep the gmin-stabilized point when the leak-free system is
            // singular (e.g. every device pinched off)
            Err(_) => (x, iterations, level),
        }
    };

    // direct
    if let Ok(out) = newton_run(
        netlist, nodes, &base, eval, &touched, &diodes, tran, x0, GMIN, opts, &mut best,
    ) {
        return Ok(polish(
            out.x,
            out.iterations,
            HomotopyLevel::Direct,
            &mut best,
        ));
    }

    // gmin stepping: decade ladder from 1e-2 down to the base gmin
    'gmin: {
        let mut x = x0.to_vec();
        let mut iterations = 0;
        for g in gmin_ladder(opts.gmin_steps) {
            match newton_run(
                netlist, nodes, &base, eval, &touched, &diodes, tran, &x, g, opts, &mut best,
            ) {
                Ok(out) => {
                    x = out.x;
                    iterations += out.iterations;
                }
                Err(_) => break 'gmin,
            }
        }
        return Ok(polish(
            x,
            iterations,
            HomotopyLevel::GminStepping,
            &mut best,
        ));
    }

    // source stepping: ramp all sources from 0 to full scale
    if allow_source_stepping {
        let mut x = vec![0.0; dim];
        let mut iterations = 0;
        let mut failed = false;
        for k in 1..=opts.source_steps.max(1) {
            let scale = k as f64 / opts.source_steps.max(1) as f64;
            let scaled_eval = SourceEval {
                scale: Some(scale * eval.scale.unwrap_or(1.0)),
                ..eval.clone()
            };
            let scaled_base = assemble(&scaled_eval);
            match newton_run(
                netlist,
                nodes,
                &scaled_base,
                &scaled_eval,
                &touched,
                &diodes,
                tran,
                &x,
                GMIN,
                opts,
                &mut best,
            ) {
                Ok(out) => {
                    x = out.x;
                    iterations += out.iterations;
                }
                Err(_) => {
                    failed = true;
                    break;
                }
            }
        }
        if !failed {
            return Ok(polish(
                x,
                iterations,
                HomotopyLevel::SourceStepping,
                &mut best,
            ));
        }
    }

    Err(AnalysisError::NoConvergence {
        context: "after gmin and source stepping".into(),
        best_residual: best,
    })
}

fn device_op_data(netlist: &Netlist, nodes: &NodeMap, x: &[f64]) -> Vec<DeviceOp> {
    let mut out = Vec::new();
    for dev in resolved_devices(netlist, nodes) {
        match dev {
            ResolvedDevice::Diode {
                name,
                np,
                nn,
                params,
            } => {
                let v = np.map_or(0.0, |i| x[i]) - nn.map_or(0.0, |i| x[i]);
                let (i, g) = diode_eval(&params, v);
                out.push(DeviceOp {
                    name: name.to_string(),
                    info: DeviceOpInfo::Diode { v, i, g },
                });
            }
            ResolvedDevice::Mosfet {
                name,
                nd,
                ng,
                ns,
                params,
            } => {
                let v = |idx: Option<usize>| idx.map_or(0.0, |i| x[i]);
                let vgs = v(ng) - v(ns);
                let vds = v(nd) - v(ns);
                let (id, gm, gds, region) = mosfet_eval(&params, vgs, vds);
                out.push(DeviceOp {
                    name: name.to_string(),
                    info: DeviceOpInfo::Mosfet {
                        region,
                        vgs,
                        vds,
                        id,
                        gm,
                        gds,
                    },
                });
            }
        }
    }
    out
}

/// DC operating point. Linear decks solve in one iteration; nonlinear decks
/// run Newton with the homotopy ladder.
pub fn solve_op(netlist: &Netlist, opts: &NewtonOptions) -> Result<OpResult, AnalysisError> {
    ensure_drc(netlist)?;
    solve_op_unchecked(netlist, &SourceEval::dc(), opts, None)
}

pub(crate) fn solve_op_unchecked(
    netlist: &Netlist,
    eval: &SourceEval,
    opts: &NewtonOptions,
    warm: Option<&[f64]>,
) -> Result<OpResult, AnalysisError> {
    let nodes = build_node_map(netlist);
    if !netlist.has_nonlinear() {
        let sys = assemble_linear_dc_with(netlist, &nodes, eval);
        let x = lu_factor(&sys.matrix)
            .and_then(|f| f.solve(&sys.rhs))
            .map_err(singular("solving the DC system"))?;
        let kcl = kcl_certificate_dc(netlist, &nodes, &sys.legend, &x, eval, opts);
        return Ok(OpResult {
            solution: x,
            legend: sys.legend,
            devices: Vec::new(),
            iterations: 1,
            homotopy: HomotopyLevel::Direct,
            kcl,
        });
    }
    let assemble = |e: &SourceEval| assemble_linear_dc_with(netlist, &nodes, e);
    let (x, iterations, homotopy) =
        solve_nonlinear(netlist, &nodes, eval, None, &assemble, warm, opts, true)?;
    let legend = UnknownLegend::new(netlist, &nodes, LegendMode::DcAc);
    let kcl = kcl_certificate_dc(netlist, &nodes, &legend, &x, eval, opts);
    let devices = device_op_data(netlist, &nodes, &x);
    Ok(OpResult {
        solution: x,
        legend,
        devices,
        iterations,
        homotopy,
        kcl,
    })
}

/// Sweep one source, warm-starting every point from its predecessor.
/// The axis includes both endpoints to within half a step.
pub fn dc_sweep(
    netlist: &Netlist,
    source: &str,
    start: f64,
    stop: f64,
    step: f64,
    opts: &NewtonOptions,
) -> Result<SweepResult, AnalysisError> {
    let exists = netlist.elements.iter().any(|e| {
        matches!(e, Element::VSource { .. } | Element::ISource { .. })
            && same_name(e.name(), source)
    });
    if !exists {
        return Err(AnalysisError::UnknownSource(source.to_string()));
    }
    if step == 0.0 || ((stop - start) * step.signum()) < 0.0 {
        return Err(AnalysisError::InvalidSweep(format!(
            "{source}: step sign inconsistent with sweep direction"
        )));
    }
    ensure_drc(netlist)?;

    let count = (((stop - start) / step) + 0.5).floor().max(0.0) as usize;
    let nodes = build_node_map(netlist);
    let legend = UnknownLegend::new(netlist, &nodes, LegendMode::DcAc);
    let mut result = SweepResult {
        axis: Vec::with_capacity(count + 1),
        rows: Vec::with_capacity(count + 1),
        legend,
        kcl: KclReport::default(),
    };
    let mut warm: Option<Vec<f64>> = None;
    for k in 0..=count {
        let value = start + k as f64 * step;
        let eval = SourceEval {
            override_source: Some((source.to_string(), value)),
            ..Default::default()
        };
        match solve_op_unchecked(netlist, &eval, opts, warm.as_deref()) {
            Ok(op) => {
                result.axis.push(value);
                result.kcl.merge(op.kcl.clone());
                warm = Some(op.solution.clone());
                result.rows.push(op.solution);
            }
            Err(e) => {
                return Err(AnalysisError::SweepAborted {
                    at: value,
                    partial: Box::new(result),
                    reason: Box::new(e),
                })
            }
        }
    }
    Ok(result)
}

/// Fixed-step transient march. With `uic` the initial state comes from `.IC`
/// directives and element `IC=` fields (unset values default silently to
/// zero) and the first step is taken with backward Euler so trapezoidal
/// integration starts from a consistent companion current; without `uic` the
/// initial state is the operating point at t = 0.
pub fn transient(
    netlist: &Netlist,
    tstep: f64,
    tstop: f64,
    method: IntegrationMethod,
    uic: bool,
    opts: &NewtonOptions,
) -> Result<TranResult, AnalysisError> {
    assert!(tstep > 0.0 && tstop >= tstep, "invalid transient window");
    ensure_drc(netlist)?;
    let nodes = build_node_map(netlist);
    let legend = UnknownLegend::new(netlist, &nodes, LegendMode::Transient);
    let dim = legend.dim();

    let mut state = CompanionState::default();
    let mut x = vec![0.0; dim];

    if uic {
        let ics = netlist.initial_conditions();
        for (node, v) in &ics {
            if let Some(i) = nodes.index_of(node) {
                x[i] = *v;
            }
        }
        let v_at = |name: &str| nodes.index_of(name).map_or(0.0, |i| x[i]);
        for e in &netlist.elements {
            match e {
                Element::Capacitor { n1, n2, ic, .. } => state.caps.push(ReactiveState {
                    v_prev: ic.unwrap_or(v_at(n1) - v_at(n2)),
                    i_prev: 0.0,
                }),
                Element::Inductor { ic, .. } => state.inds.push(ReactiveState {
                    v_prev: 0.0,
                    i_prev: ic.unwrap_or(0.0),
                }),
                _ => {}
            }
        }
    } else {
        let op = solve_op_unchecked(netlist, &SourceEval::dc(), opts, None)?;
        x[..nodes.len()].copy_from_slice(&op.solution[..nodes.len()]);
        for e in &netlist.elements {
            if let Element::VSource { name, .. } = e {
                if let (Some(to), Some(from)) = (legend.branch_of(name), op.legend.branch_of(name))
                {
                    x[to] = op.solution[from];
                }
            }
        }
        let v_at = |name: &str| nodes.index_of(name).map_or(0.0, |i| op.solution[i]);
        for e in &netlist.elements {
            match e {
                Element::Capacitor { n1, n2, .. } => state.caps.push(ReactiveState {
                    v_prev: v_at(n1) - v_at(n2),
                    i_prev: 0.0, // capacitors carry no current at equilibrium
                }),
                Element::Inductor { name, .. } => state.inds.push(ReactiveState {
                    v_prev: 0.0, // inductors drop no voltage at equilibrium
                    i_prev: op.legend.branch_of(name).map_or(0.0, |k| op.solution[k]),
                }),
                _ => {}
            }
        }
    }

    let n_steps = ((tstop / tstep) * (1.0 + 1e-12)).floor() as usize;
    let mut result = TranResult {
        time: Vec::with_capacity(n_steps + 1),
        rows: Vec::with_capacity(n_steps + 1),
        legend: legend.clone(),
        kcl: KclReport::default(),
    };
    result.time.push(0.0);
    result.rows.push(x.clone());

    let nonlinear = netlist.has_nonlinear();
    for k in 1..=n_steps {
        let t = k as f64 * tstep;
        let step_method = if uic && k == 1 {
            IntegrationMethod::BackwardEuler
        } else {
            method
        };
        let eval = SourceEval::at_time(t);
        let x_new = if nonlinear {
            let assemble = |e: &SourceEval| {
                assemble_transient_step(netlist, &nodes, step_method, tstep, &state, e)
            };
            let ctx = TranCtx {
                method: step_method,
                dt: tstep,
                state: &state,
            };
            let (xn, _, _) = solve_nonlinear(
                netlist,
                &nodes,
                &eval,
                Some(&ctx),
                &assemble,
                Some(&x),
                opts,
                false,
            )
            .map_err(|e| match e {
                AnalysisError::NoConvergence { best_residual, .. } => {
                    AnalysisError::NoConvergence {
                        context: format!("at t = {t:e} s"),
                        best_residual,
                    }
                }
                other => other,
            })?;
            xn
        } else {
            let sys = assemble_transient_step(netlist, &nodes, step_method, tstep, &state, &eval);
            lu_factor(&sys.matrix)
                .and_then(|f| f.solve(&sys.rhs))
                .map_err(singular(format!("at t = {t:e} s")))?
        };

        let ctx = TranCtx {
            method: step_method,
            dt: tstep,
            state: &state,
        };
        let kcl = {
            let sums = node_current_sums(netlist, &nodes, &legend, &x_new, &eval, Some(&ctx));
            report_from_sums(&sums, &nodes, opts)
        };
        result.kcl.merge(kcl);

        advance_state(netlist, &nodes, step_method, tstep, &mut state, &x_new);
        x = x_new;
        result.time.push(t);
        result.rows.push(x.clone());
    }
    Ok(result)
}

/// Frequency sweep: DEC spacing puts `npoints` per decade, LIN spreads
/// `npoints` uniformly over the span.
pub fn ac_analysis(
    netlist: &Netlist,
    scale: AcScale,
    npoints: usize,
    fstart: f64,
    fstop: f64,
    opts: &NewtonOptions,
) -> Result<AcResult, AnalysisError> {
    ensure_drc(netlist)?;
    let op = solve_op_unchecked(netlist, &SourceEval::dc(), opts, None)?;
    let nodes = build_node_map(netlist);
    let op_voltages: Vec<f64> = op.solution[..nodes.len()].to_vec();

    let mut freqs = Vec::new();
    match scale {
        AcScale::Dec => {
            let mut k = 0usize;
            loop {
                let f = fstart * 10f64.powf(k as f64 / npoints as f64);
                if f > fstop * (1.0 + 1e-9) {
                    break;
                }
                freqs.push(f);
                k += 1;
            }
        }
        AcScale::Lin => {
            if npoints == 1 {
                freqs.push(fstart);
            } else {
                for i in 0..npoints {
                    freqs.push(fstart + (fstop - fstart) * i as f64 / (npoints - 1) as f64);
                }
            }
        }
    }

    let legend = UnknownLegend::new(netlist, &nodes, LegendMode::DcAc);
    let mut result = AcResult {
        freq: Vec::with_capacity(freqs.len()),
        rows: Vec::with_capacity(freqs.len()),
        legend: legend.clone(),
        kcl: KclReport::default(),
    };
    for f in freqs {
        let omega = 2.0 * std::f64::consts::PI * f;
        let sys = assemble_ac(netlist, &nodes, &op_voltages, omega);
        let x = lu_factor(&sys.matrix)
            .and_then(|fac| fac.solve(&sys.rhs))
            .map_err(singular(format!("at f = {f:e} Hz")))?;
        let kcl = kcl_certificate_ac(netlist, &nodes, &legend, &x, &op_voltages, omega, opts);
        result.kcl.merge(kcl);
        result.freq.push(f);
        result.rows.push(x);
    }
    Ok(result)
}

/// Thevenin equivalent seen between two nodes of a linear deck: open-circuit
/// voltage, plus the voltage swing under a 1 A test injection.
pub fn thevenin_port(
    netlist: &Netlist,
    node_a: &str,
    node_b: &str,
    opts: &NewtonOptions,
) -> Result<(f64, f64), AnalysisError> {
    if netlist.has_nonlinear() {
        return Err(AnalysisError::NonlinearDeck(
            "thevenin extraction needs a linear deck".into(),
        ));
    }
    let nodes = build_node_map(netlist);
    for n in [node_a, node_b] {
        if !nodes.contains(n) {
            return Err(AnalysisError::UnknownNode(n.to_string()));
        }
    }
    ensure_drc(netlist)?;

    let v_of = |op: &OpResult, name: &str| op.voltage(&nodes, name).unwrap_or(0.0);
    let open = solve_op_unchecked(netlist, &SourceEval::dc(), opts, None)?;
    let v_th = v_of(&open, node_a) - v_of(&open, node_b);

    // test source: 1 A drawn from b and pushed into a
    let mut probe = netlist.clone();
    let mut test_name = String::from("itest");
    while probe.find_element(&test_name).is_some() {
        test_name.push('x');
    }
    probe.push_element(Element::ISource {
        name: test_name,
        np: node_b.to_string(),
        nn: node_a.to_string(),
        waveform: crate::netlist::Waveform::Dc(1.0),
        ac_mag: None,
        ac_phase: None,
    });
    let loaded = solve_op_unchecked(&probe, &SourceEval::dc(), opts, None)?;
    let v_loaded = v_of(&loaded, node_a) - v_of(&loaded, node_b);
    Ok((v_th, v_loaded - v_th))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    fn op(deck: &str) -> (Netlist, NodeMap, OpResult) {
        let n = parse_netlist(deck).unwrap();
        let nodes = build_node_map(&n);
        let r = solve_op(&n, &NewtonOptions::default()).unwrap();
        (n, nodes, r)
    }

    #[test]
    fn linear_deck_single_iteration() {
        let (_, nodes, r) = op("t\nV1 in 0 10\nR1 in mid 1k\nR2 mid 0 1k\n");
        assert_eq!(r.iterations, 1);
        assert!((r.voltage(&nodes, "mid").unwrap() - 5.0).abs() < 1e-12);
        assert!(r.kcl.certified(), "kcl: {:?}", r.kcl);
    }

    #[test]
    fn rectifier_matches_bisection_oracle() {
        // independent scalar oracle: solve Is·(exp(v/Vt)−1) = (5−v)/1k by
        // bisection to 1e-12
        let f = |v: f64| 1e-14 * ((v / 0.025852).exp() - 1.0) - (5.0 - v) / 1000.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let v_oracle = 0.5 * (lo + hi);

        let (_, nodes, r) = op("t\n.MODEL DX D (IS=1e-14 N=1)\nV1 in 0 5\nR1 in d 1k\nD1 d 0 DX\n");
        let v_d = r.voltage(&nodes, "d").unwrap();
        assert!(
            (v_d - v_oracle).abs() <= 1e-6,
            "v_d = {v_d}, oracle = {v_oracle}"
        );
        // sanity: ≈0.69 V, ≈4.3 mA
        assert!((v_d - 0.6925).abs() < 1e-3);
        match &r.devices[0].info {
            DeviceOpInfo::Diode { i, .. } => assert!((i - 4.307e-3).abs() < 1e-5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(r.kcl.certified(), "kcl: {:?}", r.kcl);
    }

    #[test]
    fn tight_iteration_budget_falls_back_to_gmin_stepping() {
        // six iterations are not enough for the damped walk up the diode
        // exponential, but the warm-started gmin ladder gets there
        let deck = "t\n.MODEL DX D (IS=1e-14 N=1)\nV1 in 0 5\nR1 in d 1k\nD1 d 0 DX\n";
        let n = parse_netlist(deck).unwrap();
        let nodes = build_node_map(&n);
        let opts = NewtonOptions {
            max_iter: 6,
            ..Default::default()
        };
        let op = solve_op(&n, &opts).unwrap();
        assert_eq!(op.homotopy, HomotopyLevel::GminStepping);
        assert!((op.voltage(&nodes, "d").unwrap() - 0.6925436331805307).abs() <= 1e-6);

        // an even tighter budget exhausts every fallback and reports the
        // best residual seen
        let starved = NewtonOptions {
            max_iter: 2,
            ..Default::default()
        };
        match solve_op(&n, &starved) {
            Err(AnalysisError::NoConvergence { best_residual, .. }) => {
                assert!(best_residual.is_finite());
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn symmetric_inverter_fixed_point() {
        let deck = "t\n\
            .MODEL NM NMOS (VTO=1 KP=2e-5 W=1e-5 L=1e-6 LAMBDA=0.05)\n\
            .MODEL PM PMOS (VTO=-1 KP=2e-5 W=1e-5 L=1e-6 LAMBDA=0.05)\n\
            VDD vdd 0 5\nVIN in 0 2.5\n\
            MP out in vdd PM\nMN out in 0 NM\n";
        let (_, nodes, r) = op(deck);
        // symmetry fixed point, to within the Newton stopping tolerance
        assert!(
            (r.voltage(&nodes, "out").unwrap() - 2.5).abs() < 1e-3,
            "out = {}",
            r.voltage(&nodes, "out").unwrap()
        );
        assert!(r.kcl.certified(), "kcl: {:?}", r.kcl);
    }

    #[test]
    fn drc_violation_refuses_analysis() {
        let n = parse_netlist("t\nV1 1 0 5\nV2 1 0 3\n").unwrap();
        match solve_op(&n, &NewtonOptions::default()) {
            Err(AnalysisError::Drc(v)) => assert_eq!(v.len(), 1),
            other => panic!("expected DRC refusal, got {other:?}"),
        }
    }

    #[test]
    fn linear_sweep_is_affine() {
        let n = parse_netlist("t\nV1 in 0 10\nR1 in mid 1k\nR2 mid 0 1k\n.OP\n").unwrap();
        let nodes = build_node_map(&n);
        let mid = nodes.index_of("mid").unwrap();
        let s = dc_sweep(&n, "V1", 0.0, 5.0, 0.5, &NewtonOptions::default()).unwrap();
        assert_eq!(s.axis.len(), 11);
        assert_eq!(s.axis[0], 0.0);
        assert_eq!(*s.axis.last().unwrap(), 5.0);
        for (v, row) in s.axis.iter().zip(&s.rows) {
            assert!((row[mid] - v / 2.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn sweep_unknown_source() {
        let n = parse_netlist("t\nV1 in 0 10\nR1 in 0 1k\n").unwrap();
        assert!(matches!(
            dc_sweep(&n, "V9", 0.0, 1.0, 0.1, &NewtonOptions::default()),
            Err(AnalysisError::UnknownSource(_))
        ));
    }

    #[test]
    fn gmin_ladder_spans_decades_to_the_base() {
        let ladder = gmin_ladder(10);
        assert_eq!(ladder.len(), 11);
        for (i, g) in ladder.iter().enumerate() {
            let expect = 10f64.powi(-2 - i as i32);
            assert!((g - expect).abs() <= 1e-12 * expect, "level {i}: {g:e}");
        }
        assert!((ladder.last().unwrap() - crate::mna::GMIN).abs() <= 1e-24);
    }

    #[test]
    fn descending_sweep_with_negative_step() {
        let n = parse_netlist("t\nV1 in 0 10\nR1 in mid 1k\nR2 mid 0 1k\n").unwrap();
        let s = dc_sweep(&n, "V1", 5.0, 0.0, -1.0, &NewtonOptions::default()).unwrap();
        assert_eq!(s.axis, vec![5.0, 4.0, 3.0, 2.0, 1.0, 0.0]);
        assert!(matches!(
            dc_sweep(&n, "V1", 0.0, 5.0, -1.0, &NewtonOptions::default()),
            Err(AnalysisError::InvalidSweep(_))
        ));
    }

    #[test]
    fn aborted_sweep_attaches_partial_results() {
        let deck = "t\n.MODEL DX D (IS=1e-14 N=1)\nV1 in 0 5\nR1 in d 1k\nD1 d 0 DX\n";
        let n = parse_netlist(deck).unwrap();
        let starved = NewtonOptions {
            max_iter: 2,
            ..Default::default()
        };
        match dc_sweep(&n, "V1", 0.0, 5.0, 0.5, &starved) {
            Err(AnalysisError::SweepAborted { at, partial, .. }) => {
                assert_eq!(at, 0.5);
                assert_eq!(partial.axis, vec![0.0]);
                assert_eq!(partial.rows.len(), 1);
            }
            other => panic!("expected aborted sweep, got {other:?}"),
        }
    }

    #[test]
    fn warm_and_cold_sweeps_agree() {
        let deck = "t\n.MODEL DX D (IS=1e-14 N=1)\nV1 in 0 5\nR1 in d 1k\nD1 d 0 DX\n";
        let n = parse_netlist(deck).unwrap();
        let nodes = build_node_map(&n);
        let d = nodes.index_of("d").unwrap();
        let s = dc_sweep(&n, "V1", 0.0, 5.0, 0.25, &NewtonOptions::default()).unwrap();
        for (v, row) in s.axis.iter().zip(&s.rows) {
            let eval = SourceEval {
                override_source: Some(("V1".into(), *v)),
                ..Default::default()
            };
            let cold = solve_op_unchecked(&n, &eval, &NewtonOptions::default(), None).unwrap();
            assert!(
                (row[d] - cold.solution[d]).abs() <= 2e-6,
                "warm {} vs cold {} at V1={v}",
                row[d],
                cold.solution[d]
            );
        }
    }

    #[test]
    fn rc_step_response() {
        // v(t) = 1 − exp(−t/RC); trapezoidal with dt = RC/100
        let deck = "t\nV1 in 0 1\nR1 in c 1k\nC1 c 0 1u\n.IC V(c)=0 V(in)=1\n";
        let n = parse_netlist(deck).unwrap();
        let nodes = build_node_map(&n);
        let c = nodes.index_of("c").unwrap();
        let rc = 1e-3;
        let r = transient(
            &n,
            rc / 100.0,
            rc,
            IntegrationMethod::Trapezoidal,
            true,
            &NewtonOptions::default(),
        )
        .unwrap();
        let v_end = r.rows.last().unwrap()[c];
        let expect = 1.0 - (-1.0f64).exp();
        assert!(
            (v_end - expect).abs() / expect < 0.01,
            "v(RC) = {v_end}, closed form {expect}"
        );
        assert!(r.kcl.certified(), "kcl: {:?}", r.kcl);
        // row count = floor(tstop/tstep) + 1
        assert_eq!(r.rows.len(), 101);
    }

    #[test]
    fn source_free_rc_decays_monotonically() {
        let deck = "t\nR1 c 0 1k\nC1 c 0 1u\n.IC V(c)=1\n";
        let n = parse_netlist(deck).unwrap();
        let nodes = build_node_map(&n);
        let c = nodes.index_of("c").unwrap();
        let r = transient(
            &n,
            1e-5,
            5e-3,
            IntegrationMethod::Trapezoidal,
            true,
            &NewtonOptions::default(),
        )
        .unwrap();
        let mut prev = f64::INFINITY;
        for row in &r.rows {
            assert!(row[c] >= 0.0, "went negative: {}", row[c]);
            assert!(row[c] <= prev + 1e-15, "not monotone");
            prev = row[c];
        }
    }

    #[test]
    fn ac_flat_for_resistive_divider() {
        let deck = "t\nV1 in 0 0 AC 1\nR1 in out 1k\nR2 out 0 1k\n";
        let n = parse_netlist(deck).unwrap();
        let nodes = build_node_map(&n);
        let out = nodes.index_of("out").unwrap();
        let r = ac_analysis(&n, AcScale::Dec, 5, 1.0, 1e6, &NewtonOptions::default()).unwrap();
        assert_eq!(r.freq.len(), 31);
        for row in &r.rows {
            assert!((row[out].re - 0.5).abs() < 1e-12);
            assert!(row[out].im.abs() < 1e-15);
        }
        assert!(r.kcl.certified());
    }

    #[test]
    fn thevenin_of_divider() {
        let n = parse_netlist("t\nV1 top 0 10\nR1 top mid 1k\nR2 mid 0 1k\n").unwrap();
        let (v_th, r_th) = thevenin_port(&n, "mid", "0", &NewtonOptions::default()).unwrap();
        assert!((v_th - 5.0).abs() < 1e-9);
        assert!((r_th - 500.0).abs() < 1e-6);
    }

    #[test]
    fn thevenin_across_ideal_source() {
        let n = parse_netlist("t\nV1 a 0 7\nR1 a 0 1k\n").unwrap();
        let (v_th, r_th) = thevenin_port(&n, "a", "0", &NewtonOptions::default()).unwrap();
        assert!((v_th - 7.0).abs() < 1e-12);
        assert!(r_th.abs() < 1e-9);
    }

    #[test]
    fn converged_point_is_a_fixed_point_of_the_linearization() {
        // assemble the linear part, stamp the devices at the converged
        // rectifier point, solve: the same point must come back
        let deck = "t\n.MODEL DX D (IS=1e-14 N=1)\nV1 in 0 5\nR1 in d 1k\nD1 d 0 DX\n";
        let n = parse_netlist(deck).unwrap();
        let nodes = build_node_map(&n);
        let op = solve_op(&n, &NewtonOptions::default()).unwrap();
        let mut sys = crate::mna::assemble_linear_dc(&n, &nodes);
        crate::mna::stamp_linearized_devices(&mut sys, &n, &nodes, &op.solution);
        let x = crate::linalg::lu_solve(&sys.matrix, &sys.rhs).unwrap();
        for (a, b) in x.iter().zip(&op.solution) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-9), "{a} vs {b}");
        }
    }

    #[test]
    fn thevenin_of_grounded_lattice_pair() {
        // pure 2x2 unit lattice with one node grounded: no sources, so the
        // port shows 0 V behind the two-point resistance
        let deck = "t\nRh0_0 n0_0 0 1\nRv0_0 n0_0 n1_0 1\nRv0_1 0 n1_1 1\nRh1_0 n1_0 n1_1 1\n";
        let n = parse_netlist(deck).unwrap();
        let (v_th, r_th) = thevenin_port(&n, "n0_0", "0", &NewtonOptions::default()).unwrap();
        assert!(v_th.abs() < 1e-12);
        assert!((r_th - 0.75).abs() < 1e-12);
    }

    #[test]
    fn thevenin_rejects_nonlinear() {
        let n = parse_netlist("t\n.MODEL DX D (IS=1e-14 N=1)\nV1 a 0 5\nD1 a 0 DX\n").unwrap();
        assert!(matches!(
            thevenin_port(&n, "a", "0", &NewtonOptions::default()),
            Err(AnalysisError::NonlinearDeck(_))
        ));
    }
}
