//! CSV output with a provenance header.
//!
//! Every file starts with `#`-prefixed provenance lines, then one header
//! row, then data rows. Floats are written with 9 significant digits.

use std::fmt::Write as _;

use crate::bounds::BoundReport;
use crate::scenario::{
    bounds, run_checks, run_gate, run_single_transfer, scenario_hash, sweep, CheckOutcome, GateOutcome, Mode, Scenario,
    TransferRow,
};
use crate::schemes::Scheme;
use crate::{Error, Result};

pub const TRANSFER_COLUMNS: [&str; 12] = [
    "scheme", "gamma", "kappa", "delta", "omega", "eta", "total_time", "fidelity", "max_p1ph", "int_p1ph", "int_pe", "norm_loss",
];

pub const BOUND_COLUMNS: [&str; 8] = ["scheme", "total_time", "delta", "bound", "tag", "analytic", "observed", "satisfied"];

/// Where an output file came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub scenario_hash: String,
    pub version: String,
    pub tol: f64,
    /// Extra `key: value` lines.
    pub notes: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(scenario_hash: &str, tol: f64) -> Self {
        Provenance { scenario_hash: scenario_hash.into(), version: env!("CARGO_PKG_VERSION").into(), tol, notes: Vec::new() }
    }

    pub fn with_note(mut self, key: &str, value: &str) -> Self {
        self.notes.push((key.into(), value.into()));
        self
    }

    fn write(&self, out: &mut String) {
        let _ = writeln!(out, "# hqc {}", self.version);
        let _ = writeln!(out, "# scenario_sha256: {}", self.scenario_hash);
        let _ = writeln!(out, "# tol: {}", fmt_f64(self.tol));
        for (k, v) in &self.notes {
            let _ = writeln!(out, "# {k}: {v}");
        }
    }
}

/// Nine significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub fn transfer_csv(rows: &[TransferRow], prov: &Provenance) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Scenario("no results to report".into()));
    }
    let mut out = String::new();
    prov.write(&mut out);
    row(&mut out, &TRANSFER_COLUMNS.map(String::from));
    for r in rows {
        let mut cells = vec![r.scheme.name().to_string()];
        cells.extend(
            [r.gamma, r.kappa, r.delta, r.omega, r.eta, r.total_time, r.fidelity, r.max_p1ph, r.int_p1ph, r.int_pe, r.norm_loss]
                .map(fmt_f64),
        );
        row(&mut out, &cells);
    }
    Ok(out)
}

/// Inverse of [`transfer_csv`] (provenance lines are skipped).
pub fn parse_transfer_csv(text: &str) -> Result<Vec<TransferRow>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().ok_or_else(|| Error::Scenario("missing CSV header".into()))?;
    if header.split(',').ne(TRANSFER_COLUMNS) {
        return Err(Error::Scenario(format!("unexpected CSV header {header}")));
    }
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            if cells.len() != TRANSFER_COLUMNS.len() {
                return Err(Error::Scenario(format!("bad CSV row {l}")));
            }
            let scheme: Scheme = cells[0].parse()?;
            let v = cells[1..]
                .iter()
                .map(|c| c.parse::<f64>().map_err(|e| Error::Scenario(format!("{c}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            Ok(TransferRow {
                scheme,
                gamma: v[0],
                kappa: v[1],
                delta: v[2],
                omega: v[3],
                eta: v[4],
                total_time: v[5],
                fidelity: v[6],
                max_p1ph: v[7],
                int_p1ph: v[8],
                int_pe: v[9],
                norm_loss: v[10],
            })
        })
        .collect()
}

pub fn bounds_csv(grid: &[(f64, f64, Vec<BoundReport>)], prov: &Provenance) -> Result<String> {
    if grid.iter().all(|(_, _, r)| r.is_empty()) {
        return Err(Error::Scenario("no results to report".into()));
    }
    let mut out = String::new();
    prov.write(&mut out);
    row(&mut out, &BOUND_COLUMNS.map(String::from));
    for (t, d, rows) in grid {
        for b in rows {
            row(
                &mut out,
                &[
                    b.scheme.clone(),
                    fmt_f64(*t),
                    fmt_f64(*d),
                    b.bound.clone(),
                    b.tag.clone(),
                    fmt_f64(b.analytic),
                    fmt_f64(b.observed),
                    b.satisfied.to_string(),
                ],
            );
        }
    }
    Ok(out)
}

/// Holonomy entries as `row,col,re,im` plus the scalar diagnostics.
pub fn gate_csv(g: &GateOutcome, prov: &Provenance) -> Result<String> {
    let mut out = String::new();
    prov.write(&mut out);
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    let _ = writeln!(out, "# kind: {}", g.kind.map(|k| format!("{k:?}")).unwrap_or_default());
    let _ = writeln!(out, "# requested_angle: {}", opt(g.requested_angle));
    let _ = writeln!(out, "# stokes_angle: {}", opt(g.stokes_angle));
    let _ = writeln!(out, "# discrepancy: {}", opt(g.discrepancy));
    let _ = writeln!(out, "# discretization_error_estimate: {}", fmt_f64(g.discretization_error_estimate));
    row(&mut out, &["row", "col", "re", "im"].map(String::from));
    for i in 0..g.unitary.nrows() {
        for j in 0..g.unitary.ncols() {
            let z = g.unitary[(i, j)];
            row(&mut out, &[i.to_string(), j.to_string(), fmt_f64(z.re), fmt_f64(z.im)]);
        }
    }
    Ok(out)
}

pub fn check_csv(checks: &[CheckOutcome], prov: &Provenance) -> Result<String> {
    if checks.is_empty() {
        return Err(Error::Scenario("no results to report".into()));
    }
    let mut out = String::new();
    prov.write(&mut out);
    row(&mut out, &["check", "value", "limit", "passed"].map(String::from));
    for c in checks {
        row(&mut out, &[c.name.clone(), fmt_f64(c.value), fmt_f64(c.limit), c.passed.to_string()]);
    }
    Ok(out)
}

/// A scenario run rendered for output.
#[derive(Clone, Debug, PartialEq)]
pub struct Rendered {
    pub csv: String,
    /// Human-readable diagnostics, one per line.
    pub log: String,
    /// False when a gate discrepancy reaches 1e-4 or a self-check fails.
    pub ok: bool,
}

/// Runs a validated scenario and renders its CSV. `text` is the scenario
/// source the provenance hash is taken over; `workers = 0` uses all cores.
pub fn run_scenario(s: &Scenario, text: &str, workers: usize) -> Result<Rendered> {
    s.validate()?;
    let prov = Provenance::new(&scenario_hash(text), s.effective_params().tol);
    let timed = || prov.clone().with_note("total_time", &s.params.total_time.to_string());
    let mut log = String::new();
    let mut ok = true;
    let csv = match s.mode {
        Mode::Gate => {
            let g = run_gate(s)?;
            if let Some(d) = g.discrepancy {
                let _ = writeln!(log, "stokes angle {:.9}, discrepancy {:.3e}", g.stokes_angle.unwrap_or(f64::NAN), d);
                ok = d < 1e-4;
            }
            gate_csv(&g, &prov)?
        }
        Mode::Transfer => {
            let row = run_single_transfer(s)?;
            log.push_str(&transfer_summary(std::slice::from_ref(&row)));
            transfer_csv(&[row], &timed())?
        }
        Mode::Sweep => {
            let rows = sweep(s, workers)?;
            log.push_str(&transfer_summary(&rows));
            transfer_csv(&rows, &timed())?
        }
        Mode::Bounds => {
            let grid = if workers == 0 {
                bounds(s)?
            } else {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Scenario(e.to_string()))?
                    .install(|| bounds(s))?
            };
            let failed = grid.iter().flat_map(|(_, _, r)| r).filter(|b| !b.satisfied).count();
            let _ = writeln!(log, "{failed} bound row(s) not satisfied");
            bounds_csv(&grid, &prov)?
        }
        Mode::Check => {
            let checks = run_checks()?;
            for c in &checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                let _ = writeln!(log, "{verdict} {} (value {:.3e}, limit {:.3e})", c.name, c.value, c.limit);
            }
            ok = checks.iter().all(|c| c.passed);
            check_csv(&checks, &prov)?
        }
    };
    Ok(Rendered { csv, log, ok })
}

/// One human-readable line per transfer row.
pub fn transfer_summary(rows: &[TransferRow]) -> String {
    rows.iter()
        .map(|r| {
            format!(
                "{:<16} gamma={:<8} kappa={:<8} T={:<10} F={:.6} maxP1ph={:.3e} loss={:.3e}\n",
                r.scheme.name(),
                r.gamma,
                r.kappa,
                r.total_time,
                r.fidelity,
                r.max_p1ph,
                r.norm_loss
            )
        })
        .collect()
}
