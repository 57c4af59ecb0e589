//! Scenario files and the runs they describe.
//!
//! A scenario is one JSON object, for example
//!
//! ```json
//! { "mode": "sweep", "scheme": "optical",
//!   "params": { "total_time": 5000 },
//!   "gammas": [0, 0.005, 0.01], "kappas": [0, 0.005, 0.01] }
//! ```
//!
//! Unknown keys are rejected. Omitted physical parameters take the values of
//! [`SchemeParams::default`].

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    adiabatic_population_bound, effective_three_level, kappa_condition_optical, messiah_bound, transition_amplitude_numeric,
    Branch, BoundReport, ThreeLevelSchedule,
};
use crate::holonomy::{path_ordered_holonomy, surface_integral_angle, synthesize_loop, GateKind, LoopPath};
use crate::lambda_system::{connection, holonomy_rank_lower_bound, FrameChart, SphericalParams};
use crate::linalg::{c, max_abs_diff, CMatrix};
use crate::schemes::{run_motional_step, run_optical_like, run_transfer, Scheme, SchemeParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Gate,
    Transfer,
    Sweep,
    Bounds,
    Check,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Scenario(format!("unknown mode {s}")))
    }
}

/// Gate synthesis request: either a kind and angle, or a loop file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub kind: Option<GateKind>,
    #[serde(default)]
    pub angle: f64,
    #[serde(default = "default_gate_steps")]
    pub n_steps: usize,
    /// JSON loop file, relative to the scenario file.
    pub loop_file: Option<PathBuf>,
}

fn default_gate_steps() -> usize {
    10_000
}

fn default_word() -> (u8, u8) {
    (1, 0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub mode: Mode,
    pub scheme: Option<Scheme>,
    #[serde(default)]
    pub params: SchemeParams,
    /// Logical input word `(α, β)` of a transfer.
    #[serde(default = "default_word")]
    pub word: (u8, u8),
    pub gate: Option<GateSpec>,
    /// Sweep axes.
    #[serde(default)]
    pub gammas: Vec<f64>,
    #[serde(default)]
    pub kappas: Vec<f64>,
    /// Bounds-mode grid.
    #[serde(default)]
    pub total_times: Vec<f64>,
    #[serde(default)]
    pub deltas: Vec<f64>,
    /// Integrator tolerance, overriding `params.tol`.
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn new(mode: Mode) -> Self {
        Scenario {
            mode,
            scheme: None,
            params: SchemeParams::default(),
            word: default_word(),
            gate: None,
            gammas: Vec::new(),
            kappas: Vec::new(),
            total_times: Vec::new(),
            deltas: Vec::new(),
            tol: None,
            out: None,
            base_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Self::from_json(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        Ok((s, text))
    }

    /// Parameters with the scenario-level tolerance applied.
    pub fn effective_params(&self) -> SchemeParams {
        let mut p = self.params.clone();
        if let Some(t) = self.tol {
            p.tol = t;
        }
        p
    }

    fn scheme(&self) -> Result<Scheme> {
        self.scheme.ok_or_else(|| Error::Scenario(format!("{:?} mode needs a scheme", self.mode)))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return Err(Error::Scenario("tol must be > 0".into()));
            }
        }
        let finite_nonneg = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        match self.mode {
            Mode::Gate => {
                let g = self.gate.as_ref().ok_or_else(|| Error::Scenario("gate mode needs a gate section".into()))?;
                match (&g.kind, &g.loop_file) {
                    (None, None) => return Err(Error::Scenario("gate needs a kind or a loop_file".into())),
                    (_, Some(f)) => {
                        let path = self.resolve(f);
                        if !path.exists() {
                            return Err(Error::Scenario(format!("loop file {} does not exist", path.display())));
                        }
                    }
                    _ => {}
                }
            }
            Mode::Transfer => {
                self.scheme()?;
                self.effective_params().validate()?;
            }
            Mode::Sweep => {
                self.scheme()?;
                if self.gammas.is_empty() || self.kappas.is_empty() {
                    return Err(Error::Scenario("sweep axes must be nonempty".into()));
                }
                if !finite_nonneg(&self.gammas) || !finite_nonneg(&self.kappas) {
                    return Err(Error::Scenario("sweep rates must be finite and >= 0".into()));
                }
                self.effective_params().validate()?;
            }
            Mode::Bounds => {
                let s = self.scheme()?;
                if s == Scheme::Optical && self.params.delta == 0.0 && self.deltas.is_empty() {
                    // resonant optical: only the cavity-loss figure applies
                } else if self.total_times.is_empty() || self.deltas.is_empty() {
                    return Err(Error::Scenario("bounds mode needs total_times and deltas".into()));
                }
                if self.total_times.iter().chain(&self.deltas).any(|x| !(*x > 0.0)) {
                    return Err(Error::Scenario("grid values must be > 0".into()));
                }
            }
            Mode::Check => {}
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// SHA-256 of the scenario text, hex encoded.
pub fn scenario_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Outcome of gate mode.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOutcome {
    pub kind: Option<GateKind>,
    pub requested_angle: Option<f64>,
    pub unitary: CMatrix,
    pub stokes_angle: Option<f64>,
    /// `‖U − exp(i·angle·G)‖_max` against the Stokes angle.
    pub discrepancy: Option<f64>,
    pub discretization_error_estimate: f64,
}

pub fn run_gate(s: &Scenario) -> Result<GateOutcome> {
    let spec = s.gate.as_ref().ok_or_else(|| Error::Scenario("gate mode needs a gate section".into()))?;
    let path = match &spec.loop_file {
        Some(f) => LoopPath::from_json(&std::fs::read_to_string(s.resolve(f))?)?,
        None => synthesize_loop(spec.kind.unwrap(), spec.angle, spec.n_steps)?,
    };
    let kind = spec.kind.or_else(|| crate::holonomy::detect_kind(&path));
    let hol = path_ordered_holonomy(&path)?;
    let (stokes_angle, discrepancy) = match kind {
        Some(k) => {
            let angle = k.orientation() * surface_integral_angle(&path, k)?;
            (Some(angle), Some(max_abs_diff(&hol.unitary, &k.target(angle))))
        }
        None => (None, None),
    };
    Ok(GateOutcome {
        kind,
        requested_angle: spec.loop_file.is_none().then_some(spec.angle),
        unitary: hol.unitary,
        stokes_angle,
        discrepancy,
        discretization_error_estimate: hol.discretization_error_estimate,
    })
}

/// One output row of transfer and sweep mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferRow {
    pub scheme: Scheme,
    pub gamma: f64,
    pub kappa: f64,
    pub delta: f64,
    pub omega: f64,
    pub eta: f64,
    pub total_time: f64,
    pub fidelity: f64,
    pub max_p1ph: f64,
    pub int_p1ph: f64,
    pub int_pe: f64,
    pub norm_loss: f64,
}

fn transfer_row(scheme: Scheme, p: &SchemeParams, word: (u8, u8)) -> Result<TransferRow> {
    let r = run_transfer(scheme, p, word)?;
    Ok(TransferRow {
        scheme,
        gamma: p.gamma,
        kappa: p.kappa,
        delta: p.delta,
        omega: p.omega,
        eta: p.eta,
        total_time: p.total_time,
        fidelity: r.fidelity,
        max_p1ph: r.max_p1ph,
        int_p1ph: r.int_p1ph,
        int_pe: r.int_pe,
        norm_loss: r.norm_loss,
    })
}

pub fn run_single_transfer(s: &Scenario) -> Result<TransferRow> {
    transfer_row(s.scheme()?, &s.effective_params(), s.word)
}

/// Fidelity grid over `(γ, κ)`, rows sorted by `(γ, κ)`.
///
/// `workers = 0` uses the global rayon pool.
pub fn sweep(s: &Scenario, workers: usize) -> Result<Vec<TransferRow>> {
    s.validate()?;
    let scheme = s.scheme()?;
    let base = s.effective_params();
    let mut gammas = s.gammas.clone();
    let mut kappas = s.kappas.clone();
    gammas.sort_by(f64::total_cmp);
    kappas.sort_by(f64::total_cmp);
    let grid: Vec<(f64, f64)> = gammas.iter().flat_map(|&g| kappas.iter().map(move |&k| (g, k))).collect();
    let work = || -> Result<Vec<TransferRow>> {
        grid.par_iter()
            .map(|&(gamma, kappa)| {
                let p = SchemeParams { gamma, kappa, ..base.clone() };
                transfer_row(scheme, &p, s.word)
            })
            .collect()
    };
    let rows = if workers == 0 {
        work()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Scenario(e.to_string()))?
            .install(work)?
    };
    for r in &rows {
        let in_unit = |x: f64| (0.0..=1.0).contains(&x);
        if !in_unit(r.fidelity) || !in_unit(r.max_p1ph) || !in_unit(r.norm_loss) {
            return Err(Error::Invariant(format!("row out of [0, 1] at gamma={} kappa={}", r.gamma, r.kappa)));
        }
    }
    Ok(rows)
}

/// Maximum cavity population of the bare transfer step the bounds refer to.
fn observed_p1ph(scheme: Scheme, p: &SchemeParams) -> Result<f64> {
    match scheme {
        Scheme::Motional | Scheme::MotionalFull => Ok(run_motional_step(scheme, p)?.result.max_p1ph),
        Scheme::Optical | Scheme::ModifiedOptical => {
            Ok(run_optical_like(scheme, p, ["g1", "g3"], ["g3", "g1"])?.result.max_p1ph)
        }
    }
}

/// Bound-versus-simulation rows for one parameter point.
pub fn bound_rows_at(scheme: Scheme, p: &SchemeParams) -> Result<Vec<BoundReport>> {
    let name = scheme.name();
    let observed = observed_p1ph(scheme, p)?;
    let mut rows = Vec::new();
    if scheme == Scheme::Optical && p.delta == 0.0 {
        // dark-state photon population at the pulse centre
        let peak = kappa_condition_optical(1.0, 1.0, p.g, p.omega, p.a, p.tau)?;
        rows.push(BoundReport::upper(name, "max_p1ph", "dark-state-centre", peak, observed, 0.05));
        return Ok(rows);
    }
    let (g_peak, d) = effective_three_level(scheme, p)?;
    let b = adiabatic_population_bound(g_peak, p.total_time, p.a, p.tau, d)?;
    rows.push(BoundReport::upper(name, "max_p1ph", "gaussian-half-factor", b.appendix, observed, 0.0));
    rows.push(BoundReport::upper(name, "max_p1ph", "gaussian-full-factor", b.main_text, observed, 0.0));
    rows.push(BoundReport::upper(name, "max_p1ph_estimate", "adiabatic-following", b.following_estimate, observed, 0.1));
    let sched = ThreeLevelSchedule::standard(g_peak, d, p.a, p.tau, p.total_time)?;
    for (branch, tag) in [(Branch::Plus, "messiah-plus"), (Branch::Minus, "messiah-minus")] {
        let analytic = messiah_bound(&sched, branch, 4001);
        let numeric = transition_amplitude_numeric(&sched, branch)?;
        rows.push(BoundReport::upper(name, "transition_probability", tag, analytic, numeric, 1e-9));
    }
    Ok(rows)
}

/// Bounds mode: every `(T, Δ)` grid point, in grid order.
pub fn bounds(s: &Scenario) -> Result<Vec<(f64, f64, Vec<BoundReport>)>> {
    s.validate()?;
    let scheme = s.scheme()?;
    let base = s.effective_params();
    let times = if s.total_times.is_empty() { vec![base.total_time] } else { s.total_times.clone() };
    let deltas = if s.deltas.is_empty() { vec![base.delta] } else { s.deltas.clone() };
    let grid: Vec<(f64, f64)> = times.iter().flat_map(|&t| deltas.iter().map(move |&d| (t, d))).collect();
    grid.par_iter()
        .map(|&(t, d)| {
            let p = SchemeParams { total_time: t, delta: d, ..base.clone() };
            Ok((t, d, bound_rows_at(scheme, &p)?))
        })
        .collect()
}

/// One entry of the self-check suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl CheckOutcome {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        CheckOutcome { name: name.into(), value, limit, passed: value <= limit }
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        CheckOutcome { name: name.into(), value, limit, passed: value >= limit }
    }
}

/// Deterministic interior sample points for an `n_ground`-level chart.
pub fn sample_points(n_ground: usize, count: usize) -> Vec<SphericalParams> {
    (0..count)
        .map(|k| {
            let x = (k as f64 + 0.5) / count as f64;
            let thetas = (0..n_ground - 1).map(|j| 0.1 + 1.3 * ((x + 0.37 * j as f64) % 1.0)).collect();
            let phis = (0..n_ground - 1).map(|j| -2.5 + 5.0 * ((x * 1.618 + 0.29 * j as f64) % 1.0)).collect();
            SphericalParams::new(n_ground, thetas, phis, 1.0).expect("sample in chart")
        })
        .collect()
}

/// Largest entrywise gap between closed-form and finite-difference connections.
pub fn connection_fd_gap(samples: &[SphericalParams], step: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in samples {
        let exact = connection(p, FrameChart::Analytic, None)?;
        let fd = connection(p, FrameChart::Analytic, Some(step))?;
        for (a, b) in exact.components.iter().zip(&fd.components) {
            worst = worst.max(max_abs_diff(a, b));
        }
    }
    Ok(worst)
}

/// The fast invariant suite behind `hqc check`.
pub fn run_checks() -> Result<Vec<CheckOutcome>> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut out = Vec::new();
    out.push(CheckOutcome::at_most("connection_fd_n3", connection_fd_gap(&sample_points(3, 10), 1e-5)?, 1e-8));
    out.push(CheckOutcome::at_most("connection_fd_n5", connection_fd_gap(&sample_points(5, 10), 1e-5)?, 1e-8));
    for kind in [GateKind::Ry, GateKind::Rz, GateKind::Phase4] {
        let path = synthesize_loop(kind, FRAC_PI_2, 10_000)?;
        let u = path_ordered_holonomy(&path)?.unitary;
        out.push(CheckOutcome::at_most(&format!("holonomy_{kind:?}_half_pi"), max_abs_diff(&u, &kind.target(FRAC_PI_2)), 1e-4));
    }
    let u = path_ordered_holonomy(&synthesize_loop(GateKind::Phase4, PI, 10_000)?)?.unitary;
    let off = (0..4).flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j))).map(|ij| u[ij].norm()).fold(0.0, f64::max);
    out.push(CheckOutcome::at_most("phase_gate_off_diagonal", off, 1e-6));
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0), c(1.0), c(1.0), c(-1.0)]));
    out.push(CheckOutcome::at_most("phase_gate_diagonal", max_abs_diff(&CMatrix::from_fn(4, 4, |i, j| if i == j { u[(i, j)] } else { c(0.0) }), &diag), 1e-4));
    out.push(CheckOutcome::at_least("holonomy_rank_n3", holonomy_rank_lower_bound(&sample_points(3, 10))? as f64, 4.0));
    let om = crate::bounds::omega_tilde(crate::bounds::Regime::Resonant, 0.05, 0.05, 1.0, 0.0)?;
    out.push(CheckOutcome::at_most("omega_tilde_equal_pulses", (om - 0.05).abs(), 1e-12));
    let p = SchemeParams { total_time: 1e4, ..SchemeParams::default() };
    out.push(CheckOutcome::at_least("optical_lossless_fidelity", run_transfer(Scheme::Optical, &p, (1, 0))?.fidelity, 0.99));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_rejects_unknown_keys() {
        let s = Scenario::from_json(r#"{"mode":"transfer","scheme":"optical","params":{"total_time":5000}}"#).unwrap();
        assert_eq!(s.mode, Mode::Transfer);
        assert_eq!(s.params.total_time, 5000.0);
        assert_eq!(s.params.omega, 0.05);
        assert_eq!(s.word, (1, 0));
        assert!(Scenario::from_json(r#"{"mode":"transfer","bogus":1}"#).is_err());
        assert!(Scenario::from_json(r#"{"mode":"transfer","params":{"omgea":1}}"#).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut s = Scenario::new(Mode::Sweep);
        s.scheme = Some(Scheme::Optical);
        assert!(s.validate().is_err());
        s.gammas = vec![0.0];
        s.kappas = vec![0.0];
        s.validate().unwrap();
        s.kappas = vec![-1.0];
        assert!(s.validate().is_err());
        let mut g = Scenario::new(Mode::Gate);
        assert!(g.validate().is_err());
        g.gate = Some(GateSpec { kind: None, angle: 0.0, n_steps: 10, loop_file: Some("missing.json".into()) });
        assert!(g.validate().is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(scenario_hash("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn gate_mode_ry() {
        let mut s = Scenario::new(Mode::Gate);
        s.gate = Some(GateSpec { kind: Some(GateKind::Ry), angle: std::f64::consts::FRAC_PI_2, n_steps: 10_000, loop_file: None });
        let out = run_gate(&s).unwrap();
        assert!(out.discrepancy.unwrap() < 1e-4);
        assert!((out.stokes_angle.unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-8);
    }

    #[test]
    fn one_point_sweep_equals_transfer() {
        let mut s = Scenario::new(Mode::Sweep);
        s.scheme = Some(Scheme::Optical);
        s.params.total_time = 3000.0;
        s.gammas = vec![0.0];
        s.kappas = vec![0.0];
        let rows = sweep(&s, 1).unwrap();
        s.mode = Mode::Transfer;
        assert_eq!(rows, vec![run_single_transfer(&s).unwrap()]);
    }

    #[test]
    fn check_suite_passes() {
        let checks = run_checks().unwrap();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
    }
}
