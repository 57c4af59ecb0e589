//! Closed loops on the control manifold and their holonomies.
//!
//! The holonomy of a loop is `U = P exp(−∮ A)`, with later segments on the
//! left. A dark-space amplitude vector `c` (state `Σ c_α ψ^α`) driven
//! adiabatically around the loop picks up `c ↦ U c`. Results are reported in
//! the logical basis `|g₁⟩ … |g_{N−1}⟩`, which coincides (up to signs fixed
//! by the chart) with the dark frame at the base point.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::lambda_system::{connection, frame_in_chart, DarkFrame, FrameChart, SphericalParams};
use crate::linalg::{c, expm, max_abs_diff, unitarity_deviation, CMatrix, I};
use crate::quadrature::adaptive_simpson;
use crate::{Error, Result, C64};

const CLOSURE_TOL: f64 = 1e-14;

/// The three single-rectangle gate families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// y-rotation on the first qubit, loops in (θ₁, θ₂) of the 3+1 system.
    Ry,
    /// Phase on |1⟩ (a z-rotation up to global phase), loops in (θ₂, φ₂).
    Rz,
    /// Two-qubit phase on |g₄⟩, loops in (θ₄, φ₅) of the 5+1 system.
    Phase4,
}

impl GateKind {
    pub fn n_ground(self) -> usize {
        match self {
            GateKind::Ry | GateKind::Rz => 3,
            GateKind::Phase4 => 5,
        }
    }

    /// Flat coordinate indices `(x, y)` of the chart; `x` is always a θ.
    pub fn axes(self) -> (usize, usize) {
        match self {
            GateKind::Ry => (0, 1),
            GateKind::Rz => (1, 2),
            GateKind::Phase4 => (3, 7),
        }
    }

    /// Curvature density as a function of the chart's θ coordinate.
    pub fn density(self, x: f64) -> f64 {
        match self {
            GateKind::Ry => x.cos(),
            GateKind::Rz | GateKind::Phase4 => (2.0 * x).sin(),
        }
    }

    /// `∫₀^x density`.
    fn density_primitive(self, x: f64) -> f64 {
        match self {
            GateKind::Ry => x.sin(),
            GateKind::Rz | GateKind::Phase4 => x.sin().powi(2),
        }
    }

    /// Hermitian generator `G` in the logical basis; the gate of angle `a`
    /// is `exp(i a G)`.
    pub fn generator(self) -> CMatrix {
        match self {
            GateKind::Ry => CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]),
            GateKind::Rz => CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(1.0)]),
            GateKind::Phase4 => {
                let mut g = CMatrix::zeros(4, 4);
                g[(3, 3)] = c(1.0);
                g
            }
        }
    }

    /// Sign relating the counterclockwise surface integral to the gate
    /// angle: a ccw loop of weighted area `S` yields `exp(i·orientation·S·G)`.
    pub fn orientation(self) -> f64 {
        match self {
            GateKind::Ry | GateKind::Rz => -1.0,
            GateKind::Phase4 => 1.0,
        }
    }

    /// Target gate `exp(i·angle·G)`.
    pub fn target(self, angle: f64) -> CMatrix {
        expm(&(self.generator() * (I * angle)))
    }
}

/// A closed piecewise-linear loop on the control manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopPath {
    pub vertices: Vec<SphericalParams>,
    /// Midpoint substeps per segment.
    pub n_steps: usize,
    #[serde(default = "default_chart")]
    pub chart: FrameChart,
}

fn default_chart() -> FrameChart {
    FrameChart::Analytic
}

impl LoopPath {
    pub fn new(vertices: Vec<SphericalParams>, n_steps: usize) -> Result<Self> {
        let l = LoopPath { vertices, n_steps, chart: FrameChart::Analytic };
        l.validate()?;
        Ok(l)
    }

    pub fn with_chart(mut self, chart: FrameChart) -> Self {
        self.chart = chart;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let first = self.vertices.first().ok_or_else(|| Error::InvalidParameter("loop has no vertices".into()))?;
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        let n = first.n_ground();
        for v in &self.vertices {
            if v.n_ground() != n {
                return Err(Error::Dimension("loop vertices disagree on N".into()));
            }
            v.validate()?;
        }
        let last = self.vertices.last().unwrap();
        let gap = first
            .coords()
            .iter()
            .zip(last.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if gap > CLOSURE_TOL {
            return Err(Error::OpenLoop(gap));
        }
        if first.thetas.iter().any(|t| *t != 0.0) {
            return Err(Error::BasePoint);
        }
        Ok(())
    }

    pub fn n_ground(&self) -> usize {
        self.vertices[0].n_ground()
    }

    /// The same loop traversed backwards.
    pub fn reversed(&self) -> Self {
        let mut l = self.clone();
        l.vertices.reverse();
        l
    }

    /// Traverse `self`, then `next`; both must share the base point.
    pub fn then(&self, next: &LoopPath) -> Result<Self> {
        if self.vertices[0].coords() != next.vertices[0].coords() {
            return Err(Error::InvalidParameter("loops do not share a base point".into()));
        }
        let mut vertices = self.vertices.clone();
        vertices.extend(next.vertices.iter().skip(1).cloned());
        Ok(LoopPath { vertices, n_steps: self.n_steps.max(next.n_steps), chart: self.chart })
    }

    /// A copy with a different step count.
    pub fn with_steps(&self, n_steps: usize) -> Self {
        LoopPath { n_steps, ..self.clone() }
    }

    /// Axis-aligned rectangle in the chart of `kind`, based at the origin,
    /// spanning `x ∈ [0, x_len]`, `y ∈ [0, y_len]`; counterclockwise when
    /// `ccw` is true.
    pub fn rectangle(kind: GateKind, x_len: f64, y_len: f64, ccw: bool, n_steps: usize, magnitude: f64) -> Result<Self> {
        let base = SphericalParams::base_point(kind.n_ground(), magnitude);
        let (ix, iy) = kind.axes();
        let at = |x: f64, y: f64| {
            let mut p = base.clone();
            p.set(ix, x);
            p.set(iy, y);
            p
        };
        let mut corners = vec![at(0.0, 0.0), at(x_len, 0.0), at(x_len, y_len), at(0.0, y_len), at(0.0, 0.0)];
        if !ccw {
            corners.reverse();
        }
        LoopPath::new(corners, n_steps)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let l: LoopPath = serde_json::from_str(text)?;
        l.validate()?;
        Ok(l)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Outcome of a path-ordered holonomy evaluation.
#[derive(Clone, Debug)]
pub struct HolonomyResult {
    /// `(N−1) × (N−1)` unitary in the logical basis.
    pub unitary: CMatrix,
    /// `‖U(n) − U(2n)‖_max`.
    pub discretization_error_estimate: f64,
}

/// Path-ordered holonomy in the dark-frame basis of the chart, `n` substeps
/// per segment.
fn frame_holonomy(path: &LoopPath, n: usize) -> Result<CMatrix> {
    let dim = path.n_ground() - 1;
    let mut u = CMatrix::identity(dim, dim);
    for seg in path.vertices.windows(2) {
        let (a, b) = (seg[0].coords(), seg[1].coords());
        let delta: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (y - x) / n as f64).collect();
        if delta.iter().all(|d| *d == 0.0) {
            continue;
        }
        for k in 0..n {
            let s = (k as f64 + 0.5) / n as f64;
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * (y - x)).collect();
            let p = SphericalParams::from_coords(&mid, seg[0].magnitude);
            let conn = match path.chart {
                FrameChart::Analytic => connection(&p, FrameChart::Analytic, None)?,
                FrameChart::Numeric => connection(&p, FrameChart::Numeric, Some(crate::lambda_system::DEFAULT_FD_STEP))?,
            };
            let mut gen = CMatrix::zeros(dim, dim);
            for (am, d) in conn.components.iter().zip(&delta) {
                if *d != 0.0 {
                    gen -= am * c(*d);
                }
            }
            u = expm(&gen) * u;
        }
    }
    Ok(u)
}

/// `L†F₀`: change of basis from the base-point dark frame to logical amplitudes.
fn base_to_logical(path: &LoopPath) -> Result<CMatrix> {
    let n = path.n_ground();
    let f0 = frame_in_chart(&path.vertices[0], path.chart, None)?;
    Ok(DarkFrame::logical(n).states.adjoint() * f0.states)
}

/// `P exp(−∮A)` in the logical basis at the path's own `n_steps`, without
/// the doubled-resolution error estimate.
pub fn holonomy_unitary(path: &LoopPath) -> Result<CMatrix> {
    path.validate()?;
    let m = base_to_logical(path)?;
    let u = &m * frame_holonomy(path, path.n_steps)? * m.adjoint();
    let dev = unitarity_deviation(&u);
    if dev > 1e-8 {
        return Err(Error::NotUnitary(dev));
    }
    Ok(u)
}

/// `P exp(−∮A)` by midpoint exponentials, expressed in the logical basis.
pub fn path_ordered_holonomy(path: &LoopPath) -> Result<HolonomyResult> {
    let coarse = holonomy_unitary(path)?;
    let fine = holonomy_unitary(&path.with_steps(2 * path.n_steps))?;
    let err = max_abs_diff(&coarse, &fine);
    Ok(HolonomyResult { unitary: coarse, discretization_error_estimate: err })
}

/// Which supported chart a loop lies in, if any.
pub fn detect_kind(path: &LoopPath) -> Option<GateKind> {
    [GateKind::Ry, GateKind::Rz, GateKind::Phase4]
        .into_iter()
        .find(|k| confined_to(path, *k))
}

fn confined_to(path: &LoopPath, kind: GateKind) -> bool {
    if path.n_ground() != kind.n_ground() {
        return false;
    }
    let (ix, iy) = kind.axes();
    path.vertices.iter().all(|v| {
        v.coords()
            .iter()
            .enumerate()
            .all(|(i, x)| i == ix || i == iy || x.abs() <= CLOSURE_TOL)
    })
}

/// Oriented integral of the chart's curvature density over the region the
/// loop encloses (positive for counterclockwise loops in the `(x, y)` plane).
///
/// Evaluated through Green's theorem as `∮ P(x) dy` with `P(x) = ∫₀^x ρ`,
/// both integrals by adaptive Simpson quadrature.
pub fn surface_integral_angle(path: &LoopPath, kind: GateKind) -> Result<f64> {
    path.validate()?;
    if !confined_to(path, kind) {
        return Err(Error::ChartViolation(format!("loop is not confined to the {kind:?} chart")));
    }
    let (ix, iy) = kind.axes();
    let primitive = |x: f64| adaptive_simpson(|t| kind.density(t), 0.0, x, 1e-14);
    let mut total = 0.0;
    for seg in path.vertices.windows(2) {
        let (x0, y0) = (seg[0].get(ix), seg[0].get(iy));
        let (x1, y1) = (seg[1].get(ix), seg[1].get(iy));
        let dy = y1 - y0;
        if dy == 0.0 {
            continue;
        }
        let avg = if x0 == x1 {
            primitive(x0)?
        } else {
            // A failed inner integral becomes NaN, which the outer one rejects.
            adaptive_simpson(|s| primitive(x0 + s * (x1 - x0)).unwrap_or(f64::NAN), 0.0, 1.0, 1e-13)?
        };
        total += dy * avg;
    }
    Ok(total)
}

/// Largest angle one synthesized rectangle can produce.
pub const RECTANGLE_CAPACITY: f64 = TAU;

/// A rectangle whose holonomy is `exp(i·angle·G)` for the gate family.
///
/// Angles beyond ±2π are reduced modulo 2π (the gates are 2π-periodic). The
/// φ/θ₂ side is fixed at π (or 2π for |angle| > π) and the θ side solved in
/// closed form from the density primitive.
pub fn synthesize_loop(kind: GateKind, angle: f64, n_steps: usize) -> Result<LoopPath> {
    if !angle.is_finite() {
        return Err(Error::CapacityExceeded { angle, capacity: RECTANGLE_CAPACITY });
    }
    let a = if angle.abs() > RECTANGLE_CAPACITY { angle % RECTANGLE_CAPACITY } else { angle };
    let area = a * kind.orientation();
    let y_len = if area.abs() <= PI { PI } else { TAU };
    let level = (area.abs() / y_len).min(1.0);
    let x_len = match kind {
        GateKind::Ry => level.asin(),
        GateKind::Rz | GateKind::Phase4 => level.sqrt().asin(),
    };
    debug_assert!((kind.density_primitive(x_len) * y_len - area.abs()).abs() < 1e-12);
    LoopPath::rectangle(kind, x_len, y_len, area >= 0.0, n_steps, 1.0)
}

/// `R_y(β) = exp(iβσ_y)`.
pub fn rotation_y(beta: f64) -> CMatrix {
    let (s, co) = beta.sin_cos();
    CMatrix::from_row_slice(2, 2, &[c(co), c(s), c(-s), c(co)])
}

/// `R_z(α) = diag(e^{−iα/2}, e^{iα/2})`.
pub fn rotation_z(alpha: f64) -> CMatrix {
    CMatrix::from_row_slice(
        2,
        2,
        &[C64::from_polar(1.0, -alpha / 2.0), c(0.0), c(0.0), C64::from_polar(1.0, alpha / 2.0)],
    )
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Euler angles `(γ, β, α)` with `u = R_z(γ) R_y(β) R_z(α)` up to a global
/// phase, `β ∈ [0, π]`, `γ, α ∈ (−π, π]`. Any 2×2 unitary is accepted; its
/// determinant phase is absorbed in the global phase.
pub fn euler_decompose(u: &CMatrix) -> Result<(f64, f64, f64)> {
    if u.shape() != (2, 2) {
        return Err(Error::Dimension(format!("expected 2x2, got {:?}", u.shape())));
    }
    let dev = unitarity_deviation(u);
    if dev > 1e-10 {
        return Err(Error::NotUnitary(dev));
    }
    let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
    let su = u / det.sqrt();
    let (a, b) = (su[(0, 0)], su[(0, 1)]);
    let beta0 = b.norm().atan2(a.norm());
    const EPS: f64 = 1e-12;

    let mut best: Option<(f64, f64, f64)> = None;
    // β and π − β differ by the sign of cos β, i.e. a phase π on a.
    for (beta, a_eff) in [(beta0, a), (PI - beta0, -a)] {
        let (sum, diff) = if b.norm() < EPS {
            let s = -2.0 * a_eff.arg();
            (s, s)
        } else if a.norm() < EPS {
            let d = -2.0 * b.arg();
            (d, d)
        } else {
            (-2.0 * a_eff.arg(), -2.0 * b.arg())
        };
        let gamma = wrap(0.5 * (sum + diff));
        let alpha = wrap(0.5 * (sum - diff));
        let better = best.map_or(true, |(g, _, al)| gamma.abs() + alpha.abs() < g.abs() + al.abs() - 1e-12);
        if better {
            best = Some((gamma, beta, alpha));
        }
    }
    let (gamma, beta, alpha) = best.unwrap();
    let r = rotation_z(gamma) * rotation_y(beta) * rotation_z(alpha);
    let overlap = (r.adjoint() * u).trace().norm() / 2.0;
    if (overlap - 1.0).abs() > 1e-9 {
        return Err(Error::Invariant(format!("Euler recomposition mismatch: |tr| / 2 = {overlap}")));
    }
    Ok((gamma, beta, alpha))
}

/// Distance between two unitaries modulo a global phase.
pub fn phase_insensitive_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let tr = (a.adjoint() * b).trace();
    let phase = if tr.norm() > 0.0 { tr / tr.norm() } else { c(1.0) };
    max_abs_diff(&(a * phase), b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn hadamard_su() -> CMatrix {
        let h = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(1.0), c(-1.0)]) / c(2f64.sqrt());
        // det H = −1; divide by i to reach det 1.
        h * (-I)
    }

    #[test]
    fn degenerate_loop_is_identity() {
        let base = SphericalParams::base_point(3, 1.0);
        let l = LoopPath::new(vec![base.clone(), base.clone(), base], 10).unwrap();
        let h = path_ordered_holonomy(&l).unwrap();
        assert!(max_abs_diff(&h.unitary, &CMatrix::identity(2, 2)) < 1e-15);
        assert_eq!(surface_integral_angle(&l, GateKind::Ry).unwrap(), 0.0);
    }

    #[test]
    fn open_loop_and_base_point_rejected() {
        let base = SphericalParams::base_point(3, 1.0);
        let off = base.shifted(0, 0.1);
        assert!(matches!(LoopPath::new(vec![base.clone(), off.clone()], 4), Err(Error::OpenLoop(_))));
        assert!(matches!(LoopPath::new(vec![off.clone(), base, off], 4), Err(Error::BasePoint)));
    }

    #[test]
    fn rz_rectangle_surface_integral() {
        let l = LoopPath::rectangle(GateKind::Rz, FRAC_PI_4, PI, true, 10, 1.0).unwrap();
        let oracle = PI * (1.0 - (2.0 * FRAC_PI_4).cos()) / 2.0;
        assert!((surface_integral_angle(&l, GateKind::Rz).unwrap() - oracle).abs() < 1e-12);
        assert!((oracle - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn phase_rectangle_surface_integral() {
        let l = LoopPath::rectangle(GateKind::Phase4, FRAC_PI_2, FRAC_PI_2, true, 10, 1.0).unwrap();
        let oracle = FRAC_PI_2 * (1.0 - PI.cos()) / 2.0;
        assert!((surface_integral_angle(&l, GateKind::Phase4).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn chart_violation_detected() {
        let l = LoopPath::rectangle(GateKind::Ry, 0.3, 0.3, true, 10, 1.0).unwrap();
        assert!(matches!(surface_integral_angle(&l, GateKind::Rz), Err(Error::ChartViolation(_))));
        assert_eq!(detect_kind(&l), Some(GateKind::Ry));
    }

    #[test]
    fn ry_rectangle_matches_stokes() {
        let l = LoopPath::rectangle(GateKind::Ry, FRAC_PI_2, FRAC_PI_2, true, 200, 1.0).unwrap();
        let s = surface_integral_angle(&l, GateKind::Ry).unwrap();
        assert!((s - FRAC_PI_2).abs() < 1e-12);
        let h = path_ordered_holonomy(&l).unwrap();
        let expect = GateKind::Ry.target(GateKind::Ry.orientation() * s);
        assert!(max_abs_diff(&h.unitary, &expect) < 1e-10);
    }

    #[test]
    fn reversal_inverts() {
        let l = LoopPath::rectangle(GateKind::Rz, 0.6, 1.3, true, 100, 1.0).unwrap();
        let u = path_ordered_holonomy(&l).unwrap().unitary;
        let v = path_ordered_holonomy(&l.reversed()).unwrap().unitary;
        assert!(max_abs_diff(&(v * u), &CMatrix::identity(2, 2)) < 1e-10);
    }

    #[test]
    fn synthesized_loops_hit_targets() {
        for kind in [GateKind::Ry, GateKind::Rz, GateKind::Phase4] {
            for &angle in &[0.0, 0.4, -1.1, FRAC_PI_2, PI, -2.5, 4.0, -6.0, 9.0] {
                let l = synthesize_loop(kind, angle, 50).unwrap();
                let s = surface_integral_angle(&l, kind).unwrap();
                let reduced = if angle.abs() > TAU { angle % TAU } else { angle };
                assert!((kind.orientation() * s - reduced).abs() < 1e-10, "{kind:?} {angle}");
                let u = path_ordered_holonomy(&l).unwrap().unitary;
                assert!(max_abs_diff(&u, &kind.target(angle)) < 1e-9, "{kind:?} {angle}");
            }
        }
        assert!(synthesize_loop(GateKind::Ry, f64::NAN, 10).is_err());
    }

    #[test]
    fn phase_gate_is_selective() {
        let l = synthesize_loop(GateKind::Phase4, PI, 100).unwrap();
        let u = path_ordered_holonomy(&l).unwrap().unitary;
        let mut expect = CMatrix::identity(4, 4);
        expect[(3, 3)] = c(-1.0);
        assert!(max_abs_diff(&u, &expect) < 1e-10);
    }

    #[test]
    fn euler_cases() {
        let (g, b, a) = euler_decompose(&CMatrix::identity(2, 2)).unwrap();
        assert!(g.abs() < 1e-15 && b.abs() < 1e-15 && a.abs() < 1e-15);
        for &b0 in &[0.3, 1.2, 2.0, 3.0] {
            let (g, b, a) = euler_decompose(&rotation_y(b0)).unwrap();
            assert!(g.abs() < 1e-12 && (b - b0).abs() < 1e-12 && a.abs() < 1e-12, "{b0}: {g} {b} {a}");
        }
        let h = hadamard_su();
        let (g, b, a) = euler_decompose(&h).unwrap();
        let r = rotation_z(g) * rotation_y(b) * rotation_z(a);
        assert!(phase_insensitive_distance(&r, &h) < 1e-10);
        assert!((0.0..=PI).contains(&b));
        assert!(euler_decompose(&(CMatrix::identity(2, 2) * c(1.1))).is_err());
    }

    #[test]
    fn euler_random_unitaries() {
        for k in 0..50 {
            let x = k as f64;
            let u = rotation_z(0.7 * x - 3.0) * rotation_y(0.13 * x) * rotation_z(2.9 - 0.4 * x) * C64::from_polar(1.0, x);
            let (g, b, a) = euler_decompose(&u).unwrap();
            let r = rotation_z(g) * rotation_y(b) * rotation_z(a);
            assert!(phase_insensitive_distance(&r, &u) < 1e-10);
            assert!(g > -PI - 1e-15 && g <= PI && a > -PI - 1e-15 && a <= PI);
        }
    }

    #[test]
    fn loop_json_roundtrip() {
        let l = synthesize_loop(GateKind::Rz, 0.8, 20).unwrap();
        let back = LoopPath::from_json(&l.to_json().unwrap()).unwrap();
        assert_eq!(back, l);
        assert!(max_abs(&path_ordered_holonomy(&back).unwrap().unitary) > 0.0);
    }
}
