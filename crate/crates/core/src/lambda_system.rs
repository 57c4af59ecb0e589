//! The (N+1)-level Λ system: N ground states coupled to one excited level.
//!
//! Basis ordering is fixed as `(|g₁⟩, …, |g_N⟩, |e⟩)`. The control manifold is
//! parametrised by generalized spherical coordinates
//!
//! ```text
//! Ω₁ = |Ω| sin θ₁
//! Ω_k = |Ω| e^{-iφ_k} cos θ₁ ⋯ cos θ_{k-1} sin θ_k      (1 < k < N)
//! Ω_N = |Ω| e^{-iφ_N} cos θ₁ ⋯ cos θ_{N-1}
//! ```
//!
//! Coordinates are indexed as `θ₁ … θ_{N-1}` followed by `φ₂ … φ_N`, giving
//! `2(N-1)` real parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::{c, procrustes_align, CMatrix, CVector, I};
use crate::{Error, Result, C64};

/// Overlap below which a gauge-aligned frame is considered discontinuous.
pub const GAUGE_OVERLAP_THRESHOLD: f64 = 0.5;

/// Default central-difference increment (radians).
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Relative singular-value cut used by the rank estimate.
pub const RANK_RELATIVE_THRESHOLD: f64 = 1e-8;

/// A point λ on the control manifold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphericalParams {
    /// θ₁ … θ_{N-1}
    pub thetas: Vec<f64>,
    /// φ₂ … φ_N
    pub phis: Vec<f64>,
    /// |Ω|, in units of g.
    pub magnitude: f64,
}

/// A coordinate of the control manifold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Coordinate {
    /// θ_k, 1-based.
    Theta(usize),
    /// φ_k, 1-based (k ≥ 2).
    Phi(usize),
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coordinate::Theta(k) => write!(f, "theta{k}"),
            Coordinate::Phi(k) => write!(f, "phi{k}"),
        }
    }
}

impl SphericalParams {
    pub fn new(n_ground: usize, thetas: Vec<f64>, phis: Vec<f64>, magnitude: f64) -> Result<Self> {
        if n_ground < 2 {
            return Err(Error::InvalidParameter(format!("need N >= 2 ground states, got {n_ground}")));
        }
        let p = SphericalParams { thetas, phis, magnitude };
        p.validate_for(n_ground)?;
        Ok(p)
    }

    /// All angles zero: Ω = (0, …, 0, |Ω|), so the dark space is spanned by
    /// `|g₁⟩ … |g_{N-1}⟩`.
    pub fn base_point(n_ground: usize, magnitude: f64) -> Self {
        SphericalParams {
            thetas: vec![0.0; n_ground - 1],
            phis: vec![0.0; n_ground - 1],
            magnitude,
        }
    }

    pub fn n_ground(&self) -> usize {
        self.thetas.len() + 1
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_for(self.thetas.len() + 1)
    }

    fn validate_for(&self, n_ground: usize) -> Result<()> {
        if self.thetas.len() != n_ground - 1 || self.phis.len() != n_ground - 1 {
            return Err(Error::Dimension(format!(
                "N = {n_ground} needs {} thetas and {} phis, got {} and {}",
                n_ground - 1,
                n_ground - 1,
                self.thetas.len(),
                self.phis.len()
            )));
        }
        if !(self.magnitude >= 0.0) || !self.magnitude.is_finite() {
            return Err(Error::InvalidParameter(format!("|Omega| must be finite and >= 0, got {}", self.magnitude)));
        }
        if self.thetas.iter().chain(&self.phis).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("non-finite angle".into()));
        }
        Ok(())
    }

    pub fn n_coords(&self) -> usize {
        2 * self.thetas.len()
    }

    pub fn coordinate(&self, index: usize) -> Coordinate {
        let m = self.thetas.len();
        if index < m {
            Coordinate::Theta(index + 1)
        } else {
            Coordinate::Phi(index - m + 2)
        }
    }

    pub fn coordinate_index(n_ground: usize, coord: Coordinate) -> usize {
        match coord {
            Coordinate::Theta(k) => k - 1,
            Coordinate::Phi(k) => n_ground - 1 + k - 2,
        }
    }

    /// Flat coordinate vector `(θ₁ … θ_{N-1}, φ₂ … φ_N)`.
    pub fn coords(&self) -> Vec<f64> {
        self.thetas.iter().chain(&self.phis).copied().collect()
    }

    pub fn from_coords(coords: &[f64], magnitude: f64) -> Self {
        let m = coords.len() / 2;
        SphericalParams {
            thetas: coords[..m].to_vec(),
            phis: coords[m..].to_vec(),
            magnitude,
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        let m = self.thetas.len();
        if index < m {
            self.thetas[index]
        } else {
            self.phis[index - m]
        }
    }

    pub fn set(&mut self, index: usize, value: f64) {
        let m = self.thetas.len();
        if index < m {
            self.thetas[index] = value;
        } else {
            self.phis[index - m] = value;
        }
    }

    pub fn shifted(&self, index: usize, delta: f64) -> Self {
        let mut p = self.clone();
        p.set(index, p.get(index) + delta);
        p
    }

    pub fn couplings(&self) -> CouplingVector {
        couplings_from_spherical(self)
    }

    /// e^{-iφ_k} for 1-based ground index k (φ₁ ≡ 0).
    fn phase(&self, k: usize) -> C64 {
        if k == 1 {
            c(1.0)
        } else {
            C64::from_polar(1.0, -self.phis[k - 2])
        }
    }
}

/// Complex Rabi couplings Ω₁ … Ω_N.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingVector {
    pub omegas: Vec<C64>,
}

impl CouplingVector {
    pub fn new(omegas: Vec<C64>) -> Self {
        CouplingVector { omegas }
    }

    pub fn n_ground(&self) -> usize {
        self.omegas.len()
    }

    /// N̄ = Σ|Ω_k|².
    pub fn norm_sqr(&self) -> f64 {
        self.omegas.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn couplings_from_spherical(p: &SphericalParams) -> CouplingVector {
    let n = p.n_ground();
    let mut omegas = Vec::with_capacity(n);
    let mut cos_prod = p.magnitude;
    for k in 1..=n {
        let tail = if k < n { p.thetas[k - 1].sin() } else { 1.0 };
        omegas.push(p.phase(k) * (cos_prod * tail));
        if k < n {
            cos_prod *= p.thetas[k - 1].cos();
        }
    }
    CouplingVector { omegas }
}

/// The Λ Hamiltonian on `(|g₁⟩ … |g_N⟩, |e⟩)`.
///
/// The coupling column of |e⟩ carries Ω_k, so `H|e⟩ = Σ Ω_k |g_k⟩` and the
/// bright state is `N̄^{-1/2} Σ Ω_k |g_k⟩`.
pub fn build_hamiltonian(c: &CouplingVector) -> CMatrix {
    let n = c.n_ground();
    let mut h = CMatrix::zeros(n + 1, n + 1);
    for (k, &om) in c.omegas.iter().enumerate() {
        h[(k, n)] = om;
        h[(n, k)] = om.conj();
    }
    h
}

/// `N̄^{-1/2} Σ Ω_k |g_k⟩` embedded in the (N+1)-dimensional space.
pub fn bright_state(c: &CouplingVector) -> Result<CVector> {
    let nbar = c.norm_sqr();
    if nbar <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateCouplings);
    }
    let n = c.n_ground();
    let s = 1.0 / nbar.sqrt();
    Ok(CVector::from_fn(n + 1, |i, _| if i < n { c.omegas[i] * s } else { C64::new(0.0, 0.0) }))
}

/// How a dark frame was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameChart {
    /// Closed-form spherical frame; for N = 3 and N = 5 it is the
    /// single- and two-qubit frame quoted in the literature.
    Analytic,
    /// Orthonormal complement computed numerically and gauge-fixed by
    /// Procrustes alignment to a reference frame (by default the logical
    /// basis `|g₁⟩ … |g_{N-1}⟩`).
    Numeric,
}

/// Orthonormal basis of the N−1 dimensional dark space, stored as the
/// columns of an `(N+1) × (N−1)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DarkFrame {
    pub states: CMatrix,
    pub chart: FrameChart,
}

impl DarkFrame {
    pub fn n_dark(&self) -> usize {
        self.states.ncols()
    }

    pub fn state(&self, alpha: usize) -> CVector {
        self.states.column(alpha).into_owned()
    }

    /// The logical basis `|g₁⟩ … |g_{N-1}⟩` as a frame.
    pub fn logical(n_ground: usize) -> Self {
        DarkFrame {
            states: CMatrix::from_fn(n_ground + 1, n_ground - 1, |i, j| if i == j { c(1.0) } else { c(0.0) }),
            chart: FrameChart::Numeric,
        }
    }
}

/// Numerically computed dark frame.
///
/// Without a reference the frame is the Gram–Schmidt complement of the bright
/// state taken against `|g₁⟩, |g₂⟩, …` in order. With a reference, the frame
/// is rotated within the dark space to maximise its overlap with the
/// reference (smooth-gauge continuation).
pub fn dark_basis(c: &CouplingVector, reference: Option<&DarkFrame>) -> Result<DarkFrame> {
    let frame = gram_schmidt_complement(c)?;
    let states = match reference {
        Some(r) => {
            if r.states.shape() != frame.shape() {
                return Err(Error::Dimension("reference frame shape does not match".into()));
            }
            procrustes_align(&frame, &r.states).0
        }
        None => frame,
    };
    Ok(DarkFrame { states, chart: FrameChart::Numeric })
}

fn gram_schmidt_complement(c: &CouplingVector) -> Result<CMatrix> {
    let n = c.n_ground();
    let bright = bright_state(c)?;
    let mut basis: Vec<CVector> = vec![bright];
    for k in 0..n {
        let mut v = crate::linalg::basis_vector(n + 1, k);
        // two passes of classical Gram–Schmidt for stability
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let nv = v.norm();
        if nv > 1e-6 {
            basis.push(v / c64(nv));
        }
        if basis.len() == n {
            break;
        }
    }
    if basis.len() != n {
        return Err(Error::Invariant("failed to complete dark basis".into()));
    }
    Ok(CMatrix::from_columns(&basis[1..]))
}

fn c64(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Dark frame aligned to `reference`, also returning the smallest overlap
/// singular value so callers can detect chart breakdown.
pub fn aligned_dark_frame(c: &CouplingVector, reference: &DarkFrame) -> Result<(DarkFrame, f64)> {
    let raw = gram_schmidt_complement(c)?;
    let (states, min_overlap) = procrustes_align(&raw, &reference.states);
    Ok((DarkFrame { states, chart: FrameChart::Numeric }, min_overlap))
}

/// Closed-form spherical dark frame and its partial derivatives with respect
/// to every coordinate.
///
/// Built from the nested unit vectors
/// `u_N = e^{-iφ_N}|g_N⟩`, `u_j = sin θ_j e^{-iφ_j}|g_j⟩ + cos θ_j u_{j+1}` as
/// `ψ_j = cos θ_j e^{-iφ_j}|g_j⟩ − sin θ_j u_{j+1}`, with the last vector's
/// sign flipped so that `ψ_{N-1} = −e^{-iφ_{N-1}} cos θ_{N-1}|g_{N-1}⟩ + …`.
pub fn analytic_frame_with_derivatives(p: &SphericalParams) -> (DarkFrame, Vec<CMatrix>) {
    let n = p.n_ground();
    let d = p.n_coords();
    let dim = n + 1;
    let th = |k: usize| p.thetas[k - 1];
    let idx_theta = |k: usize| k - 1;
    let idx_phi = |k: usize| n - 1 + k - 2;

    // u[j] for j in 2..=n, stored at index j; du[j][m].
    let mut u: Vec<CVector> = vec![CVector::zeros(dim); n + 2];
    let mut du: Vec<Vec<CVector>> = vec![vec![CVector::zeros(dim); d]; n + 2];
    let unit = |k: usize| crate::linalg::basis_vector(dim, k - 1);

    u[n] = unit(n) * p.phase(n);
    du[n][idx_phi(n)] = &u[n] * (-I);
    for j in (2..n).rev() {
        let (s, co) = th(j).sin_cos();
        let ej = p.phase(j);
        u[j] = unit(j) * (ej * s) + &u[j + 1] * c(co);
        for m in 0..d {
            du[j][m] = &du[j + 1][m] * c(co);
        }
        du[j][idx_theta(j)] = unit(j) * (ej * co) - &u[j + 1] * c(s);
        du[j][idx_phi(j)] += unit(j) * (-I * ej * s);
    }

    let mut frame = CMatrix::zeros(dim, n - 1);
    let mut dframe = vec![CMatrix::zeros(dim, n - 1); d];
    for j in 1..n {
        let (s, co) = th(j).sin_cos();
        let ej = p.phase(j);
        let sign = if j == n - 1 { -1.0 } else { 1.0 };
        let psi = unit(j) * (ej * co) - &u[j + 1] * c(s);
        frame.set_column(j - 1, &(psi * c(sign)));
        for m in 0..d {
            let mut dpsi = &du[j + 1][m] * c(-s);
            if m == idx_theta(j) {
                dpsi += unit(j) * (ej * -s) - &u[j + 1] * c(co);
            }
            if j >= 2 && m == idx_phi(j) {
                dpsi += unit(j) * (-I * ej * co);
            }
            dframe[m].set_column(j - 1, &(dpsi * c(sign)));
        }
    }
    (DarkFrame { states: frame, chart: FrameChart::Analytic }, dframe)
}

pub fn analytic_frame(p: &SphericalParams) -> DarkFrame {
    analytic_frame_with_derivatives(p).0
}

/// Dark frame in the requested chart. Numeric frames are aligned to the
/// logical basis unless a reference is given.
pub fn frame_in_chart(p: &SphericalParams, chart: FrameChart, reference: Option<&DarkFrame>) -> Result<DarkFrame> {
    match chart {
        FrameChart::Analytic => Ok(analytic_frame(p)),
        FrameChart::Numeric => {
            let logical;
            let reference = match reference {
                Some(r) => r,
                None => {
                    logical = DarkFrame::logical(p.n_ground());
                    &logical
                }
            };
            let (frame, min_overlap) = aligned_dark_frame(&p.couplings(), reference)?;
            if min_overlap < GAUGE_OVERLAP_THRESHOLD {
                return Err(Error::GaugeDiscontinuity { overlap: min_overlap, threshold: GAUGE_OVERLAP_THRESHOLD });
            }
            Ok(frame)
        }
    }
}

/// Wilczek–Zee connection `A_μ^{αβ} = ⟨ψ^α|∂_μ ψ^β⟩` at one point.
#[derive(Clone, Debug)]
pub struct ConnectionSample {
    pub point: SphericalParams,
    /// One `(N−1) × (N−1)` anti-Hermitian matrix per coordinate.
    pub components: Vec<CMatrix>,
}

impl ConnectionSample {
    pub fn component(&self, coord: Coordinate) -> &CMatrix {
        &self.components[SphericalParams::coordinate_index(self.point.n_ground(), coord)]
    }
}

/// Curvature components `F_μν` for μ < ν.
#[derive(Clone, Debug)]
pub struct Curvature {
    pub n_coords: usize,
    pub components: Vec<((usize, usize), CMatrix)>,
}

impl Curvature {
    /// `F_μν`, antisymmetric in (μ, ν).
    pub fn get(&self, mu: usize, nu: usize) -> CMatrix {
        if mu == nu {
            let n = self.components.first().map(|(_, m)| m.nrows()).unwrap_or(0);
            return CMatrix::zeros(n, n);
        }
        let (a, b, sign) = if mu < nu { (mu, nu, 1.0) } else { (nu, mu, -1.0) };
        let m = &self
            .components
            .iter()
            .find(|((x, y), _)| *x == a && *y == b)
            .expect("curvature component")
            .1;
        m * c(sign)
    }
}

/// Partial derivatives of a chart's frame: exact for the analytic chart,
/// central differences of width `step` otherwise.
pub fn frame_derivatives(p: &SphericalParams, chart: FrameChart, step: Option<f64>) -> Result<(DarkFrame, Vec<CMatrix>)> {
    match (chart, step) {
        (FrameChart::Analytic, None) => Ok(analytic_frame_with_derivatives(p)),
        (_, step) => {
            let h = step.unwrap_or(DEFAULT_FD_STEP);
            if !(h > 0.0) {
                return Err(Error::InvalidParameter(format!("finite-difference step must be > 0, got {h}")));
            }
            let reference = match chart {
                FrameChart::Analytic => None,
                FrameChart::Numeric => Some(DarkFrame::logical(p.n_ground())),
            };
            let center = frame_in_chart(p, chart, reference.as_ref())?;
            let mut derivs = Vec::with_capacity(p.n_coords());
            for m in 0..p.n_coords() {
                let plus = frame_in_chart(&p.shifted(m, h), chart, reference.as_ref())?;
                let minus = frame_in_chart(&p.shifted(m, -h), chart, reference.as_ref())?;
                derivs.push((plus.states - minus.states) / c(2.0 * h));
            }
            Ok((center, derivs))
        }
    }
}

fn connection_from_derivatives(frame: &DarkFrame, derivs: &[CMatrix]) -> Vec<CMatrix> {
    let adj = frame.states.adjoint();
    derivs.iter().map(|d| &adj * d).collect()
}

/// `F_μν = ∂_μ A_ν − ∂_ν A_μ − [A_μ, A_ν]`.
///
/// Using `∂_μ A_ν = ⟨∂_μψ|∂_νψ⟩ + ⟨ψ|∂_μ∂_νψ⟩`, the second-derivative terms
/// cancel in the antisymmetrised sum, so only first derivatives are needed.
fn curvature_from_derivatives(derivs: &[CMatrix], conn: &[CMatrix]) -> Curvature {
    let d = derivs.len();
    let mut components = Vec::with_capacity(d * (d - 1) / 2);
    for mu in 0..d {
        for nu in (mu + 1)..d {
            let dd = derivs[mu].adjoint() * &derivs[nu] - derivs[nu].adjoint() * &derivs[mu];
            let comm = &conn[mu] * &conn[nu] - &conn[nu] * &conn[mu];
            components.push(((mu, nu), dd - comm));
        }
    }
    Curvature { n_coords: d, components }
}

/// Connection at `p` by differentiating the chart's frame: exact for the
/// analytic chart with `step = None`, central differences otherwise.
pub fn connection(p: &SphericalParams, chart: FrameChart, step: Option<f64>) -> Result<ConnectionSample> {
    p.validate()?;
    let (frame, derivs) = frame_derivatives(p, chart, step)?;
    Ok(ConnectionSample { point: p.clone(), components: connection_from_derivatives(&frame, &derivs) })
}

/// Connection and curvature at `p`. The analytic chart uses closed-form
/// derivatives (`step` ignored); the numeric chart uses central differences
/// with increment `step` of the logical-basis-aligned frame.
pub fn connection_and_curvature(p: &SphericalParams, chart: FrameChart, step: f64) -> Result<(ConnectionSample, Curvature)> {
    p.validate()?;
    let step = match chart {
        FrameChart::Analytic => None,
        FrameChart::Numeric => Some(step),
    };
    let (frame, derivs) = frame_derivatives(p, chart, step)?;
    let conn = connection_from_derivatives(&frame, &derivs);
    let curv = curvature_from_derivatives(&derivs, &conn);
    Ok((ConnectionSample { point: p.clone(), components: conn }, curv))
}

/// Numerical rank of a set of anti-Hermitian matrices viewed as real vectors.
pub fn real_span_rank(mats: &[CMatrix]) -> usize {
    if mats.is_empty() {
        return 0;
    }
    let len = 2 * mats[0].len();
    let rows = mats.len();
    let stacked = nalgebra::DMatrix::<f64>::from_fn(rows, len, |r, k| {
        let z = mats[r][k / 2];
        if k % 2 == 0 {
            z.re
        } else {
            z.im
        }
    });
    let sv = stacked.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RELATIVE_THRESHOLD * max).count()
}

/// Dimension of the real span of every curvature component over the
/// samples: a lower bound on the dimension of the holonomy group.
pub fn holonomy_rank_lower_bound(samples: &[SphericalParams]) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    let mut mats = Vec::new();
    for p in samples {
        let (_, curv) = connection_and_curvature(p, FrameChart::Analytic, DEFAULT_FD_STEP)?;
        mats.extend(curv.components.into_iter().map(|(_, m)| m));
    }
    Ok(real_span_rank(&mats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{anti_hermiticity_deviation, hermitian_eigenvalues, max_abs, max_abs_diff, unitarity_deviation};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

    fn pauli_y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)])
    }

    fn params(n: usize, thetas: &[f64], phis: &[f64]) -> SphericalParams {
        SphericalParams::new(n, thetas.to_vec(), phis.to_vec(), 1.0).unwrap()
    }

    fn arb_params(n: usize) -> impl Strategy<Value = SphericalParams> {
        (
            proptest::collection::vec(-PI..PI, n - 1),
            proptest::collection::vec(-PI..PI, n - 1),
            0.1f64..3.0,
        )
            .prop_map(|(t, p, m)| SphericalParams { thetas: t, phis: p, magnitude: m })
    }

    #[test]
    fn couplings_trivial_cases() {
        let c0 = params(3, &[0.0, 0.0], &[0.0, 0.0]).couplings();
        assert_eq!(c0.omegas, vec![c(0.0), c(0.0), c(1.0)]);

        let c1 = params(3, &[FRAC_PI_2, 0.0], &[0.0, 0.0]).couplings();
        assert!((c1.omegas[0] - c(1.0)).norm() < 1e-15);
        assert!(c1.omegas[1].norm() < 1e-15 && c1.omegas[2].norm() < 1e-15);
    }

    #[test]
    fn couplings_five_level_substitution() {
        let p = params(5, &[0.0, 0.0, 0.0, FRAC_PI_4], &[0.0, 0.0, 0.0, FRAC_PI_3]);
        let om = p.couplings().omegas;
        let expect = [
            c(0.0),
            c(0.0),
            c(0.0),
            c(FRAC_PI_4.sin()),
            C64::from_polar(1.0, -FRAC_PI_3) * FRAC_PI_4.cos(),
        ];
        for (a, b) in om.iter().zip(expect.iter()) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(matches!(
            SphericalParams::new(3, vec![0.0], vec![0.0, 0.0], 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(SphericalParams::new(3, vec![0.0; 2], vec![0.0; 2], -1.0).is_err());
    }

    #[test]
    fn zero_couplings_give_zero_hamiltonian() {
        let h = build_hamiltonian(&CouplingVector::new(vec![c(0.0); 4]));
        assert_eq!(max_abs(&h), 0.0);
    }

    #[test]
    fn two_level_spectrum_matches_eigensolve() {
        let cv = CouplingVector::new(vec![C64::new(0.3, 0.4), C64::new(-1.2, 0.1)]);
        let ev = hermitian_eigenvalues(&build_hamiltonian(&cv));
        let r = cv.norm_sqr().sqrt();
        for (a, b) in ev.iter().zip([-r, 0.0, r]) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn degenerate_couplings_rejected() {
        let cv = CouplingVector::new(vec![c(0.0); 3]);
        assert!(matches!(dark_basis(&cv, None), Err(Error::DegenerateCouplings)));
    }

    #[test]
    fn numeric_frame_at_base_is_logical() {
        let f = dark_basis(&params(3, &[0.0, 0.0], &[0.0, 0.0]).couplings(), None).unwrap();
        let logical = DarkFrame::logical(3);
        assert!(max_abs_diff(&f.states, &logical.states) < 1e-15);
    }

    #[test]
    fn analytic_frame_three_level_base() {
        let f = analytic_frame(&params(3, &[0.0, 0.0], &[0.0, 0.0]));
        let expect = CMatrix::from_row_slice(4, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0), c(0.0), c(0.0), c(0.0), c(0.0)]);
        assert!(max_abs_diff(&f.states, &expect) < 1e-15);
    }

    #[test]
    fn analytic_frame_matches_printed_three_level_expressions() {
        let (t1, t2, p2, p3) = (0.4, 1.1, 0.7, -0.3);
        let f = analytic_frame(&params(3, &[t1, t2], &[p2, p3]));
        let e2 = C64::from_polar(1.0, -p2);
        let e3 = C64::from_polar(1.0, -p3);
        let psi1 = [c(t1.cos()), -e2 * t1.sin() * t2.sin(), -e3 * t1.sin() * t2.cos(), c(0.0)];
        let psi2 = [c(0.0), -e2 * t2.cos(), e3 * t2.sin(), c(0.0)];
        for i in 0..4 {
            assert!((f.states[(i, 0)] - psi1[i]).norm() < 1e-15);
            assert!((f.states[(i, 1)] - psi2[i]).norm() < 1e-15);
        }
    }

    #[test]
    fn five_level_last_state_at_theta4_half_pi() {
        let f = analytic_frame(&params(5, &[0.0, 0.0, 0.0, FRAC_PI_2], &[0.0; 4]));
        let psi4 = f.state(3);
        // |g5⟩ up to phase
        assert!((psi4[4].norm() - 1.0).abs() < 1e-15);
        let h = build_hamiltonian(&params(5, &[0.0, 0.0, 0.0, FRAC_PI_2], &[0.0; 4]).couplings());
        assert!((h * psi4).norm() < 1e-15);
    }

    #[test]
    fn three_level_ry_connection() {
        for &t1 in &[0.0, 0.3, 1.0, 1.4] {
            let (conn, curv) = connection_and_curvature(&params(3, &[t1, 0.8], &[0.0, 0.0]), FrameChart::Analytic, 0.0).unwrap();
            let expect_a = pauli_y() * (-I * t1.sin());
            assert!(max_abs_diff(conn.component(Coordinate::Theta(2)), &expect_a) < 1e-14);
            assert!(max_abs(conn.component(Coordinate::Theta(1))) < 1e-14);
            let expect_f = pauli_y() * (-I * t1.cos());
            assert!(max_abs_diff(&curv.get(0, 1), &expect_f) < 1e-14);
        }
    }

    #[test]
    fn five_level_phase_connection() {
        for &t4 in &[0.2, 0.9, 1.3] {
            let p = params(5, &[0.0, 0.0, 0.0, t4], &[0.0, 0.0, 0.0, 0.6]);
            let (conn, _) = connection_and_curvature(&p, FrameChart::Analytic, 0.0).unwrap();
            let a = conn.component(Coordinate::Phi(5));
            let mut expect = CMatrix::zeros(4, 4);
            expect[(3, 3)] = -I * t4.sin().powi(2);
            assert!(max_abs_diff(a, &expect) < 1e-14);
        }
    }

    #[test]
    fn rank_zero_for_flat_point() {
        // N = 2: F_{θ₁φ₂} ∝ sin 2θ₁ vanishes at θ₁ = 0.
        let p = SphericalParams::base_point(2, 1.0);
        assert_eq!(holonomy_rank_lower_bound(&[p]).unwrap(), 0);
        assert!(holonomy_rank_lower_bound(&[]).is_err());
    }

    #[test]
    fn numeric_chart_breaks_down_where_logical_overlap_vanishes() {
        let p = params(3, &[FRAC_PI_2, 0.3], &[0.0, 0.0]);
        assert!(matches!(
            connection_and_curvature(&p, FrameChart::Numeric, DEFAULT_FD_STEP),
            Err(Error::GaugeDiscontinuity { .. })
        ));
    }

    #[test]
    fn finite_difference_converges_quadratically() {
        let p = params(3, &[0.7, 0.4], &[0.3, -0.5]);
        let exact = connection(&p, FrameChart::Analytic, None).unwrap();
        let err = |h: f64| {
            let fd = connection(&p, FrameChart::Analytic, Some(h)).unwrap();
            exact
                .components
                .iter()
                .zip(&fd.components)
                .map(|(a, b)| max_abs_diff(a, b))
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn coupling_norm_equals_magnitude(p in arb_params(5)) {
            let nb = p.couplings().norm_sqr();
            prop_assert!((nb - p.magnitude * p.magnitude).abs() < 1e-12);
        }

        #[test]
        fn spectrum_is_zero_and_plus_minus_root(p in arb_params(4)) {
            let cv = p.couplings();
            let ev = hermitian_eigenvalues(&build_hamiltonian(&cv));
            let r = cv.norm_sqr().sqrt();
            prop_assert!((ev[0] + r).abs() < 1e-10);
            prop_assert!((ev[4] - r).abs() < 1e-10);
            for v in &ev[1..4] {
                prop_assert!(v.abs() < 1e-10);
            }
        }

        #[test]
        fn bright_state_maps_to_excited(p in arb_params(4)) {
            let cv = p.couplings();
            let b = bright_state(&cv).unwrap();
            let hb = build_hamiltonian(&cv) * b;
            let r = cv.norm_sqr().sqrt();
            for i in 0..4 {
                prop_assert!(hb[i].norm() < 1e-12);
            }
            prop_assert!((hb[4] - c(r)).norm() < 1e-12);
        }

        #[test]
        fn frames_are_dark_and_orthonormal(p in arb_params(5), numeric in any::<bool>()) {
            let cv = p.couplings();
            let frame = if numeric { dark_basis(&cv, None).unwrap() } else { analytic_frame(&p) };
            let h = build_hamiltonian(&cv);
            let b = bright_state(&cv).unwrap();
            prop_assert!(unitarity_deviation(&(frame.states.adjoint() * &frame.states)) < 1e-10);
            prop_assert!(crate::linalg::max_abs_diff(&(frame.states.adjoint() * &frame.states), &CMatrix::identity(4, 4)) < 1e-10);
            for a in 0..frame.n_dark() {
                let psi = frame.state(a);
                prop_assert!(psi[5].norm() < 1e-12);
                prop_assert!((&h * &psi).norm() < 1e-10 * p.magnitude.max(1.0));
                prop_assert!(b.dotc(&psi).norm() < 1e-10);
            }
        }

        #[test]
        fn connection_and_curvature_are_anti_hermitian(p in arb_params(5)) {
            let (conn, curv) = connection_and_curvature(&p, FrameChart::Analytic, DEFAULT_FD_STEP).unwrap();
            for a in &conn.components {
                prop_assert!(anti_hermiticity_deviation(a) < 1e-10);
            }
            for (_, f) in &curv.components {
                prop_assert!(anti_hermiticity_deviation(f) < 1e-8);
            }
        }

        #[test]
        fn analytic_connection_matches_differences(p in arb_params(4)) {
            let exact = connection(&p, FrameChart::Analytic, None).unwrap();
            let fd = connection(&p, FrameChart::Analytic, Some(1e-5)).unwrap();
            for (a, b) in exact.components.iter().zip(&fd.components) {
                prop_assert!(max_abs_diff(a, b) < 1e-8);
            }
        }
    }
}
