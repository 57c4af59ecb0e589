//! Time-dependent Schrödinger dynamics `i dψ/dt = H(t) ψ` on labelled
//! tensor-product spaces, with generally non-Hermitian `H`.
//!
//! States are never renormalised: under `−iγ|e⟩⟨e|`-type terms the squared
//! norm is the no-jump survival probability.

use std::sync::Arc;

use crate::linalg::{c, CMatrix, CVector, I};
use crate::quadrature::trapezoid;
use crate::{Error, Result, C64};

/// Output grid size used unless the caller asks otherwise.
pub const DEFAULT_OUTPUT_POINTS: usize = 2001;

/// One tensor factor: a label and the names of its basis levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub label: String,
    pub levels: Vec<String>,
}

impl Factor {
    pub fn new(label: &str, levels: &[&str]) -> Self {
        Factor { label: label.into(), levels: levels.iter().map(|s| s.to_string()).collect() }
    }

    /// Fock space `|0⟩ … |cutoff−1⟩`.
    pub fn fock(label: &str, cutoff: usize) -> Self {
        Factor { label: label.into(), levels: (0..cutoff).map(|n| n.to_string()).collect() }
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, name: &str) -> Result<usize> {
        self.levels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::InvalidParameter(format!("factor {} has no level {name}", self.label)))
    }
}

/// Ordered tensor product of labelled factors; basis indices are row-major
/// (the last factor varies fastest).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositeSystem {
    pub factors: Vec<Factor>,
}

impl CompositeSystem {
    pub fn new(factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|f| f.dim() == 0) {
            return Err(Error::Dimension("every factor needs at least one level".into()));
        }
        for (i, f) in factors.iter().enumerate() {
            if factors[..i].iter().any(|g| g.label == f.label) {
                return Err(Error::InvalidParameter(format!("duplicate factor label {}", f.label)));
            }
        }
        Ok(CompositeSystem { factors })
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).product()
    }

    pub fn factor_index(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::InvalidParameter(format!("no factor labelled {label}")))
    }

    /// Flat index of a tuple of local level indices.
    pub fn index(&self, local: &[usize]) -> Result<usize> {
        if local.len() != self.factors.len() {
            return Err(Error::Dimension(format!("expected {} local indices", self.factors.len())));
        }
        let mut idx = 0;
        for (f, &l) in self.factors.iter().zip(local) {
            if l >= f.dim() {
                return Err(Error::Dimension(format!("level {l} out of range for {}", f.label)));
            }
            idx = idx * f.dim() + l;
        }
        Ok(idx)
    }

    /// Local level indices of a flat index.
    pub fn local(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (k, f) in self.factors.iter().enumerate().rev() {
            out[k] = index % f.dim();
            index /= f.dim();
        }
        out
    }

    pub fn labels(&self, index: usize) -> Vec<&str> {
        self.local(index)
            .into_iter()
            .zip(&self.factors)
            .map(|(l, f)| f.levels[l].as_str())
            .collect()
    }

    /// Basis ket named by one level per factor, in factor order.
    pub fn ket(&self, levels: &[&str]) -> Result<CVector> {
        if levels.len() != self.factors.len() {
            return Err(Error::Dimension(format!("expected {} level names", self.factors.len())));
        }
        let local = self
            .factors
            .iter()
            .zip(levels)
            .map(|(f, name)| f.level(name))
            .collect::<Result<Vec<_>>>()?;
        let mut v = CVector::zeros(self.dim());
        v[self.index(&local)?] = c(1.0);
        Ok(v)
    }

    /// `⊗` of local operators on the named factors, identity elsewhere.
    pub fn operator(&self, locals: &[(&str, &CMatrix)]) -> Result<SparseOp> {
        let mut placed: Vec<Option<&CMatrix>> = vec![None; self.factors.len()];
        for (label, m) in locals {
            let k = self.factor_index(label)?;
            if m.shape() != (self.factors[k].dim(), self.factors[k].dim()) {
                return Err(Error::Dimension(format!("operator on {label} has shape {:?}", m.shape())));
            }
            if placed[k].is_some() {
                return Err(Error::InvalidParameter(format!("factor {label} given twice")));
            }
            placed[k] = Some(m);
        }
        let dim = self.dim();
        let mut entries = Vec::new();
        for col in 0..dim {
            let lc = self.local(col);
            // expand column `col` factor by factor
            let mut partial: Vec<(usize, C64)> = vec![(0, c(1.0))];
            for (k, f) in self.factors.iter().enumerate() {
                let mut next = Vec::new();
                for &(idx, amp) in &partial {
                    match placed[k] {
                        None => next.push((idx * f.dim() + lc[k], amp)),
                        Some(m) => {
                            for r in 0..f.dim() {
                                let v = m[(r, lc[k])];
                                if v != c(0.0) {
                                    next.push((idx * f.dim() + r, amp * v));
                                }
                            }
                        }
                    }
                }
                partial = next;
            }
            entries.extend(partial.into_iter().map(|(row, v)| (row, col, v)));
        }
        Ok(SparseOp::from_triplets(dim, entries))
    }

    /// Diagonal weights of the projector onto basis states whose level on
    /// `label` is in `levels`.
    pub fn level_projector(&self, label: &str, levels: &[&str]) -> Result<Vec<f64>> {
        let k = self.factor_index(label)?;
        let wanted = levels.iter().map(|l| self.factors[k].level(l)).collect::<Result<Vec<_>>>()?;
        Ok((0..self.dim()).map(|i| if wanted.contains(&self.local(i)[k]) { 1.0 } else { 0.0 }).collect())
    }

    /// Diagonal weights of a number-like observable `Σ_n w(n)|n⟩⟨n|` on one factor.
    pub fn factor_weights(&self, label: &str, w: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
        let k = self.factor_index(label)?;
        Ok((0..self.dim()).map(|i| w(self.local(i)[k])).collect())
    }
}

/// `|i⟩⟨j|` on a `dim`-level factor.
pub fn transition(dim: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    m[(i, j)] = c(1.0);
    m
}

/// Truncated annihilation operator on `cutoff` Fock levels.
pub fn annihilation(cutoff: usize) -> CMatrix {
    let mut m = CMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        m[(n - 1, n)] = c((n as f64).sqrt());
    }
    m
}

/// Sparse complex matrix in coordinate form, duplicates summed.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp {
    pub dim: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|e| (e.0, e.1));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(entries.len());
        for (r, cl, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == cl => last.2 += v,
                _ => merged.push((r, cl, v)),
            }
        }
        merged.retain(|e| e.2 != c(0.0));
        SparseOp { dim, entries: merged }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let mut e = Vec::new();
        for r in 0..m.nrows() {
            for cl in 0..m.ncols() {
                if m[(r, cl)] != c(0.0) {
                    e.push((r, cl, m[(r, cl)]));
                }
            }
        }
        SparseOp { dim: m.nrows(), entries: e }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for &(r, cl, v) in &self.entries {
            m[(r, cl)] += v;
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        SparseOp::from_triplets(self.dim, self.entries.iter().map(|&(r, cl, v)| (cl, r, v.conj())).collect())
    }

    pub fn scaled(&self, s: C64) -> Self {
        SparseOp::from_triplets(self.dim, self.entries.iter().map(|&(r, cl, v)| (r, cl, v * s)).collect())
    }

    pub fn plus(&self, other: &SparseOp) -> Self {
        let mut e = self.entries.clone();
        e.extend_from_slice(&other.entries);
        SparseOp::from_triplets(self.dim, e)
    }

    /// `self · other`.
    pub fn mul(&self, other: &SparseOp) -> Self {
        let a = self.to_dense() * other.to_dense();
        SparseOp::from_dense(&a)
    }

    /// `out += coef · self · psi`.
    pub fn apply_add(&self, coef: C64, psi: &[C64], out: &mut [C64]) {
        for &(r, cl, v) in &self.entries {
            out[r] += coef * v * psi[cl];
        }
    }
}

/// Scalar time dependence of one Hamiltonian term.
pub type Coefficient = Arc<dyn Fn(f64) -> C64 + Send + Sync>;

pub fn constant(value: C64) -> Coefficient {
    Arc::new(move |_| value)
}

/// `H(t) = Σ_k f_k(t) O_k`.
#[derive(Clone)]
pub struct TimeDependentOperator {
    pub dim: usize,
    pub terms: Vec<(Coefficient, SparseOp)>,
}

impl std::fmt::Debug for TimeDependentOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TimeDependentOperator {{ dim: {}, terms: {} }}", self.dim, self.terms.len())
    }
}

impl TimeDependentOperator {
    pub fn new(dim: usize) -> Self {
        TimeDependentOperator { dim, terms: Vec::new() }
    }

    pub fn add(&mut self, coef: Coefficient, op: SparseOp) -> Result<()> {
        if op.dim != self.dim {
            return Err(Error::Dimension(format!("term of dim {} in operator of dim {}", op.dim, self.dim)));
        }
        if !op.entries.is_empty() {
            self.terms.push((coef, op));
        }
        Ok(())
    }

    pub fn add_constant(&mut self, value: C64, op: SparseOp) -> Result<()> {
        self.add(constant(value), op)
    }

    /// Adds `f(t)·op + conj(f(t))·op†`.
    pub fn add_hermitian_pair(&mut self, coef: Coefficient, op: SparseOp) -> Result<()> {
        let adj = op.adjoint();
        let conj = coef.clone();
        self.add(coef, op)?;
        self.add(Arc::new(move |t| conj(t).conj()), adj)
    }

    pub fn at(&self, t: f64) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (f, op) in &self.terms {
            let s = f(t);
            for &(r, cl, v) in &op.entries {
                m[(r, cl)] += s * v;
            }
        }
        m
    }
}

impl TimeDependentOperator {
    /// Basis indices reachable from the support of `psi` under any term.
    pub fn reachable_from(&self, psi: &CVector) -> Vec<usize> {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.dim];
        for (_, op) in &self.terms {
            for &(r, cl, _) in &op.entries {
                adj[cl].push(r);
            }
        }
        let mut seen = vec![false; self.dim];
        let mut stack: Vec<usize> = (0..self.dim).filter(|&i| psi[i] != c(0.0)).collect();
        for &i in &stack {
            seen[i] = true;
        }
        while let Some(i) = stack.pop() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        (0..self.dim).filter(|&i| seen[i]).collect()
    }

    /// The operator compressed onto the basis states `keep` (which must be
    /// closed under every term).
    pub fn restricted(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let terms = self
            .terms
            .iter()
            .map(|(f, op)| {
                let e = op
                    .entries
                    .iter()
                    .filter(|(r, cl, _)| pos[*r] != usize::MAX && pos[*cl] != usize::MAX)
                    .map(|&(r, cl, v)| (pos[r], pos[cl], v))
                    .collect();
                (f.clone(), SparseOp::from_triplets(keep.len(), e))
            })
            .filter(|(_, op)| !op.entries.is_empty())
            .collect();
        TimeDependentOperator { dim: keep.len(), terms }
    }
}

/// [`evolve`] on the subspace reachable from `psi0`, with states embedded
/// back into the full space. Exact up to integrator error, and much cheaper
/// when the dynamics conserve an excitation number.
pub fn evolve_in_sector(h: &TimeDependentOperator, psi0: &CVector, total_time: f64, tol: f64) -> Result<EvolutionResult> {
    if psi0.len() != h.dim {
        return Err(Error::Dimension(format!("state has {} entries, generator {}", psi0.len(), h.dim)));
    }
    let keep = h.reachable_from(psi0);
    let small = h.restricted(&keep);
    let start = CVector::from_iterator(keep.len(), keep.iter().map(|&i| psi0[i]));
    let mut r = evolve(&small, &start, total_time, tol)?;
    for s in r.states.iter_mut() {
        let mut full = CVector::zeros(h.dim);
        for (k, &i) in keep.iter().enumerate() {
            full[i] = s[k];
        }
        *s = full;
    }
    Ok(r)
}

/// Anything that can apply `H(t)` to a state.
pub trait Generator: Sync {
    fn dim(&self) -> usize;
    /// `out = H(t) psi`.
    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]);
}

impl Generator for TimeDependentOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = c(0.0));
        for (f, op) in &self.terms {
            let s = f(t);
            if s != c(0.0) {
                op.apply_add(s, psi, out);
            }
        }
    }
}

/// A generator given by a dense matrix-valued function.
pub struct DenseGenerator<F: Fn(f64) -> CMatrix + Sync> {
    pub dim: usize,
    pub h: F,
}

impl<F: Fn(f64) -> CMatrix + Sync> Generator for DenseGenerator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, t: f64, psi: &[C64], out: &mut [C64]) {
        let h = (self.h)(t);
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..self.dim).map(|k| h[(r, k)] * psi[k]).sum();
        }
    }
}

/// Gaussian envelope `peak·exp(−((t/T − center)/width)²)` in scaled time.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GaussianPulse {
    pub peak: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianPulse {
    pub fn new(peak: f64, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !(peak >= 0.0) {
            return Err(Error::InvalidParameter(format!("pulse needs width > 0 and peak >= 0 (got {width}, {peak})")));
        }
        Ok(GaussianPulse { peak, center, width })
    }

    /// Amplitude at scaled time `s = t/T`.
    pub fn at_scaled(&self, s: f64) -> f64 {
        let x = (s - self.center) / self.width;
        self.peak * (-x * x).exp()
    }

    pub fn at(&self, t: f64, total_time: f64) -> f64 {
        self.at_scaled(t / total_time)
    }

    /// d/ds of the envelope.
    pub fn derivative_scaled(&self, s: f64) -> f64 {
        -2.0 * (s - self.center) / (self.width * self.width) * self.at_scaled(s)
    }
}

/// Named pulses over `[0, T]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSchedule {
    pub pulses: Vec<(String, GaussianPulse)>,
    pub total_time: f64,
}

impl PulseSchedule {
    /// Counterintuitive pair: `first` centred at `0.5 − a`, `second` at `0.5 + a`.
    pub fn counterintuitive(first: &str, second: &str, peak: f64, a: f64, tau: f64, total_time: f64) -> Result<Self> {
        if !(total_time > 0.0) {
            return Err(Error::InvalidParameter(format!("T must be > 0, got {total_time}")));
        }
        Ok(PulseSchedule {
            pulses: vec![
                (first.into(), GaussianPulse::new(peak, 0.5 - a, tau)?),
                (second.into(), GaussianPulse::new(peak, 0.5 + a, tau)?),
            ],
            total_time,
        })
    }

    pub fn pulse(&self, id: &str) -> Result<GaussianPulse> {
        self.pulses
            .iter()
            .find(|(k, _)| k == id)
            .map(|(_, p)| *p)
            .ok_or_else(|| Error::InvalidParameter(format!("no pulse {id}")))
    }

    /// Coefficient `t ↦ scale · pulse_id(t)`.
    pub fn coefficient(&self, id: &str, scale: C64) -> Result<Coefficient> {
        let p = self.pulse(id)?;
        let total = self.total_time;
        Ok(Arc::new(move |t| scale * p.at(t, total)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions {
    /// Absolute and relative local error tolerance.
    pub tol: f64,
    pub output_points: usize,
    pub max_steps: usize,
}

impl EvolveOptions {
    pub fn new(tol: f64) -> Self {
        EvolveOptions { tol, output_points: DEFAULT_OUTPUT_POINTS, max_steps: 500_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// Unnormalised state at every output time.
    pub states: Vec<CVector>,
    pub steps_taken: usize,
}

impl EvolutionResult {
    pub fn final_state(&self) -> &CVector {
        self.states.last().unwrap()
    }

    /// `‖ψ(T)‖²`, the no-jump survival probability.
    pub fn final_norm_sqr(&self) -> f64 {
        self.final_state().norm_squared()
    }

    pub fn norms_sqr(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.norm_squared()).collect()
    }

    /// `⟨ψ(t)|W|ψ(t)⟩` for a diagonal weight vector `W`.
    pub fn expectation(&self, weights: &[f64]) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.iter().zip(weights).map(|(z, w)| w * z.norm_sqr()).sum())
            .collect()
    }
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

/// `k = −i H(t) y`.
fn rhs<G: Generator + ?Sized>(g: &G, t: f64, y: &[C64], k: &mut [C64]) {
    g.apply(t, y, k);
    for z in k.iter_mut() {
        *z *= -I;
    }
}

fn combo(y: &[C64], h: f64, terms: &[(f64, &[C64])], out: &mut [C64]) {
    for i in 0..y.len() {
        let mut acc = c(0.0);
        for (w, k) in terms {
            acc += k[i] * *w;
        }
        out[i] = y[i] + acc * h;
    }
}

/// Integrates `i dψ/dt = H(t)ψ` over `[0, T]` with the given tolerance and
/// the default output grid.
pub fn evolve<G: Generator + ?Sized>(g: &G, psi0: &CVector, total_time: f64, tol: f64) -> Result<EvolutionResult> {
    evolve_with(g, psi0, total_time, EvolveOptions::new(tol))
}

/// Dormand–Prince 5(4) with standard step-size control; steps are clipped
/// to land on every output time.
pub fn evolve_with<G: Generator + ?Sized>(g: &G, psi0: &CVector, total_time: f64, opts: EvolveOptions) -> Result<EvolutionResult> {
    let n = g.dim();
    if psi0.len() != n {
        return Err(Error::Dimension(format!("state has {} entries, generator {n}", psi0.len())));
    }
    if (psi0.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("initial state norm {} != 1", psi0.norm())));
    }
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(Error::InvalidParameter(format!("duration must be finite and > 0, got {total_time}")));
    }
    if !(opts.tol > 0.0) || opts.output_points < 2 {
        return Err(Error::InvalidParameter("need tol > 0 and at least 2 output points".into()));
    }
    let tol = opts.tol;
    let m = opts.output_points;
    let times: Vec<f64> = (0..m).map(|i| total_time * i as f64 / (m - 1) as f64).collect();
    let mut states = Vec::with_capacity(m);
    states.push(psi0.clone());

    let mut y: Vec<C64> = psi0.iter().copied().collect();
    let mut k: Vec<Vec<C64>> = vec![vec![c(0.0); n]; 7];
    let mut tmp = vec![c(0.0); n];
    let mut ynew = vec![c(0.0); n];
    let mut t = 0.0;
    rhs(g, t, &y, &mut k[0]);
    let knorm = k[0].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut h = if knorm > 0.0 { (0.01 / knorm).min(total_time / (m - 1) as f64) } else { total_time / (m - 1) as f64 };
    let mut steps = 0usize;
    let mut next_out = 1;

    while next_out < m {
        let target = times[next_out];
        let last = target - t <= h * (1.0 + 1e-12);
        let step = if last { target - t } else { h };
        if step < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h: step });
        }
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow { t, h: step });
        }
        {
            let (k0, rest) = k.split_at_mut(1);
            let k0 = &k0[0];
            combo(&y, step, &[(A21, k0)], &mut tmp);
            rhs(g, t + C2 * step, &tmp, &mut rest[0]);
            combo(&y, step, &[(A31, k0), (A32, &rest[0])], &mut tmp);
            rhs(g, t + C3 * step, &tmp, &mut rest[1]);
            combo(&y, step, &[(A41, k0), (A42, &rest[0]), (A43, &rest[1])], &mut tmp);
            rhs(g, t + C4 * step, &tmp, &mut rest[2]);
            combo(&y, step, &[(A51, k0), (A52, &rest[0]), (A53, &rest[1]), (A54, &rest[2])], &mut tmp);
            rhs(g, t + C5 * step, &tmp, &mut rest[3]);
            combo(&y, step, &[(A61, k0), (A62, &rest[0]), (A63, &rest[1]), (A64, &rest[2]), (A65, &rest[3])], &mut tmp);
            rhs(g, t + step, &tmp, &mut rest[4]);
            combo(&y, step, &[(B1, k0), (B3, &rest[1]), (B4, &rest[2]), (B5, &rest[3]), (B6, &rest[4])], &mut ynew);
            rhs(g, t + step, &ynew, &mut rest[5]);
        }
        steps += 1;
        let mut err = 0.0;
        for i in 0..n {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * step;
            let sc = tol + tol * y[i].norm().max(ynew[i].norm());
            err += (e.norm() / sc).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            return Err(Error::StepUnderflow { t, h: step });
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        if err <= 1.0 {
            t = if last { target } else { t + step };
            std::mem::swap(&mut y, &mut ynew);
            k.swap(0, 6);
            if last {
                states.push(CVector::from_column_slice(&y));
                next_out += 1;
            }
            // a step clipped to an output time says little about the next one
            if !last || step >= h {
                h = step * factor;
            }
        } else {
            h = step * factor.min(1.0);
        }
    }
    Ok(EvolutionResult { times, states, steps_taken: steps })
}

/// Fidelity and population statistics of a run.
#[derive(Clone, Debug)]
pub struct PopulationReport {
    /// `|⟨target|ψ(T)⟩|²` on the unnormalised final state.
    pub fidelity: f64,
    pub final_norm_sqr: f64,
    /// Per projector: (label, max over the grid, trapezoid time integral).
    pub projectors: Vec<(String, f64, f64)>,
}

impl PopulationReport {
    pub fn get(&self, label: &str) -> Option<(f64, f64)> {
        self.projectors.iter().find(|p| p.0 == label).map(|p| (p.1, p.2))
    }
}

pub fn fidelity_and_populations(r: &EvolutionResult, target: &CVector, projectors: &[(&str, Vec<f64>)]) -> Result<PopulationReport> {
    if (target.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidParameter(format!("target norm {} != 1", target.norm())));
    }
    if target.len() != r.final_state().len() {
        return Err(Error::Dimension("target and state dimensions differ".into()));
    }
    let fidelity = target.dotc(r.final_state()).norm_sqr();
    let mut out = Vec::with_capacity(projectors.len());
    for (label, w) in projectors {
        if w.len() != target.len() {
            return Err(Error::Dimension(format!("projector {label} has wrong length")));
        }
        let pops = r.expectation(w);
        let max = pops.iter().copied().fold(0.0, f64::max);
        out.push((label.to_string(), max, trapezoid(&r.times, &pops)));
    }
    Ok(PopulationReport { fidelity, final_norm_sqr: r.final_norm_sqr(), projectors: out })
}
