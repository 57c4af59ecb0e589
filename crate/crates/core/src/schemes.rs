//! Two-atom state-transfer schemes through a shared cavity mode.
//!
//! Every Hamiltonian is written directly in its rotating frame, with
//! `ħ = g = 1` unless `SchemeParams::g` says otherwise. Dissipation enters
//! as the non-Hermitian terms `−iγ|e⟩⟨e|` and `−iκ b†b`.
//!
//! Atom internal factors use *role* labels `g1`, `g3`, `e`: the laser drives
//! `g1 ↔ e`, the cavity `g3 ↔ e`. The second atom's physical pair
//! `{g₁, g₃}` or `{g₂, g₄}` is mapped onto these roles by
//! [`LogicalEncoding::atom2_roles`].

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::evolve::{
    annihilation, constant, evolve_in_sector, fidelity_and_populations, transition, Coefficient, CompositeSystem, EvolutionResult, Factor,
    PulseSchedule, SparseOp, TimeDependentOperator,
};
use crate::linalg::{c, CMatrix, CVector, I};
use crate::quadrature::trapezoid;
use crate::{Error, Result, C64};

/// Pulse identifiers used by every schedule.
pub const ATOM1: &str = "atom1";
pub const ATOM2: &str = "atom2";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Resonant or detuned photon exchange through the cavity.
    Optical,
    /// Motional transfer, effective cavity–phonon exchange model.
    Motional,
    /// Motional transfer with the excited level and sidebands kept explicitly.
    MotionalFull,
    /// Far-detuned Raman exchange with Stark-shift compensation.
    ModifiedOptical,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optical => "optical",
            Scheme::Motional => "motional",
            Scheme::MotionalFull => "motional_full",
            Scheme::ModifiedOptical => "modified_optical",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optical" => Ok(Scheme::Optical),
            "motional" => Ok(Scheme::Motional),
            "motional_full" => Ok(Scheme::MotionalFull),
            "modified_optical" => Ok(Scheme::ModifiedOptical),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other}"))),
        }
    }
}

/// Physical parameters and pulse geometry of a transfer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeParams {
    pub g: f64,
    pub delta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub eta: f64,
    pub nu: f64,
    /// Peak Rabi frequency Ω of both lasers.
    pub omega: f64,
    /// Pulse half-separation in scaled time.
    pub a: f64,
    /// Pulse width in scaled time.
    pub tau: f64,
    /// Duration T of one transfer (of each step for the three-step swap).
    pub total_time: f64,
    /// Keep the `e^{−2iνt}` sideband term in the full motional model.
    pub counter_rotating: bool,
    /// Add the ground-state Stark compensation to the full optical model.
    pub stark_compensation: bool,
    /// Keep the second-order sideband shift `η²g²/(Δ+iγ) a_i a_i† b†b` in
    /// the effective motional model. It is of the same order as the
    /// exchange coupling whenever `ηg ≳ Ω`.
    pub sideband_shift: bool,
    pub cavity_cutoff: usize,
    pub motional_cutoff: usize,
    /// Integrator tolerance.
    pub tol: f64,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            g: 1.0,
            delta: 0.0,
            gamma: 0.0,
            kappa: 0.0,
            eta: 0.1,
            nu: 50.0,
            omega: 0.05,
            a: 0.15,
            tau: 0.15,
            total_time: 2000.0,
            counter_rotating: false,
            stark_compensation: false,
            sideband_shift: false,
            cavity_cutoff: 2,
            motional_cutoff: 2,
            tol: 1e-8,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.g > 0.0) {
            return bad("g must be > 0");
        }
        if !(self.gamma >= 0.0 && self.kappa >= 0.0) {
            return bad("gamma and kappa must be >= 0");
        }
        if !(self.omega >= 0.0 && self.tau > 0.0 && self.total_time > 0.0 && self.tol > 0.0) {
            return bad("need omega >= 0, tau > 0, T > 0, tol > 0");
        }
        if !(self.eta >= 0.0) || !self.delta.is_finite() || !self.nu.is_finite() {
            return bad("need eta >= 0 and finite delta, nu");
        }
        if self.cavity_cutoff < 2 || self.motional_cutoff < 2 {
            return bad("Fock cutoffs must be >= 2");
        }
        Ok(())
    }

    /// `Δ ≥ 5·max(Ω, ηg)`, the working definition of the far-detuned regime.
    pub fn effective_regime_ok(&self) -> bool {
        self.delta.abs() >= 5.0 * self.omega.max(self.eta * self.g)
    }

    /// The Lamb–Dicke expansion is questionable above η = 0.3.
    pub fn eta_warning(&self) -> bool {
        self.eta > 0.3
    }

    /// Counterintuitive pair over `[0, T]`: `first` at `0.5 − a`.
    pub fn schedule(&self, first: &str) -> Result<PulseSchedule> {
        let second = if first == ATOM1 { ATOM2 } else { ATOM1 };
        PulseSchedule::counterintuitive(first, second, self.omega, self.a, self.tau, self.total_time)
    }

    fn detuning(&self) -> C64 {
        C64::new(self.delta, self.gamma)
    }
}

/// Physical-to-logical tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LogicalEncoding {
    pub atom1: Vec<(&'static str, u8)>,
    pub atom2: Vec<(&'static str, u8)>,
    /// Two qubits in one five-level atom.
    pub single_atom: Vec<(&'static str, &'static str)>,
}

impl Default for LogicalEncoding {
    fn default() -> Self {
        LogicalEncoding {
            atom1: vec![("g3", 0), ("g1", 1)],
            atom2: vec![("g3", 0), ("g4", 1), ("g1", 2), ("g2", 3)],
            single_atom: vec![("g1", "00"), ("g2", "01"), ("g3", "10"), ("g4", "11")],
        }
    }
}

impl LogicalEncoding {
    pub fn encode_atom1(&self, value: u8) -> Result<&'static str> {
        lookup_by_value(&self.atom1, value, "atom 1")
    }

    pub fn encode_atom2(&self, value: u8) -> Result<&'static str> {
        lookup_by_value(&self.atom2, value, "atom 2")
    }

    pub fn decode_atom1(&self, level: &str) -> Result<u8> {
        lookup_by_level(&self.atom1, level, "atom 1")
    }

    pub fn decode_atom2(&self, level: &str) -> Result<u8> {
        lookup_by_level(&self.atom2, level, "atom 2")
    }

    pub fn encode_single(&self, word: &str) -> Result<&'static str> {
        self.single_atom
            .iter()
            .find(|(_, w)| *w == word)
            .map(|(l, _)| *l)
            .ok_or_else(|| Error::Encoding(format!("no level encodes {word}")))
    }

    /// Physical levels of atom 2 playing the roles `(g1, g3)` when its
    /// initial logical value is `beta`: `{g₁, g₃}` for 0, `{g₂, g₄}` for 1.
    pub fn atom2_roles(&self, beta: u8) -> Result<(&'static str, &'static str)> {
        match beta {
            0 => Ok(("g1", "g3")),
            1 => Ok(("g2", "g4")),
            _ => Err(Error::Encoding(format!("atom 2 must start in logical 0 or 1, got {beta}"))),
        }
    }

    /// Logical result `(0, 2α + β)` of a transfer from `(α, β)`.
    pub fn transferred(&self, word: (u8, u8)) -> Result<(u8, u8)> {
        let (alpha, beta) = word;
        if alpha > 1 || beta > 1 {
            return Err(Error::Encoding(format!("transfer needs alpha, beta in {{0, 1}}, got ({alpha}, {beta})")));
        }
        Ok((0, 2 * alpha + beta))
    }
}

fn lookup_by_value(t: &[(&'static str, u8)], v: u8, who: &str) -> Result<&'static str> {
    t.iter()
        .find(|(_, x)| *x == v)
        .map(|(l, _)| *l)
        .ok_or_else(|| Error::Encoding(format!("{who} has no level for logical {v}")))
}

fn lookup_by_level(t: &[(&'static str, u8)], level: &str, who: &str) -> Result<u8> {
    t.iter()
        .find(|(l, _)| *l == level)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::Encoding(format!("{who} level {level} carries no logical value")))
}

/// `Σ_k f_k(t) O_k` whose squared norm on ψ, times `scale`, estimates the
/// excited population of one atom.
#[derive(Clone)]
struct ExcitedProbe {
    terms: Vec<(Coefficient, SparseOp)>,
    scale: f64,
}

impl ExcitedProbe {
    fn projector(op: SparseOp) -> Self {
        ExcitedProbe { terms: vec![(constant(c(1.0)), op)], scale: 1.0 }
    }

    fn population(&self, t: f64, psi: &CVector) -> f64 {
        let mut out = vec![c(0.0); psi.len()];
        for (f, op) in &self.terms {
            op.apply_add(f(t), psi.as_slice(), &mut out);
        }
        self.scale * out.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }
}

/// A built scheme: space, generator and the observables used for scoring.
#[derive(Clone)]
pub struct Model {
    pub scheme: Scheme,
    pub system: CompositeSystem,
    pub hamiltonian: TimeDependentOperator,
    /// Diagonal weights of `b†b`.
    pub photon_number: Vec<f64>,
    excited: Vec<ExcitedProbe>,
}

impl Model {
    /// Excited-state population (exact for explicit models, the adiabatic
    /// elimination estimate `‖Vψ‖²/(Δ² + γ²)` for effective ones).
    pub fn excited_population(&self, t: f64, psi: &CVector) -> f64 {
        self.excited.iter().map(|p| p.population(t, psi)).sum()
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }
}

fn atom_factor(label: &str, levels: &[&str]) -> Factor {
    Factor::new(label, levels)
}

/// `|x⟩⟨y|` on an atom factor by level names.
fn atom_op(sys: &CompositeSystem, atom: &str, x: &str, y: &str) -> Result<CMatrix> {
    let f = &sys.factors[sys.factor_index(atom)?];
    Ok(transition(f.dim(), f.level(x)?, f.level(y)?))
}

fn number_op(cutoff: usize) -> CMatrix {
    let a = annihilation(cutoff);
    a.adjoint() * a
}

fn cavity_loss(sys: &CompositeSystem, h: &mut TimeDependentOperator, kappa: f64) -> Result<()> {
    if kappa > 0.0 {
        let n = number_op(sys.factors[sys.factor_index("cav")?].dim());
        h.add_constant(-I * kappa, sys.operator(&[("cav", &n)])?)?;
    }
    Ok(())
}

fn scaled_pulse(schedule: &PulseSchedule, id: &str, f: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Result<Coefficient> {
    let p = schedule.pulse(id)?;
    let total = schedule.total_time;
    Ok(Arc::new(move |t| {
        let om = p.at(t, total);
        f(om)
    }))
}

/// Two three-level atoms `{g1, g3, e}` and the cavity:
/// `Σ_i [−(Δ + iγ)|e⟩⟨e| + Ω_i(t)(|e⟩⟨g1| + h.c.) + g(b|e⟩⟨g3| + h.c.)] − iκ b†b`.
pub fn build_optical(p: &SchemeParams, schedule: &PulseSchedule) -> Result<Model> {
    p.validate()?;
    let levels = ["g1", "g3", "e"];
    let sys = CompositeSystem::new(vec![
        atom_factor(ATOM1, &levels),
        atom_factor(ATOM2, &levels),
        Factor::fock("cav", p.cavity_cutoff),
    ])?;
    let mut h = TimeDependentOperator::new(sys.dim());
    let b = annihilation(p.cavity_cutoff);
    let mut excited = Vec::new();
    for atom in [ATOM1, ATOM2] {
        let ee = atom_op(&sys, atom, "e", "e")?;
        h.add_constant(-p.detuning(), sys.operator(&[(atom, &ee)])?)?;
        h.add_hermitian_pair(schedule.coefficient(atom, c(1.0))?, sys.operator(&[(atom, &atom_op(&sys, atom, "e", "g1")?)])?)?;
        h.add_hermitian_pair(constant(c(p.g)), sys.operator(&[(atom, &atom_op(&sys, atom, "e", "g3")?), ("cav", &b)])?)?;
        if p.stark_compensation {
            let det = C64::new(p.delta, -p.gamma);
            let g1 = sys.operator(&[(atom, &atom_op(&sys, atom, "g1", "g1")?)])?;
            h.add(scaled_pulse(schedule, atom, move |om| -(om * om) / det)?, g1)?;
        }
        excited.push(ExcitedProbe::projector(sys.operator(&[(atom, &ee)])?));
    }
    cavity_loss(&sys, &mut h, p.kappa)?;
    let photon_number = sys.factor_weights("cav", |n| n as f64)?;
    Ok(Model { scheme: Scheme::Optical, system: sys, hamiltonian: h, photon_number, excited })
}

/// Two-level atoms `{g1, g3}` after eliminating `e` far off resonance, with
/// the ground Stark shift cancelled and the γ-induced decay of `g1` doubled:
/// `Σ_i [−2iγΩ_i²/(Δ²+γ²)|g1⟩⟨g1| + g²/(Δ+iγ) b†b|g3⟩⟨g3|
///  + gΩ_i/(Δ+iγ)(b†|g3⟩⟨g1| + b|g1⟩⟨g3|)] − iκ b†b`.
pub fn build_modified_optical(p: &SchemeParams, schedule: &PulseSchedule) -> Result<Model> {
    p.validate()?;
    let levels = ["g1", "g3"];
    let sys = CompositeSystem::new(vec![
        atom_factor(ATOM1, &levels),
        atom_factor(ATOM2, &levels),
        Factor::fock("cav", p.cavity_cutoff),
    ])?;
    let mut h = TimeDependentOperator::new(sys.dim());
    let b = annihilation(p.cavity_cutoff);
    let bd = b.adjoint();
    let nb = number_op(p.cavity_cutoff);
    let den = p.detuning();
    let mod2 = den.norm_sqr();
    let (g, gamma) = (p.g, p.gamma);
    let mut excited = Vec::new();
    for atom in [ATOM1, ATOM2] {
        let g1g1 = atom_op(&sys, atom, "g1", "g1")?;
        let g3g3 = atom_op(&sys, atom, "g3", "g3")?;
        let g3g1 = atom_op(&sys, atom, "g3", "g1")?;
        let g1g3 = atom_op(&sys, atom, "g1", "g3")?;
        if gamma > 0.0 {
            h.add(scaled_pulse(schedule, atom, move |om| -2.0 * I * gamma * om * om / mod2)?, sys.operator(&[(atom, &g1g1)])?)?;
        }
        h.add_constant(c(g * g) / den, sys.operator(&[(atom, &g3g3), ("cav", &nb)])?)?;
        let raman = sys.operator(&[(atom, &g3g1), ("cav", &bd)])?.plus(&sys.operator(&[(atom, &g1g3), ("cav", &b)])?);
        h.add(scaled_pulse(schedule, atom, move |om| g * om / den)?, raman)?;
        // amplitude fed into e: Ω|g1⟩ + g b|g3⟩, collected in the g1 slot
        excited.push(ExcitedProbe {
            terms: vec![
                (schedule.coefficient(atom, c(1.0))?, sys.operator(&[(atom, &g1g1)])?),
                (constant(c(g)), sys.operator(&[(atom, &g1g3), ("cav", &b)])?),
            ],
            scale: 1.0 / mod2,
        });
    }
    cavity_loss(&sys, &mut h, p.kappa)?;
    let photon_number = sys.factor_weights("cav", |n| n as f64)?;
    Ok(Model { scheme: Scheme::ModifiedOptical, system: sys, hamiltonian: h, photon_number, excited })
}

fn motional_system(p: &SchemeParams, atom_levels: Option<&[&str]>) -> Result<CompositeSystem> {
    let mut factors = Vec::new();
    if let Some(levels) = atom_levels {
        factors.push(atom_factor(ATOM1, levels));
        factors.push(atom_factor(ATOM2, levels));
    }
    factors.push(Factor::fock("cm1", p.motional_cutoff));
    factors.push(Factor::fock("cm2", p.motional_cutoff));
    factors.push(Factor::fock("cav", p.cavity_cutoff));
    CompositeSystem::new(factors)
}

fn mode_of(atom: &str) -> &'static str {
    if atom == ATOM1 {
        "cm1"
    } else {
        "cm2"
    }
}

/// Adds the explicit motional-scheme terms for both atoms (carrier on
/// `g3 ↔ e`, cavity sideband `ηg(a†b|e⟩⟨g3| + h.c.)`, optional
/// counter-rotating sideband) to `h`.
fn add_motional_full_terms(sys: &CompositeSystem, h: &mut TimeDependentOperator, p: &SchemeParams, schedule: &PulseSchedule) -> Result<Vec<ExcitedProbe>> {
    let a = annihilation(p.motional_cutoff);
    let ad = a.adjoint();
    let b = annihilation(p.cavity_cutoff);
    let mut excited = Vec::new();
    for atom in [ATOM1, ATOM2] {
        let mode = mode_of(atom);
        let ee = atom_op(sys, atom, "e", "e")?;
        let eg3 = atom_op(sys, atom, "e", "g3")?;
        h.add_constant(-p.detuning(), sys.operator(&[(atom, &ee)])?)?;
        h.add_hermitian_pair(schedule.coefficient(atom, c(1.0))?, sys.operator(&[(atom, &eg3)])?)?;
        let eta_g = p.eta * p.g;
        h.add_hermitian_pair(constant(c(eta_g)), sys.operator(&[(atom, &eg3), (mode, &ad), ("cav", &b)])?)?;
        if p.counter_rotating {
            let nu = p.nu;
            h.add_hermitian_pair(
                Arc::new(move |t| C64::from_polar(eta_g, -2.0 * nu * t)),
                sys.operator(&[(atom, &eg3), (mode, &a), ("cav", &b)])?,
            )?;
        }
        excited.push(ExcitedProbe::projector(sys.operator(&[(atom, &ee)])?));
    }
    Ok(excited)
}

/// Internal `{g3, e}` ⊗ cm₁ ⊗ cm₂ ⊗ cavity:
/// `Σ_i [−(Δ+iγ)|e⟩⟨e| + Ω_i(t)(|e⟩⟨g3| + h.c.) + ηg(a_i†b|e⟩⟨g3| + h.c.)] − iκ b†b`,
/// plus `ηg(e^{−2iνt} a_i b|e⟩⟨g3| + h.c.)` when `counter_rotating` is set.
pub fn build_motional_full(p: &SchemeParams, schedule: &PulseSchedule) -> Result<Model> {
    p.validate()?;
    let sys = motional_system(p, Some(&["g3", "e"]))?;
    let mut h = TimeDependentOperator::new(sys.dim());
    let excited = add_motional_full_terms(&sys, &mut h, p, schedule)?;
    cavity_loss(&sys, &mut h, p.kappa)?;
    let photon_number = sys.factor_weights("cav", |n| n as f64)?;
    Ok(Model { scheme: Scheme::MotionalFull, system: sys, hamiltonian: h, photon_number, excited })
}

/// Adds the effective motional terms on whatever space `sys` is; motional
/// operators act as identity on any atom factors present.
fn add_motional_effective_terms(sys: &CompositeSystem, h: &mut TimeDependentOperator, p: &SchemeParams, schedule: &PulseSchedule) -> Result<Vec<ExcitedProbe>> {
    let a = annihilation(p.motional_cutoff);
    let ad = a.adjoint();
    let b = annihilation(p.cavity_cutoff);
    let bd = b.adjoint();
    let den = p.detuning();
    let mod2 = den.norm_sqr();
    let (eta_g, gamma) = (p.eta * p.g, p.gamma);
    let identity = sys.operator(&[])?;
    let mut excited = Vec::new();
    for atom in [ATOM1, ATOM2] {
        let mode = mode_of(atom);
        let exchange = sys.operator(&[(mode, &a), ("cav", &bd)])?.plus(&sys.operator(&[(mode, &ad), ("cav", &b)])?);
        h.add(scaled_pulse(schedule, atom, move |om| eta_g * om / den)?, exchange)?;
        if gamma > 0.0 {
            h.add(scaled_pulse(schedule, atom, move |om| -I * gamma * om * om / mod2)?, identity.clone())?;
        }
        if p.sideband_shift {
            let shift = sys.operator(&[(mode, &(&a * &ad)), ("cav", &number_op(p.cavity_cutoff))])?;
            h.add_constant(c(eta_g * eta_g) / den, shift)?;
        }
        excited.push(ExcitedProbe {
            terms: vec![
                (schedule.coefficient(atom, c(1.0))?, identity.clone()),
                (constant(c(eta_g)), sys.operator(&[(mode, &ad), ("cav", &b)])?),
            ],
            scale: 1.0 / mod2,
        });
    }
    Ok(excited)
}

/// cm₁ ⊗ cm₂ ⊗ cavity:
/// `Σ_i [ηgΩ_i(t)/(Δ+iγ)(a_i b† + a_i† b) − iγΩ_i(t)²/(Δ²+γ²)] − iκ b†b`,
/// plus `Σ_i η²g²/(Δ+iγ) a_i a_i† b†b` when `sideband_shift` is set.
///
/// With γ = 0 the exchange coupling is `ηgΩ_i/Δ`, the negative of `G_i`
/// in the convention `G_i = −gηΩ_i/Δ`.
pub fn build_motional_effective(p: &SchemeParams, schedule: &PulseSchedule) -> Result<Model> {
    p.validate()?;
    let sys = motional_system(p, None)?;
    let mut h = TimeDependentOperator::new(sys.dim());
    let excited = add_motional_effective_terms(&sys, &mut h, p, schedule)?;
    cavity_loss(&sys, &mut h, p.kappa)?;
    let photon_number = sys.factor_weights("cav", |n| n as f64)?;
    Ok(Model { scheme: Scheme::Motional, system: sys, hamiltonian: h, photon_number, excited })
}

pub fn build(scheme: Scheme, p: &SchemeParams, schedule: &PulseSchedule) -> Result<Model> {
    match scheme {
        Scheme::Optical => build_optical(p, schedule),
        Scheme::Motional => build_motional_effective(p, schedule),
        Scheme::MotionalFull => build_motional_full(p, schedule),
        Scheme::ModifiedOptical => build_modified_optical(p, schedule),
    }
}

/// Normalised dark state of a scheme for static couplings `(Ω₁, Ω₂)`:
///
/// * optical: `gΩ₂|g1 g3 0⟩ + gΩ₁|g3 g1 0⟩ − Ω₁Ω₂|g3 g3 1⟩`;
/// * motional: `Ω₂|1 0 0⟩ − Ω₁|0 1 0⟩` on (cm₁, cm₂, cav);
/// * modified optical: `Ω₂|g1 g3 0⟩ − Ω₁|g3 g1 0⟩`.
///
/// The full motional model has no closed-form dark state.
pub fn scheme_dark_state(scheme: Scheme, omega1: f64, omega2: f64, g: f64) -> Result<(CompositeSystem, CVector)> {
    if omega1 == 0.0 && omega2 == 0.0 {
        return Err(Error::DegenerateCouplings);
    }
    let p = SchemeParams { g, ..SchemeParams::default() };
    let (sys, v) = match scheme {
        Scheme::Optical => {
            let sys = CompositeSystem::new(vec![
                atom_factor(ATOM1, &["g1", "g3", "e"]),
                atom_factor(ATOM2, &["g1", "g3", "e"]),
                Factor::fock("cav", 2),
            ])?;
            let v = sys.ket(&["g1", "g3", "0"])? * c(g * omega2) + sys.ket(&["g3", "g1", "0"])? * c(g * omega1)
                - sys.ket(&["g3", "g3", "1"])? * c(omega1 * omega2);
            (sys, v)
        }
        Scheme::Motional => {
            let sys = motional_system(&p, None)?;
            let v = sys.ket(&["1", "0", "0"])? * c(omega2) - sys.ket(&["0", "1", "0"])? * c(omega1);
            (sys, v)
        }
        Scheme::ModifiedOptical => {
            let sys = CompositeSystem::new(vec![
                atom_factor(ATOM1, &["g1", "g3"]),
                atom_factor(ATOM2, &["g1", "g3"]),
                Factor::fock("cav", 2),
            ])?;
            let v = sys.ket(&["g1", "g3", "0"])? * c(omega2) - sys.ket(&["g3", "g1", "0"])? * c(omega1);
            (sys, v)
        }
        Scheme::MotionalFull => {
            return Err(Error::InvalidParameter("the full motional model has no closed-form dark state".into()))
        }
    };
    let n = v.norm();
    Ok((sys, v / c(n)))
}

/// Scores of one transfer run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferResult {
    pub fidelity: f64,
    /// Maximum of `⟨b†b⟩` over the run.
    pub max_p1ph: f64,
    /// `∫⟨b†b⟩ dt`.
    pub int_p1ph: f64,
    /// Maximum excited-state population.
    pub max_pe: f64,
    /// `∫P_e dt`.
    pub int_pe: f64,
    /// `1 − ‖ψ(T)‖²`, floored at zero against integrator round-off.
    pub norm_loss: f64,
    pub wallclock: f64,
}

/// A run together with the model that produced it.
pub struct Run {
    pub model: Model,
    pub evolution: EvolutionResult,
    pub result: TransferResult,
}

/// Evolves `initial` under `model` for `total_time` and scores against `target`.
pub fn simulate(model: Model, initial: &CVector, target: &CVector, total_time: f64, tol: f64) -> Result<Run> {
    let start = Instant::now();
    let evolution = evolve_in_sector(&model.hamiltonian, initial, total_time, tol)?;
    let rep = fidelity_and_populations(&evolution, target, &[("p1ph", model.photon_number.clone())])?;
    let (max_p1ph, int_p1ph) = rep.get("p1ph").unwrap();
    let pe: Vec<f64> = evolution
        .times
        .iter()
        .zip(&evolution.states)
        .map(|(t, s)| model.excited_population(*t, s))
        .collect();
    let result = TransferResult {
        fidelity: rep.fidelity.clamp(0.0, 1.0),
        max_p1ph,
        int_p1ph,
        max_pe: pe.iter().copied().fold(0.0, f64::max),
        int_pe: trapezoid(&evolution.times, &pe),
        norm_loss: (1.0 - rep.final_norm_sqr).max(0.0),
        wallclock: start.elapsed().as_secs_f64(),
    };
    Ok(Run { model, evolution, result })
}

/// Which atom must be pulsed first to carry `initial` into `target` along the
/// dark state: the one that ends up holding the excitation.
fn receiver(initial_atom1_has: bool) -> &'static str {
    if initial_atom1_has {
        ATOM2
    } else {
        ATOM1
    }
}

/// Direct optical-type transfer between role-labelled product states
/// `(atom1, atom2, cavity)`, pulse order derived from the direction.
pub fn run_optical_like(scheme: Scheme, p: &SchemeParams, initial: [&str; 2], target: [&str; 2]) -> Result<Run> {
    if !matches!(scheme, Scheme::Optical | Scheme::ModifiedOptical) {
        return Err(Error::InvalidParameter(format!("{} is not an optical scheme", scheme.name())));
    }
    let first = receiver(initial[0] == "g1");
    let schedule = p.schedule(first)?;
    let model = build(scheme, p, &schedule)?;
    let psi0 = model.system.ket(&[initial[0], initial[1], "0"])?;
    let tgt = model.system.ket(&[target[0], target[1], "0"])?;
    simulate(model, &psi0, &tgt, p.total_time, p.tol)
}

/// End-to-end transfer of the logical word `(α, β) → (0, 2α + β)`.
///
/// Optical schemes exchange the excitation directly; motional schemes use
/// [`three_step_swap`].
pub fn run_transfer(scheme: Scheme, p: &SchemeParams, word: (u8, u8)) -> Result<TransferResult> {
    let enc = LogicalEncoding::default();
    enc.transferred(word)?;
    match scheme {
        Scheme::Optical | Scheme::ModifiedOptical => {
            // atom 2's active pair is relabelled onto the roles (g1, g3)
            enc.atom2_roles(word.1)?;
            let a1 = enc.encode_atom1(word.0)?;
            let (t1, t2) = if word.0 == 1 { ("g3", "g1") } else { ("g3", "g3") };
            Ok(run_optical_like(scheme, p, [a1, "g3"], [t1, t2])?.result)
        }
        Scheme::Motional | Scheme::MotionalFull => three_step_swap(scheme, p, word),
    }
}

/// Result of a motional transfer step on the effective model.
pub fn run_motional_step(scheme: Scheme, p: &SchemeParams) -> Result<Run> {
    let schedule = p.schedule(ATOM2)?;
    let model = build(scheme, p, &schedule)?;
    let (initial, target): (&[&str], &[&str]) = match scheme {
        Scheme::Motional => (&["1", "0", "0"], &["0", "1", "0"]),
        Scheme::MotionalFull => (&["g3", "g3", "1", "0", "0"], &["g3", "g3", "0", "1", "0"]),
        _ => return Err(Error::InvalidParameter(format!("{} is not a motional scheme", scheme.name()))),
    };
    let psi0 = model.system.ket(initial)?;
    let tgt = model.system.ket(target)?;
    simulate(model, &psi0, &tgt, p.total_time, p.tol)
}

/// Resonant internal↔motional adiabatic passage on one atom of the swap
/// space: `|g1, n=0⟩ ↔ |g3, n=1⟩` through `e` with a carrier `Ω(t)|e⟩⟨g1|`
/// and a red sideband `ηΩ(t)|e⟩⟨g3| a`.
fn conversion_model(sys: &CompositeSystem, p: &SchemeParams, atom: &str, sideband_first: bool) -> Result<Model> {
    let (first, second) = if sideband_first { ("sideband", "carrier") } else { ("carrier", "sideband") };
    let schedule = PulseSchedule::counterintuitive(first, second, p.omega, p.a, p.tau, p.total_time)?;
    let a = annihilation(p.motional_cutoff);
    let mode = mode_of(atom);
    let mut h = TimeDependentOperator::new(sys.dim());
    let ee = atom_op(sys, atom, "e", "e")?;
    h.add_constant(-I * p.gamma, sys.operator(&[(atom, &ee)])?)?;
    h.add_hermitian_pair(schedule.coefficient("carrier", c(1.0))?, sys.operator(&[(atom, &atom_op(sys, atom, "e", "g1")?)])?)?;
    h.add_hermitian_pair(
        schedule.coefficient("sideband", c(p.eta))?,
        sys.operator(&[(atom, &atom_op(sys, atom, "e", "g3")?), (mode, &a)])?,
    )?;
    cavity_loss(sys, &mut h, p.kappa)?;
    let mut excited = Vec::new();
    for at in [ATOM1, ATOM2] {
        excited.push(ExcitedProbe::projector(sys.operator(&[(at, &atom_op(sys, at, "e", "e")?)])?));
    }
    Ok(Model {
        scheme: Scheme::Motional,
        system: sys.clone(),
        hamiltonian: h,
        photon_number: sys.factor_weights("cav", |n| n as f64)?,
        excited,
    })
}

/// Three-step swap `(α, β) → (0, 2α + β)` via the atoms' motion:
///
/// 1. atom 1: `|g1, 0⟩ → |g3, 1⟩` (internal to motional, resonant passage);
/// 2. phonon moves cm₁ → cm₂ through the cavity (`scheme` picks the
///    effective or the explicit model, the latter with `Δ` from `p`);
/// 3. atom 2: `|g3, 1⟩ → |g1, 0⟩`.
///
/// Each step lasts `p.total_time`. Populations and integrals accumulate over
/// all three steps.
pub fn three_step_swap(scheme: Scheme, p: &SchemeParams, word: (u8, u8)) -> Result<TransferResult> {
    if !matches!(scheme, Scheme::Motional | Scheme::MotionalFull) {
        return Err(Error::InvalidParameter("three-step swap needs a motional scheme".into()));
    }
    p.validate()?;
    let enc = LogicalEncoding::default();
    let (_, out2) = enc.transferred(word)?;
    enc.atom2_roles(word.1)?;
    let sys = motional_system(p, Some(&["g1", "g3", "e"]))?;
    let a1 = if word.0 == 1 { "g1" } else { "g3" };
    let psi0 = sys.ket(&[a1, "g3", "0", "0", "0"])?;
    let a2_final = if out2 >= 2 { "g1" } else { "g3" };
    let target = sys.ket(&["g3", a2_final, "0", "0", "0"])?;

    let step2 = {
        let schedule = p.schedule(ATOM2)?;
        let mut h = TimeDependentOperator::new(sys.dim());
        let excited = match scheme {
            Scheme::Motional => add_motional_effective_terms(&sys, &mut h, p, &schedule)?,
            _ => add_motional_full_terms(&sys, &mut h, p, &schedule)?,
        };
        cavity_loss(&sys, &mut h, p.kappa)?;
        Model { scheme, system: sys.clone(), hamiltonian: h, photon_number: sys.factor_weights("cav", |n| n as f64)?, excited }
    };
    let steps = [
        conversion_model(&sys, p, ATOM1, true)?,
        step2,
        conversion_model(&sys, p, ATOM2, false)?,
    ];
    let start = Instant::now();
    let mut psi = psi0;
    let mut total = TransferResult { fidelity: 0.0, max_p1ph: 0.0, int_p1ph: 0.0, max_pe: 0.0, int_pe: 0.0, norm_loss: 0.0, wallclock: 0.0 };
    for model in steps {
        // norm is carried over between steps; rescale for the evolver's check
        let nrm = psi.norm();
        if nrm == 0.0 {
            return Err(Error::Invariant("state fully decayed".into()));
        }
        let run = simulate(model, &(&psi / c(nrm)), &target, p.total_time, p.tol)?;
        let w = nrm * nrm;
        total.max_p1ph = total.max_p1ph.max(run.result.max_p1ph * w);
        total.int_p1ph += run.result.int_p1ph * w;
        total.max_pe = total.max_pe.max(run.result.max_pe * w);
        total.int_pe += run.result.int_pe * w;
        psi = run.evolution.final_state() * c(nrm);
    }
    total.fidelity = target.dotc(&psi).norm_sqr().clamp(0.0, 1.0);
    total.norm_loss = (1.0 - psi.norm_squared()).max(0.0);
    total.wallclock = start.elapsed().as_secs_f64();
    Ok(total)
}

/// Largest `|P_full(t) − P_eff(t)|` over the common output grid and the
/// projectors present in both lists (matched by label).
pub fn effective_equivalence_report(
    full: &EvolutionResult,
    full_projectors: &[(&str, Vec<f64>)],
    effective: &EvolutionResult,
    effective_projectors: &[(&str, Vec<f64>)],
) -> Result<f64> {
    if full.times.len() != effective.times.len()
        || full.times.iter().zip(&effective.times).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::Dimension("runs use different output grids".into()));
    }
    let mut worst: f64 = 0.0;
    let mut matched = 0;
    for (label, wf) in full_projectors {
        if let Some((_, we)) = effective_projectors.iter().find(|(l, _)| l == label) {
            matched += 1;
            let pf = full.expectation(wf);
            let pe = effective.expectation(we);
            worst = pf.iter().zip(&pe).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
        }
    }
    if matched == 0 {
        return Err(Error::InvalidParameter("no common projector labels".into()));
    }
    Ok(worst)
}

/// Occupation-number weights `Σ_i a_i†a_i + b†b` on any system with the
/// `cm1`, `cm2` and `cav` factors.
pub fn excitation_number(sys: &CompositeSystem) -> Result<Vec<f64>> {
    let (i1, i2, ic) = (sys.factor_index("cm1")?, sys.factor_index("cm2")?, sys.factor_index("cav")?);
    Ok((0..sys.dim())
        .map(|k| {
            let l = sys.local(k);
            (l[i1] + l[i2] + l[ic]) as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;

    fn static_schedule(o1: f64, o2: f64) -> PulseSchedule {
        // very wide pulses centred at 0: practically constant near t = 0
        PulseSchedule {
            pulses: vec![
                (ATOM1.into(), crate::evolve::GaussianPulse::new(o1, 0.0, 1e6).unwrap()),
                (ATOM2.into(), crate::evolve::GaussianPulse::new(o2, 0.0, 1e6).unwrap()),
            ],
            total_time: 1.0,
        }
    }

    fn residual(model: &Model, v: &CVector) -> f64 {
        (model.hamiltonian.at(0.0) * v).norm()
    }

    #[test]
    fn optical_dark_state_examples() {
        let (sys, v) = scheme_dark_state(Scheme::Optical, 0.0, 0.7, 1.0).unwrap();
        assert!((v - sys.ket(&["g1", "g3", "0"]).unwrap()).norm() < 1e-15);
        let (sys, v) = scheme_dark_state(Scheme::Optical, 1.0, 1.0, 1.0).unwrap();
        let s = 1.0 / 3f64.sqrt();
        let expect = (sys.ket(&["g1", "g3", "0"]).unwrap() + sys.ket(&["g3", "g1", "0"]).unwrap() - sys.ket(&["g3", "g3", "1"]).unwrap()) * c(s);
        assert!((v - expect).norm() < 1e-15);
        assert!(scheme_dark_state(Scheme::Optical, 0.0, 0.0, 1.0).is_err());
        assert!(scheme_dark_state(Scheme::MotionalFull, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn optical_dark_state_is_zero_mode_only_without_loss() {
        let (o1, o2) = (0.3, 0.8);
        let (_, v) = scheme_dark_state(Scheme::Optical, o1, o2, 1.0).unwrap();
        let p = SchemeParams::default();
        let m = build_optical(&p, &static_schedule(o1, o2)).unwrap();
        assert!(residual(&m, &v) < 1e-12);
        let lossy = build_optical(&SchemeParams { kappa: 0.1, ..p }, &static_schedule(o1, o2)).unwrap();
        assert!(residual(&lossy, &v) > 1e-3);
    }

    #[test]
    fn optical_single_excitation_spectrum() {
        // Ω = 0, one atom in g3 with a photon and the other in g1: the
        // {|g3 1⟩, |e 0⟩} block of the photon-carrying atom.
        let delta = 0.7;
        let p = SchemeParams { delta, ..SchemeParams::default() };
        let m = build_optical(&p, &static_schedule(0.0, 0.0)).unwrap();
        let h = m.hamiltonian.at(0.0);
        let sys = &m.system;
        let idx = [sys.ket(&["g3", "g1", "1"]).unwrap(), sys.ket(&["e", "g1", "0"]).unwrap()];
        let block = CMatrix::from_fn(2, 2, |i, j| idx[i].dotc(&(&h * &idx[j])));
        let ev = hermitian_eigenvalues(&block);
        let r = (delta * delta / 4.0 + 1.0).sqrt();
        assert!((ev[0] - (-delta / 2.0 - r)).abs() < 1e-12);
        assert!((ev[1] - (-delta / 2.0 + r)).abs() < 1e-12);
    }

    #[test]
    fn modified_dark_state_survives_cavity_loss() {
        let (o1, o2) = (0.2, 0.5);
        let (_, v) = scheme_dark_state(Scheme::ModifiedOptical, o1, o2, 1.0).unwrap();
        let p = SchemeParams { delta: 20.0, kappa: 0.3, ..SchemeParams::default() };
        let m = build_modified_optical(&p, &static_schedule(o1, o2)).unwrap();
        assert!(residual(&m, &v) < 1e-12);
        // Ω = 0, γ = 0: only g²/Δ b†b|g3⟩⟨g3| acts on a photon state
        let m0 = build_modified_optical(&SchemeParams { delta: 20.0, ..SchemeParams::default() }, &static_schedule(0.0, 0.0)).unwrap();
        let k = m0.system.ket(&["g3", "g1", "1"]).unwrap();
        assert!(((m0.hamiltonian.at(0.0) * &k) - &k * c(1.0 / 20.0)).norm() < 1e-15);
    }

    #[test]
    fn motional_dark_state_and_couplings() {
        let (sys, v) = scheme_dark_state(Scheme::Motional, 0.4, 0.4, 1.0).unwrap();
        let expect = (sys.ket(&["1", "0", "0"]).unwrap() - sys.ket(&["0", "1", "0"]).unwrap()) * c(0.5f64.sqrt());
        assert!((&v - expect).norm() < 1e-15);
        let p = SchemeParams { delta: 10.0, kappa: 0.2, ..SchemeParams::default() };
        let m = build_motional_effective(&p, &static_schedule(0.4, 0.4)).unwrap();
        assert!(residual(&m, &v) < 1e-12);
        // γ = 0: coupling ηgΩ/Δ between |1 0 0⟩ and |0 0 1⟩
        let h = m.hamiltonian.at(0.0);
        let el = sys.ket(&["0", "0", "1"]).unwrap().dotc(&(&h * sys.ket(&["1", "0", "0"]).unwrap()));
        assert!((el - c(0.1 * 0.4 / 10.0)).norm() < 1e-15);
    }

    #[test]
    fn motional_full_trivial_without_coupling() {
        let p = SchemeParams { eta: 0.0, omega: 0.0, delta: 5.0, ..SchemeParams::default() };
        let m = build_motional_full(&p, &p.schedule(ATOM2).unwrap()).unwrap();
        let k = m.system.ket(&["g3", "g3", "1", "0", "0"]).unwrap();
        assert!((m.hamiltonian.at(0.3) * k).norm() < 1e-15);
    }

    #[test]
    fn encoding_tables() {
        let e = LogicalEncoding::default();
        assert_eq!(e.encode_atom1(1).unwrap(), "g1");
        assert_eq!(e.decode_atom2("g2").unwrap(), 3);
        assert_eq!(e.encode_single("10").unwrap(), "g3");
        assert_eq!(e.transferred((1, 0)).unwrap(), (0, 2));
        assert_eq!(e.transferred((1, 1)).unwrap(), (0, 3));
        assert!(e.transferred((2, 0)).is_err());
        assert!(e.decode_atom1("g2").is_err());
        for (l, v) in &e.atom2 {
            assert_eq!(e.encode_atom2(*v).unwrap(), *l);
        }
    }

    #[test]
    fn untouched_when_nothing_to_transfer() {
        let p = SchemeParams { total_time: 200.0, ..SchemeParams::default() };
        let r = run_transfer(Scheme::Optical, &p, (0, 0)).unwrap();
        assert!(r.fidelity > 1.0 - 1e-6);
    }
}
