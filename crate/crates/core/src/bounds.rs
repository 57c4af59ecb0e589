//! Closed-form adiabaticity and decoherence conditions, and their numerical
//! counterparts for the generic three-level transfer Hamiltonian
//!
//! ```text
//! H = D|3⟩⟨3| + G₁(t)(|1⟩⟨3| + h.c.) + G₂(t)(|2⟩⟨3| + h.c.)
//! ```
//!
//! with Gaussian couplings `G_i(s) = G exp(−((s − c_i)/τ)²)` in scaled time
//! `s = t/T`. The transfer starts in `|1⟩`, so `G₂` leads (`c₂ = ½ − a`,
//! `c₁ = ½ + a`).

use serde::{Deserialize, Serialize};

use crate::evolve::GaussianPulse;
use crate::quadrature::{adaptive_simpson, gauss_kronrod};
use crate::schemes::{Scheme, SchemeParams};
use crate::{Error, Result, C64};

/// Which closed form of the effective Rabi frequency applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Resonant,
    FarDetuned,
}

/// Smallest non-zero dressed frequency of the optical scheme:
/// `[g² + ½(Ω_eff² − √((Ω₁² − Ω₂²)² + 4g⁴))]^{1/2}` on resonance, and the
/// bracket divided by Δ far off resonance, with `Ω_eff² = Ω₁² + Ω₂²`.
pub fn omega_tilde(regime: Regime, omega1: f64, omega2: f64, g: f64, delta: f64) -> Result<f64> {
    let eff2 = omega1 * omega1 + omega2 * omega2;
    let diff = omega1 * omega1 - omega2 * omega2;
    let bracket = (g * g + 0.5 * (eff2 - (diff * diff + 4.0 * g.powi(4)).sqrt())).max(0.0);
    match regime {
        Regime::Resonant => Ok(bracket.sqrt()),
        Regime::FarDetuned => {
            if !(delta > 0.0) {
                return Err(Error::InvalidParameter(format!("far-detuned regime needs delta > 0, got {delta}")));
            }
            Ok(bracket / delta)
        }
    }
}

/// Admissible transfer times for a scheme at safety factor α.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_min: f64,
    pub t_max: f64,
    /// Upper limit on the product κγ for the window to exist.
    pub kappa_gamma_limit: f64,
}

impl TimeWindow {
    pub fn is_empty(&self) -> bool {
        !(self.t_min < self.t_max)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_min < t && t < self.t_max
    }
}

/// Uniform time averages `(⟨Ω_eff⟩, ⟨Ω_eff²⟩)` of the counterintuitive pair
/// over `[0, T]`.
pub fn pulse_averages(p: &SchemeParams) -> Result<(f64, f64)> {
    let p1 = GaussianPulse::new(p.omega, 0.5 - p.a, p.tau)?;
    let p2 = GaussianPulse::new(p.omega, 0.5 + p.a, p.tau)?;
    let sq = |s: f64| p1.at_scaled(s).powi(2) + p2.at_scaled(s).powi(2);
    let tol = 1e-12 * p.omega.max(1e-300);
    let mean = adaptive_simpson(|s| sq(s).sqrt(), 0.0, 1.0, tol)?;
    let mean_sq = adaptive_simpson(sq, 0.0, 1.0, tol * p.omega.max(1e-300))?;
    Ok((mean, mean_sq))
}

/// Transfer-time window `T_min < T < T_max` with both sides satisfied by
/// the factor `alpha`.
///
/// * optical: `2g²/(κΩ²) ≫ T ≫ γC/(2⟨Ω_eff⟩²)`, `C = 1` on resonance and
///   `8Δ²/⟨Ω_eff²⟩` otherwise;
/// * motional: `(1/γ)(Δ/m)² ≫ T ≫ (1/(τη)²)(κ/g²)(Δ/Ω)²`, `m = max(ηg, Ω)`;
/// * modified optical: `(1/γ)(Δ/Ω)² ≫ T ≫ (1/τ²)(κ/g²)(Δ/Ω)²`.
///
/// Vanishing rates give an unbounded side (`T_max = ∞` or `T_min = 0`).
pub fn transfer_time_window(scheme: Scheme, p: &SchemeParams, alpha: f64) -> Result<TimeWindow> {
    p.validate()?;
    if !(alpha > 0.0) || !(p.omega > 0.0) {
        return Err(Error::InvalidParameter("need alpha > 0 and omega > 0".into()));
    }
    let (g, om, d) = (p.g, p.omega, p.delta.abs());
    let (upper, lower, limit) = match scheme {
        Scheme::Optical => {
            let (mean, mean_sq) = pulse_averages(p)?;
            let cfac = if d == 0.0 { 1.0 } else { 8.0 * d * d / mean_sq };
            let limit = if d == 0.0 { (g / alpha).powi(2) } else { (g / alpha).powi(2) * (om / d).powi(2) };
            (2.0 * g * g / (p.kappa * om * om), p.gamma * cfac / (2.0 * mean * mean), limit)
        }
        Scheme::Motional | Scheme::MotionalFull => {
            let m = (p.eta * g).max(om);
            (
                (d / m).powi(2) / p.gamma,
                (1.0 / (p.tau * p.eta).powi(2)) * (p.kappa / (g * g)) * (d / om).powi(2),
                (g / alpha).powi(2) * (p.tau * p.eta * om / m).powi(2),
            )
        }
        Scheme::ModifiedOptical => (
            (d / om).powi(2) / p.gamma,
            (1.0 / (p.tau * p.tau)) * (p.kappa / (g * g)) * (d / om).powi(2),
            (g / alpha).powi(2) * p.tau * p.tau,
        ),
    };
    Ok(TimeWindow { t_min: alpha * lower, t_max: upper / alpha, kappa_gamma_limit: limit })
}

/// The closed-form population bounds for Gaussian couplings of peak `G`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdiabaticBound {
    /// `a² e^{a²/τ²} / (2T²G²τ⁴)`.
    pub appendix: f64,
    /// `(a²/τ⁴) e^{a²/τ²} (GT)^{−2}`, the form used for the cavity population.
    pub main_text: f64,
    /// `(1 + D²/G_eff²)^{−1}(1 ± D/√(D² + G_eff²))^{−3/2}` at the pulse
    /// centre, `G_eff = √2 G e^{−a²/τ²}`; `(plus, minus)`.
    pub detuning_prefactor: (f64, f64),
    /// Leading adiabatic-following population of `|3⟩` at the pulse centre
    /// for couplings `exp(−((s − c)/τ)²)`: `2a² e^{2a²/τ²} / (τ⁴ (GT)²)`.
    /// The `|3⟩` amplitude is `θ'G_eff/T · Σ_± 1/(E_±² + G_eff²) = θ'/(TG_eff)`
    /// for every `D`.
    pub following_estimate: f64,
}

pub fn adiabatic_population_bound(g_peak: f64, total_time: f64, a: f64, tau: f64, d: f64) -> Result<AdiabaticBound> {
    if !(g_peak > 0.0 && total_time > 0.0 && tau > 0.0) {
        return Err(Error::InvalidParameter("need G, T, tau > 0".into()));
    }
    let gt2 = (g_peak * total_time).powi(2);
    let e = (a * a / (tau * tau)).exp();
    let tau4 = tau.powi(4);
    let g_eff = 2f64.sqrt() * g_peak / e;
    let pre = |sign: f64| {
        let r = d / (d * d + g_eff * g_eff).sqrt();
        (1.0 + d * d / (g_eff * g_eff)).recip() * (1.0 + sign * r).powf(-1.5)
    };
    Ok(AdiabaticBound {
        appendix: a * a * e / (2.0 * gt2 * tau4),
        main_text: a * a * e / (tau4 * gt2),
        detuning_prefactor: (pre(1.0), pre(-1.0)),
        following_estimate: 2.0 * a * a * e * e / (tau4 * gt2),
    })
}

/// `κ T (1 + (2g²/Ω²) e^{2a²/τ²})^{−1}`, the cavity-loss figure of the
/// resonant optical scheme.
pub fn kappa_condition_optical(kappa: f64, total_time: f64, g: f64, omega: f64, a: f64, tau: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter("omega must be > 0".into()));
    }
    Ok(kappa * total_time / (1.0 + 2.0 * g * g / (omega * omega) * (2.0 * a * a / (tau * tau)).exp()))
}

/// Which non-dark eigenstate of the three-level Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    Plus,
    Minus,
}

/// Gaussian couplings `(G₁, G₂)` in scaled time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThreeLevelSchedule {
    pub g1: GaussianPulse,
    pub g2: GaussianPulse,
    pub d: f64,
    pub total_time: f64,
}

impl ThreeLevelSchedule {
    /// Standard counterintuitive geometry: `G₂` centred at `½ − a`, `G₁` at `½ + a`.
    pub fn standard(g_peak: f64, d: f64, a: f64, tau: f64, total_time: f64) -> Result<Self> {
        Ok(ThreeLevelSchedule {
            g1: GaussianPulse::new(g_peak, 0.5 + a, tau)?,
            g2: GaussianPulse::new(g_peak, 0.5 - a, tau)?,
            d,
            total_time,
        })
    }

    fn eigenvalue(&self, branch: Branch, s: f64) -> f64 {
        let (g1, g2) = (self.g1.at_scaled(s), self.g2.at_scaled(s));
        let geff2 = g1 * g1 + g2 * g2;
        let root = (0.25 * self.d * self.d + geff2).sqrt();
        match branch {
            Branch::Plus => 0.5 * self.d + root,
            Branch::Minus => 0.5 * self.d - root,
        }
    }

    /// `⟨ψ_±|∂_s ψ_0⟩ = −θ' G_eff / √(E_±² + G_eff²)`,
    /// `θ' = (G₁'G₂ − G₁G₂')/G_eff²`.
    fn overlap_rate(&self, branch: Branch, s: f64) -> f64 {
        let (g1, g2) = (self.g1.at_scaled(s), self.g2.at_scaled(s));
        let (d1, d2) = (self.g1.derivative_scaled(s), self.g2.derivative_scaled(s));
        let geff2 = g1 * g1 + g2 * g2;
        if geff2 == 0.0 {
            return 0.0;
        }
        let theta_dot = (d1 * g2 - g1 * d2) / geff2;
        let e = self.eigenvalue(branch, s);
        -theta_dot * geff2.sqrt() / (e * e + geff2).sqrt()
    }

    /// `|⟨ψ_±|dH/dt|ψ_0⟩ / (E_± − E_0)²|²` at scaled time `s`, with
    /// `d/dt = T⁻¹ d/ds` and exact eigenpairs.
    pub fn messiah_integrand(&self, branch: Branch, s: f64) -> f64 {
        let (g1, g2) = (self.g1.at_scaled(s), self.g2.at_scaled(s));
        let (d1, d2) = (self.g1.derivative_scaled(s), self.g2.derivative_scaled(s));
        let geff2 = g1 * g1 + g2 * g2;
        let e = self.eigenvalue(branch, s);
        if geff2 == 0.0 || e == 0.0 {
            return 0.0;
        }
        // dH ψ₀ = |3⟩ (Ġ₁G₂ − G₁Ġ₂)/G_eff and ⟨ψ_±|3⟩ = E_±/√(E_±² + G_eff²)
        let w = (d1 * g2 - g1 * d2) / self.total_time;
        let amp = e / (e * e + geff2).sqrt() * w / geff2.sqrt() / (e * e);
        amp * amp
    }
}

/// Largest Messiah-type bound over a uniform grid of `samples` points in `[0, 1]`.
pub fn messiah_bound(schedule: &ThreeLevelSchedule, branch: Branch, samples: usize) -> f64 {
    (0..samples)
        .map(|k| schedule.messiah_integrand(branch, k as f64 / (samples - 1) as f64))
        .fold(0.0, f64::max)
}

/// First-order adiabatic transition probability into `ψ_±` at the end of
/// the schedule,
/// `P_± = |∫₀¹ e^{−iTα(s)} ⟨ψ_±|∂_sψ_0⟩ ds|²`, `α(s) = ∫₀^s E_±`.
///
/// The phase is tabulated on a fine grid (Simpson per interval). The
/// integral is split into cells of that grid: weakly oscillating cells use
/// adaptive Gauss–Kronrod on the cubic-Hermite interpolated phase, strongly
/// oscillating ones a Levin collocation rule, which needs the phase only at
/// the cell ends and stays accurate for any number of periods per cell.
pub fn transition_amplitude_numeric(schedule: &ThreeLevelSchedule, branch: Branch) -> Result<f64> {
    const TABLE: usize = 20_000;
    const PER_CELL: usize = 10;
    const LEVIN_MIN_PHASE: f64 = 20.0;
    let h = 1.0 / TABLE as f64;
    let e = |s: f64| schedule.eigenvalue(branch, s);
    let mut phase = vec![0.0; TABLE + 1];
    for k in 0..TABLE {
        let s = k as f64 * h;
        phase[k + 1] = phase[k] + h / 6.0 * (e(s) + 4.0 * e(s + 0.5 * h) + e(s + h));
    }
    let t = schedule.total_time;
    let alpha = |s: f64| {
        let k = ((s / h) as usize).min(TABLE - 1);
        let s0 = k as f64 * h;
        let x = (s - s0) / h;
        let (p0, p1) = (phase[k], phase[k + 1]);
        let (m0, m1) = (e(s0) * h, e(s0 + h) * h);
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * p0 + (x3 - 2.0 * x2 + x) * m0 + (-2.0 * x3 + 3.0 * x2) * p1 + (x3 - x2) * m1
    };
    let f = |s: f64| schedule.overlap_rate(branch, s);
    let scale = messiah_bound(schedule, branch, 201).sqrt() * t.max(1.0);
    let cells = TABLE / PER_CELL;
    let abs_tol = 1e-10 * scale.max(1e-300) / cells as f64;
    let mut total = C64::new(0.0, 0.0);
    for cell in 0..cells {
        let (k0, k1) = (cell * PER_CELL, (cell + 1) * PER_CELL);
        let (s0, s1) = (k0 as f64 * h, k1 as f64 * h);
        let winding = t * (phase[k1] - phase[k0]).abs();
        if winding < LEVIN_MIN_PHASE {
            total += gauss_kronrod(|s| C64::from_polar(f(s), -t * alpha(s)), s0, s1, abs_tol, 1e-10, 10_000)?;
        } else {
            let omega_prime = |s: f64| -t * e(s);
            let (w0, w1) = (-t * phase[k0], -t * phase[k1]);
            let coarse = levin_cell(&f, &omega_prime, s0, s1, w0, w1, 10)?;
            let fine = levin_cell(&f, &omega_prime, s0, s1, w0, w1, 14)?;
            if (fine - coarse).norm() > abs_tol.max(1e-8 * fine.norm()) {
                return Err(Error::Quadrature(format!("oscillatory cell [{s0}, {s1}] did not converge")));
            }
            total += fine;
        }
    }
    Ok(total.norm_sqr())
}

/// `∫_{s0}^{s1} f(s) e^{iω(s)} ds` by Levin collocation: find a polynomial
/// `p` with `p' + iω'p = f` on `n` Chebyshev–Lobatto nodes, then the integral
/// is `p(s1)e^{iω(s1)} − p(s0)e^{iω(s0)}`.
fn levin_cell(
    f: &impl Fn(f64) -> f64,
    omega_prime: &impl Fn(f64) -> f64,
    s0: f64,
    s1: f64,
    w0: f64,
    w1: f64,
    n: usize,
) -> Result<C64> {
    let mid = 0.5 * (s0 + s1);
    let r = 0.5 * (s1 - s0);
    let mut a = nalgebra::DMatrix::<C64>::zeros(n, n);
    let mut b = nalgebra::DVector::<C64>::zeros(n);
    for k in 0..n {
        let x = (std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
        let s = mid + r * x;
        let wp = omega_prime(s);
        // Chebyshev values and derivatives by recurrence
        let (mut t0, mut t1) = (1.0, x);
        let (mut d0, mut d1) = (0.0, 1.0);
        for j in 0..n {
            let (tj, dj) = if j == 0 { (t0, d0) } else { (t1, d1) };
            a[(k, j)] = C64::new(dj / r, wp * tj);
            if j >= 1 {
                let t2 = 2.0 * x * t1 - t0;
                let d2 = 2.0 * t1 + 2.0 * x * d1 - d0;
                t0 = t1;
                t1 = t2;
                d0 = d1;
                d1 = d2;
            }
        }
        b[k] = C64::new(f(s), 0.0);
    }
    let coef = a.lu().solve(&b).ok_or_else(|| Error::Quadrature("singular collocation system".into()))?;
    let p_right: C64 = coef.iter().sum();
    let p_left: C64 = coef.iter().enumerate().map(|(j, c)| if j % 2 == 0 { *c } else { -*c }).sum();
    Ok(p_right * C64::from_polar(1.0, w1) - p_left * C64::from_polar(1.0, w0))
}

/// One line of the bound-versus-simulation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub scheme: String,
    pub bound: String,
    /// Short tag naming which closed form the row evaluates.
    pub tag: String,
    pub analytic: f64,
    pub observed: f64,
    pub satisfied: bool,
}

impl BoundReport {
    /// An upper-bound row: satisfied when `observed ≤ analytic·(1 + slack)`.
    pub fn upper(scheme: &str, bound: &str, tag: &str, analytic: f64, observed: f64, slack: f64) -> Self {
        BoundReport {
            scheme: scheme.into(),
            bound: bound.into(),
            tag: tag.into(),
            analytic,
            observed,
            satisfied: observed <= analytic * (1.0 + slack),
        }
    }
}

/// Peak three-level coupling `G` and detuning `D` a scheme maps onto.
///
/// Optical schemes: `|1⟩ = |g₁g₃0⟩`, `|2⟩ = |g₃g₁0⟩`, `|3⟩ = |g₃g₃1⟩` with
/// `G = gΩ/Δ`; both atoms in `g₃` carry the cavity shift `g²/Δ` per photon,
/// so `D = 2g²/Δ`. Motional: phonon states, `G = gηΩ/Δ`, `D = 0`.
pub fn effective_three_level(scheme: Scheme, p: &SchemeParams) -> Result<(f64, f64)> {
    if p.delta == 0.0 {
        return Err(Error::InvalidParameter("the three-level reduction needs delta != 0".into()));
    }
    match scheme {
        Scheme::Motional | Scheme::MotionalFull => Ok((p.g * p.eta * p.omega / p.delta.abs(), 0.0)),
        Scheme::ModifiedOptical | Scheme::Optical => Ok((p.g * p.omega / p.delta.abs(), 2.0 * p.g * p.g / p.delta)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_tilde_cases() {
        assert!(omega_tilde(Regime::Resonant, 0.0, 0.0, 1.0, 0.0).unwrap().abs() < 1e-15);
        for &om in &[0.05, 0.3, 2.0] {
            let v = omega_tilde(Regime::Resonant, om, om, 1.0, 0.0).unwrap();
            assert!((v - om).abs() < 1e-12, "{om} -> {v}");
        }
        let r = omega_tilde(Regime::Resonant, 0.2, 0.7, 1.3, 0.0).unwrap();
        let f = omega_tilde(Regime::FarDetuned, 0.2, 0.7, 1.3, 7.0).unwrap();
        assert!((f - r * r / 7.0).abs() < 1e-15);
        assert!(omega_tilde(Regime::FarDetuned, 0.2, 0.7, 1.0, 0.0).is_err());
    }

    #[test]
    fn optical_window_arithmetic() {
        let p = SchemeParams { gamma: 0.001, kappa: 0.001, ..SchemeParams::default() };
        let w = transfer_time_window(Scheme::Optical, &p, 10.0).unwrap();
        assert!((w.t_max - 8e4).abs() < 1e-8);
        let (mean, _) = pulse_averages(&p).unwrap();
        assert!((w.t_min - 10.0 * 0.001 / (2.0 * mean * mean)).abs() < 1e-9);
        let w1 = transfer_time_window(Scheme::Optical, &p, 1.0).unwrap();
        assert!((w1.kappa_gamma_limit - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pulse_average_matches_error_function_oracle() {
        // ⟨Ω_eff²⟩ = Ω² Σ_i ∫₀¹ e^{−2(s−c_i)²/τ²} ds, each an erf difference.
        let p = SchemeParams::default();
        let (_, mean_sq) = pulse_averages(&p).unwrap();
        let k = 2f64.sqrt() / p.tau;
        let piece = |c: f64| {
            (std::f64::consts::PI.sqrt() / (2.0 * k)) * (erf(k * (1.0 - c)) - erf(-k * c))
        };
        let oracle = p.omega * p.omega * (piece(0.5 - p.a) + piece(0.5 + p.a));
        assert!((mean_sq - oracle).abs() < 1e-10 * oracle);
    }

    /// Abramowitz–Stegun 7.1.26 is too coarse; use the series/continued
    /// fraction split for a test-grade erf.
    fn erf(x: f64) -> f64 {
        if x.abs() < 3.0 {
            let mut sum = x;
            let mut term = x;
            for n in 1..200 {
                term *= -x * x / n as f64;
                sum += term / (2 * n + 1) as f64;
            }
            2.0 / std::f64::consts::PI.sqrt() * sum
        } else {
            let mut f = 0.0;
            for n in (1..60).rev() {
                f = n as f64 / 2.0 / (x.abs() + f);
            }
            let erfc = (-x * x).exp() / std::f64::consts::PI.sqrt() / (x.abs() + f);
            x.signum() * (1.0 - erfc)
        }
    }

    #[test]
    fn motional_limit_below_modified() {
        let p = SchemeParams { delta: 10.0, gamma: 0.01, kappa: 0.01, ..SchemeParams::default() };
        let m = transfer_time_window(Scheme::Motional, &p, 10.0).unwrap();
        let q = transfer_time_window(Scheme::ModifiedOptical, &p, 10.0).unwrap();
        assert!(m.kappa_gamma_limit < q.kappa_gamma_limit);
    }

    #[test]
    fn kappa_condition_values() {
        let v = kappa_condition_optical(1.0, 1.0, 1.0, 0.05, 0.15, 0.15).unwrap();
        assert!((v - 1.0 / (1.0 + 800.0 * 2f64.exp().powi(1))).abs() < 1e-15 || (v - 1.0 / (1.0 + 800.0 * (2.0f64).exp())).abs() < 1e-15);
        assert!((v - 1.69e-4).abs() < 1e-6);
        assert_eq!(kappa_condition_optical(0.0, 5.0, 1.0, 0.05, 0.15, 0.15).unwrap(), 0.0);
    }

    #[test]
    fn bound_limits() {
        let b = adiabatic_population_bound(1e-3, 1e12, 0.15, 0.15, 0.0).unwrap();
        assert!(b.appendix < 1e-10 && b.main_text < 1e-10);
        let b = adiabatic_population_bound(5e-4, 1e6, 0.15, 0.15, 0.0).unwrap();
        assert!((b.main_text - 2.0 * b.appendix).abs() < 1e-18);
        assert_eq!(b.detuning_prefactor, (1.0, 1.0));
    }

    #[test]
    fn frozen_ratio_gives_no_transition() {
        // equal, coincident pulses keep G₁/G₂ fixed
        let s = ThreeLevelSchedule {
            g1: GaussianPulse::new(1e-3, 0.5, 0.15).unwrap(),
            g2: GaussianPulse::new(1e-3, 0.5, 0.15).unwrap(),
            d: 0.0,
            total_time: 1e5,
        };
        assert!(transition_amplitude_numeric(&s, Branch::Plus).unwrap() < 1e-25);
        assert_eq!(messiah_bound(&s, Branch::Plus, 101), 0.0);
    }

    #[test]
    fn following_amplitude_is_detuning_independent() {
        for &(d, g) in &[(0.0f64, 0.3f64), (0.2, 2.6e-3), (-1.5, 0.7)] {
            let root = (0.25 * d * d + g * g).sqrt();
            let sum: f64 = [0.5 * d + root, 0.5 * d - root].iter().map(|e| 1.0 / (e * e + g * g)).sum();
            assert!((sum * g * g - 1.0).abs() < 1e-9, "{d} {g}");
        }
    }

    #[test]
    fn levin_matches_closed_form() {
        // ∫₀¹ s e^{iKs} ds = e^{iK}/(iK) + (e^{iK} − 1)/K²
        let k = 500.0;
        let exact = C64::from_polar(1.0, k) / C64::new(0.0, k) + (C64::from_polar(1.0, k) - 1.0) / (k * k);
        let got = levin_cell(&|s| s, &|_| k, 0.0, 1.0, 0.0, k, 14).unwrap();
        assert!((got - exact).norm() < 1e-13, "{got} {exact}");
    }

    #[test]
    fn large_phase_matches_endpoint_asymptotics() {
        // far into the oscillatory regime only endpoint terms survive:
        // amplitude ≈ [f e^{−iTα}/(−iTE)] between 0 and 1
        let s = ThreeLevelSchedule::standard(5e-3, 0.2, 0.15, 0.15, 4e7).unwrap();
        let p = transition_amplitude_numeric(&s, Branch::Plus).unwrap();
        let edge = |x: f64| (s.overlap_rate(Branch::Plus, x) / (s.total_time * s.eigenvalue(Branch::Plus, x))).abs();
        let (lo, hi) = ((edge(0.0) - edge(1.0)).powi(2), (edge(0.0) + edge(1.0)).powi(2));
        assert!(p >= 0.9 * lo && p <= 1.1 * hi, "{lo} <= {p} <= {hi}");
    }

    #[test]
    fn numeric_amplitude_below_messiah() {
        for &t in &[2e5, 1e6] {
            let s = ThreeLevelSchedule::standard(5e-4, 0.0, 0.15, 0.15, t).unwrap();
            for br in [Branch::Plus, Branch::Minus] {
                let p = transition_amplitude_numeric(&s, br).unwrap();
                assert!(p <= messiah_bound(&s, br, 2001), "{t} {br:?}");
            }
        }
    }
}
