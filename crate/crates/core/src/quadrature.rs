//! One-dimensional quadrature: adaptive Simpson, adaptive Gauss–Kronrod
//! (G7/K15) for complex integrands, and the trapezoid rule on samples.

use crate::{Error, Result, C64};

const MAX_DEPTH: usize = 50;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let v = simpson_rec(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Quadrature(format!("non-finite integral over [{a}, {b}]")))
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: usize) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let k = kronrod * half;
    let g = gauss * half;
    (k, (k - g).norm())
}

/// Globally adaptive G7/K15 integration of a complex integrand.
///
/// Subdivides the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol·|I|)`.
pub fn gauss_kronrod<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64, max_intervals: usize) -> Result<C64> {
    let mut intervals: Vec<(f64, f64, C64, f64)> = Vec::new();
    let (v, e) = gk15(&f, a, b);
    intervals.push((a, b, v, e));
    loop {
        let total: C64 = intervals.iter().map(|x| x.2).sum();
        let err: f64 = intervals.iter().map(|x| x.3).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return Ok(total);
        }
        if intervals.len() >= max_intervals {
            return Err(Error::Quadrature(format!(
                "no convergence after {max_intervals} subintervals (error estimate {err:.3e})"
            )));
        }
        let worst = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Trapezoid rule on (possibly non-uniform) samples.
pub fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2).zip(y.windows(2)).map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1])).sum()
}

/// Cumulative trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..t.len() {
        acc += 0.5 * (t[i] - t[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simpson_polynomial_and_trig() {
        let v = adaptive_simpson(|x| x * x * x, 0.0, 2.0, 1e-12).unwrap();
        assert!((v - 4.0).abs() < 1e-12);
        let v = adaptive_simpson(f64::sin, 0.0, PI, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-11);
        let v = adaptive_simpson(f64::sin, PI, 0.0, 1e-12).unwrap();
        assert!((v + 2.0).abs() < 1e-11);
    }

    #[test]
    fn gk_complex_oscillatory() {
        // ∫₀¹ e^{i 50 x} dx = (e^{50i} − 1)/(50i)
        let v = gauss_kronrod(|x| C64::from_polar(1.0, 50.0 * x), 0.0, 1.0, 1e-13, 1e-13, 1000).unwrap();
        let expect = (C64::from_polar(1.0, 50.0) - 1.0) / C64::new(0.0, 50.0);
        assert!((v - expect).norm() < 1e-12);
    }

    #[test]
    fn gk_gaussian() {
        let v = gauss_kronrod(|x| C64::new((-x * x).exp(), 0.0), -10.0, 10.0, 1e-13, 1e-13, 1000).unwrap();
        assert!((v.re - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let t = [0.0, 0.5, 2.0, 3.0];
        let y: Vec<f64> = t.iter().map(|x| 2.0 * x + 1.0).collect();
        assert!((trapezoid(&t, &y) - 12.0).abs() < 1e-14);
        let cum = cumulative_trapezoid(&t, &y);
        assert!((cum[3] - 12.0).abs() < 1e-14 && cum[0] == 0.0);
    }
}
