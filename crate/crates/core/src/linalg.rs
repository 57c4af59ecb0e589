//! Small dense complex linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::C64;

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Largest entry modulus, ‖m‖_max.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// ‖U†U − I‖_max.
pub fn unitarity_deviation(u: &CMatrix) -> f64 {
    let n = u.nrows();
    max_abs_diff(&(u.adjoint() * u), &CMatrix::identity(n, n))
}

/// ‖M + M†‖_max; zero for anti-Hermitian matrices.
pub fn anti_hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m + m.adjoint()))
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Vec<f64> {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals
}

/// Best unitary rotation of the columns of `frame` onto `reference`
/// (orthogonal Procrustes). Returns the rotated frame and the smallest
/// singular value of the overlap `reference† · frame`.
pub fn procrustes_align(frame: &CMatrix, reference: &CMatrix) -> (CMatrix, f64) {
    let overlap = reference.adjoint() * frame;
    let svd = overlap.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let min_sv = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    // overlap = U Σ V†, so frame · V U† makes reference† · frame Hermitian PSD.
    let rotation = v_t.adjoint() * u.adjoint();
    (frame * rotation, min_sv)
}

/// Outer product |a⟩⟨b|.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn basis_vector(dim: usize, index: usize) -> CVector {
    let mut v = CVector::zeros(dim);
    v[index] = c(1.0);
    v
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn procrustes_recovers_rotated_frame() {
        let reference = CMatrix::from_fn(4, 2, |i, j| if i == j { c(1.0) } else { c(0.0) });
        let theta: f64 = 0.3;
        let rot = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::from_polar(1.0, 0.2) * theta.cos(),
                c(theta.sin()),
                c(-theta.sin()),
                C64::from_polar(1.0, -0.2) * theta.cos(),
            ],
        );
        let rotated = &reference * &rot;
        let (aligned, min_sv) = procrustes_align(&rotated, &reference);
        assert!(max_abs_diff(&aligned, &reference) < 1e-12);
        assert!((min_sv - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expm_of_anti_hermitian_is_unitary() {
        let a = CMatrix::from_row_slice(2, 2, &[I * 0.4, c(0.7), c(-0.7), I * -1.1]);
        assert!(unitarity_deviation(&expm(&a)) < 1e-13);
    }
}
