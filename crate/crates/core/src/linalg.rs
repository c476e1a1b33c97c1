//! Small dense complex helpers for the qubit subspace.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;

pub type Mat2 = Matrix2<Complex64>;
pub type Mat4 = Matrix4<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pauli basis `{I, X, Y, Z}` on `{|1>, |2>}`; `|1>` is the `+Z` state.
pub fn pauli(k: usize) -> Mat2 {
    match k {
        0 => Mat2::new(ONE, ZERO, ZERO, ONE),
        1 => Mat2::new(ZERO, ONE, ONE, ZERO),
        2 => Mat2::new(ZERO, -I, I, ZERO),
        3 => Mat2::new(ONE, ZERO, ZERO, -ONE),
        _ => panic!("pauli index {k} out of range"),
    }
}

pub fn trace2(m: &Mat2) -> Complex64 {
    m[(0, 0)] + m[(1, 1)]
}

/// `Tr(P_k m)`: the Pauli components of `m` up to the factor 1/2.
pub fn pauli_components(m: &Mat2) -> [Complex64; 4] {
    std::array::from_fn(|k| trace2(&(pauli(k) * m)))
}

/// `|psi><psi|`.
pub fn projector(psi: [Complex64; 2]) -> Mat2 {
    Mat2::new(psi[0] * psi[0].conj(), psi[0] * psi[1].conj(), psi[1] * psi[0].conj(), psi[1] * psi[1].conj())
}

/// Trace distance `||a - b||_1 / 2` for Hermitian 2x2 matrices.
pub fn trace_distance(a: &Mat2, b: &Mat2) -> f64 {
    let d = hermitian_part2(&(a - b));
    let eig = SymmetricEigen::new(d);
    0.5 * eig.eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn hermitian_part2(m: &Mat2) -> Mat2 {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermitian_part4(m: &Mat4) -> Mat4 {
    (m + m.adjoint()).scale(0.5)
}

/// Nearest positive-semidefinite unit-trace matrix by eigenvalue clipping.
/// Falls back to the maximally mixed state if every eigenvalue is clipped.
pub fn project_psd2(m: &Mat2) -> Mat2 {
    let eig = SymmetricEigen::new(hermitian_part2(m));
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let total: f64 = clipped.sum();
    if !(total > 0.0) {
        return Mat2::identity().scale(0.5);
    }
    let v = &eig.eigenvectors;
    let d = Mat2::from_diagonal(&clipped.map(|x| Complex64::new(x / total, 0.0)));
    v * d * v.adjoint()
}

/// Same as [`project_psd2`] for 4x4 process matrices.
pub fn project_psd4(m: &Mat4) -> Mat4 {
    let eig = SymmetricEigen::new(hermitian_part4(m));
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let total: f64 = clipped.sum();
    if !(total > 0.0) {
        return Mat4::identity().scale(0.25);
    }
    let v = &eig.eigenvectors;
    let d = Mat4::from_diagonal(&clipped.map(|x| Complex64::new(x / total, 0.0)));
    v * d * v.adjoint()
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue4(m: &Mat4) -> f64 {
    SymmetricEigen::new(hermitian_part4(m)).eigenvalues.min()
}
