//! Closed-shell fast path: equal alpha and beta blocks described by spatial
//! occupations and a spatial orbital matrix.

use nalgebra::{DMatrix, DVector};

/// Lifts spatial `(n, χ)` to interleaved spin orbitals.
pub fn lift(occupations: &DVector<f64>, orbitals: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = occupations.len();
    let n = DVector::from_fn(2 * d, |i, _| occupations[i / 2]);
    let chi = DMatrix::from_fn(2 * d, 2 * d, |p, i| {
        if p % 2 == i % 2 {
            orbitals[(p / 2, i / 2)]
        } else {
            0.0
        }
    });
    (n, chi)
}

/// Derivative with respect to a spatial occupation (both spins move together).
pub fn occupation_gradient(spin_gradient: &DVector<f64>) -> DVector<f64> {
    let d = spin_gradient.len() / 2;
    DVector::from_fn(d, |i, _| spin_gradient[2 * i] + spin_gradient[2 * i + 1])
}

/// Gradient for spin-free rotations `X ⊗ 1`.
pub fn orbital_gradient(spin_gradient: &DMatrix<f64>) -> DMatrix<f64> {
    let d = spin_gradient.nrows() / 2;
    DMatrix::from_fn(d, d, |i, j| {
        spin_gradient[(2 * i, 2 * j)] + spin_gradient[(2 * i + 1, 2 * j + 1)]
    })
}

/// Spatial per-spin block of an interleaved spin-orbital matrix.
pub fn alpha_block(spin_matrix: &DMatrix<f64>) -> DMatrix<f64> {
    let d = spin_matrix.nrows() / 2;
    DMatrix::from_fn(d, d, |p, q| spin_matrix[(2 * p, 2 * q)])
}
