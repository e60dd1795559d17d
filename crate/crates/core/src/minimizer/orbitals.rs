use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::SpinMode;
use crate::error::{Error, Result};
use crate::functionals::{evaluate_unchecked, restricted, FunctionalParams};
use crate::hamio::IntegralSet;
use crate::rdm::orthogonality_defect;

#[derive(Debug, Clone)]
pub struct OrbitalConfig {
    /// Target Frobenius norm of the Riemannian gradient, Hartree.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// L-BFGS history length.
    pub memory: usize,
    /// Largest rotation-generator element per step.
    pub max_step: f64,
}

impl Default for OrbitalConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 1000,
            memory: 8,
            max_step: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrbitalSolution {
    pub orbitals: DMatrix<f64>,
    pub energy: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every accepted step, starting value first.
    pub history: Vec<f64>,
}

/// Energy, occupation gradient and orbital gradient in the space of `mode`.
/// The occupation gradient uses the exact penalty derivative (no boundary
/// sentinel), which is finite on the open interval the solvers keep to.
pub(crate) fn energy_and_gradients(
    mode: SpinMode,
    occupations: &DVector<f64>,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    match mode {
        SpinMode::General => {
            let ev = evaluate_unchecked(occupations, orbitals, ints, params)?;
            let g = occupation_gradient(&ev.generalized_fock, occupations, params);
            Ok((ev.energy, g, ev.orbital_gradient(occupations)))
        }
        SpinMode::Restricted => {
            let (n, chi) = restricted::lift(occupations, orbitals);
            let ev = evaluate_unchecked(&n, &chi, ints, params)?;
            Ok((
                ev.energy,
                restricted::occupation_gradient(&occupation_gradient(&ev.generalized_fock, &n, params)),
                restricted::orbital_gradient(&ev.orbital_gradient(&n)),
            ))
        }
    }
}

fn occupation_gradient(fock: &DMatrix<f64>, n: &DVector<f64>, params: &FunctionalParams) -> DVector<f64> {
    DVector::from_fn(n.len(), |i, _| {
        let pen = if params.kappa > 0.0 {
            params.kappa * params.penalty.term_derivative(n[i])
        } else {
            0.0
        };
        fock[(i, i)] - pen
    })
}

/// Energy, orbital gradient and the diagonal of the generalized Fock matrix.
fn energy_and_orbital_gradient(
    mode: SpinMode,
    occupations: &DVector<f64>,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> Result<(f64, DMatrix<f64>, DVector<f64>)> {
    match mode {
        SpinMode::General => {
            let ev = evaluate_unchecked(occupations, orbitals, ints, params)?;
            let g = ev.orbital_gradient(occupations);
            Ok((ev.energy, g, ev.generalized_fock.diagonal()))
        }
        SpinMode::Restricted => {
            let (n, chi) = restricted::lift(occupations, orbitals);
            let ev = evaluate_unchecked(&n, &chi, ints, params)?;
            let g = restricted::orbital_gradient(&ev.orbital_gradient(&n));
            let diag = restricted::alpha_block(&ev.generalized_fock).diagonal();
            Ok((ev.energy, g, diag))
        }
    }
}

/// Inverse of the one-body estimate of the pair-rotation curvature,
/// `|n_i - n_j| |G̃_ii - G̃_jj|`, used as the initial inverse Hessian.
/// Pairs with nearly equal occupations are otherwise hopelessly slow.
fn preconditioner(mode: SpinMode, n: &DVector<f64>, fock_diag: &DVector<f64>) -> DVector<f64> {
    let k = n.len();
    let scale = match mode {
        SpinMode::General => 2.0,
        SpinMode::Restricted => 4.0,
    };
    let mut d = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            d.push(scale * (n[i] - n[j]).abs() * (fock_diag[i] - fock_diag[j]).abs());
        }
    }
    let top = d.iter().cloned().fold(0.0, f64::max);
    let floor = (1e-6 * top).max(1e-10);
    DVector::from_iterator(d.len(), d.into_iter().map(|v| 1.0 / v.max(floor)))
}

/// Antisymmetric generator from its strictly-upper coordinates.
fn generator(coords: &DVector<f64>, k: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(k, k);
    let mut idx = 0;
    for i in 0..k {
        for j in i + 1..k {
            x[(i, j)] = coords[idx];
            x[(j, i)] = -coords[idx];
            idx += 1;
        }
    }
    x
}

/// Coordinate gradient: `dE = Σ_ij G_ij X_ij = Σ_{i<j} (G_ij - G_ji) u_ij`.
fn coordinate_gradient(g: &DMatrix<f64>) -> DVector<f64> {
    let k = g.nrows();
    let mut out = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            out.push(g[(i, j)] - g[(j, i)]);
        }
    }
    DVector::from_vec(out)
}

/// Symmetric (Löwdin) re-orthonormalization `χ (χᵀχ)^{-1/2}`.
pub(crate) fn reorthonormalize(chi: &DMatrix<f64>) -> DMatrix<f64> {
    let s = chi.transpose() * chi;
    let eig = s.symmetric_eigen();
    let inv_sqrt = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v.sqrt()));
    chi * (&eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose())
}

pub(crate) fn rotate(chi: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let next = chi * x.clone().exp();
    if orthogonality_defect(&next) > 1e-13 {
        reorthonormalize(&next)
    } else {
        next
    }
}

/// Minimizes over orbitals `χ = χ0 exp(X)` at fixed occupations with
/// L-BFGS in the generator coordinates and Armijo backtracking.
pub fn optimize_orbitals(
    mode: SpinMode,
    occupations: &DVector<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
    chi0: &DMatrix<f64>,
    config: &OrbitalConfig,
) -> Result<OrbitalSolution> {
    let k = chi0.nrows();
    if chi0.ncols() != k || occupations.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} occupations with {}x{} orbitals",
            occupations.len(),
            k,
            chi0.ncols()
        )));
    }
    let defect = orthogonality_defect(chi0);
    if defect > 1e-9 {
        return Err(Error::InvalidOrbitals(format!(
            "start orbitals have orthogonality defect {defect:e}"
        )));
    }
    let mut chi = chi0.clone();
    let (mut e, mut g, mut diag) = energy_and_orbital_gradient(mode, occupations, &chi, ints, params)?;
    let mut history = vec![e];
    let mut memory: VecDeque<(DVector<f64>, DVector<f64>, f64)> = VecDeque::new();
    let mut gc = coordinate_gradient(&g);

    for iter in 0..=config.max_iterations {
        let gnorm = g.norm();
        if gnorm <= config.tolerance || k < 2 {
            return Ok(OrbitalSolution {
                orbitals: chi,
                energy: e,
                gradient_norm: gnorm,
                iterations: iter,
                converged: true,
                history,
            });
        }
        if iter == config.max_iterations {
            return Ok(OrbitalSolution {
                orbitals: chi,
                energy: e,
                gradient_norm: gnorm,
                iterations: iter,
                converged: false,
                history,
            });
        }

        let h0 = preconditioner(mode, occupations, &diag);
        let mut p = two_loop(&gc, &memory, &h0);
        if gc.dot(&p) >= 0.0 {
            memory.clear();
            p = -gc.component_mul(&h0);
        }
        let largest = p.amax();
        if largest > config.max_step {
            p *= config.max_step / largest;
        }
        let slope = gc.dot(&p);

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-14 {
            let trial = rotate(&chi, &generator(&(&p * alpha), k));
            let (et, gt, dt) = energy_and_orbital_gradient(mode, occupations, &trial, ints, params)?;
            if et <= e + 1e-4 * alpha * slope {
                accepted = Some((trial, et, gt, dt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, et, gt, dt)) = accepted else {
            if e - (e + slope).abs() < 0.0 && gnorm < 1e3 * config.tolerance {
                // the remaining decrease is below double precision of the energy
                return Ok(OrbitalSolution {
                    orbitals: chi,
                    energy: e,
                    gradient_norm: gnorm,
                    iterations: iter,
                    converged: false,
                    history,
                });
            }
            return Err(Error::LineSearch("orbital optimization"));
        };
        let gct = coordinate_gradient(&gt);
        let s = &p * alpha;
        let y = &gct - &gc;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            memory.push_back((s, y, 1.0 / sy));
            if memory.len() > config.memory {
                memory.pop_front();
            }
        }
        chi = trial;
        e = et;
        g = gt;
        diag = dt;
        gc = gct;
        history.push(e);
    }
    unreachable!()
}

fn two_loop(g: &DVector<f64>, memory: &VecDeque<(DVector<f64>, DVector<f64>, f64)>, h0: &DVector<f64>) -> DVector<f64> {
    let mut q = g.clone();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * s.dot(&q);
        q -= y * a;
        alphas.push(a);
    }
    q.component_mul_assign(h0);
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * y.dot(&q);
        q += s * (a - b);
    }
    -q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamio::hubbard_dimer;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rotation(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    #[test]
    fn half_filling_leaves_orbitals_alone() {
        let ints = hubbard_dimer(1.0, 2.0);
        let n = DVector::from_element(2, 0.5);
        let chi0 = rotation(0.3);
        let sol = optimize_orbitals(
            SpinMode::Restricted,
            &n,
            &ints,
            &FunctionalParams::entropy(0.0, 0.0),
            &chi0,
            &OrbitalConfig::default(),
        )
        .unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.orbitals, chi0);
    }

    #[test]
    fn dimer_hartree_fock_orbitals() {
        let (t, u) = (1.0, 1.0);
        let ints = hubbard_dimer(t, u);
        let n = DVector::from_row_slice(&[1.0, 0.0]);
        let sol = optimize_orbitals(
            SpinMode::Restricted,
            &n,
            &ints,
            &FunctionalParams::entropy(0.0, 0.0),
            &rotation(0.2),
            &OrbitalConfig::default(),
        )
        .unwrap();
        assert!(sol.converged);
        // closed-shell bonding orbital: E = -2t + U/2
        assert!((sol.energy - (-2.0 * t + u / 2.0)).abs() < 1e-10);
        let c = sol.orbitals.column(0);
        assert!((c[0].abs() - 0.5f64.sqrt()).abs() < 1e-6);
        assert!((c[0] - c[1]).abs() < 1e-6 || (c[0] + c[1]).abs() < 1e-6);
        assert!(c[0] * c[1] > 0.0);
    }

    #[test]
    fn energy_never_increases() {
        let ints = hubbard_dimer(0.7, 1.9);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let theta: f64 = rng.random_range(-3.0..3.0);
            let n1: f64 = rng.random_range(0.55..0.99);
            let n = DVector::from_row_slice(&[n1, 1.0 - n1]);
            let sol = optimize_orbitals(
                SpinMode::Restricted,
                &n,
                &ints,
                &FunctionalParams::entropy(0.1, 0.0),
                &rotation(theta),
                &OrbitalConfig::default(),
            )
            .unwrap();
            assert!(sol.converged);
            for w in sol.history.windows(2) {
                assert!(w[1] <= w[0]);
            }
            assert!(orthogonality_defect(&sol.orbitals) < 1e-10);
        }
    }

    #[test]
    fn general_mode_rotations() {
        let ints = hubbard_dimer(1.0, 1.0);
        let n = DVector::from_row_slice(&[1.0, 1.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.4..0.4));
        let chi0 = (&x - x.transpose()).exp();
        let sol = optimize_orbitals(
            SpinMode::General,
            &n,
            &ints,
            &FunctionalParams::entropy(0.0, 0.0),
            &chi0,
            &OrbitalConfig::default(),
        )
        .unwrap();
        assert!(sol.converged);
        // U = t keeps the closed-shell determinant stable
        assert!((sol.energy - (-1.5)).abs() < 1e-10);
    }
}
