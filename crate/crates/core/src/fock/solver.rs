use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue gap below which the ground state is reported as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    /// Dense below `dense_threshold`, Davidson above.
    Auto,
    Dense,
    Davidson,
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: EigenMethod,
    pub dense_threshold: usize,
    pub max_iterations: usize,
    /// Residual target, relative to `max(1, |E0|)`.
    pub tolerance: f64,
    /// Number of lowest eigenpairs to resolve (at least 1, at most 5).
    pub n_roots: usize,
    pub max_subspace: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: EigenMethod::Auto,
            dense_threshold: 4000,
            max_iterations: 1000,
            tolerance: 1e-10,
            n_roots: 2,
            max_subspace: 48,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub vector: DVector<f64>,
    /// Lowest eigenvalues found, ascending (the first is `energy`).
    pub eigenvalues: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl GroundState {
    /// Gap to the next eigenvalue, if one was resolved.
    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues.get(1).map(|e1| e1 - self.energy)
    }

    pub fn is_degenerate(&self) -> bool {
        self.gap().is_some_and(|g| g < DEGENERACY_GAP)
    }
}

/// Fixes the overall sign so the largest-magnitude coefficient is positive.
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

fn residual_norm(h: &DMatrix<f64>, v: &DVector<f64>, e: f64) -> f64 {
    (h * v - v * e).norm()
}

fn check_input(h: &DMatrix<f64>) -> Result<()> {
    if h.nrows() != h.ncols() || h.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian is {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("Hamiltonian has non-finite entries".into()));
    }
    Ok(())
}

/// Lowest eigenpair of a real symmetric matrix with the default configuration.
pub fn ground_state(h: &DMatrix<f64>) -> Result<GroundState> {
    ground_state_with(h, &SolverConfig::default())
}

pub fn ground_state_with(h: &DMatrix<f64>, config: &SolverConfig) -> Result<GroundState> {
    check_input(h)?;
    let n = h.nrows();
    let use_dense = match config.method {
        EigenMethod::Dense => true,
        EigenMethod::Davidson => n <= config.n_roots,
        EigenMethod::Auto => n < config.dense_threshold || n <= config.n_roots,
    };
    let mut gs = if use_dense {
        dense(h, config)?
    } else {
        davidson(h, config)?
    };
    fix_sign(&mut gs.vector);
    gs.residual = residual_norm(h, &gs.vector, gs.energy);
    Ok(gs)
}

fn dense(h: &DMatrix<f64>, config: &SolverConfig) -> Result<GroundState> {
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let k = config.n_roots.clamp(1, 5).min(order.len());
    let eigenvalues: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vector = eig.eigenvectors.column(order[0]).into_owned();
    Ok(GroundState {
        energy: eigenvalues[0],
        vector,
        eigenvalues,
        residual: 0.0,
        iterations: 1,
    })
}

/// Orthonormalizes `t` against the columns of `basis` (two Gram–Schmidt
/// passes); returns `None` if nothing independent is left.
fn orthogonalize(basis: &[DVector<f64>], mut t: DVector<f64>) -> Option<DVector<f64>> {
    let norm0 = t.norm();
    if norm0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&t);
            t.axpy(-c, b, 1.0);
        }
    }
    let norm = t.norm();
    if norm < 1e-10 * norm0.max(1e-300) || norm < 1e-14 {
        None
    } else {
        Some(t / norm)
    }
}

/// Block Davidson with diagonal preconditioning. Start vectors are unit
/// vectors on the lowest diagonal entries (ties broken by index).
fn davidson(h: &DMatrix<f64>, config: &SolverConfig) -> Result<GroundState> {
    let n = h.nrows();
    let k = config.n_roots.clamp(1, 5).min(n);
    let diag: Vec<f64> = (0..n).map(|i| h[(i, i)]).collect();
    let mut by_diag: Vec<usize> = (0..n).collect();
    by_diag.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let mut next_unit = k;

    let mut v: Vec<DVector<f64>> = by_diag[..k]
        .iter()
        .map(|&i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut hv: Vec<DVector<f64>> = v.iter().map(|x| h * x).collect();
    let max_sub = config.max_subspace.max(2 * k + 2).min(n);
    let mut last_residual = f64::INFINITY;

    for iter in 1..=config.max_iterations {
        let m = v.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let x = v[i].dot(&hv[j]);
                t[(i, j)] = x;
                t[(j, i)] = x;
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

        let mut ritz = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        for &col in order.iter().take(k) {
            let s = eig.eigenvectors.column(col);
            let theta = eig.eigenvalues[col];
            let mut x = DVector::zeros(n);
            let mut hx = DVector::zeros(n);
            for j in 0..m {
                x.axpy(s[j], &v[j], 1.0);
                hx.axpy(s[j], &hv[j], 1.0);
            }
            let r = &hx - &x * theta;
            residuals.push(r);
            ritz.push((theta, x));
        }
        let norms: Vec<f64> = residuals.iter().map(|r| r.norm()).collect();
        let converged = |j: usize| norms[j] <= config.tolerance * ritz[j].0.abs().max(1.0);
        last_residual = norms[0];
        if (0..ritz.len()).all(converged) {
            let eigenvalues = ritz.iter().map(|(e, _)| *e).collect();
            let (energy, x) = ritz.swap_remove(0);
            let nx = x.norm();
            return Ok(GroundState {
                energy,
                vector: x / nx,
                eigenvalues,
                residual: norms[0],
                iterations: iter,
            });
        }

        if v.len() + k > max_sub {
            let mut restart = Vec::with_capacity(2 * k);
            for (_, x) in &ritz {
                if let Some(q) = orthogonalize(&restart, x.clone()) {
                    restart.push(q);
                }
            }
            hv = restart.iter().map(|x| h * x).collect();
            v = restart;
        }

        let mut added = 0;
        for (j, r) in residuals.iter().enumerate() {
            if converged(j) {
                continue;
            }
            let theta = ritz[j].0;
            let t = DVector::from_iterator(
                n,
                r.iter().zip(&diag).map(|(ri, di)| {
                    let denom = theta - di;
                    let denom = if denom.abs() < 1e-8 {
                        1e-8_f64.copysign(denom)
                    } else {
                        denom
                    };
                    ri / denom
                }),
            );
            if let Some(q) = orthogonalize(&v, t) {
                hv.push(h * &q);
                v.push(q);
                added += 1;
            }
        }
        while added == 0 && next_unit < n {
            let mut e = DVector::zeros(n);
            e[by_diag[next_unit]] = 1.0;
            next_unit += 1;
            if let Some(q) = orthogonalize(&v, e) {
                hv.push(h * &q);
                v.push(q);
                added += 1;
            }
        }
        if added == 0 {
            break;
        }
    }
    Err(Error::NotConverged {
        operation: "davidson eigensolver",
        iterations: config.max_iterations,
        residual: last_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let gs = ground_state(&h).unwrap();
        assert_eq!(gs.energy, 1.0);
        assert_eq!(gs.vector, DVector::from_vec(vec![0.0, 1.0, 0.0]));
        assert_eq!(gs.gap(), Some(1.0));
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let h = DMatrix::zeros(4, 4);
        let gs = ground_state(&h).unwrap();
        assert_eq!(gs.energy, 0.0);
        assert!(gs.residual <= 1e-9);
        assert!(gs.is_degenerate());
        assert!((gs.vector.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn davidson_matches_dense_on_random_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [5usize, 30, 120] {
            let mut h = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    let x = if i == j { x + i as f64 * 0.1 } else { x * 0.2 };
                    h[(i, j)] = x;
                    h[(j, i)] = x;
                }
            }
            let dense = ground_state_with(
                &h,
                &SolverConfig {
                    method: EigenMethod::Dense,
                    ..Default::default()
                },
            )
            .unwrap();
            let dav = ground_state_with(
                &h,
                &SolverConfig {
                    method: EigenMethod::Davidson,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!((dense.energy - dav.energy).abs() < 1e-9, "n={n}");
            assert!((dense.eigenvalues[1] - dav.eigenvalues[1]).abs() < 1e-9, "n={n}");
            assert!((dense.vector.dot(&dav.vector).abs() - 1.0).abs() < 1e-9);
            assert!(dav.residual <= 1e-9 * dav.energy.abs().max(1.0));
        }
    }

    #[test]
    fn sign_convention() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.3]);
        let gs = ground_state(&h).unwrap();
        let imax = if gs.vector[0].abs() >= gs.vector[1].abs() { 0 } else { 1 };
        assert!(gs.vector[imax] > 0.0);
    }

    #[test]
    fn rejects_non_square() {
        assert!(ground_state(&DMatrix::zeros(2, 3)).is_err());
    }
}
