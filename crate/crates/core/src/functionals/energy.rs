use nalgebra::{DMatrix, DVector};

use super::penalty::{PenaltyEval, PenaltyFunctional};
use crate::error::{Error, Result};
use crate::fock::{interaction_expectation, one_rdm_from_ci, CIVector};
use crate::hamio::IntegralSet;
use crate::rdm::{assemble_unchecked, orthogonality_defect, OneRDM};

const SUM_TOLERANCE: f64 = 1e-8;
const ORTHOGONALITY_TOLERANCE: f64 = 1e-9;

/// Constants of the penalized functional `F = Y - κ f(n) - b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalParams {
    pub kappa: f64,
    pub b: f64,
    pub penalty: PenaltyFunctional,
}

impl FunctionalParams {
    pub fn new(kappa: f64, b: f64, penalty: PenaltyFunctional) -> Result<Self> {
        if !(kappa >= 0.0) || !kappa.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("need finite kappa >= 0, got {kappa}")));
        }
        Ok(Self { kappa, b, penalty })
    }

    pub fn entropy(kappa: f64, b: f64) -> Self {
        Self::new(kappa, b, PenaltyFunctional::PhEntropy).expect("valid parameters")
    }
}

/// One-electron matrix lifted to spin orbitals `(1a, 1b, 2a, 2b, ...)`.
pub fn spin_lifted_h(ints: &IntegralSet) -> DMatrix<f64> {
    let d = ints.n_spatial();
    let h = ints.h();
    DMatrix::from_fn(
        2 * d,
        2 * d,
        |p, q| if p % 2 == q % 2 { h[(p / 2, q / 2)] } else { 0.0 },
    )
}

/// Mean-field matrix `F_PR = Σ_QS <PQ||RS> γ_QS`, so that `Y = ½ Tr[F γ]`
/// and `∂Y/∂γ = F`.
pub fn mean_field(gamma: &DMatrix<f64>, ints: &IntegralSet) -> DMatrix<f64> {
    let d = ints.n_spatial();
    let eri = ints.dense_eri();
    let at = |p: usize, q: usize, r: usize, s: usize| eri[((p * d + q) * d + r) * d + s];
    let g = |q: usize, a: usize, s: usize, b: usize| gamma[(2 * q + a, 2 * s + b)];

    let rho = DMatrix::from_fn(d, d, |q, s| g(q, 0, s, 0) + g(q, 1, s, 1));
    let mut f = DMatrix::zeros(2 * d, 2 * d);
    for p in 0..d {
        for r in 0..d {
            let mut coulomb = 0.0;
            let mut exchange = [[0.0; 2]; 2];
            for q in 0..d {
                for s in 0..d {
                    coulomb += at(p, r, q, s) * rho[(q, s)];
                    let x = at(p, s, q, r);
                    if x != 0.0 {
                        for (a, row) in exchange.iter_mut().enumerate() {
                            for (b, e) in row.iter_mut().enumerate() {
                                *e += x * g(q, b, s, a);
                            }
                        }
                    }
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    let direct = if a == b { coulomb } else { 0.0 };
                    f[(2 * p + a, 2 * r + b)] = direct - exchange[a][b];
                }
            }
        }
    }
    f
}

fn check_dims(m: usize, ints: &IntegralSet) -> Result<()> {
    if m != ints.n_spin_orbitals() {
        return Err(Error::DimensionMismatch(format!(
            "1RDM dimension {m}, integrals span {} spin orbitals",
            ints.n_spin_orbitals()
        )));
    }
    Ok(())
}

/// `(Tr[hγ], Y(γ))` for a spin-orbital 1RDM.
pub fn energy_components(gamma: &OneRDM, ints: &IntegralSet) -> Result<(f64, f64)> {
    check_dims(gamma.dim(), ints)?;
    let g = gamma.matrix();
    let e_one = spin_lifted_h(ints).component_mul(g).sum();
    let e_y = 0.5 * mean_field(g, ints).component_mul(g).sum();
    Ok((e_one, e_y))
}

/// `E_cum = <Ψ|W|Ψ> - Y(γ_Ψ)`.
pub fn cumulant_energy(c: &CIVector<'_>, ints: &IntegralSet) -> Result<f64> {
    let w = interaction_expectation(c, ints)?;
    let gamma = one_rdm_from_ci(c)?;
    let (_, e_y) = energy_components(&gamma, ints)?;
    Ok(w - e_y)
}

/// Everything needed for the energy and both gradients at one `(n, χ)` point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: f64,
    pub e_one: f64,
    pub e_y: f64,
    pub penalty: PenaltyEval,
    pub gamma: DMatrix<f64>,
    /// `χᵀ (h + F) χ`, the energy derivative in the natural basis.
    pub generalized_fock: DMatrix<f64>,
}

impl Evaluation {
    /// `∂E/∂n_i` at fixed orbitals.
    pub fn occupation_gradient(&self, kappa: f64) -> DVector<f64> {
        DVector::from_fn(self.generalized_fock.nrows(), |i, _| {
            self.generalized_fock[(i, i)] - kappa * self.penalty.gradient[i]
        })
    }

    /// Riemannian gradient for `χ -> χ exp(X)`: `dE = Σ_ij G_ij X_ij`.
    pub fn orbital_gradient(&self, occupations: &DVector<f64>) -> DMatrix<f64> {
        let g = &self.generalized_fock;
        DMatrix::from_fn(g.nrows(), g.ncols(), |i, j| {
            (occupations[j] - occupations[i]) * g[(i, j)]
        })
    }
}

/// Validating evaluation of the penalized functional.
pub fn evaluate(
    occupations: &DVector<f64>,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> Result<Evaluation> {
    let m = occupations.len();
    check_dims(m, ints)?;
    if orbitals.nrows() != m || orbitals.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "{m} occupations with {}x{} orbitals",
            orbitals.nrows(),
            orbitals.ncols()
        )));
    }
    let total = occupations.sum();
    if (total - ints.n_electrons() as f64).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidOccupations(format!(
            "occupations sum to {total}, expected {}",
            ints.n_electrons()
        )));
    }
    let defect = orthogonality_defect(orbitals);
    if defect > ORTHOGONALITY_TOLERANCE {
        return Err(Error::InvalidOrbitals(format!("orthogonality defect {defect:e}")));
    }
    evaluate_unchecked(occupations, orbitals, ints, params)
}

pub(crate) fn evaluate_unchecked(
    occupations: &DVector<f64>,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> Result<Evaluation> {
    let penalty = params.penalty.value_grad(occupations.as_slice())?;
    let gamma = assemble_unchecked(occupations, orbitals);
    let h = spin_lifted_h(ints);
    let f = mean_field(&gamma, ints);
    let e_one = h.component_mul(&gamma).sum();
    let e_y = 0.5 * f.component_mul(&gamma).sum();
    let energy = e_one + e_y - params.kappa * penalty.value - params.b + ints.core_energy();
    let generalized_fock = orbitals.transpose() * (h + f) * orbitals;
    Ok(Evaluation {
        energy,
        e_one,
        e_y,
        penalty,
        gamma,
        generalized_fock,
    })
}

/// `Tr[hγ] + Y(γ) - κ f(n) - b + core` with `γ = χ diag(n) χᵀ`.
pub fn idmft_energy(
    occupations: &DVector<f64>,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> Result<f64> {
    Ok(evaluate(occupations, orbitals, ints, params)?.energy)
}

/// Occupation gradient at fixed orbitals, with the indices whose penalty
/// derivative diverges.
#[derive(Debug, Clone)]
pub struct OccupationGradient {
    pub gradient: DVector<f64>,
    pub boundary: Vec<usize>,
}

pub fn occupation_gradient(
    occupations: &DVector<f64>,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> Result<OccupationGradient> {
    let ev = evaluate(occupations, orbitals, ints, params)?;
    Ok(OccupationGradient {
        gradient: ev.occupation_gradient(params.kappa),
        boundary: ev.penalty.boundary.clone(),
    })
}

pub fn orbital_gradient(
    occupations: &DVector<f64>,
    orbitals: &DMatrix<f64>,
    ints: &IntegralSet,
    params: &FunctionalParams,
) -> Result<DMatrix<f64>> {
    Ok(evaluate(occupations, orbitals, ints, params)?.orbital_gradient(occupations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamio::hubbard_dimer;

    /// `½ Σ <PQ||RS> γ_PR γ_QS` summed over every index tuple.
    fn brute_force_y(gamma: &DMatrix<f64>, ints: &IntegralSet) -> f64 {
        let v = crate::hamio::spin_orbital_view(ints);
        let m = gamma.nrows();
        let mut y = 0.0;
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        y += 0.5 * v.antisym(p, q, r, s) * gamma[(p, r)] * gamma[(q, s)];
                    }
                }
            }
        }
        y
    }

    #[test]
    fn half_filled_dimer_components() {
        let u = 1.7;
        let ints = hubbard_dimer(0.4, u);
        let gamma = OneRDM::new(DMatrix::identity(4, 4) * 0.5).unwrap();
        let (e_one, e_y) = energy_components(&gamma, &ints).unwrap();
        assert_eq!(e_one, 0.0);
        let oracle = brute_force_y(gamma.matrix(), &ints);
        // U n_up n_down = U/4 on each of the two sites
        assert!((oracle - u / 2.0).abs() < 1e-15);
        assert!((e_y - oracle).abs() < 1e-15);
    }

    #[test]
    fn mean_field_matches_brute_force_with_spin_mixing() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let d = 3;
        let mut w = crate::hamio::FoldedEri::zeros(d);
        for (p, q, r, s, _) in w.clone().iter_unique() {
            w.set(p, q, r, s, rng.random_range(-0.5..0.5));
        }
        let h = DMatrix::from_fn(d, d, |i, j| ((i + j) as f64 * 0.37).sin());
        let ints = IntegralSet::new(3, 1, 0.0, &h + h.transpose(), w).unwrap();
        let a = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-0.2..0.2));
        let gamma = &a + a.transpose();
        let y = 0.5 * mean_field(&gamma, &ints).component_mul(&gamma).sum();
        assert!((y - brute_force_y(&gamma, &ints)).abs() < 1e-13);
    }

    #[test]
    fn rejects_mismatched_dimension() {
        let ints = hubbard_dimer(1.0, 1.0);
        let gamma = OneRDM::new(DMatrix::identity(2, 2) * 0.5).unwrap();
        assert!(energy_components(&gamma, &ints).is_err());
    }

    #[test]
    fn b_is_an_additive_shift() {
        let ints = hubbard_dimer(1.0, 2.0);
        let n = DVector::from_row_slice(&[0.9, 0.9, 0.1, 0.1]);
        let chi = DMatrix::identity(4, 4);
        let e0 = idmft_energy(&n, &chi, &ints, &FunctionalParams::entropy(0.3, 0.0)).unwrap();
        let e1 = idmft_energy(&n, &chi, &ints, &FunctionalParams::entropy(0.3, 0.25)).unwrap();
        assert_eq!(e0 - 0.25, e1);
    }

    #[test]
    fn maximal_mixedness_energy() {
        let u = 2.0;
        let ints = hubbard_dimer(1.0, u);
        let n = DVector::from_element(4, 0.5);
        let e = idmft_energy(
            &n,
            &DMatrix::identity(4, 4),
            &ints,
            &FunctionalParams::entropy(1.0, 0.0),
        )
        .unwrap();
        assert!((e - (u / 2.0 - 4.0 * std::f64::consts::LN_2)).abs() < 1e-14);
    }

    #[test]
    fn sum_rule_enforced() {
        let ints = hubbard_dimer(1.0, 2.0);
        let n = DVector::from_element(4, 0.4);
        assert!(idmft_energy(
            &n,
            &DMatrix::identity(4, 4),
            &ints,
            &FunctionalParams::entropy(0.0, 0.0)
        )
        .is_err());
        assert!(FunctionalParams::new(-1.0, 0.0, PenaltyFunctional::PhEntropy).is_err());
    }
}
