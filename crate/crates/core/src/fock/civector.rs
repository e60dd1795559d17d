use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::basis::DeterminantBasis;
use super::slater::{annihilate, check_compatible, create, occupied, SlaterCondon};
use crate::error::{Error, Result};
use crate::hamio::IntegralSet;
use crate::rdm::OneRDM;

/// Wavefunction coefficients over a determinant basis, unit norm.
#[derive(Debug, Clone)]
pub struct CIVector<'a> {
    basis: &'a DeterminantBasis,
    coefficients: DVector<f64>,
}

impl<'a> CIVector<'a> {
    pub fn new(basis: &'a DeterminantBasis, coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.len() != basis.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} determinants",
                coefficients.len(),
                basis.len()
            )));
        }
        let norm = coefficients.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("CI vector norm {norm} is not 1")));
        }
        Ok(Self { basis, coefficients })
    }

    /// Rescales to unit norm before wrapping.
    pub fn normalized(basis: &'a DeterminantBasis, coefficients: DVector<f64>) -> Result<Self> {
        let norm = coefficients.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("CI vector has zero or non-finite norm".into()));
        }
        Self::new(basis, coefficients / norm)
    }

    pub fn basis(&self) -> &'a DeterminantBasis {
        self.basis
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }
}

/// Spin-orbital 1RDM `γ_PQ = <c|a†_P a_Q|c>` in `(1a, 1b, 2a, 2b, ...)` order.
pub fn one_rdm_from_ci(c: &CIVector<'_>) -> Result<OneRDM> {
    let basis = c.basis();
    let m = 2 * basis.n_spatial();
    let coef = c.coefficients();
    let mut gamma = DMatrix::zeros(m, m);
    for (j, &ket) in basis.spin_orbital_bits().iter().enumerate() {
        let cj = coef[j];
        if cj == 0.0 {
            continue;
        }
        for q in occupied(ket) {
            let (mid, s1) = annihilate(ket, q).expect("occupied");
            // same-spin targets only; others leave the Sz sector
            for p in (q % 2..m).step_by(2) {
                if let Some((bra, s2)) = create(mid, p) {
                    if let Some(i) = basis.position(bra) {
                        gamma[(p, q)] += s1 * s2 * coef[i] * cj;
                    }
                }
            }
        }
    }
    let sym = (&gamma + gamma.transpose()) * 0.5;
    OneRDM::with_particle_number(sym, basis.n_electrons())
}

/// `<c|W|c>`: the two-body Slater–Condon contributions only.
pub fn interaction_expectation(c: &CIVector<'_>, ints: &IntegralSet) -> Result<f64> {
    check_compatible(ints, c.basis())?;
    let sc = SlaterCondon::interaction_only(ints);
    let bits = c.basis().spin_orbital_bits();
    let coef = c.coefficients();
    let total = (0..bits.len())
        .into_par_iter()
        .map(|i| {
            if coef[i] == 0.0 {
                return 0.0;
            }
            let mut acc = 0.5 * coef[i] * sc.element(bits[i], bits[i]);
            for j in 0..i {
                if coef[j] != 0.0 && (bits[i] ^ bits[j]).count_ones() <= 4 {
                    acc += coef[j] * sc.element(bits[i], bits[j]);
                }
            }
            2.0 * coef[i] * acc
        })
        .collect::<Vec<f64>>();
    Ok(total.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis::enumerate_determinants;
    use crate::hamio::hubbard_dimer;

    fn unit(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn single_determinant_rdm() {
        let basis = enumerate_determinants(2, 1, 1).unwrap();
        let c = CIVector::new(&basis, unit(4, 0)).unwrap();
        let g = one_rdm_from_ci(&c).unwrap();
        assert_eq!(
            *g.matrix(),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]))
        );
    }

    #[test]
    fn equal_superposition_is_half_identity() {
        let basis = enumerate_determinants(2, 1, 1).unwrap();
        let mut v = DVector::zeros(4);
        v[0] = 1.0;
        v[3] = 1.0;
        let c = CIVector::normalized(&basis, v).unwrap();
        let g = one_rdm_from_ci(&c).unwrap();
        assert!((g.matrix() - DMatrix::identity(4, 4) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn interaction_of_doubly_occupied_site() {
        let ints = hubbard_dimer(1.0, 2.5);
        let basis = enumerate_determinants(2, 1, 1).unwrap();
        let c = CIVector::new(&basis, unit(4, 0)).unwrap();
        assert_eq!(interaction_expectation(&c, &ints).unwrap(), 2.5);
        let zero = hubbard_dimer(1.0, 0.0);
        assert_eq!(interaction_expectation(&c, &zero).unwrap(), 0.0);
    }

    #[test]
    fn rejects_unnormalized_or_mismatched() {
        let basis = enumerate_determinants(2, 1, 1).unwrap();
        assert!(CIVector::new(&basis, DVector::from_element(4, 1.0)).is_err());
        assert!(CIVector::new(&basis, unit(3, 0)).is_err());
    }
}
