//! Full configuration interaction over small determinant spaces.

mod basis;
mod civector;
mod slater;
mod solver;

pub use basis::{
    enumerate_determinants, enumerate_determinants_capped, Determinant, DeterminantBasis, DEFAULT_DETERMINANT_CAP,
};
pub use civector::{interaction_expectation, one_rdm_from_ci, CIVector};
pub use slater::hamiltonian_matrix;
pub use solver::{ground_state, ground_state_with, EigenMethod, GroundState, SolverConfig, DEGENERACY_GAP};

use nalgebra::DVector;

use crate::error::Result;
use crate::hamio::IntegralSet;

#[derive(Debug, Clone)]
pub struct FciConfig {
    pub determinant_cap: usize,
    pub solver: SolverConfig,
}

impl Default for FciConfig {
    fn default() -> Self {
        Self {
            determinant_cap: DEFAULT_DETERMINANT_CAP,
            solver: SolverConfig::default(),
        }
    }
}

/// Exact ground state of an [`IntegralSet`] in its `(n_alpha, n_beta)` sector.
#[derive(Debug, Clone)]
pub struct FciSolution {
    pub basis: DeterminantBasis,
    pub energy: f64,
    pub coefficients: DVector<f64>,
    pub eigenvalues: Vec<f64>,
    pub residual: f64,
}

impl FciSolution {
    pub fn civector(&self) -> CIVector<'_> {
        CIVector::new(&self.basis, self.coefficients.clone()).expect("solver output is normalized")
    }

    pub fn gap(&self) -> Option<f64> {
        self.eigenvalues.get(1).map(|e| e - self.energy)
    }

    pub fn is_degenerate(&self) -> bool {
        self.gap().is_some_and(|g| g < DEGENERACY_GAP)
    }
}

pub fn solve_fci(ints: &IntegralSet) -> Result<FciSolution> {
    solve_fci_with(ints, &FciConfig::default())
}

pub fn solve_fci_with(ints: &IntegralSet, config: &FciConfig) -> Result<FciSolution> {
    let basis = enumerate_determinants_capped(ints.n_spatial(), ints.n_alpha(), ints.n_beta(), config.determinant_cap)?;
    let h = hamiltonian_matrix(ints, &basis)?;
    let gs = ground_state_with(&h, &config.solver)?;
    Ok(FciSolution {
        basis,
        energy: gs.energy,
        coefficients: gs.vector,
        eigenvalues: gs.eigenvalues,
        residual: gs.residual,
    })
}
