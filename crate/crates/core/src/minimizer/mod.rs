//! Minimization of the penalized functional over occupations and orbitals,
//! and the two-anchor fit of `(κ, b)`.

mod alternating;
mod fit;
mod occupations;
mod orbitals;

pub use alternating::{minimize_idmft, minimize_idmft_with, MinimizeConfig, MinimizeResult, StartPoint};
pub use fit::{fit_kappa_b, fit_kappa_b_with, FitConfig, FitResult};
pub use occupations::{
    occupation_problem, optimize_occupations, project_capped_simplex, OccupationConfig, OccupationProblem,
    OccupationSolution,
};
pub use orbitals::{optimize_orbitals, OrbitalConfig, OrbitalSolution};

use serde::{Deserialize, Serialize};

/// Parametrization of the 1RDM being optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinMode {
    /// Closed shell: spatial occupations and orbitals shared by both spins.
    #[default]
    Restricted,
    /// Spin orbitals with arbitrary (spin-mixing) rotations.
    General,
}
