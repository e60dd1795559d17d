//! Energy functionals of the 1RDM: one-body energy, the Hartree–Fock
//! functional `Y`, occupation penalties and their gradients.

mod energy;
mod penalty;
pub mod restricted;

pub(crate) use energy::evaluate_unchecked;
pub use energy::{
    cumulant_energy, energy_components, evaluate, idmft_energy, mean_field, occupation_gradient, orbital_gradient,
    spin_lifted_h, Evaluation, FunctionalParams, OccupationGradient,
};
#[cfg(test)]
pub(crate) use penalty::logistic;
pub use penalty::{PenaltyEval, PenaltyFunctional, BOUNDARY_EPS, BOUNDARY_SLOPE};
