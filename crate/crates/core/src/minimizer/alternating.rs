use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::occupations::{kkt_residual, optimize_occupations, OccupationConfig};
use super::orbitals::{energy_and_gradients, optimize_orbitals, rotate, OrbitalConfig};
use super::SpinMode;
use crate::error::{Error, Result};
use crate::functionals::{restricted, spin_lifted_h, FunctionalParams};
use crate::hamio::IntegralSet;
use crate::rdm::{assemble_onerdm, frobenius_distance, orthogonality_defect, OneRDM};

#[derive(Debug, Clone)]
pub struct MinimizeConfig {
    pub mode: SpinMode,
    /// Combined (occupation KKT, orbital gradient) target, Hartree.
    pub tolerance: f64,
    pub max_cycles: usize,
    pub starts: usize,
    /// Fraction by which the aufbau start is mixed with uniform filling.
    pub smearing: f64,
    /// Half-width of the random rotation generators of starts `k >= 1`.
    pub perturbation: f64,
    pub occupation: OccupationConfig,
    /// Orbital iterations per cycle; the tolerance is set from `tolerance`.
    pub orbital: OrbitalConfig,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        Self {
            mode: SpinMode::Restricted,
            tolerance: 1e-6,
            max_cycles: 500,
            starts: 5,
            smearing: 0.01,
            perturbation: 0.3,
            occupation: OccupationConfig::default(),
            orbital: OrbitalConfig {
                max_iterations: 60,
                ..OrbitalConfig::default()
            },
        }
    }
}

/// Starting occupations and orbitals in the space of the chosen mode
/// (spatial for restricted, spin orbitals for general).
#[derive(Debug, Clone)]
pub struct StartPoint {
    pub occupations: DVector<f64>,
    pub orbitals: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub energy: f64,
    pub gamma: OneRDM,
    /// Spin-orbital occupations, one per column of `orbitals`.
    pub occupations: DVector<f64>,
    pub orbitals: DMatrix<f64>,
    /// Alternation cycles used by the selected start.
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Several starts reached the same energy with different 1RDMs.
    pub degeneracy_flag: bool,
    /// Penalty `f(n*)` summed over spin orbitals.
    pub penalty_value: f64,
    pub start: usize,
}

pub fn minimize_idmft(ints: &IntegralSet, params: &FunctionalParams) -> Result<MinimizeResult> {
    minimize_idmft_with(ints, params, None, &MinimizeConfig::default())
}

/// Multi-start alternating minimization; start 0 is `seed` when given.
///
/// Start `k` uses the eigenvectors of `h` rotated by `exp(X_k)` (`X_0 = 0`,
/// `X_k` drawn from ChaCha8 seeded with `k`) and aufbau occupations mixed
/// with uniform filling by `smearing + 0.1 k`.
pub fn minimize_idmft_with(
    ints: &IntegralSet,
    params: &FunctionalParams,
    seed: Option<&StartPoint>,
    config: &MinimizeConfig,
) -> Result<MinimizeResult> {
    if config.mode == SpinMode::Restricted && (ints.ms2() != 0 || !ints.n_electrons().is_multiple_of(2)) {
        return Err(Error::InvalidArgument(format!(
            "restricted minimization needs a closed shell (N = {}, MS2 = {})",
            ints.n_electrons(),
            ints.ms2()
        )));
    }
    let starts = config.starts.max(1);
    let mut outcomes = Vec::with_capacity(starts);
    let mut failures = Vec::new();
    for k in 0..starts {
        let start = match (k, seed) {
            (0, Some(s)) => s.clone(),
            _ => default_start(ints, params, config, k),
        };
        match run_start(ints, params, config, start) {
            Ok(o) => outcomes.push((k, o)),
            Err(e) => failures.push(e),
        }
    }
    if outcomes.is_empty() {
        return Err(failures.remove(0));
    }
    // lowest energy among converged starts, otherwise lowest overall
    let any_converged = outcomes.iter().any(|(_, o)| o.converged);
    let (best_k, best) = outcomes
        .iter()
        .filter(|(_, o)| o.converged || !any_converged)
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy))
        .cloned()
        .expect("non-empty");
    let (n, chi) = lifted(config.mode, &best.occupations, &best.orbitals);
    let gamma = assemble_onerdm(&n, &chi)?;
    let mut degenerate = false;
    for (_, o) in &outcomes {
        if o.converged && (o.energy - best.energy).abs() <= 1e-8 {
            let (on, oc) = lifted(config.mode, &o.occupations, &o.orbitals);
            let other = assemble_onerdm(&on, &oc)?;
            if frobenius_distance(&gamma, &other)? > 1e-4 {
                degenerate = true;
            }
        }
    }
    let penalty_value = params.penalty.value(n.as_slice());
    Ok(MinimizeResult {
        energy: best.energy,
        gamma,
        occupations: n,
        orbitals: chi,
        iterations: best.cycles,
        gradient_norm: best.gradient_norm,
        converged: best.converged,
        degeneracy_flag: degenerate,
        penalty_value,
        start: best_k,
    })
}

fn lifted(mode: SpinMode, n: &DVector<f64>, chi: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    match mode {
        SpinMode::Restricted => restricted::lift(n, chi),
        SpinMode::General => (n.clone(), chi.clone()),
    }
}

fn default_start(ints: &IntegralSet, params: &FunctionalParams, config: &MinimizeConfig, k: usize) -> StartPoint {
    let (h, target) = match config.mode {
        SpinMode::Restricted => (ints.h().clone(), ints.n_electrons() as f64 / 2.0),
        SpinMode::General => (spin_lifted_h(ints), ints.n_electrons() as f64),
    };
    let dim = h.nrows();
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let mut chi = DMatrix::from_fn(dim, dim, |p, i| eig.eigenvectors[(p, order[i])]);
    for mut col in chi.column_iter_mut() {
        let lead = col.iter().copied().find(|v| v.abs() > 1e-8).unwrap_or(1.0);
        if lead < 0.0 {
            col.neg_mut();
        }
    }
    if k > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
        let w = config.perturbation;
        let x = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-w..=w));
        chi = rotate(&chi, &(&x - x.transpose()));
    }
    let filled = target.floor() as usize;
    let aufbau = DVector::from_fn(dim, |i, _| {
        if i < filled {
            1.0
        } else if i == filled {
            target - filled as f64
        } else {
            0.0
        }
    });
    let s = (config.smearing + 0.1 * k as f64).min(0.9);
    let s = if params.kappa > 0.0 { s.max(1e-6) } else { s };
    let occupations = aufbau * (1.0 - s) + DVector::from_element(dim, s * target / dim as f64);
    StartPoint {
        occupations,
        orbitals: chi,
    }
}

#[derive(Debug, Clone)]
struct Outcome {
    energy: f64,
    occupations: DVector<f64>,
    orbitals: DMatrix<f64>,
    cycles: usize,
    gradient_norm: f64,
    converged: bool,
}

fn run_start(
    ints: &IntegralSet,
    params: &FunctionalParams,
    config: &MinimizeConfig,
    start: StartPoint,
) -> Result<Outcome> {
    let mode = config.mode;
    let StartPoint {
        occupations: mut n,
        orbitals: mut chi,
    } = start;
    let dim = match mode {
        SpinMode::Restricted => ints.n_spatial(),
        SpinMode::General => ints.n_spin_orbitals(),
    };
    if n.len() != dim || chi.nrows() != dim || chi.ncols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "start point of dimension {} / {}x{}, expected {dim}",
            n.len(),
            chi.nrows(),
            chi.ncols()
        )));
    }
    if orthogonality_defect(&chi) > 1e-9 {
        return Err(Error::InvalidOrbitals("start orbitals are not orthonormal".into()));
    }
    let orbital_config = OrbitalConfig {
        tolerance: 0.1 * config.tolerance,
        ..config.orbital.clone()
    };
    let weight = params.kappa
        * match mode {
            SpinMode::Restricted => 2.0,
            SpinMode::General => 1.0,
        };
    let (mut e, g_occ, g_orb) = energy_and_gradients(mode, &n, &chi, ints, params)?;
    let mut residual = kkt_residual(&n, &g_occ, weight, &params.penalty).0.max(g_orb.norm());
    let mut best = Outcome {
        energy: e,
        occupations: n.clone(),
        orbitals: chi.clone(),
        cycles: 0,
        gradient_norm: residual,
        converged: residual <= config.tolerance,
    };
    if best.converged {
        return Ok(best);
    }
    for cycle in 1..=config.max_cycles {
        let occ = optimize_occupations(mode, &chi, ints, params, &n, &config.occupation)?;
        n = occ.occupations;
        let orb = optimize_orbitals(mode, &n, ints, params, &chi, &orbital_config)?;
        chi = orb.orbitals;
        let (e_new, g_occ, g_orb) = energy_and_gradients(mode, &n, &chi, ints, params)?;
        residual = kkt_residual(&n, &g_occ, weight, &params.penalty).0.max(g_orb.norm());
        debug_assert!(e_new <= e + 1e-10 * e.abs().max(1.0));
        e = e_new;
        if e <= best.energy {
            best = Outcome {
                energy: e,
                occupations: n.clone(),
                orbitals: chi.clone(),
                cycles: cycle,
                gradient_norm: residual,
                converged: false,
            };
        }
        if residual <= config.tolerance {
            best.converged = best.cycles == cycle;
            if best.converged {
                return Ok(best);
            }
        }
    }
    Ok(best)
}
