use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::linear_fit;
use crate::error::{Error, Result};
use crate::functionals::PenaltyFunctional;
use crate::minimizer::project_capped_simplex;

/// Power-law fits with R² below this are reported as logarithmic.
pub const LOGARITHMIC_R2: f64 = 0.999;

const SLACK: f64 = 1e-12;
const KEPT_VIOLATIONS: usize = 16;

#[derive(Debug, Clone)]
pub struct SchurConfig {
    /// Majorization pairs sampled.
    pub trials: usize,
    /// Random points on `{Σn = m/2}` compared against `n ≡ ½`.
    pub slice_samples: usize,
    pub seed: u64,
}

impl Default for SchurConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            slice_samples: 1000,
            seed: 0,
        }
    }
}

/// `x ≺ y` but `g(x) > g(y)`, or (with `y` empty) a point on the half-filling
/// slice below `g(½, …, ½)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchurViolation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub gx: f64,
    pub gy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchurVerdict {
    pub passed: bool,
    pub trials: usize,
    pub violation_count: usize,
    /// The first few majorization violations.
    pub violations: Vec<SchurViolation>,
    /// `n ≡ ½` beat every sampled point of the half-filling slice.
    pub minimum_at_half: bool,
    pub slice_witness: Option<SchurViolation>,
    /// Informational: `g(n) = g(1 - n)` held at every sampled `y`.
    pub particle_hole_symmetric: bool,
}

/// Samples `x ≺ y` by applying one to three random T-transforms to a random
/// `y ∈ [0,1]^m` and checks `g(x) ≤ g(y)`; then checks that `n ≡ ½` minimizes
/// `g` on the half-filling slice.
pub fn schur_convexity_check(g: &dyn Fn(&[f64]) -> f64, m: usize, config: &SchurConfig) -> Result<SchurVerdict> {
    if config.trials == 0 || m < 2 {
        return Err(Error::InvalidArgument(format!(
            "need trials >= 1 and m >= 2 (got {}, {m})",
            config.trials
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut ph = true;
    for _ in 0..config.trials {
        let y: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let mut x = y.clone();
        for _ in 0..rng.random_range(1..=3) {
            let i = rng.random_range(0..m);
            let j = (i + rng.random_range(1..m)) % m;
            let (hi, lo) = if x[i] >= x[j] { (i, j) } else { (j, i) };
            let delta = rng.random::<f64>() * (x[hi] - x[lo]);
            x[hi] -= delta;
            x[lo] += delta;
        }
        let (gx, gy) = (g(&x), g(&y));
        if gx > gy + SLACK * gy.abs().max(1.0) {
            violation_count += 1;
            if violations.len() < KEPT_VIOLATIONS {
                violations.push(SchurViolation {
                    x,
                    y: y.clone(),
                    gx,
                    gy,
                });
            }
        }
        let flipped: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
        if (g(&flipped) - gy).abs() > SLACK * gy.abs().max(1.0) {
            ph = false;
        }
    }

    let half = vec![0.5; m];
    let g_half = g(&half);
    let mut slice_witness = None;
    for _ in 0..config.slice_samples {
        let u = DVector::from_fn(m, |_, _| rng.random::<f64>());
        let p: Vec<f64> = project_capped_simplex(&u, 0.5 * m as f64).iter().copied().collect();
        let gp = g(&p);
        if gp < g_half - SLACK * g_half.abs().max(1.0) {
            slice_witness = Some(SchurViolation {
                x: half.clone(),
                y: p,
                gx: g_half,
                gy: gp,
            });
            break;
        }
    }
    Ok(SchurVerdict {
        passed: violation_count == 0 && slice_witness.is_none(),
        trials: config.trials,
        violation_count,
        violations,
        minimum_at_half: slice_witness.is_none(),
        slice_witness,
        particle_hole_symmetric: ph,
    })
}

/// The check applied to `-f`, the sign the penalty enters the functional with.
pub fn schur_convexity_check_penalty(
    penalty: PenaltyFunctional,
    m: usize,
    config: &SchurConfig,
) -> Result<SchurVerdict> {
    schur_convexity_check(&|n: &[f64]| -penalty.value(n), m, config)
}

/// Power law `|f'(n)| ∼ n^(-α)` fitted on 51 log-spaced points in `[1e-8, 1e-3]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeForceFit {
    pub alpha: f64,
    pub r_squared: f64,
    /// The power law fits poorly (`R² < LOGARITHMIC_R2`): a log divergence.
    pub logarithmic: bool,
}

pub fn exchange_force_exponent(penalty: PenaltyFunctional) -> Result<ExchangeForceFit> {
    exchange_force_exponent_of(&|n| penalty.term_derivative(n))
}

pub fn exchange_force_exponent_of(derivative: &dyn Fn(f64) -> f64) -> Result<ExchangeForceFit> {
    const POINTS: usize = 51;
    let (lo, hi) = (1e-8_f64.ln(), 1e-3_f64.ln());
    let mut pts = Vec::with_capacity(POINTS);
    for k in 0..POINTS {
        let x = lo + (hi - lo) * k as f64 / (POINTS - 1) as f64;
        let d = derivative(x.exp()).abs();
        if d > 0.0 && d.is_finite() {
            pts.push((x, d.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateFit(
            "penalty derivative vanishes on the probe range".into(),
        ));
    }
    // linear_fit returns -slope as κ
    let fit = linear_fit(&pts)?;
    Ok(ExchangeForceFit {
        alpha: fit.kappa,
        r_squared: fit.r_squared,
        logarithmic: fit.r_squared < LOGARITHMIC_R2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SchurConfig {
        SchurConfig {
            trials: 2000,
            slice_samples: 300,
            seed: 7,
        }
    }

    #[test]
    fn pair_example() {
        let s = PenaltyFunctional::PhEntropy;
        assert!((-s.value(&[0.5, 0.5]) + 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(-s.value(&[0.5, 0.5]) <= -s.value(&[1.0, 0.0]));
    }

    #[test]
    fn shipped_penalties_pass() {
        for p in [
            PenaltyFunctional::PhEntropy,
            PenaltyFunctional::SqrtPh,
            PenaltyFunctional::Power { p: 0.5 },
        ] {
            let v = schur_convexity_check_penalty(p, 6, &quick()).unwrap();
            assert!(v.passed, "{p:?}: {v:?}");
            assert!(v.particle_hole_symmetric);
        }
    }

    #[test]
    fn sum_of_squares_passes_raw() {
        let v = schur_convexity_check(&|n: &[f64]| n.iter().map(|x| x * x).sum(), 5, &quick()).unwrap();
        assert!(v.passed);
        assert!(!v.particle_hole_symmetric);
    }

    #[test]
    fn sum_of_roots_fails_with_witness() {
        let v = schur_convexity_check(&|n: &[f64]| n.iter().map(|x| x.sqrt()).sum(), 4, &quick()).unwrap();
        assert!(!v.passed);
        let w = &v.violations[0];
        assert!(w.gx > w.gy);
        assert!(v.slice_witness.is_some());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let f = |n: &[f64]| n.iter().map(|x| x.sqrt()).sum();
        assert_eq!(
            schur_convexity_check(&f, 4, &quick()).unwrap(),
            schur_convexity_check(&f, 4, &quick()).unwrap()
        );
    }

    #[test]
    fn exponents() {
        let f = exchange_force_exponent(PenaltyFunctional::SqrtPh).unwrap();
        assert!((f.alpha - 0.5).abs() < 0.01 && !f.logarithmic);
        for p in [0.3, 0.5, 0.7] {
            let f = exchange_force_exponent(PenaltyFunctional::Power { p }).unwrap();
            assert!((f.alpha - (1.0 - p)).abs() < 0.01, "p={p}: {}", f.alpha);
            assert!(!f.logarithmic);
        }
        let f = exchange_force_exponent(PenaltyFunctional::PhEntropy).unwrap();
        assert!(f.logarithmic, "{f:?}");
        assert!(f.alpha.abs() < 0.1);
    }

    #[test]
    fn flat_derivative_is_an_error() {
        assert!(matches!(
            exchange_force_exponent_of(&|_| 0.0),
            Err(Error::DegenerateFit(_))
        ));
    }
}
