use super::alternating::{minimize_idmft_with, MinimizeConfig, MinimizeResult};
use crate::error::{Error, Result};
use crate::functionals::{FunctionalParams, PenaltyFunctional};
use crate::hamio::IntegralSet;

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub kappa_max: f64,
    /// First trial κ of the geometric bracket expansion.
    pub kappa_start: f64,
    pub expansion: f64,
    /// Required |residual| at both anchors, Hartree.
    pub tolerance: f64,
    pub max_evaluations: usize,
    pub minimize: MinimizeConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kappa_max: 10.0,
            kappa_start: 0.01,
            expansion: 4.0,
            tolerance: 1e-6,
            max_evaluations: 200,
            minimize: MinimizeConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub kappa: f64,
    pub b: f64,
    /// `E_idmft - E_exact` at the equilibrium and dissociation anchors.
    pub residuals: (f64, f64),
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub penalty: PenaltyFunctional,
    pub eq: MinimizeResult,
    pub diss: MinimizeResult,
}

struct Probe {
    kappa: f64,
    /// `Δ(κ) - target`.
    residual: f64,
    eq: MinimizeResult,
    diss: MinimizeResult,
}

pub fn fit_kappa_b(
    eq: &IntegralSet,
    diss: &IntegralSet,
    e_eq: f64,
    e_diss: f64,
    penalty: PenaltyFunctional,
) -> Result<FitResult> {
    fit_kappa_b_with(eq, diss, e_eq, e_diss, penalty, &FitConfig::default())
}

/// Solves `Ẽ_diss(κ) - Ẽ_eq(κ) = E_diss - E_eq` for κ (Ẽ at `b = 0`) by
/// geometric bracketing and Illinois regula falsi, then sets
/// `b = Ẽ_eq(κ) - E_eq`.
pub fn fit_kappa_b_with(
    eq: &IntegralSet,
    diss: &IntegralSet,
    e_eq: f64,
    e_diss: f64,
    penalty: PenaltyFunctional,
    config: &FitConfig,
) -> Result<FitResult> {
    if !(config.kappa_max > 0.0) || !(config.kappa_start > 0.0) || !(config.expansion > 1.0) {
        return Err(Error::InvalidArgument(
            "κ bracket settings must be positive with expansion > 1".into(),
        ));
    }
    let target = e_diss - e_eq;
    let count = std::cell::Cell::new(0usize);
    let probe = |kappa: f64| -> Result<Probe> {
        count.set(count.get() + 1);
        let params = FunctionalParams::new(kappa, 0.0, penalty)?;
        let (a, b) = rayon::join(
            || minimize_idmft_with(eq, &params, None, &config.minimize),
            || minimize_idmft_with(diss, &params, None, &config.minimize),
        );
        let (a, b) = (a?, b?);
        for r in [&a, &b] {
            if !r.converged {
                return Err(Error::NotConverged {
                    operation: "anchor minimization",
                    iterations: r.iterations,
                    residual: r.gradient_norm,
                });
            }
        }
        Ok(Probe {
            kappa,
            residual: (b.energy - a.energy) - target,
            eq: a,
            diss: b,
        })
    };
    let finish = |p: Probe, bracket: (f64, f64), evaluations: usize| {
        let b = p.eq.energy - e_eq;
        FitResult {
            kappa: p.kappa,
            b,
            residuals: (p.eq.energy - b - e_eq, p.diss.energy - b - e_diss),
            bracket,
            evaluations,
            penalty,
            eq: p.eq,
            diss: p.diss,
        }
    };

    let root_tolerance = 1e-3 * config.tolerance;
    let zero = probe(0.0)?;
    if zero.residual.abs() <= root_tolerance {
        return Ok(finish(zero, (0.0, 0.0), count.get()));
    }
    let at_zero = zero.residual;
    if at_zero < 0.0 {
        let top = probe(config.kappa_max)?;
        return Err(Error::NoBracket {
            kappa_max: config.kappa_max,
            at_zero,
            at_max: top.residual,
        });
    }
    let mut lo = zero;
    let mut kappa = config.kappa_start.min(config.kappa_max);
    let mut hi = loop {
        let p = probe(kappa)?;
        if p.residual.abs() <= root_tolerance {
            let bracket = (lo.kappa, kappa);
            return Ok(finish(p, bracket, count.get()));
        }
        if p.residual < 0.0 {
            break p;
        }
        if kappa >= config.kappa_max {
            let flat = (p.diss.penalty_value - p.eq.penalty_value).abs() < 1e-8;
            return Err(if flat {
                Error::IllConditionedFit(format!(
                    "anchor penalties coincide ({:.6e}) at κ = {kappa}",
                    p.eq.penalty_value
                ))
            } else {
                Error::NoBracket {
                    kappa_max: config.kappa_max,
                    at_zero,
                    at_max: p.residual,
                }
            });
        }
        lo = p;
        kappa = (kappa * config.expansion).min(config.kappa_max);
    };
    let bracket = (lo.kappa, hi.kappa);

    // Illinois: halve the retained end's weight after two same-side steps
    let (mut f_lo, mut f_hi) = (lo.residual, hi.residual);
    let mut side = 0i8;
    while count.get() < config.max_evaluations {
        let mut k = (lo.kappa * f_hi - hi.kappa * f_lo) / (f_hi - f_lo);
        if !(k > lo.kappa && k < hi.kappa) {
            k = 0.5 * (lo.kappa + hi.kappa);
        }
        let p = probe(k)?;
        if p.residual.abs() <= root_tolerance || hi.kappa - lo.kappa <= 1e-14 * hi.kappa {
            return Ok(finish(p, bracket, count.get()));
        }
        if p.residual > 0.0 {
            f_lo = p.residual;
            lo = p;
            if side == 1 {
                f_hi *= 0.5;
            }
            side = 1;
        } else {
            f_hi = p.residual;
            hi = p;
            if side == -1 {
                f_lo *= 0.5;
            }
            side = -1;
        }
    }
    let best = if lo.residual.abs() < hi.residual.abs() { lo } else { hi };
    if best.residual.abs() <= config.tolerance {
        return Ok(finish(best, bracket, count.get()));
    }
    Err(Error::NotConverged {
        operation: "κ root search",
        iterations: count.get(),
        residual: best.residual.abs(),
    })
}
