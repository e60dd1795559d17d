use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::row_major;
use crate::error::{Error, Result};
use crate::fock::{one_rdm_from_ci, solve_fci_with, FciConfig};
use crate::functionals::{cumulant_energy, FunctionalParams, PenaltyFunctional};
use crate::hamio::{hubbard_dimer, IntegralSet};
use crate::minimizer::{minimize_idmft_with, MinimizeConfig};
use crate::rdm::{frobenius_distance, natural_decomposition, OneRDM};

/// What the `R` coordinate of a scan measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationUnit {
    Angstrom,
    /// A model parameter such as the dimer hopping `t`.
    Model,
}

#[derive(Debug, Clone)]
pub struct Geometry {
    pub label: String,
    pub r: f64,
    pub unit: SeparationUnit,
    pub integrals: IntegralSet,
}

/// Hubbard dimers at fixed `U`, one per hopping, labelled by `t`.
pub fn dimer_series(ts: &[f64], u: f64) -> Vec<Geometry> {
    ts.iter()
        .map(|&t| Geometry {
            label: format!("t={t}"),
            r: t,
            unit: SeparationUnit::Model,
            integrals: hubbard_dimer(t, u),
        })
        .collect()
}

/// i-DMFT solution at one geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdmftPoint {
    pub energy: f64,
    #[serde(with = "row_major")]
    pub gamma: DMatrix<f64>,
    pub occupations: Vec<f64>,
    pub frobenius_error: f64,
    pub degenerate: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub label: String,
    #[serde(rename = "R")]
    pub r: f64,
    pub unit: SeparationUnit,
    #[serde(rename = "E_fci")]
    pub e_fci: f64,
    /// Constant (nuclear repulsion) part of `E_fci`; `E_fci - E_core` is electronic.
    #[serde(rename = "E_core", default)]
    pub e_core: f64,
    #[serde(rename = "E_cum")]
    pub e_cum: f64,
    #[serde(rename = "S")]
    pub entropy: f64,
    /// FCI natural spin-orbital occupations, descending.
    pub occupations: Vec<f64>,
    #[serde(with = "row_major")]
    pub gamma_fci: DMatrix<f64>,
    /// The FCI ground state is (near-)degenerate; `γ_FCI` is then one of several.
    #[serde(default)]
    pub fci_degenerate: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idmft: Option<IdmftPoint>,
}

impl ScanRecord {
    /// Either the FCI ground state or the i-DMFT minimizer is degenerate.
    pub fn degenerate(&self) -> bool {
        self.fci_degenerate || self.idmft.as_ref().is_some_and(|p| p.degenerate)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanConfig {
    pub fci: FciConfig,
    pub minimize: MinimizeConfig,
}

/// A scan that stopped at `label`; `completed` holds the geometries before it.
#[derive(Debug)]
pub struct ScanError {
    pub completed: Vec<ScanRecord>,
    pub label: String,
    pub source: Error,
}

impl fmt::Display for ScanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scan aborted at {} after {} geometries: {}",
            self.label,
            self.completed.len(),
            self.source
        )
    }
}

impl std::error::Error for ScanError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl From<ScanError> for Error {
    fn from(e: ScanError) -> Self {
        e.source
    }
}

pub fn scan_geometries(
    series: &[Geometry],
    params: Option<&FunctionalParams>,
) -> std::result::Result<Vec<ScanRecord>, ScanError> {
    scan_geometries_with(series, params, &ScanConfig::default())
}

/// FCI (and, with `params`, i-DMFT) at every geometry, in input order.
/// Geometries run concurrently; the first failure in series order ends the
/// scan and the records before it are returned with the error.
pub fn scan_geometries_with(
    series: &[Geometry],
    params: Option<&FunctionalParams>,
    config: &ScanConfig,
) -> std::result::Result<Vec<ScanRecord>, ScanError> {
    if let Some(first) = series.first() {
        let shape = |g: &Geometry| (g.integrals.n_spatial(), g.integrals.n_electrons());
        if let Some(bad) = series.iter().find(|g| shape(g) != shape(first)) {
            return Err(ScanError {
                completed: Vec::new(),
                label: bad.label.clone(),
                source: Error::DimensionMismatch(format!(
                    "{} has (d, N) = {:?}, {} has {:?}",
                    bad.label,
                    shape(bad),
                    first.label,
                    shape(first)
                )),
            });
        }
    }
    let results: Vec<Result<ScanRecord>> = series.par_iter().map(|g| scan_point(g, params, config)).collect();
    let mut completed = Vec::with_capacity(series.len());
    for (g, r) in series.iter().zip(results) {
        match r {
            Ok(rec) => completed.push(rec),
            Err(source) => {
                return Err(ScanError {
                    completed,
                    label: g.label.clone(),
                    source,
                })
            }
        }
    }
    Ok(completed)
}

fn scan_point(g: &Geometry, params: Option<&FunctionalParams>, config: &ScanConfig) -> Result<ScanRecord> {
    let fci = solve_fci_with(&g.integrals, &config.fci)?;
    let civ = fci.civector();
    let gamma = one_rdm_from_ci(&civ)?;
    let e_cum = cumulant_energy(&civ, &g.integrals)?;
    let occupations: Vec<f64> = natural_decomposition(&gamma)?.occupations.iter().copied().collect();
    let entropy = PenaltyFunctional::PhEntropy.value(&occupations);
    let idmft = match params {
        Some(p) => Some(idmft_point(&g.integrals, p, &gamma, &config.minimize)?),
        None => None,
    };
    Ok(ScanRecord {
        label: g.label.clone(),
        r: g.r,
        unit: g.unit,
        e_fci: fci.energy,
        e_core: g.integrals.core_energy(),
        e_cum,
        entropy,
        occupations,
        gamma_fci: gamma.into_matrix(),
        fci_degenerate: fci.is_degenerate(),
        idmft,
    })
}

fn idmft_point(
    ints: &IntegralSet,
    params: &FunctionalParams,
    gamma_fci: &OneRDM,
    config: &MinimizeConfig,
) -> Result<IdmftPoint> {
    let res = minimize_idmft_with(ints, params, None, config)?;
    let mut occupations: Vec<f64> = res.occupations.iter().copied().collect();
    occupations.sort_by(|a, b| b.total_cmp(a));
    Ok(IdmftPoint {
        energy: res.energy,
        frobenius_error: frobenius_distance(&res.gamma, gamma_fci)?,
        gamma: res.gamma.into_matrix(),
        occupations,
        degenerate: res.degeneracy_flag,
        converged: res.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Per-spin off-diagonal of the exact dimer 1RDM, `2t / sqrt(U² + 16t²)`.
    fn dimer_coherence(t: f64, u: f64) -> f64 {
        2.0 * t / (u * u + 16.0 * t * t).sqrt()
    }

    #[test]
    fn dimer_entropy_grows_as_hopping_shrinks() {
        let recs = scan_geometries(&dimer_series(&[1.0, 0.5, 0.1, 0.05], 1.0), None).unwrap();
        for w in recs.windows(2) {
            assert!(w[1].entropy > w[0].entropy);
        }
        for (r, t) in recs.iter().zip([1.0, 0.5, 0.1, 0.05]) {
            // natural occupations ½ ± coherence, each twice
            let c = dimer_coherence(t, 1.0);
            let n = [0.5 + c, 0.5 + c, 0.5 - c, 0.5 - c];
            let s = PenaltyFunctional::PhEntropy.value(&n);
            assert!((r.entropy - s).abs() < 1e-10, "{} vs {s}", r.entropy);
            assert!(r.e_cum < 0.0);
        }
    }

    #[test]
    fn noninteracting_scan_has_no_correlation() {
        let recs = scan_geometries(&dimer_series(&[1.0, 0.3, 0.05], 0.0), None).unwrap();
        for r in &recs {
            assert!(r.e_cum.abs() < 1e-10);
            assert!(r.entropy.abs() < 1e-10);
        }
    }

    #[test]
    fn zero_kappa_error_matches_analytic_table() {
        // restricted κ = 0 optimum is the RHF bonding state (coherence ½),
        // so the error is 2 |½ - c| from the two spin blocks' off-diagonals
        let ts = [1.0, 0.5, 0.2, 0.1];
        let params = FunctionalParams::entropy(0.0, 0.0);
        let recs = scan_geometries(&dimer_series(&ts, 1.0), Some(&params)).unwrap();
        for (r, t) in recs.iter().zip(ts) {
            let expected = 2.0 * (0.5 - dimer_coherence(t, 1.0));
            let p = r.idmft.as_ref().unwrap();
            assert!(
                (p.frobenius_error - expected).abs() < 1e-6,
                "t={t}: {} vs {expected}",
                p.frobenius_error
            );
            assert!((p.energy - (-2.0 * t + 0.5)).abs() < 1e-8);
        }
    }

    #[test]
    fn mismatched_series_is_rejected() {
        let mut series = dimer_series(&[1.0], 1.0);
        let mut h = DMatrix::zeros(3, 3);
        h[(0, 1)] = -1.0;
        h[(1, 0)] = -1.0;
        let w = crate::hamio::FoldedEri::zeros(3);
        series.push(Geometry {
            label: "trimer".into(),
            r: 0.0,
            unit: SeparationUnit::Model,
            integrals: IntegralSet::new(2, 0, 0.0, h, w).unwrap(),
        });
        let err = scan_geometries(&series, None).unwrap_err();
        assert_eq!(err.label, "trimer");
        assert!(matches!(err.source, Error::DimensionMismatch(_)));
    }

    #[test]
    fn failure_keeps_earlier_records() {
        let mut series = dimer_series(&[1.0, 0.5], 1.0);
        let base = hubbard_dimer(0.2, 1.0);
        // triplet sector: FCI is fine, the closed-shell minimizer refuses it
        let triplet = IntegralSet::new(2, 2, 0.0, base.h().clone(), base.w().clone()).unwrap();
        series.push(Geometry {
            label: "triplet".into(),
            r: 0.2,
            unit: SeparationUnit::Model,
            integrals: triplet,
        });
        series.extend(dimer_series(&[0.1], 1.0));
        let params = FunctionalParams::entropy(0.1, 0.0);
        let err = scan_geometries(&series, Some(&params)).unwrap_err();
        assert_eq!(err.label, "triplet");
        assert_eq!(err.completed.len(), 2);
        assert_eq!(err.completed[1].label, "t=0.5");
        assert!(matches!(err.source, Error::InvalidArgument(_)));
    }

    #[test]
    fn determinant_cap_aborts_scan() {
        let config = ScanConfig {
            fci: FciConfig {
                determinant_cap: 3,
                ..FciConfig::default()
            },
            ..ScanConfig::default()
        };
        let err = scan_geometries_with(&dimer_series(&[1.0, 0.5], 1.0), None, &config).unwrap_err();
        assert!(err.completed.is_empty());
        assert!(matches!(err.source, Error::CapExceeded { .. }));
    }
}
