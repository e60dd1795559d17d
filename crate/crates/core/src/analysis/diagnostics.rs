use serde::{Deserialize, Serialize};

use super::scan::ScanRecord;
use crate::error::{Error, Result};
use crate::rdm::{frobenius_distance, OneRDM};

/// Least-squares fit `E_cum = -κ S - b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub kappa: f64,
    pub b: f64,
    pub r_squared: f64,
}

pub fn linear_fit_cum_vs_s(records: &[ScanRecord]) -> Result<LinearFit> {
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.entropy, r.e_cum)).collect();
    linear_fit(&points)
}

pub(crate) fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "{} points, need at least 2",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let sx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let sy = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - sx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - sx) * (p.1 - sy)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - sy).powi(2)).sum();
    let spread = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    if sxx <= (1e-14 * spread.max(1.0)).powi(2) * m {
        return Err(Error::DegenerateFit("all entropies are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = sy - slope * sx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LinearFit {
        kappa: -slope,
        b: -intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleValuednessVerdict {
    pub single_valued: bool,
    /// Index pairs `(j, k)`, `j < k`, in lexicographic order.
    pub witnesses: Vec<(usize, usize)>,
    pub eps_s: f64,
    pub eps_e: f64,
}

/// `ε_S = 0.01 · range(S)` and `ε_E = 0.02 · range(|E_cum|)`.
pub fn default_tolerances(records: &[ScanRecord]) -> (f64, f64) {
    let range = |v: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    };
    let s = range(&mut records.iter().map(|r| r.entropy));
    let e = range(&mut records.iter().map(|r| r.e_cum.abs()));
    (0.01 * s, 0.02 * e)
}

/// Pairs of records that are close in `S` but far apart in `E_cum`.
pub fn single_valuedness(records: &[ScanRecord], eps_s: f64, eps_e: f64) -> Result<SingleValuednessVerdict> {
    let points: Vec<(f64, f64)> = records.iter().map(|r| (r.entropy, r.e_cum)).collect();
    single_valuedness_points(&points, eps_s, eps_e)
}

pub fn single_valuedness_points(points: &[(f64, f64)], eps_s: f64, eps_e: f64) -> Result<SingleValuednessVerdict> {
    if !(eps_s > 0.0 && eps_e > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerances must be positive (eps_S = {eps_s}, eps_E = {eps_e})"
        )));
    }
    let mut witnesses = Vec::new();
    for j in 0..points.len() {
        for k in j + 1..points.len() {
            let (a, b) = (points[j], points[k]);
            if (a.0 - b.0).abs() <= eps_s && (a.1 - b.1).abs() > eps_e {
                witnesses.push((j, k));
            }
        }
    }
    Ok(SingleValuednessVerdict {
        single_valued: witnesses.is_empty(),
        witnesses,
        eps_s,
        eps_e,
    })
}

/// `(R, ‖γ_idmft - γ_FCI‖_F)` for each record, recomputed from the stored matrices.
pub fn rdm_error_curve(records: &[ScanRecord]) -> Result<Vec<(f64, f64)>> {
    records
        .iter()
        .map(|r| {
            let p = r
                .idmft
                .as_ref()
                .ok_or_else(|| Error::MissingData(format!("record {} has no i-DMFT solution", r.label)))?;
            let err = frobenius_distance(&OneRDM::new(p.gamma.clone())?, &OneRDM::new(r.gamma_fci.clone())?)?;
            Ok((r.r, err))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{IdmftPoint, SeparationUnit};
    use nalgebra::DMatrix;

    fn record(s: f64, e: f64) -> ScanRecord {
        ScanRecord {
            label: format!("S={s}"),
            r: s,
            unit: SeparationUnit::Model,
            e_fci: 0.0,
            e_core: 0.0,
            e_cum: e,
            entropy: s,
            occupations: vec![],
            gamma_fci: DMatrix::zeros(2, 2),
            fci_degenerate: false,
            idmft: None,
        }
    }

    #[test]
    fn exact_line() {
        let fit = linear_fit(&[(0.0, 0.0), (1.0, -1.0), (2.0, -2.0)]).unwrap();
        assert!((fit.kappa - 1.0).abs() < 1e-14);
        assert!(fit.b.abs() < 1e-14);
        assert!((fit.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn outlier_lowers_r_squared() {
        let pts = [(0.0, 0.0), (1.0, -1.0), (2.0, -2.0), (3.0, -3.0), (1.5, 0.7)];
        let fit = linear_fit(&pts).unwrap();
        assert!(fit.r_squared < 1.0 && fit.r_squared > 0.0);
        // residuals are orthogonal to the design columns (S, 1)
        let res: Vec<f64> = pts.iter().map(|p| p.1 + fit.kappa * p.0 + fit.b).collect();
        let dot_s: f64 = res.iter().zip(&pts).map(|(r, p)| r * p.0).sum();
        let dot_1: f64 = res.iter().sum();
        assert!(dot_s.abs() < 1e-10 && dot_1.abs() < 1e-10);
    }

    #[test]
    fn equal_entropies_are_degenerate() {
        let recs = [record(0.5, -1.0), record(0.5, -2.0)];
        assert!(matches!(linear_fit_cum_vs_s(&recs), Err(Error::DegenerateFit(_))));
        assert!(matches!(linear_fit_cum_vs_s(&recs[..1]), Err(Error::DegenerateFit(_))));
    }

    #[test]
    fn collinear_set_is_single_valued() {
        let recs: Vec<_> = (0..10).map(|i| record(0.1 * i as f64, -0.2 * i as f64)).collect();
        let (es, ee) = default_tolerances(&recs);
        let v = single_valuedness(&recs, es, ee).unwrap();
        assert!(v.single_valued && v.witnesses.is_empty());
    }

    #[test]
    fn near_equal_entropy_witness() {
        let v = single_valuedness_points(&[(1.0, -1.0), (1.0001, -3.0)], 0.01, 0.1).unwrap();
        assert!(!v.single_valued);
        assert_eq!(v.witnesses, vec![(0, 1)]);
        assert!(single_valuedness_points(&[(1.0, -1.0)], 0.0, 0.1).is_err());
    }

    #[test]
    fn verdict_ignores_order() {
        let pts = [(0.0, 0.0), (0.5, -0.4), (0.501, -0.9), (1.0, -1.0), (0.2, -0.1)];
        let v = single_valuedness_points(&pts, 0.01, 0.1).unwrap();
        let rev: Vec<_> = pts.iter().rev().copied().collect();
        let w = single_valuedness_points(&rev, 0.01, 0.1).unwrap();
        assert_eq!(v.single_valued, w.single_valued);
        assert_eq!(v.witnesses.len(), w.witnesses.len());
    }

    #[test]
    fn error_curve_needs_idmft_data() {
        assert!(matches!(
            rdm_error_curve(&[record(0.0, 0.0)]),
            Err(Error::MissingData(_))
        ));
        let mut rec = record(0.0, 0.0);
        rec.gamma_fci = DMatrix::identity(2, 2) * 0.5;
        rec.idmft = Some(IdmftPoint {
            energy: 0.0,
            gamma: DMatrix::identity(2, 2) * 0.5,
            occupations: vec![0.5, 0.5],
            frobenius_error: 0.0,
            degenerate: false,
            converged: true,
        });
        assert_eq!(rdm_error_curve(&[rec.clone()]).unwrap(), vec![(0.0, 0.0)]);
        rec.idmft.as_mut().unwrap().gamma[(0, 0)] = 0.8;
        let e = rdm_error_curve(&[rec]).unwrap()[0].1;
        assert!((e - 0.3).abs() < 1e-15);
    }
}
