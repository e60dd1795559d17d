use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::scan::ScanRecord;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "label,R,E_fci,E_cum,S,E_idmft,frobenius_error,degenerate";

/// Dense matrix as it appears in JSON output: explicit shape, row-major data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMajor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for RowMajor {
    fn from(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)]))
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl TryFrom<RowMajor> for DMatrix<f64> {
    type Error = Error;

    fn try_from(m: RowMajor) -> Result<Self> {
        if m.data.len() != m.rows * m.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix with {} entries",
                m.rows,
                m.cols,
                m.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(m.rows, m.cols, &m.data))
    }
}

/// `#[serde(with = ...)]` adapter for `DMatrix<f64>` fields.
pub(crate) mod row_major {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        RowMajor::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        DMatrix::try_from(RowMajor::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

fn number(x: f64) -> String {
    format!("{x:.11e}")
}

/// One row per record; i-DMFT columns are empty when absent. `degenerate`
/// flags either an FCI near-degeneracy or an i-DMFT multi-start degeneracy.
pub fn records_to_csv(records: &[ScanRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let (e, err) = match &r.idmft {
            Some(p) => (number(p.energy), number(p.frobenius_error)),
            None => (String::new(), String::new()),
        };
        let deg = r.degenerate();
        let label = if r.label.contains([',', '"', '\n']) {
            format!("\"{}\"", r.label.replace('"', "\"\""))
        } else {
            r.label.clone()
        };
        writeln!(
            out,
            "{label},{},{},{},{},{e},{err},{deg}",
            number(r.r),
            number(r.e_fci),
            number(r.e_cum),
            number(r.entropy)
        )
        .expect("writing to a String");
    }
    out
}

pub fn records_to_json(records: &[ScanRecord]) -> String {
    serde_json::to_string_pretty(records).expect("records serialize")
}

pub fn records_from_json(text: &str) -> Result<Vec<ScanRecord>> {
    serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("scan JSON: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{dimer_series, scan_geometries};
    use crate::functionals::FunctionalParams;

    #[test]
    fn json_round_trip() {
        let params = FunctionalParams::entropy(0.2, 0.01);
        let recs = scan_geometries(&dimer_series(&[1.0, 0.3], 1.0), Some(&params)).unwrap();
        let text = records_to_json(&recs);
        assert_eq!(records_from_json(&text).unwrap(), recs);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let g = &v[0]["gamma_fci"];
        assert_eq!(g["rows"], 4);
        assert_eq!(g["data"].as_array().unwrap().len(), 16);
        // row-major: entry (0, 2) is the α-α coherence
        assert_eq!(g["data"][2].as_f64().unwrap(), recs[0].gamma_fci[(0, 2)]);
    }

    #[test]
    fn csv_layout() {
        let recs = scan_geometries(&dimer_series(&[1.0], 1.0), None).unwrap();
        let csv = records_to_csv(&recs);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 8);
        assert_eq!(row[0], "t=1");
        assert_eq!(row[1], "1.00000000000e0");
        assert_eq!(&row[5..], &["", "", "false"]);
        assert!(row[3].parse::<f64>().unwrap() < 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let bad = RowMajor {
            rows: 2,
            cols: 2,
            data: vec![1.0],
        };
        assert!(DMatrix::try_from(bad).is_err());
    }
}
