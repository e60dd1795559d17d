//! One-particle reduced density matrices and their natural decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Eigenvalues this far outside `[0, 1]` are clamped; further is an error.
pub const OCCUPATION_CLAMP: f64 = 1e-8;
const TRACE_TOLERANCE: f64 = 1e-8;
const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;
/// Occupations closer than this are treated as one degenerate block.
const DEGENERACY_TOLERANCE: f64 = 1e-9;

/// Real symmetric spin-orbital 1RDM with spectrum in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneRDM {
    matrix: DMatrix<f64>,
}

impl OneRDM {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let m = matrix.nrows();
        if matrix.ncols() != m || m == 0 {
            return Err(Error::InvalidRdm(format!(
                "matrix is {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRdm("non-finite entries".into()));
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOLERANCE {
            return Err(Error::InvalidRdm(format!("asymmetry {asym:e}")));
        }
        let eig = matrix.clone().symmetric_eigenvalues();
        for &n in eig.iter() {
            if !(-OCCUPATION_CLAMP..=1.0 + OCCUPATION_CLAMP).contains(&n) {
                return Err(Error::InvalidRdm(format!("occupation {n} outside [0, 1]")));
            }
        }
        Ok(Self { matrix })
    }

    pub fn with_particle_number(matrix: DMatrix<f64>, n_electrons: usize) -> Result<Self> {
        let rdm = Self::new(matrix)?;
        let tr = rdm.trace();
        if (tr - n_electrons as f64).abs() > TRACE_TOLERANCE {
            return Err(Error::InvalidRdm(format!(
                "trace {tr} differs from particle number {n_electrons}"
            )));
        }
        Ok(rdm)
    }

    pub(crate) fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Occupations (descending) and orthogonal natural spin-orbitals (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalDecomposition {
    pub occupations: DVector<f64>,
    pub orbitals: DMatrix<f64>,
}

/// Replaces an orthonormal basis of a degenerate eigenspace by a canonical
/// one: Gram–Schmidt over the columns of the eigenspace projector, taken in
/// index order.
fn canonical_block(vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let m = vectors[0].len();
    let k = vectors.len();
    let mut proj = DMatrix::zeros(m, m);
    for v in vectors {
        proj += v * v.transpose();
    }
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(k);
    while chosen.len() < k {
        let residuals: Vec<DVector<f64>> = (0..m)
            .map(|c| {
                let mut r = proj.column(c).into_owned();
                for q in &chosen {
                    let a = q.dot(&r);
                    r.axpy(-a, q, 1.0);
                }
                r
            })
            .collect();
        let best = residuals.iter().map(|r| r.norm()).fold(0.0, f64::max);
        let pick = residuals
            .into_iter()
            .find(|r| r.norm() >= 0.5 * best)
            .expect("non-empty eigenspace");
        let mut q = pick.normalize();
        for p in &chosen {
            let a = p.dot(&q);
            q.axpy(-a, p, 1.0);
        }
        chosen.push(q.normalize());
    }
    chosen
}

/// First component above noise level made positive.
fn fix_sign(v: &mut DVector<f64>) {
    if let Some(x) = v.iter().find(|x| x.abs() > 1e-8) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn natural_decomposition(gamma: &OneRDM) -> Result<NaturalDecomposition> {
    let m = gamma.dim();
    let eig = SymmetricEigen::new(gamma.matrix().clone());
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

    let mut occupations = DVector::zeros(m);
    for (k, &i) in order.iter().enumerate() {
        let n = eig.eigenvalues[i];
        if !(-OCCUPATION_CLAMP..=1.0 + OCCUPATION_CLAMP).contains(&n) {
            return Err(Error::InvalidRdm(format!("occupation {n} outside [0, 1]")));
        }
        occupations[k] = n.clamp(0.0, 1.0);
    }

    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut start = 0;
    while start < m {
        let mut end = start + 1;
        while end < m && (occupations[end - 1] - occupations[end]).abs() <= DEGENERACY_TOLERANCE {
            end += 1;
        }
        let block: Vec<DVector<f64>> = order[start..end]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let block = if block.len() > 1 {
            canonical_block(&block)
        } else {
            block
        };
        for mut v in block {
            fix_sign(&mut v);
            columns.push(v);
        }
        start = end;
    }
    Ok(NaturalDecomposition {
        occupations,
        orbitals: DMatrix::from_columns(&columns),
    })
}

pub(crate) fn orthogonality_defect(chi: &DMatrix<f64>) -> f64 {
    let n = chi.ncols();
    (chi.transpose() * chi - DMatrix::<f64>::identity(n, n)).amax()
}

/// `γ = χ diag(n) χᵀ`.
pub fn assemble_onerdm(occupations: &DVector<f64>, orbitals: &DMatrix<f64>) -> Result<OneRDM> {
    let m = occupations.len();
    if orbitals.nrows() != m || orbitals.ncols() != m {
        return Err(Error::DimensionMismatch(format!(
            "{m} occupations with {}x{} orbitals",
            orbitals.nrows(),
            orbitals.ncols()
        )));
    }
    if let Some(n) = occupations.iter().find(|n| !(-1e-12..=1.0 + 1e-12).contains(*n)) {
        return Err(Error::InvalidOccupations(format!("occupation {n} outside [0, 1]")));
    }
    let defect = orthogonality_defect(orbitals);
    if defect > ORTHOGONALITY_TOLERANCE {
        return Err(Error::InvalidOrbitals(format!("orthogonality defect {defect:e}")));
    }
    Ok(OneRDM::from_matrix_unchecked(assemble_unchecked(occupations, orbitals)))
}

pub(crate) fn assemble_unchecked(occupations: &DVector<f64>, orbitals: &DMatrix<f64>) -> DMatrix<f64> {
    let mut scaled = orbitals.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= occupations[j];
    }
    let g = scaled * orbitals.transpose();
    (&g + g.transpose()) * 0.5
}

/// `sqrt(Tr[(γ1 - γ2)^2])`.
pub fn frobenius_distance(a: &OneRDM, b: &OneRDM) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "1RDMs of dimension {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok((a.matrix() - b.matrix()).norm())
}
