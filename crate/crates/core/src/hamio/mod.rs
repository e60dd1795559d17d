//! Electronic Hamiltonian data: integral storage, FCIDUMP I/O and the
//! spin-orbital antisymmetrized view used by the CI and functional code.

mod fcidump;
mod spin;

pub use fcidump::{emit_fcidump, parse_fcidump, ParsedFcidump};
pub use spin::{spatial, spin_of, spin_orbital_view, Spin, SpinOrbitalView};

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compound index of an unordered pair, `i >= j` after sorting.
#[inline]
pub(crate) fn pair_index(i: usize, j: usize) -> usize {
    if i >= j {
        i * (i + 1) / 2 + j
    } else {
        j * (j + 1) / 2 + i
    }
}

/// Two-electron integrals `(pq|rs)` in chemists' notation, stored once per
/// 8-fold permutational orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedEri {
    n: usize,
    data: Vec<f64>,
}

impl FoldedEri {
    pub fn zeros(n: usize) -> Self {
        let npair = n * (n + 1) / 2;
        Self {
            n,
            data: vec![0.0; npair * (npair + 1) / 2],
        }
    }

    #[inline]
    pub(crate) fn index(p: usize, q: usize, r: usize, s: usize) -> usize {
        pair_index(pair_index(p, q), pair_index(r, s))
    }

    /// `(pq|rs)` with 0-based indices.
    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[Self::index(p, q, r, s)]
    }

    /// Sets `(pq|rs)` and, through the folding, all of its symmetry images.
    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let idx = Self::index(p, q, r, s);
        self.data[idx] = value;
    }

    pub fn n_orbitals(&self) -> usize {
        self.n
    }

    pub fn n_unique(&self) -> usize {
        self.data.len()
    }

    /// Unique entries in canonical order as 0-based `(p, q, r, s, value)` with
    /// `p >= q`, `r >= s` and `pq >= rs`.
    pub fn iter_unique(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        let n = self.n;
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..=i).map(move |j| (i, j))).collect();
        let mut out = Vec::with_capacity(self.data.len());
        for (a, &(p, q)) in pairs.iter().enumerate() {
            for &(r, s) in pairs.iter().take(a + 1) {
                out.push((p, q, r, s));
            }
        }
        out.into_iter()
            .map(move |(p, q, r, s)| (p, q, r, s, self.get(p, q, r, s)))
    }

    /// Dense `n^4` copy, row-major in `(p, q, r, s)`.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        out[((p * n + q) * n + r) * n + s] = self.get(p, q, r, s);
                    }
                }
            }
        }
        out
    }
}

/// One- and two-electron integrals of a spin-free electronic Hamiltonian
/// in an orthonormal spatial orbital basis (Hartree).
#[derive(Debug, Clone)]
pub struct IntegralSet {
    n_spatial: usize,
    n_electrons: usize,
    ms2: i32,
    core_energy: f64,
    h: DMatrix<f64>,
    w: FoldedEri,
    dense: OnceLock<Vec<f64>>,
}

impl PartialEq for IntegralSet {
    fn eq(&self, other: &Self) -> bool {
        self.n_spatial == other.n_spatial
            && self.n_electrons == other.n_electrons
            && self.ms2 == other.ms2
            && self.core_energy == other.core_energy
            && self.h == other.h
            && self.w == other.w
    }
}

impl IntegralSet {
    pub fn new(n_electrons: usize, ms2: i32, core_energy: f64, h: DMatrix<f64>, w: FoldedEri) -> Result<Self> {
        let d = h.nrows();
        if h.ncols() != d {
            return Err(Error::InvalidIntegrals(format!(
                "one-electron matrix is {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        if w.n_orbitals() != d {
            return Err(Error::InvalidIntegrals(format!(
                "two-electron integrals over {} orbitals, one-electron over {d}",
                w.n_orbitals()
            )));
        }
        if d == 0 {
            return Err(Error::InvalidIntegrals("no orbitals".into()));
        }
        if n_electrons == 0 || n_electrons > 2 * d {
            return Err(Error::InvalidIntegrals(format!(
                "particle number {n_electrons} outside [1, {}]",
                2 * d
            )));
        }
        let na2 = n_electrons as i64 + ms2 as i64;
        if na2 < 0 || na2 % 2 != 0 || ms2.unsigned_abs() as usize > n_electrons {
            return Err(Error::InvalidIntegrals(format!(
                "MS2={ms2} incompatible with NELEC={n_electrons}"
            )));
        }
        let n_alpha = (na2 / 2) as usize;
        let n_beta = n_electrons - n_alpha;
        if n_alpha > d || n_beta > d {
            return Err(Error::InvalidIntegrals(format!(
                "{n_alpha} alpha / {n_beta} beta electrons do not fit in {d} orbitals"
            )));
        }
        let scale = h.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (h[(i, j)] - h[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidIntegrals(format!(
                        "one-electron matrix not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if !core_energy.is_finite() || h.iter().any(|v| !v.is_finite()) || w.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidIntegrals("non-finite integral".into()));
        }
        Ok(Self {
            n_spatial: d,
            n_electrons,
            ms2,
            core_energy,
            h,
            w,
            dense: OnceLock::new(),
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> i32 {
        self.ms2
    }

    pub fn n_alpha(&self) -> usize {
        ((self.n_electrons as i64 + self.ms2 as i64) / 2) as usize
    }

    pub fn n_beta(&self) -> usize {
        self.n_electrons - self.n_alpha()
    }

    pub fn core_energy(&self) -> f64 {
        self.core_energy
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn w(&self) -> &FoldedEri {
        &self.w
    }

    /// `(pq|rs)`, 0-based.
    #[inline]
    pub fn eri(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.w.get(p, q, r, s)
    }

    /// Unfolded `(pq|rs)` array, row-major, built on first use.
    pub fn dense_eri(&self) -> &[f64] {
        self.dense.get_or_init(|| self.w.to_dense())
    }

    /// Whether every two-electron integral is exactly zero.
    pub fn is_noninteracting(&self) -> bool {
        self.w.data.iter().all(|&v| v == 0.0)
    }
}

/// Two-site Hubbard model at half filling: hopping `t`, on-site repulsion `u`.
pub fn hubbard_dimer(t: f64, u: f64) -> IntegralSet {
    let h = DMatrix::from_row_slice(2, 2, &[0.0, -t, -t, 0.0]);
    let mut w = FoldedEri::zeros(2);
    w.set(0, 0, 0, 0, u);
    w.set(1, 1, 1, 1, u);
    IntegralSet::new(2, 0, 0.0, h, w).expect("dimer integrals are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folded_storage_exposes_all_eight_images() {
        let mut w = FoldedEri::zeros(4);
        w.set(3, 1, 2, 0, 0.25);
        let images = [
            (3, 1, 2, 0),
            (1, 3, 2, 0),
            (3, 1, 0, 2),
            (1, 3, 0, 2),
            (2, 0, 3, 1),
            (0, 2, 3, 1),
            (2, 0, 1, 3),
            (0, 2, 1, 3),
        ];
        for (p, q, r, s) in images {
            assert_eq!(w.get(p, q, r, s), 0.25);
        }
        assert_eq!(w.get(3, 2, 1, 0), 0.0);
    }

    #[test]
    fn unique_iteration_covers_storage_once() {
        let w = FoldedEri::zeros(3);
        let idx: Vec<usize> = w
            .iter_unique()
            .map(|(p, q, r, s, _)| FoldedEri::index(p, q, r, s))
            .collect();
        assert_eq!(idx, (0..w.n_unique()).collect::<Vec<_>>());
    }

    #[test]
    fn dimer_layout() {
        let ints = hubbard_dimer(1.0, 2.0);
        assert_eq!(ints.n_spatial(), 2);
        assert_eq!(ints.n_electrons(), 2);
        assert_eq!(ints.h()[(0, 1)], -1.0);
        assert_eq!(ints.eri(0, 0, 0, 0), 2.0);
        assert_eq!(ints.eri(1, 1, 1, 1), 2.0);
        assert_eq!(ints.eri(0, 0, 1, 1), 0.0);
        assert_eq!(ints.eri(0, 1, 0, 1), 0.0);
        assert_eq!(ints.core_energy(), 0.0);
    }

    #[test]
    fn rejects_bad_particle_numbers() {
        let h = DMatrix::zeros(1, 1);
        assert!(IntegralSet::new(0, 0, 0.0, h.clone(), FoldedEri::zeros(1)).is_err());
        assert!(IntegralSet::new(3, 1, 0.0, h.clone(), FoldedEri::zeros(1)).is_err());
        assert!(IntegralSet::new(2, 1, 0.0, h.clone(), FoldedEri::zeros(1)).is_err());
        assert!(IntegralSet::new(1, 1, 0.0, h, FoldedEri::zeros(1)).is_ok());
    }

    #[test]
    fn rejects_asymmetric_h() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.1, 0.0]);
        assert!(IntegralSet::new(2, 0, 0.0, h, FoldedEri::zeros(2)).is_err());
    }
}
