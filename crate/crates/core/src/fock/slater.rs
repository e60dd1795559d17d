use nalgebra::DMatrix;
use rayon::prelude::*;

use super::basis::DeterminantBasis;
use crate::error::{Error, Result};
use crate::hamio::{spin_orbital_view, IntegralSet, SpinOrbitalView};

/// `(-1)^(number of occupied spin orbitals below p)`.
#[inline]
pub(crate) fn parity_below(bits: u128, p: usize) -> f64 {
    let mask = if p == 0 { 0 } else { (1u128 << p) - 1 };
    if (bits & mask).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Applies `a_p` to an occupation; `None` if `p` is empty.
#[inline]
pub(crate) fn annihilate(bits: u128, p: usize) -> Option<(u128, f64)> {
    if bits >> p & 1 == 0 {
        None
    } else {
        Some((bits & !(1u128 << p), parity_below(bits, p)))
    }
}

/// Applies `a†_p` to an occupation; `None` if `p` is occupied.
#[inline]
pub(crate) fn create(bits: u128, p: usize) -> Option<(u128, f64)> {
    if bits >> p & 1 == 1 {
        None
    } else {
        Some((bits | 1u128 << p, parity_below(bits, p)))
    }
}

pub(crate) fn occupied(bits: u128) -> impl Iterator<Item = usize> {
    (0..128).filter(move |&p| bits >> p & 1 == 1)
}

fn lowest_two(bits: u128) -> (usize, usize) {
    let a = bits.trailing_zeros() as usize;
    let b = (bits & !(1u128 << a)).trailing_zeros() as usize;
    (a, b)
}

/// Slater–Condon evaluation of `<bra|H|ket>` with selectable parts.
#[derive(Clone, Copy)]
pub(crate) struct SlaterCondon<'a> {
    view: SpinOrbitalView<'a>,
    one_body: bool,
    two_body: bool,
    core: f64,
}

impl<'a> SlaterCondon<'a> {
    pub(crate) fn full(ints: &'a IntegralSet) -> Self {
        Self {
            view: spin_orbital_view(ints),
            one_body: true,
            two_body: true,
            core: ints.core_energy(),
        }
    }

    pub(crate) fn interaction_only(ints: &'a IntegralSet) -> Self {
        Self {
            view: spin_orbital_view(ints),
            one_body: false,
            two_body: true,
            core: 0.0,
        }
    }

    pub(crate) fn element(&self, bra: u128, ket: u128) -> f64 {
        let diff = bra ^ ket;
        match diff.count_ones() {
            0 => self.diagonal(ket),
            2 => self.single(bra, ket),
            4 => self.double(bra, ket),
            _ => 0.0,
        }
    }

    fn diagonal(&self, det: u128) -> f64 {
        let occ: Vec<usize> = occupied(det).collect();
        let mut e = self.core;
        if self.one_body {
            e += occ.iter().map(|&p| self.view.one_body(p, p)).sum::<f64>();
        }
        if self.two_body {
            let mut two = 0.0;
            for (k, &p) in occ.iter().enumerate() {
                for &q in &occ[k + 1..] {
                    two += self.view.antisym(p, q, p, q);
                }
            }
            e += two;
        }
        e
    }

    fn single(&self, bra: u128, ket: u128) -> f64 {
        let q = (ket & !bra).trailing_zeros() as usize;
        let p = (bra & !ket).trailing_zeros() as usize;
        let (mid, s1) = annihilate(ket, q).expect("hole occupied in ket");
        let (_, s2) = create(mid, p).expect("particle empty in ket");
        let mut v = 0.0;
        if self.one_body {
            v += self.view.one_body(p, q);
        }
        if self.two_body {
            v += occupied(mid).map(|r| self.view.antisym(p, r, q, r)).sum::<f64>();
        }
        s1 * s2 * v
    }

    fn double(&self, bra: u128, ket: u128) -> f64 {
        if !self.two_body {
            return 0.0;
        }
        let (q1, q2) = lowest_two(ket & !bra);
        let (p1, p2) = lowest_two(bra & !ket);
        let (b, s1) = annihilate(ket, q1).expect("hole");
        let (b, s2) = annihilate(b, q2).expect("hole");
        let (b, s3) = create(b, p2).expect("particle");
        let (_, s4) = create(b, p1).expect("particle");
        s1 * s2 * s3 * s4 * self.view.antisym(p1, p2, q1, q2)
    }
}

pub(crate) fn check_compatible(ints: &IntegralSet, basis: &DeterminantBasis) -> Result<()> {
    if basis.n_spatial() != ints.n_spatial() {
        return Err(Error::DimensionMismatch(format!(
            "basis over {} orbitals, integrals over {}",
            basis.n_spatial(),
            ints.n_spatial()
        )));
    }
    if basis.n_electrons() != ints.n_electrons() {
        return Err(Error::DimensionMismatch(format!(
            "basis holds {} electrons, integrals declare {}",
            basis.n_electrons(),
            ints.n_electrons()
        )));
    }
    Ok(())
}

/// Dense many-electron Hamiltonian `<D_I|h + W|D_J> + core·δ_IJ` over `basis`.
///
/// The lower triangle is computed and mirrored, so the result is exactly
/// symmetric.
pub fn hamiltonian_matrix(ints: &IntegralSet, basis: &DeterminantBasis) -> Result<DMatrix<f64>> {
    check_compatible(ints, basis)?;
    let sc = SlaterCondon::full(ints);
    let bits = basis.spin_orbital_bits();
    let n = bits.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| sc.element(bits[i], bits[j])).collect())
        .collect();
    let mut h = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    Ok(h)
}
