use std::collections::HashMap;

use crate::error::{Error, Result};

/// Default upper bound on the number of determinants.
pub const DEFAULT_DETERMINANT_CAP: usize = 2_000_000;

/// A Slater determinant as alpha and beta occupation bit strings over
/// spatial orbitals (bit `p` set when orbital `p` is occupied).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Determinant {
    pub alpha: u64,
    pub beta: u64,
}

impl Determinant {
    /// Occupation over interleaved spin orbitals: bit `2p` alpha, bit `2p + 1` beta.
    pub fn spin_orbital_bits(&self) -> u128 {
        let mut bits = 0u128;
        for p in 0..64 {
            if self.alpha >> p & 1 == 1 {
                bits |= 1u128 << (2 * p);
            }
            if self.beta >> p & 1 == 1 {
                bits |= 1u128 << (2 * p + 1);
            }
        }
        bits
    }

    pub fn alpha_occupied(&self) -> Vec<usize> {
        bits_to_list(self.alpha)
    }

    pub fn beta_occupied(&self) -> Vec<usize> {
        bits_to_list(self.beta)
    }
}

fn bits_to_list(bits: u64) -> Vec<usize> {
    (0..64).filter(|&p| bits >> p & 1 == 1).collect()
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// All `k`-subsets of `0..n` as bit strings, in lexicographic order of the
/// sorted index lists.
fn combinations(n: usize, k: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(binomial(n, k) as usize);
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().fold(0u64, |b, &i| b | 1 << i));
        // rightmost position that can still advance
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Complete determinant space for fixed alpha/beta electron counts.
#[derive(Debug, Clone)]
pub struct DeterminantBasis {
    d: usize,
    n_alpha: usize,
    n_beta: usize,
    dets: Vec<Determinant>,
    bits: Vec<u128>,
    index: HashMap<u128, usize>,
}

impl PartialEq for DeterminantBasis {
    fn eq(&self, other: &Self) -> bool {
        self.d == other.d && self.n_alpha == other.n_alpha && self.n_beta == other.n_beta
    }
}

/// Enumerates with the default cap.
pub fn enumerate_determinants(d: usize, n_alpha: usize, n_beta: usize) -> Result<DeterminantBasis> {
    enumerate_determinants_capped(d, n_alpha, n_beta, DEFAULT_DETERMINANT_CAP)
}

pub fn enumerate_determinants_capped(d: usize, n_alpha: usize, n_beta: usize, cap: usize) -> Result<DeterminantBasis> {
    if d > 64 {
        return Err(Error::InvalidArgument(format!(
            "{d} spatial orbitals exceed the 64-orbital limit"
        )));
    }
    if n_alpha > d || n_beta > d {
        return Err(Error::InvalidArgument(format!(
            "{n_alpha} alpha / {n_beta} beta electrons do not fit in {d} orbitals"
        )));
    }
    let size = binomial(d, n_alpha) * binomial(d, n_beta);
    if size > cap as u128 {
        return Err(Error::CapExceeded { size, cap });
    }
    let alpha = combinations(d, n_alpha);
    let beta = combinations(d, n_beta);
    let mut dets = Vec::with_capacity(size as usize);
    for &a in &alpha {
        for &b in &beta {
            dets.push(Determinant { alpha: a, beta: b });
        }
    }
    let bits: Vec<u128> = dets.iter().map(Determinant::spin_orbital_bits).collect();
    let index = bits.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    Ok(DeterminantBasis {
        d,
        n_alpha,
        n_beta,
        dets,
        bits,
        index,
    })
}

impl DeterminantBasis {
    pub fn len(&self) -> usize {
        self.dets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dets.is_empty()
    }

    pub fn n_spatial(&self) -> usize {
        self.d
    }

    pub fn n_alpha(&self) -> usize {
        self.n_alpha
    }

    pub fn n_beta(&self) -> usize {
        self.n_beta
    }

    pub fn n_electrons(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    pub fn determinants(&self) -> &[Determinant] {
        &self.dets
    }

    /// Spin-orbital bit strings, parallel to [`Self::determinants`].
    pub fn spin_orbital_bits(&self) -> &[u128] {
        &self.bits
    }

    /// Position of the determinant with the given spin-orbital occupation.
    pub fn position(&self, bits: u128) -> Option<usize> {
        self.index.get(&bits).copied()
    }
}
