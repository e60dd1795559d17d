use super::IntegralSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Alpha,
    Beta,
}

/// Spin-orbital index `P = 2p + s` with `s = 0` for alpha and `s = 1` for beta,
/// so the ordering is `(1a, 1b, 2a, 2b, ...)`.
#[inline]
pub fn spatial(p: usize) -> usize {
    p / 2
}

#[inline]
pub fn spin_of(p: usize) -> Spin {
    if p.is_multiple_of(2) {
        Spin::Alpha
    } else {
        Spin::Beta
    }
}

/// Antisymmetrized physicists'-notation integrals over spin orbitals.
#[derive(Debug, Clone, Copy)]
pub struct SpinOrbitalView<'a> {
    ints: &'a IntegralSet,
}

pub fn spin_orbital_view(ints: &IntegralSet) -> SpinOrbitalView<'_> {
    SpinOrbitalView { ints }
}

impl<'a> SpinOrbitalView<'a> {
    pub fn n_spin_orbitals(&self) -> usize {
        self.ints.n_spin_orbitals()
    }

    pub fn integrals(&self) -> &'a IntegralSet {
        self.ints
    }

    /// One-electron element `h_PQ` (zero between opposite spins).
    #[inline]
    pub fn one_body(&self, p: usize, q: usize) -> f64 {
        if p % 2 != q % 2 {
            0.0
        } else {
            self.ints.h()[(spatial(p), spatial(q))]
        }
    }

    /// `<PQ|RS> = (pr|qs)` with spin deltas.
    #[inline]
    pub fn coulomb(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        if p % 2 == r % 2 && q % 2 == s % 2 {
            self.ints.eri(spatial(p), spatial(r), spatial(q), spatial(s))
        } else {
            0.0
        }
    }

    /// `<PQ||RS> = <PQ|RS> - <PQ|SR>`.
    #[inline]
    pub fn antisym(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.coulomb(p, q, r, s) - self.coulomb(p, q, s, r)
    }
}
