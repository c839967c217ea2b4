//! Two-mode Fock space truncated by total photon number.
//!
//! Amplitudes are stored densely, block by block in total photon number
//! `N = n1 + n2`, and inside a block by `m = (n1 - n2)/2` descending, so block
//! `N` is the contiguous slice `[N(N+1)/2, (N+1)(N+2)/2)` and position `p`
//! inside it holds `|N - p, p>`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexAmplitude = Complex64;

/// Magnitudes below this are flushed to zero.
pub const FLUSH_THRESHOLD: f64 = 1e-300;

/// `(j, m)` label of a two-mode number state stored as `(2j, 2m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JmIndex {
    twice_j: u32,
    twice_m: i32,
}

impl JmIndex {
    pub fn new(twice_j: u32, twice_m: i32) -> Result<Self> {
        let valid = twice_m.unsigned_abs() <= twice_j && (twice_j as i64 - twice_m as i64) % 2 == 0;
        if valid {
            Ok(JmIndex { twice_j, twice_m })
        } else {
            Err(Error::InvalidJm { twice_j, twice_m })
        }
    }

    pub fn twice_j(&self) -> u32 {
        self.twice_j
    }

    pub fn twice_m(&self) -> i32 {
        self.twice_m
    }

    pub fn j(&self) -> f64 {
        self.twice_j as f64 / 2.0
    }

    pub fn m(&self) -> f64 {
        self.twice_m as f64 / 2.0
    }
}

/// `j = (n1 + n2)/2`, `m = (n1 - n2)/2`.
pub fn jm_from_counts(n1: usize, n2: usize) -> JmIndex {
    JmIndex {
        twice_j: (n1 + n2) as u32,
        twice_m: n1 as i32 - n2 as i32,
    }
}

/// Inverse of [`jm_from_counts`].
pub fn counts_from_jm(idx: JmIndex) -> Result<(usize, usize)> {
    // Re-validate: the fields are private but this keeps the function total
    // on anything that could be constructed.
    let idx = JmIndex::new(idx.twice_j, idx.twice_m)?;
    let j = idx.twice_j as i64;
    let m = idx.twice_m as i64;
    Ok((((j + m) / 2) as usize, ((j - m) / 2) as usize))
}

/// Number of basis states with `n1 + n2 <= n_cap`.
pub const fn basis_dim(n_cap: usize) -> usize {
    (n_cap + 1) * (n_cap + 2) / 2
}

#[inline]
pub const fn block_offset(total: usize) -> usize {
    total * (total + 1) / 2
}

/// Position of `|n1, n2>` in the dense layout.
#[inline]
pub const fn basis_index(n1: usize, n2: usize) -> usize {
    block_offset(n1 + n2) + n2
}

/// Pure two-mode state on the truncated basis.
///
/// `deficit` is the probability mass that fell outside the basis when the
/// state was prepared (`1 - ||psi||^2` at preparation time); unitary optics
/// carry it along unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeState {
    n_cap: usize,
    amps: Vec<Complex64>,
    deficit: f64,
}

impl TwoModeState {
    pub fn zeros(n_cap: usize) -> Self {
        TwoModeState {
            n_cap,
            amps: vec![Complex64::new(0.0, 0.0); basis_dim(n_cap)],
            deficit: 0.0,
        }
    }

    /// The number state `|n1, n2>` with `n_cap = n1 + n2`.
    pub fn number_state(n1: usize, n2: usize) -> Self {
        Self::number_state_in(n1, n2, n1 + n2).expect("cap equals total")
    }

    pub fn number_state_in(n1: usize, n2: usize, n_cap: usize) -> Result<Self> {
        if n1 + n2 > n_cap {
            return Err(Error::InvalidParameter(format!(
                "|{n1},{n2}> does not fit under n_cap = {n_cap}"
            )));
        }
        let mut s = Self::zeros(n_cap);
        s.amps[basis_index(n1, n2)] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Builds a state from amplitudes in the dense layout. The deficit is set
    /// to `1 - ||psi||^2`, clamped at zero.
    pub fn from_amplitudes(n_cap: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != basis_dim(n_cap) {
            return Err(Error::InvalidParameter(format!(
                "expected {} amplitudes for n_cap = {n_cap}, got {}",
                basis_dim(n_cap),
                amps.len()
            )));
        }
        if let Some(index) = amps.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let mut s = TwoModeState {
            n_cap,
            amps,
            deficit: 0.0,
        };
        s.flush_tiny();
        s.deficit = (1.0 - s.norm_sqr()).max(0.0);
        Ok(s)
    }

    /// Builds a state by evaluating `f(n1, n2)` on every basis state.
    pub fn from_fn(n_cap: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut amps = Vec::with_capacity(basis_dim(n_cap));
        for total in 0..=n_cap {
            for n2 in 0..=total {
                amps.push(f(total - n2, n2));
            }
        }
        Self::from_amplitudes(n_cap, amps)
    }

    pub(crate) fn with_amps_like(&self, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), self.amps.len());
        TwoModeState {
            n_cap: self.n_cap,
            amps,
            deficit: self.deficit,
        }
    }

    pub fn n_cap(&self) -> usize {
        self.n_cap
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn deficit(&self) -> f64 {
        self.deficit
    }

    /// Fails if the recorded truncation deficit exceeds `epsilon`.
    pub fn check_deficit(&self, epsilon: f64) -> Result<()> {
        if self.deficit > epsilon {
            Err(Error::TruncationDeficit {
                deficit: self.deficit,
                epsilon,
            })
        } else {
            Ok(())
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amplitude of `|n1, n2>`; zero outside the basis.
    pub fn amplitude(&self, n1: usize, n2: usize) -> Complex64 {
        if n1 + n2 > self.n_cap {
            Complex64::new(0.0, 0.0)
        } else {
            self.amps[basis_index(n1, n2)]
        }
    }

    /// Amplitudes of the `total`-photon block, ordered by `m` descending.
    pub fn block(&self, total: usize) -> &[Complex64] {
        let start = block_offset(total);
        &self.amps[start..start + total + 1]
    }

    pub fn block_mut(&mut self, total: usize) -> &mut [Complex64] {
        let start = block_offset(total);
        &mut self.amps[start..start + total + 1]
    }

    /// `(n1, n2, amplitude)` over the whole basis in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..=self.n_cap).flat_map(move |total| {
            self.block(total)
                .iter()
                .enumerate()
                .map(move |(p, &z)| (total - p, p, z))
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Returns the state rescaled to unit norm.
    pub fn normalize(&self) -> Result<Self> {
        let norm_sqr = self.norm_sqr();
        if !(norm_sqr > 1e-15) {
            return Err(Error::DegenerateState { norm_sqr });
        }
        let scale = 1.0 / norm_sqr.sqrt();
        let amps = self.amps.iter().map(|z| z * scale).collect();
        Ok(self.with_amps_like(amps))
    }

    /// Mean and second moment of the total photon number.
    pub fn total_photon_moments(&self) -> (f64, f64) {
        let mut mean = 0.0;
        let mut second = 0.0;
        for total in 0..=self.n_cap {
            let p: f64 = self.block(total).iter().map(|z| z.norm_sqr()).sum();
            let n = total as f64;
            mean += p * n;
            second += p * n * n;
        }
        (mean, second)
    }

    /// `a + b` on a shared basis.
    pub fn add(&self, other: &TwoModeState) -> Result<Self> {
        check_same_basis(self, other)?;
        let amps = self.amps.iter().zip(&other.amps).map(|(x, y)| x + y).collect();
        Ok(self.with_amps_like(amps))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        self.with_amps_like(self.amps.iter().map(|z| z * factor).collect())
    }

    pub(crate) fn flush_tiny(&mut self) {
        for z in &mut self.amps {
            if z.re.abs() < FLUSH_THRESHOLD {
                z.re = 0.0;
            }
            if z.im.abs() < FLUSH_THRESHOLD {
                z.im = 0.0;
            }
        }
    }
}

pub(crate) fn check_same_basis(a: &TwoModeState, b: &TwoModeState) -> Result<()> {
    if a.n_cap != b.n_cap {
        Err(Error::BasisMismatch {
            left: a.n_cap,
            right: b.n_cap,
        })
    } else {
        Ok(())
    }
}

/// `<a|b>`.
pub fn inner(a: &TwoModeState, b: &TwoModeState) -> Result<Complex64> {
    check_same_basis(a, b)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn jm_examples() {
        let idx = jm_from_counts(2, 0);
        assert_eq!((idx.twice_j(), idx.twice_m()), (2, 2));
        assert_eq!(jm_from_counts(0, 0), JmIndex::new(0, 0).unwrap());
        let idx = jm_from_counts(3, 1);
        assert_eq!((idx.twice_j(), idx.twice_m()), (4, 2));
        assert_eq!(idx.j(), 2.0);
        assert_eq!(idx.m(), 1.0);
    }

    #[test]
    fn counts_examples() {
        assert_eq!(counts_from_jm(JmIndex::new(2, -2).unwrap()).unwrap(), (0, 2));
        assert_eq!(counts_from_jm(JmIndex::new(0, 0).unwrap()).unwrap(), (0, 0));
        assert_eq!(counts_from_jm(JmIndex::new(3, 1).unwrap()).unwrap(), (2, 1));
    }

    #[test]
    fn invalid_jm_rejected() {
        assert!(matches!(JmIndex::new(2, 1), Err(Error::InvalidJm { .. })));
        assert!(matches!(JmIndex::new(1, 3), Err(Error::InvalidJm { .. })));
        assert!(JmIndex::new(3, -3).is_ok());
    }

    #[test]
    fn round_trip_exhaustive() {
        for n1 in 0..=50 {
            for n2 in 0..=50 {
                assert_eq!(counts_from_jm(jm_from_counts(n1, n2)).unwrap(), (n1, n2));
            }
        }
    }

    #[test]
    fn layout_is_block_then_m_descending() {
        for n_cap in 0..12 {
            assert_eq!(TwoModeState::zeros(n_cap).dim(), (n_cap + 1) * (n_cap + 2) / 2);
        }
        let s = TwoModeState::from_fn(3, |n1, n2| c((10 * n1 + n2) as f64, 0.0)).unwrap();
        let labels: Vec<_> = s.iter().map(|(n1, n2, _)| (n1, n2)).collect();
        assert_eq!(labels[..6], [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(s.block(2), &[c(20.0, 0.0), c(11.0, 0.0), c(2.0, 0.0)]);
        for (n1, n2, z) in s.iter() {
            assert_eq!(z, s.amplitude(n1, n2));
        }
    }

    #[test]
    fn inner_examples() {
        let a = TwoModeState::number_state(1, 0);
        let b = TwoModeState::number_state(0, 1);
        assert_eq!(inner(&a, &b).unwrap(), c(0.0, 0.0));
        assert_eq!(inner(&a, &a).unwrap(), c(1.0, 0.0));
        let wide = TwoModeState::number_state_in(1, 0, 3).unwrap();
        assert!(matches!(inner(&a, &wide), Err(Error::BasisMismatch { .. })));
    }

    #[test]
    fn normalize_examples() {
        let s = TwoModeState::from_fn(2, |n1, n2| c(n1 as f64 + 0.5, n2 as f64)).unwrap();
        let unit = s.normalize().unwrap();
        assert!((unit.norm_sqr() - 1.0).abs() < 1e-12);
        let again = unit.normalize().unwrap();
        for (x, y) in unit.amplitudes().iter().zip(again.amplitudes()) {
            assert!((x - y).norm() < 1e-15);
        }
        let scaled = s.scale(c(3.0, 0.0)).normalize().unwrap();
        for (x, y) in unit.amplitudes().iter().zip(scaled.amplitudes()) {
            assert!((x - y).norm() < 1e-12);
        }
        assert!(matches!(
            TwoModeState::zeros(3).normalize(),
            Err(Error::DegenerateState { .. })
        ));
    }

    #[test]
    fn photon_moments_of_number_state() {
        let s = TwoModeState::number_state(5, 0);
        assert_eq!(s.total_photon_moments(), (5.0, 25.0));
    }

    #[test]
    fn non_finite_rejected_and_tiny_flushed() {
        let mut amps = vec![c(0.0, 0.0); 3];
        amps[1] = c(f64::NAN, 0.0);
        assert!(matches!(
            TwoModeState::from_amplitudes(1, amps),
            Err(Error::NonFinite { index: 1 })
        ));
        let s = TwoModeState::from_amplitudes(1, vec![c(1.0, 1e-310), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(s.amplitude(0, 0), c(1.0, 0.0));
    }

    #[test]
    fn deficit_recorded() {
        let s = TwoModeState::from_amplitudes(0, vec![c(0.6, 0.0)]).unwrap();
        assert!((s.deficit() - 0.64).abs() < 1e-15);
        assert!(s.check_deficit(0.5).is_err());
        assert!(s.check_deficit(0.7).is_ok());
    }
}
