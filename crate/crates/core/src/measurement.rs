//! Photon counting at the output ports: exact joint count distributions,
//! binomial loss, Monte Carlo histograms, number-difference moments and
//! parity estimates.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{basis_dim, basis_index, TwoModeState};
use crate::numerics::binomial_pmf;

/// Joint probabilities of `(l1, l2)` on the same triangular layout as
/// [`TwoModeState`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountDistribution {
    n_cap: usize,
    probs: Vec<f64>,
}

impl CountDistribution {
    pub fn from_probs(n_cap: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != basis_dim(n_cap) {
            return Err(Error::InvalidParameter(format!(
                "{} probabilities for n_cap {n_cap}",
                probs.len()
            )));
        }
        if let Some(index) = probs.iter().position(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite { index });
        }
        Ok(CountDistribution { n_cap, probs })
    }

    pub fn n_cap(&self) -> usize {
        self.n_cap
    }

    pub fn prob(&self, l1: usize, l2: usize) -> f64 {
        if l1 + l2 > self.n_cap {
            return 0.0;
        }
        self.probs[basis_index(l1, l2)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..=self.n_cap).flat_map(move |n| {
            let off = basis_index(n, 0);
            (0..=n).map(move |p| (n - p, p, self.probs[off + p]))
        })
    }

    /// The distribution with the two detectors exchanged.
    pub fn swapped(&self) -> Self {
        let mut probs = vec![0.0; self.probs.len()];
        for (l1, l2, p) in self.iter() {
            probs[basis_index(l2, l1)] = p;
        }
        CountDistribution {
            n_cap: self.n_cap,
            probs,
        }
    }
}

/// `|amplitude(l1, l2)|^2` for every basis state.
pub fn photon_distribution(s: &TwoModeState) -> CountDistribution {
    CountDistribution {
        n_cap: s.n_cap(),
        probs: s.amplitudes().iter().map(|z| z.norm_sqr()).collect(),
    }
}

fn check_eta(eta: f64, name: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("{name} = {eta} is outside [0, 1]")));
    }
    Ok(())
}

/// Row `l` holds `Binom(k; l, eta)` for `k = 0..=l`.
fn thinning_table(n_cap: usize, eta: f64) -> Vec<Vec<f64>> {
    (0..=n_cap)
        .map(|l| (0..=l).map(|k| binomial_pmf(k, l, eta)).collect())
        .collect()
}

/// Detector inefficiency as independent binomial thinning of each mode.
pub fn lossy_distribution(d: &CountDistribution, eta_a: f64, eta_b: f64) -> Result<CountDistribution> {
    check_eta(eta_a, "eta_a")?;
    check_eta(eta_b, "eta_b")?;
    if eta_a == 1.0 && eta_b == 1.0 {
        return Ok(d.clone());
    }
    let n_cap = d.n_cap;
    let ta = thinning_table(n_cap, eta_a);
    let tb = thinning_table(n_cap, eta_b);
    let mut after_a = vec![0.0; d.probs.len()];
    for (l1, l2, p) in d.iter() {
        if p == 0.0 {
            continue;
        }
        for (k1, w) in ta[l1].iter().enumerate() {
            after_a[basis_index(k1, l2)] += p * w;
        }
    }
    let mut out = vec![0.0; d.probs.len()];
    for n in 0..=n_cap {
        for l2 in 0..=n {
            let l1 = n - l2;
            let p = after_a[basis_index(l1, l2)];
            if p == 0.0 {
                continue;
            }
            for (k2, w) in tb[l2].iter().enumerate() {
                out[basis_index(l1, k2)] += p * w;
            }
        }
    }
    Ok(CountDistribution { n_cap, probs: out })
}

/// Counts of `(l1, l2)` outcomes over a run of independent trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountHistogram {
    n_cap: usize,
    counts: Vec<u64>,
    trials: u64,
    seed: u64,
    loss: (u64, u64),
}

impl CountHistogram {
    pub fn n_cap(&self) -> usize {
        self.n_cap
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Detector efficiencies `(eta_a, eta_b)` the histogram was drawn with.
    pub fn loss(&self) -> (f64, f64) {
        (f64::from_bits(self.loss.0), f64::from_bits(self.loss.1))
    }

    pub fn count(&self, l1: usize, l2: usize) -> u64 {
        if l1 + l2 > self.n_cap {
            return 0;
        }
        self.counts[basis_index(l1, l2)]
    }

    /// Nonzero outcomes ordered by `(l1 + l2, l1)`.
    pub fn nonzero(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        (0..=self.n_cap)
            .flat_map(move |n| (0..=n).map(move |l1| (l1, n - l1, self.counts[basis_index(l1, n - l1)])))
            .filter(|&(_, _, c)| c > 0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("l1,l2,count\n");
        for (l1, l2, c) in self.nonzero() {
            out.push_str(&format!("{l1},{l2},{c}\n"));
        }
        out
    }

    /// Adds another histogram drawn from the same setup.
    pub fn merge(&mut self, other: &CountHistogram) -> Result<()> {
        if other.n_cap != self.n_cap {
            return Err(Error::BasisMismatch {
                left: self.n_cap,
                right: other.n_cap,
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.trials += other.trials;
        Ok(())
    }
}

/// Inverse-CDF table over outcomes ordered by `(l1 + l2, l1)`.
struct Sampler {
    cdf: Vec<f64>,
    index: Vec<usize>,
    total: f64,
}

impl Sampler {
    fn new(d: &CountDistribution) -> Result<Self> {
        let mut cdf = Vec::new();
        let mut index = Vec::new();
        let mut acc = 0.0;
        for n in 0..=d.n_cap {
            for l1 in 0..=n {
                let i = basis_index(l1, n - l1);
                let p = d.probs[i];
                if p > 0.0 {
                    acc += p;
                    cdf.push(acc);
                    index.push(i);
                }
            }
        }
        if !(acc > 0.0) {
            return Err(Error::DegenerateState { norm_sqr: acc });
        }
        Ok(Sampler { cdf, index, total: acc })
    }

    fn draw(&self, u: f64) -> usize {
        let target = u * self.total;
        let k = self.cdf.partition_point(|&c| c <= target);
        self.index[k.min(self.index.len() - 1)]
    }
}

/// Trials handled by one work unit. Each unit positions the generator at its
/// first trial, so the outcome of trial `t` never depends on how work is split.
const CHUNK: u64 = 1 << 16;

fn uniform(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn draw_range(sampler: &Sampler, seed: u64, start: u64, len: u64, dim: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_word_pos(2 * start as u128);
    let mut counts = vec![0u64; dim];
    for _ in 0..len {
        counts[sampler.draw(uniform(rng.next_u64()))] += 1;
    }
    counts
}

/// Draws trials `[start, start + len)` of the stream defined by `seed`.
/// Histograms of disjoint ranges add up to the histogram of their union.
pub fn sample_range(d: &CountDistribution, seed: u64, start: u64, len: u64) -> Result<CountHistogram> {
    let sampler = Sampler::new(d)?;
    let dim = d.probs.len();
    let chunks: Vec<(u64, u64)> = (0..len.div_ceil(CHUNK))
        .map(|c| (start + c * CHUNK, CHUNK.min(len - c * CHUNK)))
        .collect();
    let counts = chunks
        .par_iter()
        .map(|&(s, l)| draw_range(&sampler, seed, s, l, dim))
        .reduce(
            || vec![0u64; dim],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        );
    Ok(CountHistogram {
        n_cap: d.n_cap,
        counts,
        trials: len,
        seed,
        loss: (1f64.to_bits(), 1f64.to_bits()),
    })
}

/// `trials` independent draws from `d`, reproducible for a given seed.
pub fn sample_counts(d: &CountDistribution, trials: u64, seed: u64) -> Result<CountHistogram> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    sample_range(d, seed, 0, trials)
}

/// Samples after binomial loss and records the efficiencies on the histogram.
pub fn sample_lossy(d: &CountDistribution, eta_a: f64, eta_b: f64, trials: u64, seed: u64) -> Result<CountHistogram> {
    let lossy = lossy_distribution(d, eta_a, eta_b)?;
    let mut h = sample_counts(&lossy, trials, seed)?;
    h.loss = (eta_a.to_bits(), eta_b.to_bits());
    Ok(h)
}

/// Anything that assigns weights to count outcomes.
pub trait CountSource {
    /// `(l1, l2, weight)` for every outcome with nonzero weight.
    fn weighted(&self) -> Vec<(usize, usize, f64)>;
    /// Divisor turning weighted sums into expectations.
    fn normalizer(&self) -> Result<f64>;
}

impl CountSource for CountDistribution {
    fn weighted(&self) -> Vec<(usize, usize, f64)> {
        self.iter().filter(|t| t.2 > 0.0).collect()
    }

    fn normalizer(&self) -> Result<f64> {
        Ok(1.0)
    }
}

impl CountSource for CountHistogram {
    fn weighted(&self) -> Vec<(usize, usize, f64)> {
        self.nonzero().map(|(a, b, c)| (a, b, c as f64)).collect()
    }

    fn normalizer(&self) -> Result<f64> {
        if self.trials == 0 {
            return Err(Error::EmptyHistogram);
        }
        Ok(self.trials as f64)
    }
}

/// First and second moments of `(l1 - l2)/2`.
pub fn jz_moments<S: CountSource>(src: &S) -> Result<(f64, f64)> {
    let norm = src.normalizer()?;
    let (mut m1, mut m2) = (0.0, 0.0);
    for (l1, l2, w) in src.weighted() {
        let m = 0.5 * (l1 as f64 - l2 as f64);
        m1 += w * m;
        m2 += w * m * m;
    }
    Ok((m1 / norm, m2 / norm))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    A,
    B,
}

fn parity_sign(l1: usize, l2: usize, mode: Mode) -> f64 {
    let l = match mode {
        Mode::A => l1,
        Mode::B => l2,
    };
    if l % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `<(-1)^{l_mode}>` under the exact distribution.
pub fn parity_expectation(d: &CountDistribution, mode: Mode) -> f64 {
    d.iter().map(|(l1, l2, p)| p * parity_sign(l1, l2, mode)).sum()
}

/// Exact parity of mode A conditioned on `l1 + l2 = total`.
pub fn conditional_parity(d: &CountDistribution, total: usize) -> Result<f64> {
    if total > d.n_cap {
        return Err(Error::FilterExhausted { total });
    }
    let (mut num, mut den) = (0.0, 0.0);
    for l1 in 0..=total {
        let p = d.prob(l1, total - l1);
        num += p * parity_sign(l1, total - l1, Mode::A);
        den += p;
    }
    if !(den > 0.0) {
        return Err(Error::FilterExhausted { total });
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub kept_fraction: f64,
    pub kept: u64,
}

/// Sample parity of mode A, optionally keeping only events with
/// `l1 + l2 = post_select_total`.
pub fn parity_from_histogram(h: &CountHistogram, post_select_total: Option<usize>) -> Result<ParityEstimate> {
    if h.trials == 0 {
        return Err(Error::EmptyHistogram);
    }
    let (mut kept, mut sum) = (0u64, 0.0f64);
    for (l1, l2, c) in h.nonzero() {
        if post_select_total.is_some_and(|n| l1 + l2 != n) {
            continue;
        }
        kept += c;
        sum += c as f64 * parity_sign(l1, l2, Mode::A);
    }
    if kept == 0 {
        return Err(Error::FilterExhausted {
            total: post_select_total.unwrap_or(0),
        });
    }
    let estimate = sum / kept as f64;
    // (-1)^l squares to one, so the plug-in variance is 1 - mean^2.
    let stderr = (1.0 - estimate * estimate).max(0.0).sqrt() / (kept as f64).sqrt();
    Ok(ParityEstimate {
        estimate,
        stderr,
        kept_fraction: kept as f64 / h.trials as f64,
        kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{beam_splitter, phase_shift, BeamSplitterSpec, PhaseConvention};
    use crate::state_prep::{fock_after_symmetric_bs, noon_state};
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand_core::RngCore;
    use std::f64::consts::PI;

    fn random_state(n_cap: usize, seed: u64) -> TwoModeState {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut u = || uniform(rng.next_u64()) - 0.5;
        TwoModeState::from_fn(n_cap, |_, _| Complex64::new(u(), u()))
            .unwrap()
            .normalize()
            .unwrap()
    }

    fn noon_parity_state(n: usize, phi: f64) -> TwoModeState {
        let s = phase_shift(&noon_state(n).unwrap(), phi, PhaseConvention::Relative);
        beam_splitter(&s, &BeamSplitterSpec::Bs2Jx).unwrap()
    }

    #[test]
    fn distribution_examples() {
        let d = photon_distribution(&noon_state(4).unwrap());
        assert!((d.prob(4, 0) - 0.5).abs() < 1e-15 && (d.prob(0, 4) - 0.5).abs() < 1e-15);
        assert_eq!(photon_distribution(&TwoModeState::number_state(0, 0)).prob(0, 0), 1.0);
        let d = photon_distribution(&fock_after_symmetric_bs(2));
        for (l1, l2, p) in [(2, 0, 0.25), (1, 1, 0.5), (0, 2, 0.25)] {
            assert!((d.prob(l1, l2) - p).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_examples() {
        let d = photon_distribution(&fock_after_symmetric_bs(3));
        assert_eq!(lossy_distribution(&d, 1.0, 1.0).unwrap(), d);
        let z = lossy_distribution(&d, 0.0, 0.0).unwrap();
        assert!((z.prob(0, 0) - 1.0).abs() < 1e-15);
        let one = photon_distribution(&TwoModeState::number_state(1, 0));
        let l = lossy_distribution(&one, 0.9, 1.0).unwrap();
        assert!((l.prob(1, 0) - 0.9).abs() < 1e-15 && (l.prob(0, 0) - 0.1).abs() < 1e-15);
        assert!(lossy_distribution(&d, 1.1, 0.5).is_err());
        assert!(lossy_distribution(&d, 0.5, f64::NAN).is_err());
    }

    #[test]
    fn sampling_examples() {
        let d = photon_distribution(&TwoModeState::number_state(2, 1));
        let h = sample_counts(&d, 1000, 5).unwrap();
        assert_eq!(h.count(2, 1), 1000);
        let d = photon_distribution(&noon_state(2).unwrap());
        let a = sample_counts(&d, 100_000, 42).unwrap();
        assert_eq!(a, sample_counts(&d, 100_000, 42).unwrap());
        let frac = a.count(2, 0) as f64 / 1e5;
        assert!((frac - 0.5).abs() < 4.0 * (0.25f64 / 1e5).sqrt());
        assert!(sample_counts(&d, 0, 1).is_err());
    }

    #[test]
    fn batches_merge_to_the_same_histogram() {
        let d = photon_distribution(&random_state(5, 3));
        let whole = sample_counts(&d, 200_003, 11).unwrap();
        for cuts in [
            vec![0, 200_003],
            vec![0, 1, 65_537, 131_072, 200_003],
            vec![0, 99_999, 200_003],
        ] {
            let mut merged = sample_range(&d, 11, cuts[0], cuts[1] - cuts[0]).unwrap();
            for w in cuts[1..].windows(2) {
                merged.merge(&sample_range(&d, 11, w[0], w[1] - w[0]).unwrap()).unwrap();
            }
            assert_eq!(merged.counts, whole.counts);
            assert_eq!(merged.trials, whole.trials);
        }
    }

    #[test]
    fn csv_layout() {
        let d = photon_distribution(&fock_after_symmetric_bs(2));
        let h = sample_counts(&d, 5000, 9).unwrap();
        let csv = h.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "l1,l2,count");
        let keys: Vec<&str> = lines[1..].iter().map(|l| &l[..3]).collect();
        assert_eq!(keys, vec!["0,2", "1,1", "2,0"]);
    }

    #[test]
    fn moments_examples() {
        let s = phase_shift(&fock_after_symmetric_bs(4), PI / 3.0, PhaseConvention::ModeB);
        let s = beam_splitter(&s, &BeamSplitterSpec::Bs2Jy).unwrap();
        let (mean, _) = jz_moments(&photon_distribution(&s)).unwrap();
        assert!((mean - 1.0).abs() < 1e-12);
        let (mean, _) = jz_moments(&photon_distribution(&noon_state(3).unwrap())).unwrap();
        assert!(mean.abs() < 1e-15);
    }

    #[test]
    fn histogram_moments_within_five_standard_errors() {
        for seed in [1u64, 2, 3] {
            let d = photon_distribution(&random_state(6, 100 + seed));
            let (m1, m2) = jz_moments(&d).unwrap();
            let trials = 1_000_000u64;
            let h = sample_counts(&d, trials, seed).unwrap();
            let (e1, e2) = jz_moments(&h).unwrap();
            let m4: f64 = d
                .iter()
                .map(|(a, b, p)| p * (0.5 * (a as f64 - b as f64)).powi(4))
                .sum();
            let se1 = ((m2 - m1 * m1) / trials as f64).sqrt();
            let se2 = ((m4 - m2 * m2) / trials as f64).sqrt();
            assert!((e1 - m1).abs() < 5.0 * se1, "seed {seed}");
            assert!((e2 - m2).abs() < 5.0 * se2, "seed {seed}");
        }
    }

    #[test]
    fn parity_examples() {
        let vac = photon_distribution(&TwoModeState::number_state(0, 0));
        assert_eq!(parity_expectation(&vac, Mode::A), 1.0);
        let one = photon_distribution(&TwoModeState::number_state(1, 0));
        assert_eq!(parity_expectation(&one, Mode::A), -1.0);
        assert_eq!(parity_expectation(&one, Mode::B), 1.0);
        for k in 0..16 {
            let phi = k as f64 * PI / 15.0;
            let p = parity_expectation(&photon_distribution(&noon_parity_state(4, phi)), Mode::A);
            assert!((p - (4.0 * phi).cos()).abs() < 1e-12);
        }
        let p = parity_expectation(&photon_distribution(&noon_parity_state(4, PI / 8.0)), Mode::A);
        assert!(p.abs() < 1e-12);
    }

    #[test]
    fn histogram_parity_examples() {
        let d = photon_distribution(&noon_parity_state(2, 0.0));
        let h = sample_counts(&d, 10_000, 4).unwrap();
        let e = parity_from_histogram(&h, None).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.stderr, 0.0);
        let e = parity_from_histogram(&h, Some(2)).unwrap();
        assert_eq!(e.kept_fraction, 1.0);

        let d = photon_distribution(&noon_parity_state(4, 0.3));
        let trials = 200_000u64;
        let h = sample_lossy(&d, 0.9, 0.9, trials, 8).unwrap();
        assert_eq!(h.loss(), (0.9, 0.9));
        let e = parity_from_histogram(&h, Some(4)).unwrap();
        let p = 0.9f64.powi(4);
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((e.kept_fraction - p).abs() < 4.0 * se);
        assert!((e.estimate - (1.2f64).cos()).abs() < 5.0 * e.stderr);

        let h = sample_counts(&photon_distribution(&TwoModeState::number_state(1, 0)), 10, 1).unwrap();
        assert!(matches!(
            parity_from_histogram(&h, Some(3)),
            Err(Error::FilterExhausted { total: 3 })
        ));
    }

    #[test]
    fn post_selection_removes_loss_bias_for_definite_n() {
        for n in 1..=6 {
            for &phi in &[0.0, 0.4, 1.3] {
                let d = photon_distribution(&noon_parity_state(n, phi));
                let ideal = parity_expectation(&d, Mode::A);
                for &eta in &[0.5, 0.7, 0.9] {
                    let lossy = lossy_distribution(&d, eta, eta).unwrap();
                    let filtered = conditional_parity(&lossy, n).unwrap();
                    assert!((filtered - ideal).abs() < 1e-12, "n={n} eta={eta}");
                }
            }
        }
    }

    fn arb_state() -> impl Strategy<Value = TwoModeState> {
        (0usize..7, any::<u64>()).prop_map(|(n, seed)| random_state(n, seed))
    }

    proptest! {
        #[test]
        fn distribution_sums_to_norm(s in arb_state()) {
            prop_assert!((photon_distribution(&s).total() - s.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn loss_preserves_probability_and_swap(s in arb_state(), ea in 0.0f64..=1.0, eb in 0.0f64..=1.0) {
            let d = photon_distribution(&s);
            let l = lossy_distribution(&d, ea, eb).unwrap();
            prop_assert!((l.total() - d.total()).abs() < 1e-12);
            let sym = lossy_distribution(&d, ea, ea).unwrap();
            let swapped_first = lossy_distribution(&d.swapped(), ea, ea).unwrap();
            for (x, y) in sym.swapped().probs().iter().zip(swapped_first.probs()) {
                prop_assert!((x - y).abs() < 1e-14);
            }
        }

        #[test]
        fn moments_obey_jensen_and_parity_bounded(s in arb_state()) {
            let d = photon_distribution(&s);
            let (m1, m2) = jz_moments(&d).unwrap();
            prop_assert!(m2 >= m1 * m1 - 1e-12);
            let p = parity_expectation(&d, Mode::A);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&p));
        }
    }
}
