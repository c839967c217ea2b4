//! Input and post-BS1 states: coherent, squeezed vacuum, Fock through a
//! symmetric splitter, NOON and twin-Fock.
//!
//! Single-mode series are truncated at a photon-number cutoff and report the
//! probability they drop. The checked constructors refuse anything whose
//! deficit exceeds `epsilon`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::TwoModeState;
use crate::numerics::{ln_binomial, ln_factorial};

/// Largest cutoff the automatic sizing will try.
pub const MAX_AUTO_CUTOFF: usize = 4000;

/// Number-basis amplitudes of a single-mode state, `amps[n]` for
/// `n = 0..=cutoff`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeAmplitudes {
    pub amps: Vec<Complex64>,
    pub deficit: f64,
}

impl SingleModeAmplitudes {
    fn from_amps(amps: Vec<Complex64>) -> Self {
        let norm: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        SingleModeAmplitudes {
            amps,
            deficit: (1.0 - norm).max(0.0),
        }
    }

    pub fn vacuum() -> Self {
        SingleModeAmplitudes {
            amps: vec![Complex64::new(1.0, 0.0)],
            deficit: 0.0,
        }
    }

    pub fn cutoff(&self) -> usize {
        self.amps.len() - 1
    }

    pub fn get(&self, n: usize) -> Complex64 {
        self.amps.get(n).copied().unwrap_or_default()
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.amps.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum()
    }

    pub fn check(self, epsilon: f64) -> Result<Self> {
        if self.deficit > epsilon {
            Err(Error::TruncationDeficit {
                deficit: self.deficit,
                epsilon,
            })
        } else {
            Ok(self)
        }
    }
}

/// Squeezing parameter `zeta = r e^{i theta}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParams {
    r: f64,
    theta: f64,
}

impl SqueezeParams {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() || !theta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "squeezing r = {r} must be finite and >= 0"
            )));
        }
        Ok(SqueezeParams { r, theta })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// `e^{-|alpha|^2/2} alpha^n / sqrt(n!)` for `n <= cutoff`, without a deficit
/// check.
pub fn coherent_series(alpha: Complex64, cutoff: usize) -> SingleModeAmplitudes {
    let mut amps = vec![Complex64::new(0.0, 0.0); cutoff + 1];
    let mag = alpha.norm();
    if mag == 0.0 {
        amps[0] = Complex64::new(1.0, 0.0);
        return SingleModeAmplitudes { amps, deficit: 0.0 };
    }
    let ln_mag = mag.ln();
    let arg = alpha.arg();
    for (n, z) in amps.iter_mut().enumerate() {
        let ln_abs = -0.5 * mag * mag + n as f64 * ln_mag - 0.5 * ln_factorial(n);
        *z = Complex64::from_polar(ln_abs.exp(), n as f64 * arg);
    }
    SingleModeAmplitudes::from_amps(amps)
}

/// Checked coherent-state expansion.
pub fn coherent_amplitudes(alpha: Complex64, cutoff: usize, epsilon: f64) -> Result<SingleModeAmplitudes> {
    coherent_series(alpha, cutoff).check(epsilon)
}

/// Starting cutoff for a coherent state: `ceil(|alpha|^2 + 10|alpha| + 20)`.
pub fn coherent_cutoff_hint(alpha: Complex64) -> usize {
    let n = alpha.norm_sqr();
    (n + 10.0 * n.sqrt() + 20.0).ceil() as usize
}

/// Squeezed vacuum `S(zeta)|0>` with `S = exp[(zeta* b^2 - zeta b†^2)/2]`:
/// `amps[2k] = (cosh r)^{-1/2} (-e^{i theta} tanh r)^k sqrt((2k)!) / (2^k k!)`,
/// odd amplitudes zero. No deficit check.
pub fn squeezed_vacuum_series(p: SqueezeParams, cutoff: usize) -> SingleModeAmplitudes {
    let mut amps = vec![Complex64::new(0.0, 0.0); cutoff + 1];
    if p.r == 0.0 {
        amps[0] = Complex64::new(1.0, 0.0);
        return SingleModeAmplitudes { amps, deficit: 0.0 };
    }
    let ln_norm = -0.5 * p.r.cosh().ln();
    let ln_tanh = p.r.tanh().ln();
    let phase = p.theta + std::f64::consts::PI;
    for k in 0..=cutoff / 2 {
        let ln_abs =
            ln_norm + k as f64 * (ln_tanh - std::f64::consts::LN_2) + 0.5 * ln_factorial(2 * k) - ln_factorial(k);
        amps[2 * k] = Complex64::from_polar(ln_abs.exp(), k as f64 * phase);
    }
    SingleModeAmplitudes::from_amps(amps)
}

pub fn squeezed_vacuum_amplitudes(p: SqueezeParams, cutoff: usize, epsilon: f64) -> Result<SingleModeAmplitudes> {
    squeezed_vacuum_series(p, cutoff).check(epsilon)
}

/// Starting cutoff for squeezed vacuum: `ceil(40 max(1, r))`, rounded up to
/// even.
pub fn squeezed_cutoff_hint(p: SqueezeParams) -> usize {
    let n = (40.0 * p.r.max(1.0)).ceil() as usize;
    n + n % 2
}

fn grow_until<F>(start: usize, epsilon: f64, step: usize, series: F) -> Result<SingleModeAmplitudes>
where
    F: Fn(usize) -> SingleModeAmplitudes,
{
    let mut cutoff = start;
    loop {
        let s = series(cutoff);
        if s.deficit <= epsilon {
            return Ok(s);
        }
        if cutoff >= MAX_AUTO_CUTOFF {
            return Err(Error::TruncationDeficit {
                deficit: s.deficit,
                epsilon,
            });
        }
        cutoff = (cutoff + step).min(MAX_AUTO_CUTOFF);
    }
}

/// Coherent expansion with a cutoff grown from [`coherent_cutoff_hint`] until
/// the deficit is at most `epsilon`.
pub fn coherent_auto(alpha: Complex64, epsilon: f64) -> Result<SingleModeAmplitudes> {
    grow_until(coherent_cutoff_hint(alpha), epsilon, 8, |c| coherent_series(alpha, c))
}

/// Squeezed-vacuum expansion with a cutoff grown from
/// [`squeezed_cutoff_hint`] until the deficit is at most `epsilon`.
pub fn squeezed_auto(p: SqueezeParams, epsilon: f64) -> Result<SingleModeAmplitudes> {
    grow_until(squeezed_cutoff_hint(p), epsilon, 8, |c| squeezed_vacuum_series(p, c))
}

/// `a ⊗ b` restricted to `n1 + n2 <= n_cap`.
pub fn product_state(
    a: &SingleModeAmplitudes,
    b: &SingleModeAmplitudes,
    n_cap: usize,
    epsilon: f64,
) -> Result<TwoModeState> {
    let s = TwoModeState::from_fn(n_cap, |n1, n2| a.get(n1) * b.get(n2))?;
    s.check_deficit(epsilon)?;
    Ok(s)
}

/// Smallest `n_cap` for which `a ⊗ b` loses at most `epsilon` of its norm
/// and the discarded total-number tail carries at most `epsilon` of
/// `<N^2>`. The second condition keeps variances, and so Fisher information,
/// as accurate as the norm.
pub fn product_cap(a: &SingleModeAmplitudes, b: &SingleModeAmplitudes, epsilon: f64) -> Result<usize> {
    let pa: Vec<f64> = a.amps.iter().map(|z| z.norm_sqr()).collect();
    let pb: Vec<f64> = b.amps.iter().map(|z| z.norm_sqr()).collect();
    let max_total = pa.len() + pb.len() - 2;
    let totals: Vec<f64> = (0..=max_total)
        .map(|total| {
            let lo = total.saturating_sub(pb.len() - 1);
            let hi = total.min(pa.len() - 1);
            (lo..=hi).map(|n1| pa[n1] * pb[total - n1]).sum()
        })
        .collect();
    // tail_m2[c] = sum over totals above c of P(n) n^2, summed from the top.
    let mut tail_m2 = vec![0.0; max_total + 1];
    for c in (0..max_total).rev() {
        let n = (c + 1) as f64;
        tail_m2[c] = tail_m2[c + 1] + totals[c + 1] * n * n;
    }
    let mut kept = 0.0;
    let mut last_deficit = 1.0;
    for (total, p) in totals.iter().enumerate() {
        kept += p;
        last_deficit = 1.0 - kept;
        if last_deficit <= epsilon && tail_m2[total] <= epsilon {
            return Ok(total);
        }
    }
    Err(Error::TruncationDeficit {
        deficit: last_deficit.max(0.0),
        epsilon,
    })
}

/// `(a† + b†)^N / (sqrt 2^N sqrt N!) |0,0>`: amplitude of `|k, N-k>` is
/// `sqrt(C(N,k) / 2^N)`. Basis cap is `N`.
pub fn fock_after_symmetric_bs(n: usize) -> TwoModeState {
    let ln_half = -(n as f64) * std::f64::consts::LN_2;
    let mut s = TwoModeState::zeros(n);
    for (p, z) in s.block_mut(n).iter_mut().enumerate() {
        let k = n - p;
        *z = Complex64::new((0.5 * (ln_binomial(n, k) + ln_half)).exp(), 0.0);
    }
    s
}

/// `(|N,0> + |0,N>)/sqrt 2`.
pub fn noon_state(n: usize) -> Result<TwoModeState> {
    if n == 0 {
        return Err(Error::InvalidParameter("NOON state needs N >= 1".into()));
    }
    let mut s = TwoModeState::zeros(n);
    let w = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let block = s.block_mut(n);
    block[0] = w;
    block[n] = w;
    Ok(s)
}

/// `|N, N>` on a basis capped at `2N`.
pub fn twin_fock(n: usize) -> Result<TwoModeState> {
    if n == 0 {
        return Err(Error::InvalidParameter("twin-Fock input needs N >= 1".into()));
    }
    Ok(TwoModeState::number_state(n, n))
}
