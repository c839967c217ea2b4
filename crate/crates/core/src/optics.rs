//! SU(2) operator algebra and the interferometer's unitaries.
//!
//! Beam splitters are applied one total-photon block at a time. A mode matrix
//! is split as `e^{i gamma} Rz(a) Ry(b) Rz(c)`; inside the `N`-photon block
//! that is `e^{i gamma N} diag(e^{-i a m'}) d^{N/2}(b) diag(e^{-i c m})`, with
//! the real Wigner matrix `d^j(b) = <j m'| exp(-i b J_y) |j m>`.

use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{basis_index, TwoModeState};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// `J_axis |s>`. Not unitary, so the result is generally unnormalized.
pub fn apply_angular(s: &TwoModeState, axis: Axis) -> TwoModeState {
    let mut out = vec![ZERO; s.dim()];
    for (n1, n2, z) in s.iter() {
        if z == ZERO {
            continue;
        }
        match axis {
            Axis::Z => out[basis_index(n1, n2)] += z * (0.5 * (n1 as f64 - n2 as f64)),
            Axis::X | Axis::Y => {
                // b†a |n1,n2> and a†b |n1,n2>
                let down = if n1 > 0 { ((n1 * (n2 + 1)) as f64).sqrt() } else { 0.0 };
                let up = if n2 > 0 { ((n2 * (n1 + 1)) as f64).sqrt() } else { 0.0 };
                let (c_down, c_up) = match axis {
                    Axis::X => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
                    _ => (Complex64::new(0.0, 0.5), Complex64::new(0.0, -0.5)),
                };
                if n1 > 0 {
                    out[basis_index(n1 - 1, n2 + 1)] += c_down * down * z;
                }
                if n2 > 0 {
                    out[basis_index(n1 + 1, n2 - 1)] += c_up * up * z;
                }
            }
        }
    }
    s.with_amps_like(out)
}

/// `n2 |s>`, the mode-b number operator.
pub fn apply_number_b(s: &TwoModeState) -> TwoModeState {
    s.with_amps_like(s.iter().map(|(_, n2, z)| z * n2 as f64).collect())
}

fn expect_diag(s: &TwoModeState, f: impl Fn(usize, usize) -> f64) -> f64 {
    s.iter().map(|(n1, n2, z)| z.norm_sqr() * f(n1, n2)).sum()
}

/// `<J_axis>`.
pub fn expect_j(s: &TwoModeState, axis: Axis) -> f64 {
    if axis == Axis::Z {
        return expect_diag(s, |n1, n2| 0.5 * (n1 as f64 - n2 as f64));
    }
    let js = apply_angular(s, axis);
    s.amplitudes()
        .iter()
        .zip(js.amplitudes())
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}

/// `<J_axis^2> = ||J_axis s||^2`.
pub fn expect_j2(s: &TwoModeState, axis: Axis) -> f64 {
    if axis == Axis::Z {
        return expect_diag(s, |n1, n2| 0.25 * (n1 as f64 - n2 as f64).powi(2));
    }
    apply_angular(s, axis).norm_sqr()
}

/// Where the interferometer phase is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhaseConvention {
    /// `exp(-i phi J_z)`: amplitude of `|n1,n2>` times `e^{-i m phi}`.
    Relative,
    /// `b† -> b† e^{i phi}`: amplitude times `e^{i phi n2}`.
    ModeB,
}

impl PhaseConvention {
    pub fn label(&self) -> &'static str {
        match self {
            PhaseConvention::Relative => "relative",
            PhaseConvention::ModeB => "mode_b",
        }
    }
}

pub fn phase_shift(s: &TwoModeState, phi: f64, conv: PhaseConvention) -> TwoModeState {
    let amps = s
        .iter()
        .map(|(n1, n2, z)| {
            let angle = match conv {
                PhaseConvention::Relative => -0.5 * (n1 as f64 - n2 as f64) * phi,
                PhaseConvention::ModeB => n2 as f64 * phi,
            };
            z * Complex64::from_polar(1.0, angle)
        })
        .collect();
    s.with_amps_like(amps)
}

/// `d/dphi` of `phase_shift(s0, phi, conv)` expressed through the shifted
/// state itself: `-i J_z s` or `i n2 s`.
pub fn phase_tangent(s_tilde: &TwoModeState, conv: PhaseConvention) -> TwoModeState {
    let amps = s_tilde
        .iter()
        .map(|(n1, n2, z)| match conv {
            PhaseConvention::Relative => z * Complex64::new(0.0, -0.5 * (n1 as f64 - n2 as f64)),
            PhaseConvention::ModeB => z * Complex64::new(0.0, n2 as f64),
        })
        .collect();
    s_tilde.with_amps_like(amps)
}

/// 2x2 mode matrix: `a -> m[0][0] a + m[0][1] b`, `b -> m[1][0] a + m[1][1] b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMatrix(pub [[Complex64; 2]; 2]);

impl ModeMatrix {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        ModeMatrix([[one, ZERO], [ZERO, one]])
    }

    pub fn real(m: [[f64; 2]; 2]) -> Self {
        let c = |x: f64| Complex64::new(x, 0.0);
        ModeMatrix([[c(m[0][0]), c(m[0][1])], [c(m[1][0]), c(m[1][1])]])
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        ModeMatrix([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn mul(&self, other: &ModeMatrix) -> Self {
        let (a, b) = (&self.0, &other.0);
        let mut out = [[ZERO; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        ModeMatrix(out)
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    /// Largest entry of `|M M† - 1|`.
    pub fn unitarity_deviation(&self) -> f64 {
        let p = self.mul(&self.adjoint());
        let id = ModeMatrix::identity();
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((p.0[i][j] - id.0[i][j]).norm());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &ModeMatrix) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((self.0[i][j] - other.0[i][j]).norm());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BeamSplitterSpec {
    /// `a -> (a+b)/sqrt 2`, `b -> (a-b)/sqrt 2`.
    Bs1Symmetric,
    /// 50:50 splitter oriented so that `U† J_z U = J_x`, i.e.
    /// `exp(+i pi/2 J_y)`.
    Bs2Jy,
    /// `exp(i pi/2 J_x)` preceded by the fixed quarter-wave phase
    /// `exp(-i pi/2 J_z)`; its parity pullback maps `|j,m>` to `|j,-m>`.
    Bs2Jx,
    General(ModeMatrix),
}

impl BeamSplitterSpec {
    pub fn inverse(&self) -> Self {
        BeamSplitterSpec::General(mode_matrix_of(self).adjoint())
    }
}

pub fn mode_matrix_of(spec: &BeamSplitterSpec) -> ModeMatrix {
    let h = FRAC_1_SQRT_2;
    match spec {
        BeamSplitterSpec::Bs1Symmetric => ModeMatrix::real([[h, h], [h, -h]]),
        BeamSplitterSpec::Bs2Jy => ModeMatrix::real([[h, -h], [h, h]]),
        BeamSplitterSpec::Bs2Jx => {
            let p = Complex64::from_polar(h, FRAC_PI_4);
            let q = Complex64::from_polar(h, -FRAC_PI_4);
            ModeMatrix([[p, q], [-p, q]])
        }
        BeamSplitterSpec::General(m) => *m,
    }
}

/// `e^{i gamma} Rz(a) Ry(b) Rz(c)` with `Rz(x) = diag(e^{-ix/2}, e^{ix/2})`
/// and `Ry(b)` the spin-1/2 Wigner matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl EulerAngles {
    /// The single-photon block this decomposition describes.
    pub fn single_photon_block(&self) -> ModeMatrix {
        let g = Complex64::from_polar(1.0, self.gamma);
        let (c, s) = ((0.5 * self.beta).cos(), (0.5 * self.beta).sin());
        let e = |x: f64| Complex64::from_polar(1.0, x);
        let (a, d) = (self.alpha, self.delta);
        ModeMatrix([
            [g * e(-0.5 * (a + d)) * c, -g * e(-0.5 * (a - d)) * s],
            [g * e(0.5 * (a - d)) * s, g * e(0.5 * (a + d)) * c],
        ])
    }
}

/// Euler decomposition of the single-photon block of a beam splitter. The
/// block is `M†`: input `|1,0>` maps to `conj(M00)|1,0> + conj(M01)|0,1>`.
pub fn euler_decompose(spec: &BeamSplitterSpec) -> Result<EulerAngles> {
    let m = mode_matrix_of(spec);
    let deviation = m.unitarity_deviation();
    if !(deviation <= 1e-12) {
        return Err(Error::NonUnitary { deviation });
    }
    let block = m.adjoint();
    let gamma = 0.5 * block.det().arg();
    let unphase = Complex64::from_polar(1.0, -gamma);
    let v00 = block.0[0][0] * unphase;
    let v10 = block.0[1][0] * unphase;
    let beta = 2.0 * v10.norm().atan2(v00.norm());
    let tiny = 1e-14;
    let (alpha, delta) = if v10.norm() <= tiny {
        (-2.0 * v00.arg(), 0.0)
    } else if v00.norm() <= tiny {
        (2.0 * v10.arg(), 0.0)
    } else {
        (v10.arg() - v00.arg(), -v00.arg() - v10.arg())
    };
    Ok(EulerAngles {
        gamma,
        alpha,
        beta,
        delta,
    })
}

/// `d^j(theta)` for `j = twice_j / 2`, rows and columns ordered by `m`
/// descending.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerBlock {
    pub twice_j: usize,
    pub theta: f64,
    entries: Vec<f64>,
}

impl WignerBlock {
    pub fn dim(&self) -> usize {
        self.twice_j + 1
    }

    /// Entry at row position `r` (`m' = j - r`) and column position `c`
    /// (`m = j - c`).
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.dim() + c]
    }

    /// `d^j_{m', m}` addressed by doubled magnitudes.
    pub fn element(&self, twice_m_row: i32, twice_m_col: i32) -> f64 {
        let tj = self.twice_j as i32;
        self.at(((tj - twice_m_row) / 2) as usize, ((tj - twice_m_col) / 2) as usize)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.dim())
    }

    /// Largest entry of `|d d^T - 1|`.
    pub fn orthogonality_deviation(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for k in 0..n {
                let dot: f64 = (0..n).map(|c| self.at(i, c) * self.at(k, c)).sum();
                let target = if i == k { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

/// Builds `d^j(theta)` by adding one boson at a time: in Schwinger form the
/// rotation sends `a† -> c a† + s b†`, `b† -> -s a† + c b†` with
/// `(c, s) = (cos theta/2, sin theta/2)`, and each column of block `n` is the
/// rotated creation operator applied to a column of block `n - 1`.
fn build_wigner(twice_j: usize, theta: f64) -> WignerBlock {
    let (c, s) = ((0.5 * theta).cos(), (0.5 * theta).sin());
    // prev[k1 * (n) + n1]: output first-mode count k1, input first-mode count
    // n1, inside block n - 1.
    let mut prev = vec![1.0f64];
    for n in 1..=twice_j {
        let width_prev = n;
        let width = n + 1;
        let mut next = vec![0.0f64; width * width];
        let sq: Vec<f64> = (0..=n).map(|k| (k as f64).sqrt()).collect();
        let get = |k1: usize, n1: usize| prev[k1 * width_prev + n1];
        for n1 in 0..=n {
            let n2 = n - n1;
            if n1 >= n2 {
                // Peel a†: |n1,n2> = a†|n1-1,n2> / sqrt(n1).
                let inv = 1.0 / sq[n1];
                for k1 in 0..=n {
                    let mut v = 0.0;
                    if k1 > 0 {
                        v += c * sq[k1] * get(k1 - 1, n1 - 1);
                    }
                    if k1 < n {
                        v += s * sq[n - k1] * get(k1, n1 - 1);
                    }
                    next[k1 * width + n1] = v * inv;
                }
            } else {
                // Peel b†: |n1,n2> = b†|n1,n2-1> / sqrt(n2).
                let inv = 1.0 / sq[n2];
                for k1 in 0..=n {
                    let mut v = 0.0;
                    if k1 > 0 {
                        v -= s * sq[k1] * get(k1 - 1, n1);
                    }
                    if k1 < n {
                        v += c * sq[n - k1] * get(k1, n1);
                    }
                    next[k1 * width + n1] = v * inv;
                }
            }
        }
        prev = next;
    }
    // Re-index counts -> m-descending positions: position = n - count.
    let n = twice_j;
    let dim = n + 1;
    let mut entries = vec![0.0; dim * dim];
    for k1 in 0..=n {
        for n1 in 0..=n {
            entries[(n - k1) * dim + (n - n1)] = prev[k1 * dim + n1];
        }
    }
    WignerBlock {
        twice_j,
        theta,
        entries,
    }
}

const CACHE_LIMIT: usize = 4096;

type WignerCache = RwLock<HashMap<(usize, u64), Arc<WignerBlock>>>;

fn cache() -> &'static WignerCache {
    static CACHE: OnceLock<WignerCache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Memoized `d^{twice_j/2}(theta)`.
pub fn wigner_d_block(twice_j: usize, theta: f64) -> Arc<WignerBlock> {
    let key = (twice_j, theta.to_bits());
    if let Some(hit) = cache().read().expect("wigner cache poisoned").get(&key) {
        return Arc::clone(hit);
    }
    let block = Arc::new(build_wigner(twice_j, theta));
    let mut guard = cache().write().expect("wigner cache poisoned");
    if guard.len() >= CACHE_LIMIT {
        return block;
    }
    Arc::clone(guard.entry(key).or_insert(block))
}

/// Applies the beam splitter block by block. Norm is preserved; the recorded
/// truncation deficit is carried over.
pub fn beam_splitter(s: &TwoModeState, spec: &BeamSplitterSpec) -> Result<TwoModeState> {
    let e = euler_decompose(spec)?;
    let mut out = s.clone();
    let mut scratch = Vec::new();
    for n in 0..=s.n_cap() {
        let input = s.block(n);
        if input.iter().all(|z| *z == ZERO) {
            continue;
        }
        let d = wigner_d_block(n, e.beta);
        let half = 0.5 * n as f64;
        scratch.clear();
        scratch.extend(input.iter().enumerate().map(|(p, z)| {
            let m = half - p as f64;
            z * Complex64::from_polar(1.0, -e.delta * m)
        }));
        let global = e.gamma * n as f64;
        for (r, (row, o)) in d.rows().zip(out.block_mut(n).iter_mut()).enumerate() {
            let acc: Complex64 = row.iter().zip(&scratch).map(|(w, z)| z * *w).sum();
            let m_out = half - r as f64;
            *o = acc * Complex64::from_polar(1.0, global - e.alpha * m_out);
        }
    }
    out.flush_tiny();
    Ok(out)
}
