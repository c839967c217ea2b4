//! Phase uncertainty: error propagation over a phase sweep, the pure-state
//! quantum Fisher information and its Cramer-Rao bound, and the
//! Hilbert-space distance between neighbouring states.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::{check_same_basis, inner, TwoModeState};

/// `<O>(phi)` and `<O^2>(phi)` sampled on a uniform ascending grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableCurve {
    phi_grid: Vec<f64>,
    mean: Vec<f64>,
    second: Vec<f64>,
}

impl ObservableCurve {
    pub fn new(phi_grid: Vec<f64>, mean: Vec<f64>, second: Vec<f64>) -> Result<Self> {
        if mean.len() != phi_grid.len() || second.len() != phi_grid.len() {
            return Err(Error::InvalidParameter("curve columns differ in length".into()));
        }
        if let Some(i) = (0..mean.len()).find(|&i| second[i] < mean[i] * mean[i] - 1e-10) {
            return Err(Error::InvalidParameter(format!(
                "second moment below mean squared at index {i}"
            )));
        }
        if phi_grid.len() >= 2 {
            let step = phi_grid[1] - phi_grid[0];
            let uniform = step > 0.0
                && phi_grid
                    .windows(2)
                    .all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step.max(w[1].abs()));
            if !uniform {
                return Err(Error::NonUniformGrid);
            }
        }
        Ok(ObservableCurve { phi_grid, mean, second })
    }

    pub fn len(&self) -> usize {
        self.phi_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi_grid.is_empty()
    }

    pub fn phi_grid(&self) -> &[f64] {
        &self.phi_grid
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn second(&self) -> &[f64] {
        &self.second
    }
}

/// Outcome of error propagation. `Singular` marks a stationary point of the
/// mean, where the propagated uncertainty diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaPhi {
    Finite(f64),
    Singular,
}

impl DeltaPhi {
    pub fn value(&self) -> Option<f64> {
        match self {
            DeltaPhi::Finite(v) => Some(*v),
            DeltaPhi::Singular => None,
        }
    }

    pub fn is_singular(&self) -> bool {
        matches!(self, DeltaPhi::Singular)
    }
}

/// `sqrt(var) / |slope|`, or `Singular` when `|slope| < threshold`.
pub fn propagate(variance: f64, slope: f64, threshold: f64) -> DeltaPhi {
    if !(slope.abs() >= threshold) {
        return DeltaPhi::Singular;
    }
    DeltaPhi::Finite(variance.max(0.0).sqrt() / slope.abs())
}

/// Error propagation at an interior grid point with a central-difference
/// slope.
pub fn delta_phi_error_propagation(curve: &ObservableCurve, at_index: usize) -> Result<DeltaPhi> {
    let len = curve.len();
    if at_index == 0 || at_index + 1 >= len {
        return Err(Error::IndexOutOfRange { index: at_index, len });
    }
    let step = curve.phi_grid[1] - curve.phi_grid[0];
    let slope = (curve.mean[at_index + 1] - curve.mean[at_index - 1]) / (2.0 * step);
    let mean = curve.mean[at_index];
    let var = (curve.second[at_index] - mean * mean).max(0.0);
    Ok(propagate(var, slope, 1e-9 * mean.abs().max(1.0) / step))
}

/// Generator of the phase shift whose variance sets the Fisher information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generator {
    /// `(n1 - n2)/2`
    Jz,
    /// `n2`
    Nb,
}

impl Generator {
    pub fn label(&self) -> &'static str {
        match self {
            Generator::Jz => "jz",
            Generator::Nb => "nb",
        }
    }

    fn eigenvalue(&self, n1: usize, n2: usize) -> f64 {
        match self {
            Generator::Jz => 0.5 * (n1 as f64 - n2 as f64),
            Generator::Nb => n2 as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FisherMethod {
    AnalyticVariance,
    NumericDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherReport {
    pub f_q: f64,
    /// `1/sqrt(f_q)`; infinite when `f_q = 0`.
    pub delta_phi_min: f64,
    pub method: FisherMethod,
    /// The generator for analytic reports; numeric reports differentiate the
    /// family directly.
    pub generator: Option<Generator>,
}

impl FisherReport {
    fn new(f_q: f64, method: FisherMethod, generator: Option<Generator>) -> Self {
        let f_q = f_q.max(0.0);
        FisherReport {
            f_q,
            delta_phi_min: 1.0 / f_q.sqrt(),
            method,
            generator,
        }
    }
}

/// Mean and variance of a diagonal generator, normalized by the state norm.
pub fn generator_moments(s: &TwoModeState, generator: Generator) -> Result<(f64, f64)> {
    let norm = s.norm_sqr();
    if !(norm > 1e-15) {
        return Err(Error::DegenerateState { norm_sqr: norm });
    }
    let (mut m1, mut m2) = (0.0, 0.0);
    for (n1, n2, z) in s.iter() {
        let p = z.norm_sqr();
        let g = generator.eigenvalue(n1, n2);
        m1 += p * g;
        m2 += p * g * g;
    }
    let mean = m1 / norm;
    Ok((mean, (m2 / norm - mean * mean).max(0.0)))
}

/// `F_Q = 4 Var(G)` on the state just after the phase shift.
pub fn qfi_analytic(s_tilde: &TwoModeState, generator: Generator) -> Result<FisherReport> {
    let (_, var) = generator_moments(s_tilde, generator)?;
    Ok(FisherReport::new(
        4.0 * var,
        FisherMethod::AnalyticVariance,
        Some(generator),
    ))
}

/// `F_Q = 4 (<psi'|psi'> - |<psi'|psi>|^2)` with a central-difference
/// `psi'`.
pub fn qfi_numeric<F>(family: F, phi: f64, h: f64) -> Result<FisherReport>
where
    F: Fn(f64) -> Result<TwoModeState>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step h = {h} must be positive")));
    }
    let centre = family(phi)?;
    let plus = family(phi + h)?;
    let minus = family(phi - h)?;
    check_same_basis(&centre, &plus)?;
    check_same_basis(&centre, &minus)?;
    let inv = 1.0 / (2.0 * h);
    let amps: Vec<Complex64> = plus
        .amplitudes()
        .iter()
        .zip(minus.amplitudes())
        .map(|(p, m)| (p - m) * inv)
        .collect();
    let dpsi = TwoModeState::from_amplitudes(centre.n_cap(), amps)?;
    let overlap = inner(&dpsi, &centre)?;
    let f_q = 4.0 * (dpsi.norm_sqr() - overlap.norm_sqr());
    Ok(FisherReport::new(f_q, FisherMethod::NumericDerivative, None))
}

/// Quantum Cramer-Rao bound `1/sqrt(F_Q)`.
pub fn cramer_rao(f_q: f64) -> Result<f64> {
    if !(f_q > 0.0) {
        return Err(Error::NoInformation { f_q });
    }
    Ok(1.0 / f_q.sqrt())
}

/// `sqrt(1 - |<a|b>|^2)`, evaluated as the norm of the part of `b`
/// orthogonal to `a` so that nearby states keep their digits.
pub fn metric_distance(a: &TwoModeState, b: &TwoModeState) -> Result<f64> {
    let overlap = inner(a, b)?;
    let residual: f64 = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| (y - overlap * x).norm_sqr())
        .sum();
    Ok(residual.sqrt().min(1.0))
}

/// `(1/sqrt N, 1/N)`.
pub fn reference_limits(n_total: f64) -> Result<(f64, f64)> {
    if !(n_total > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "photon number {n_total} must be positive"
        )));
    }
    Ok((1.0 / n_total.sqrt(), 1.0 / n_total))
}

/// `delta_phi_min * 2 Delta(J_z)`, which is one for every state with phase
/// information.
pub fn uncertainty_product(s_tilde: &TwoModeState) -> Result<f64> {
    let report = qfi_analytic(s_tilde, Generator::Jz)?;
    let (_, var) = generator_moments(s_tilde, Generator::Jz)?;
    Ok(cramer_rao(report.f_q)? * 2.0 * var.sqrt())
}
