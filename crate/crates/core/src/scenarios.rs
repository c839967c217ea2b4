//! The interferometer case studies: state preparation, phase sweep, both
//! uncertainty pipelines side by side, and CSV tables.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimation::{cramer_rao, metric_distance, propagate, qfi_analytic, qfi_numeric, DeltaPhi, Generator};
use crate::fock::TwoModeState;
use crate::measurement::{
    conditional_parity, jz_moments, lossy_distribution, parity_expectation, parity_from_histogram, photon_distribution,
    sample_lossy, CountHistogram, Mode, ParityEstimate,
};
use crate::optics::{beam_splitter, phase_shift, phase_tangent, BeamSplitterSpec, PhaseConvention};
use crate::state_prep::{
    coherent_auto, fock_after_symmetric_bs, noon_state, product_cap, product_state, squeezed_auto, twin_fock,
    SqueezeParams,
};
use crate::DEFAULT_EPSILON_TRUNC;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Coherent,
    Fock,
    TwinFock,
    Squeezed,
    Noon,
    QfiTable,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Coherent => "coherent",
            Scenario::Fock => "fock",
            Scenario::TwinFock => "twin-fock",
            Scenario::Squeezed => "squeezed",
            Scenario::Noon => "noon",
            Scenario::QfiTable => "qfi-table",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "coherent" => Ok(Scenario::Coherent),
            "fock" => Ok(Scenario::Fock),
            "twin-fock" | "twinfock" => Ok(Scenario::TwinFock),
            "squeezed" => Ok(Scenario::Squeezed),
            "noon" => Ok(Scenario::Noon),
            "qfi-table" => Ok(Scenario::QfiTable),
            other => Err(Error::InvalidParameter(format!("unknown scenario '{other}'"))),
        }
    }
}

/// `steps` equally spaced phases from `start` to `stop` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for PhiGrid {
    fn default() -> Self {
        PhiGrid {
            start: 0.0,
            stop: PI,
            steps: 181,
        }
    }
}

impl PhiGrid {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 3 {
            return Err(Error::InvalidParameter(format!(
                "phi grid needs at least 3 points, got {}",
                self.steps
            )));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.stop > self.start) {
            return Err(Error::InvalidParameter("phi grid needs finite start < stop".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.steps - 1) as f64
    }

    pub fn points(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.stop
                } else {
                    self.start + i as f64 * step
                }
            })
            .collect()
    }
}

impl FromStr for PhiGrid {
    type Err = Error;

    /// `start:stop:steps`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("phi grid '{s}' is not start:stop:steps"));
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let grid = PhiGrid {
            start: parts[0].parse().map_err(|_| bad())?,
            stop: parts[1].parse().map_err(|_| bad())?,
            steps: parts[2].parse().map_err(|_| bad())?,
        };
        grid.validate()?;
        Ok(grid)
    }
}

/// Every knob of every scenario. Unused fields are ignored by scenarios that
/// do not need them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub alpha_mag: f64,
    pub beta_mag: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub n: usize,
    pub r: f64,
    pub theta: f64,
    /// Phase of the coherent amplitude in the squeezed scenario; `None` means
    /// the optimum `(pi - theta)/2`.
    pub f: Option<f64>,
    pub eta_a: f64,
    pub eta_b: f64,
    pub trials: u64,
    pub seed: u64,
    pub post_select: bool,
    /// Phase at which `sample` draws counts.
    pub sample_phi: f64,
    pub phi: PhiGrid,
    pub epsilon_trunc: f64,
    /// Fixed basis cap for the coherent and squeezed inputs; sized
    /// automatically when `None`.
    pub n_cap: Option<usize>,
    pub table_fock_n: usize,
    pub table_noon_n: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::Fock,
            alpha_mag: 2.0,
            beta_mag: 2.0,
            theta1: 0.0,
            theta2: 0.0,
            n: 4,
            r: 1.0,
            theta: 0.0,
            f: None,
            eta_a: 1.0,
            eta_b: 1.0,
            trials: 100_000,
            seed: 42,
            post_select: false,
            sample_phi: 0.3,
            phi: PhiGrid::default(),
            epsilon_trunc: DEFAULT_EPSILON_TRUNC,
            n_cap: None,
            table_fock_n: 9,
            table_noon_n: 4,
        }
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite")));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.phi.validate()?;
        if !(self.epsilon_trunc > 0.0 && self.epsilon_trunc <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "epsilon_trunc = {} must lie in (0, 1e-6]",
                self.epsilon_trunc
            )));
        }
        for (name, eta) in [("eta_a", self.eta_a), ("eta_b", self.eta_b)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidParameter(format!("{name} = {eta} is outside [0, 1]")));
            }
        }
        for (name, x) in [("alpha", self.alpha_mag), ("beta", self.beta_mag), ("r", self.r)] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {x} must be finite and nonnegative"
                )));
            }
        }
        check_finite("theta1", self.theta1)?;
        check_finite("theta2", self.theta2)?;
        check_finite("theta", self.theta)?;
        check_finite("sample_phi", self.sample_phi)?;
        if let Some(f) = self.f {
            check_finite("f", f)?;
        }
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.n == 0 || self.table_fock_n == 0 || self.table_noon_n == 0 {
            return Err(Error::InvalidParameter("photon numbers must be at least 1".into()));
        }
        Ok(())
    }

    /// Coherent-amplitude phase used by the squeezed scenario.
    pub fn squeeze_f(&self) -> f64 {
        self.f.unwrap_or(0.5 * (PI - self.theta))
    }
}

/// What is read out at the detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `(l1 - l2)/2`
    NumberDifference,
    /// `(-1)^{l1}`
    ParityA,
}

impl Observable {
    pub fn label(&self) -> &'static str {
        match self {
            Observable::NumberDifference => "mean_jz_half_convention",
            Observable::ParityA => "parity_a",
        }
    }

    fn value(&self, l1: usize, l2: usize) -> f64 {
        match self {
            Observable::NumberDifference => 0.5 * (l1 as f64 - l2 as f64),
            Observable::ParityA => {
                if l1 % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub phi: f64,
    pub mean_o: f64,
    pub second_o: f64,
    pub var_o: f64,
    pub d_mean_dphi: f64,
    pub delta_phi: DeltaPhi,
    pub qfi: f64,
    pub crb: f64,
    /// `None` where no closed form applies.
    pub closed_form_delta_phi: Option<DeltaPhi>,
}

/// The exact header of sweep CSV files.
pub const SWEEP_HEADER: &str =
    "phi,mean_o,second_o,var_o,d_mean_dphi,delta_phi,qfi,crb,closed_form_delta_phi,convention";

/// 17 significant digits; infinities as `inf`.
pub fn fmt_float(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x.is_nan() {
        return "nan".into();
    }
    format!("{x:.16e}")
}

fn fmt_delta(d: DeltaPhi) -> String {
    match d {
        DeltaPhi::Finite(v) => fmt_float(v),
        DeltaPhi::Singular => "inf".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub scenario: Scenario,
    pub convention: PhaseConvention,
    pub observable: Observable,
    pub generator: Generator,
    pub n_cap: usize,
    pub rows: Vec<SweepRow>,
    /// Free-text remarks about the run, one per line.
    pub annotations: Vec<String>,
}

impl SweepTable {
    /// Value of the `convention` column, e.g. `mode_b:mean_jz_half_convention`.
    pub fn convention_label(&self) -> String {
        format!("{}:{}", self.convention.label(), self.observable.label())
    }

    pub fn to_csv(&self) -> String {
        let label = self.convention_label();
        let mut out = String::with_capacity(200 * (self.rows.len() + 1));
        out.push_str(SWEEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let closed = r.closed_form_delta_phi.map(fmt_delta).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_float(r.phi),
                fmt_float(r.mean_o),
                fmt_float(r.second_o),
                fmt_float(r.var_o),
                fmt_float(r.d_mean_dphi),
                fmt_delta(r.delta_phi),
                fmt_float(r.qfi),
                fmt_float(r.crb),
                closed,
                label
            );
        }
        out
    }

    /// Smallest finite propagated uncertainty and the phase where it occurs.
    pub fn delta_phi_min(&self) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.delta_phi.value().map(|d| (r.phi, d)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Closed-form predictions, kept apart from the numerical engine so that they
/// serve as independent checks.
pub mod closed_form {
    use crate::estimation::DeltaPhi;

    fn ratio(num: f64, slope: f64) -> DeltaPhi {
        if slope.abs() < 1e-12 {
            DeltaPhi::Singular
        } else {
            DeltaPhi::Finite(num / slope.abs())
        }
    }

    /// `<J_x>` for `|alpha>|beta>`: `|alpha||beta| cos(phi + theta2 - theta1)`.
    pub fn coherent_mean(alpha: f64, beta: f64, phase: f64) -> f64 {
        alpha * beta * phase.cos()
    }

    /// `sqrt(|alpha|^2 + |beta|^2) / (2 |alpha||beta| |sin(phi + theta2 - theta1)|)`.
    pub fn coherent_delta_phi(alpha: f64, beta: f64, phase: f64) -> DeltaPhi {
        ratio((alpha * alpha + beta * beta).sqrt(), 2.0 * alpha * beta * phase.sin())
    }

    pub fn fock_mean(n: usize, phi: f64) -> f64 {
        n as f64 * phi.cos() / 2.0
    }

    pub fn fock_variance(n: usize, phi: f64) -> f64 {
        n as f64 * phi.sin().powi(2) / 4.0
    }

    /// `1/sqrt N` away from `sin phi = 0`.
    pub fn fock_delta_phi(n: usize, phi: f64) -> DeltaPhi {
        ratio(1.0, (n as f64).sqrt() * phi.sin())
    }

    /// `<J_x> = cos(phi) (|alpha|^2 - sinh^2 r) / 2`.
    pub fn squeezed_mean(alpha: f64, r: f64, phi: f64) -> f64 {
        0.5 * phi.cos() * (alpha * alpha - r.sinh().powi(2))
    }

    /// `Var J_x` for coherent `|alpha| e^{i f}` in mode a and squeezed vacuum
    /// `zeta = r e^{i theta}` in mode b, after the symmetric splitter and a
    /// mode-b phase `phi`.
    pub fn squeezed_variance(alpha: f64, r: f64, theta: f64, f: f64, phi: f64) -> f64 {
        let (s, c) = (r.sinh(), r.cosh());
        let a2 = alpha * alpha;
        let var_x = (a2 + 2.0 * s * s * c * c) / 4.0;
        let var_y = (a2 * (2.0 * s * s + 1.0) + s * s + 2.0 * a2 * s * c * (theta - 2.0 * f).cos()) / 4.0;
        phi.cos().powi(2) * var_x + phi.sin().powi(2) * var_y
    }

    pub fn squeezed_delta_phi(alpha: f64, r: f64, theta: f64, f: f64, phi: f64) -> DeltaPhi {
        let slope = 0.5 * phi.sin() * (alpha * alpha - r.sinh().powi(2));
        ratio(squeezed_variance(alpha, r, theta, f, phi).sqrt(), slope)
    }

    /// The large-amplitude estimate `e^{-r}/|alpha|` at the optimum.
    pub fn squeezed_delta_phi_estimate(alpha: f64, r: f64) -> f64 {
        (-r).exp() / alpha
    }

    pub fn noon_parity(n: usize, phi: f64) -> f64 {
        (n as f64 * phi).cos()
    }

    /// `1/N` away from `sin(N phi) = 0`.
    pub fn noon_delta_phi(n: usize, phi: f64) -> DeltaPhi {
        let slope = n as f64 * (n as f64 * phi).sin();
        ratio((n as f64 * phi).sin().abs(), slope)
    }
}

/// Input state, phase convention, second splitter and readout of one
/// interferometer.
#[derive(Debug, Clone)]
pub struct Pipeline {
    /// State just before the phase shift.
    pub input: TwoModeState,
    pub convention: PhaseConvention,
    pub bs2: BeamSplitterSpec,
    pub observable: Observable,
    pub generator: Generator,
}

/// Observable moments and Fisher information at one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEvaluation {
    pub mean: f64,
    pub second: f64,
    pub slope: f64,
    pub qfi: f64,
}

impl PointEvaluation {
    pub fn variance(&self) -> f64 {
        (self.second - self.mean * self.mean).max(0.0)
    }

    pub fn delta_phi(&self) -> DeltaPhi {
        propagate(self.variance(), self.slope, 1e-9 * self.mean.abs().max(1.0))
    }
}

impl Pipeline {
    /// The state right after the phase shift.
    pub fn shifted(&self, phi: f64) -> TwoModeState {
        phase_shift(&self.input, phi, self.convention)
    }

    pub fn output(&self, phi: f64) -> Result<TwoModeState> {
        beam_splitter(&self.shifted(phi), &self.bs2)
    }

    /// Moments come from the exact count distribution. The slope is exact as
    /// well: the phase tangent is pushed through the splitter and
    /// `dP(l)/dphi = 2 Re(conj(psi_l) t_l)`.
    pub fn evaluate(&self, phi: f64) -> Result<PointEvaluation> {
        let shifted = self.shifted(phi);
        let out = beam_splitter(&shifted, &self.bs2)?;
        let tangent = beam_splitter(&phase_tangent(&shifted, self.convention), &self.bs2)?;
        let dist = photon_distribution(&out);
        let (mean, second) = match self.observable {
            Observable::NumberDifference => jz_moments(&dist)?,
            Observable::ParityA => (parity_expectation(&dist, Mode::A), dist.total()),
        };
        let slope: f64 = out
            .iter()
            .zip(tangent.amplitudes())
            .map(|((l1, l2, z), t)| self.observable.value(l1, l2) * 2.0 * (z.conj() * t).re)
            .sum();
        let qfi = qfi_analytic(&shifted, self.generator)?.f_q;
        Ok(PointEvaluation {
            mean,
            second,
            slope,
            qfi,
        })
    }

    pub fn sweep(&self, grid: &PhiGrid, closed: impl Fn(f64) -> Option<DeltaPhi> + Sync) -> Result<Vec<SweepRow>> {
        grid.validate()?;
        grid.points()
            .into_par_iter()
            .map(|phi| {
                let e = self.evaluate(phi)?;
                Ok(SweepRow {
                    phi,
                    mean_o: e.mean,
                    second_o: e.second,
                    var_o: e.variance(),
                    d_mean_dphi: e.slope,
                    delta_phi: e.delta_phi(),
                    qfi: e.qfi,
                    crb: if e.qfi > 0.0 { 1.0 / e.qfi.sqrt() } else { f64::INFINITY },
                    closed_form_delta_phi: closed(phi),
                })
            })
            .collect()
    }

    fn table(&self, cfg: &ScenarioConfig, closed: impl Fn(f64) -> Option<DeltaPhi> + Sync) -> Result<SweepTable> {
        Ok(SweepTable {
            scenario: cfg.scenario,
            convention: self.convention,
            observable: self.observable,
            generator: self.generator,
            n_cap: self.input.n_cap(),
            rows: self.sweep(&cfg.phi, closed)?,
            annotations: Vec::new(),
        })
    }
}

/// `|alpha e^{i theta1}> |beta e^{i theta2}>`, taken as the state after the
/// first splitter.
pub fn coherent_input(cfg: &ScenarioConfig) -> Result<TwoModeState> {
    let eps = cfg.epsilon_trunc;
    let a = coherent_auto(Complex64::from_polar(cfg.alpha_mag, cfg.theta1), eps)?;
    let b = coherent_auto(Complex64::from_polar(cfg.beta_mag, cfg.theta2), eps)?;
    let cap = match cfg.n_cap {
        Some(c) => c,
        None => product_cap(&a, &b, eps)?,
    };
    product_state(&a, &b, cap, eps)
}

/// Coherent `|alpha| e^{i f}` in mode a, squeezed vacuum in mode b, then the
/// symmetric splitter.
pub fn squeezed_input(cfg: &ScenarioConfig) -> Result<TwoModeState> {
    let eps = cfg.epsilon_trunc;
    let a = coherent_auto(Complex64::from_polar(cfg.alpha_mag, cfg.squeeze_f()), eps)?;
    let b = squeezed_auto(SqueezeParams::new(cfg.r, cfg.theta)?, eps)?;
    let cap = match cfg.n_cap {
        Some(c) => c,
        None => product_cap(&a, &b, eps)?,
    };
    beam_splitter(&product_state(&a, &b, cap, eps)?, &BeamSplitterSpec::Bs1Symmetric)
}

fn number_difference(input: TwoModeState) -> Pipeline {
    Pipeline {
        input,
        convention: PhaseConvention::ModeB,
        bs2: BeamSplitterSpec::Bs2Jy,
        observable: Observable::NumberDifference,
        generator: Generator::Nb,
    }
}

pub fn noon_pipeline(n: usize) -> Result<Pipeline> {
    Ok(Pipeline {
        input: noon_state(n)?,
        convention: PhaseConvention::Relative,
        bs2: BeamSplitterSpec::Bs2Jx,
        observable: Observable::ParityA,
        generator: Generator::Jz,
    })
}

/// The pipeline a configuration describes, without running it.
pub fn pipeline(cfg: &ScenarioConfig) -> Result<Pipeline> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::Coherent => Ok(number_difference(coherent_input(cfg)?)),
        Scenario::Fock => Ok(number_difference(fock_after_symmetric_bs(cfg.n))),
        Scenario::TwinFock => Ok(number_difference(beam_splitter(
            &twin_fock(cfg.n)?,
            &BeamSplitterSpec::Bs1Symmetric,
        )?)),
        Scenario::Squeezed => {
            check_squeezed_regime(cfg)?;
            Ok(number_difference(squeezed_input(cfg)?))
        }
        Scenario::Noon => noon_pipeline(cfg.n),
        Scenario::QfiTable => Err(Error::InvalidParameter(
            "the QFI table is not a single interferometer".into(),
        )),
    }
}

fn with_scenario(cfg: &ScenarioConfig, scenario: Scenario) -> ScenarioConfig {
    ScenarioConfig {
        scenario,
        ..cfg.clone()
    }
}

pub fn run_scenario_coherent(cfg: &ScenarioConfig) -> Result<SweepTable> {
    let cfg = with_scenario(cfg, Scenario::Coherent);
    let (a, b, offset) = (cfg.alpha_mag, cfg.beta_mag, cfg.theta2 - cfg.theta1);
    pipeline(&cfg)?.table(&cfg, |phi| Some(closed_form::coherent_delta_phi(a, b, phi + offset)))
}

pub fn run_scenario_fock(cfg: &ScenarioConfig) -> Result<SweepTable> {
    let cfg = with_scenario(cfg, Scenario::Fock);
    let n = cfg.n;
    pipeline(&cfg)?.table(&cfg, |phi| Some(closed_form::fock_delta_phi(n, phi)))
}

pub fn run_scenario_twin_fock(cfg: &ScenarioConfig) -> Result<SweepTable> {
    let cfg = with_scenario(cfg, Scenario::TwinFock);
    let mut table = pipeline(&cfg)?.table(&cfg, |_| None)?;
    table.annotations.push(
        "first method yields no signal: <J_x> vanishes for a twin-Fock input, so error propagation is singular everywhere"
            .into(),
    );
    Ok(table)
}

fn check_squeezed_regime(cfg: &ScenarioConfig) -> Result<()> {
    let bound = 8.0 * cfg.r.sinh().powi(2);
    if cfg.alpha_mag * cfg.alpha_mag < bound {
        return Err(Error::RegimeViolation(format!(
            "|alpha|^2 = {} is below 8 sinh^2 r = {bound}",
            cfg.alpha_mag * cfg.alpha_mag
        )));
    }
    Ok(())
}

/// Squeezed-scenario figures of merit at `cos phi = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezedOptimum {
    pub delta_phi: f64,
    /// `e^{-r}/|alpha|`
    pub estimate: f64,
    pub relative_gap: f64,
    /// `1/|alpha|`
    pub sql: f64,
    pub closed_form: f64,
}

pub fn squeezed_optimum(cfg: &ScenarioConfig) -> Result<SqueezedOptimum> {
    let cfg = with_scenario(cfg, Scenario::Squeezed);
    let e = pipeline(&cfg)?.evaluate(FRAC_PI_2)?;
    let delta_phi = match e.delta_phi() {
        DeltaPhi::Finite(v) => v,
        DeltaPhi::Singular => f64::INFINITY,
    };
    let estimate = closed_form::squeezed_delta_phi_estimate(cfg.alpha_mag, cfg.r);
    let closed = closed_form::squeezed_delta_phi(cfg.alpha_mag, cfg.r, cfg.theta, cfg.squeeze_f(), FRAC_PI_2);
    Ok(SqueezedOptimum {
        delta_phi,
        estimate,
        relative_gap: (delta_phi - estimate).abs() / estimate,
        sql: 1.0 / cfg.alpha_mag,
        closed_form: closed.value().unwrap_or(f64::INFINITY),
    })
}

pub fn run_scenario_squeezed(cfg: &ScenarioConfig) -> Result<SweepTable> {
    let cfg = with_scenario(cfg, Scenario::Squeezed);
    let (a, r, th, f) = (cfg.alpha_mag, cfg.r, cfg.theta, cfg.squeeze_f());
    let mut table = pipeline(&cfg)?.table(&cfg, |phi| Some(closed_form::squeezed_delta_phi(a, r, th, f, phi)))?;
    let opt = squeezed_optimum(&cfg)?;
    table.annotations.push(format!(
        "at cos(phi) = 0: delta_phi = {}, large-amplitude estimate exp(-r)/|alpha| = {}, relative gap = {}, 1/|alpha| = {}",
        fmt_float(opt.delta_phi),
        fmt_float(opt.estimate),
        fmt_float(opt.relative_gap),
        fmt_float(opt.sql)
    ));
    Ok(table)
}

/// Estimate of a count observable from a histogram, optionally restricted to
/// a fixed total photon number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub kept_fraction: f64,
}

impl From<ParityEstimate> for SampledEstimate {
    fn from(p: ParityEstimate) -> Self {
        SampledEstimate {
            estimate: p.estimate,
            stderr: p.stderr,
            kept_fraction: p.kept_fraction,
        }
    }
}

fn number_difference_estimate(h: &CountHistogram) -> Result<SampledEstimate> {
    let (m1, m2) = jz_moments(h)?;
    let stderr = ((m2 - m1 * m1).max(0.0) / h.trials() as f64).sqrt();
    Ok(SampledEstimate {
        estimate: m1,
        stderr,
        kept_fraction: 1.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingReport {
    pub scenario: Scenario,
    pub observable: Observable,
    pub phi: f64,
    pub trials: u64,
    pub seed: u64,
    pub eta_a: f64,
    pub eta_b: f64,
    /// Exact lossless expectation of the observable.
    pub exact: f64,
    /// Exact expectation under loss, without post-selection.
    pub exact_lossy: f64,
    pub unfiltered: SampledEstimate,
    /// Present when post-selecting on the prepared photon number.
    pub filtered: Option<SampledEstimate>,
    /// Exact parity conditioned on the prepared photon number.
    pub exact_filtered: Option<f64>,
    /// Exact probability that no photon is lost.
    pub expected_kept_fraction: Option<f64>,
}

impl SamplingReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("scenario", self.scenario.name().into());
        line("observable", self.observable.label().into());
        line("phi", fmt_float(self.phi));
        line("trials", self.trials.to_string());
        line("seed", self.seed.to_string());
        line("eta_a", fmt_float(self.eta_a));
        line("eta_b", fmt_float(self.eta_b));
        line("exact", fmt_float(self.exact));
        line("exact_lossy", fmt_float(self.exact_lossy));
        line("estimate", fmt_float(self.unfiltered.estimate));
        line("stderr", fmt_float(self.unfiltered.stderr));
        if let Some(f) = &self.filtered {
            line("filtered_estimate", fmt_float(f.estimate));
            line("filtered_stderr", fmt_float(f.stderr));
            line("kept_fraction", fmt_float(f.kept_fraction));
        }
        if let Some(x) = self.exact_filtered {
            line("exact_filtered", fmt_float(x));
        }
        if let Some(x) = self.expected_kept_fraction {
            line("expected_kept_fraction", fmt_float(x));
        }
        out
    }
}

/// Draws `cfg.trials` lossy count events at `cfg.sample_phi`. Post-selection
/// needs a definite prepared photon number, so it is only offered for the
/// NOON, Fock and twin-Fock inputs, and filtered estimates are parities.
pub fn run_sampling(cfg: &ScenarioConfig) -> Result<(CountHistogram, SamplingReport)> {
    let p = pipeline(cfg)?;
    let prepared_total = match cfg.scenario {
        Scenario::Noon | Scenario::Fock => Some(cfg.n),
        Scenario::TwinFock => Some(2 * cfg.n),
        _ => None,
    };
    if cfg.post_select && prepared_total.is_none() {
        return Err(Error::InvalidParameter(format!(
            "post-selection needs a definite photon number; scenario {} has none",
            cfg.scenario.name()
        )));
    }
    let dist = photon_distribution(&p.output(cfg.sample_phi)?);
    let lossy = lossy_distribution(&dist, cfg.eta_a, cfg.eta_b)?;
    let h = sample_lossy(&dist, cfg.eta_a, cfg.eta_b, cfg.trials, cfg.seed)?;
    let (exact, exact_lossy, unfiltered) = match p.observable {
        Observable::ParityA => (
            parity_expectation(&dist, Mode::A),
            parity_expectation(&lossy, Mode::A),
            parity_from_histogram(&h, None)?.into(),
        ),
        Observable::NumberDifference => (
            jz_moments(&dist)?.0,
            jz_moments(&lossy)?.0,
            number_difference_estimate(&h)?,
        ),
    };
    let (mut filtered, mut exact_filtered, mut expected_kept_fraction) = (None, None, None);
    if cfg.post_select {
        let total = prepared_total.expect("checked above");
        filtered = Some(parity_from_histogram(&h, Some(total))?.into());
        exact_filtered = Some(conditional_parity(&lossy, total)?);
        expected_kept_fraction = Some((0..=total).map(|l1| lossy.prob(l1, total - l1)).sum());
    }
    let report = SamplingReport {
        scenario: cfg.scenario,
        observable: p.observable,
        phi: cfg.sample_phi,
        trials: cfg.trials,
        seed: cfg.seed,
        eta_a: cfg.eta_a,
        eta_b: cfg.eta_b,
        exact,
        exact_lossy,
        unfiltered,
        filtered,
        exact_filtered,
        expected_kept_fraction,
    };
    Ok((h, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoonRun {
    pub table: SweepTable,
    pub sampling: SamplingReport,
}

pub fn run_scenario_noon(cfg: &ScenarioConfig) -> Result<NoonRun> {
    let cfg = with_scenario(cfg, Scenario::Noon);
    let n = cfg.n;
    let table = pipeline(&cfg)?.table(&cfg, |phi| Some(closed_form::noon_delta_phi(n, phi)))?;
    let (_, sampling) = run_sampling(&cfg)?;
    Ok(NoonRun { table, sampling })
}

/// Runs the sweep for `cfg.scenario`.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepTable> {
    match cfg.scenario {
        Scenario::Coherent => run_scenario_coherent(cfg),
        Scenario::Fock => run_scenario_fock(cfg),
        Scenario::TwinFock => run_scenario_twin_fock(cfg),
        Scenario::Squeezed => run_scenario_squeezed(cfg),
        Scenario::Noon => run_scenario_noon(cfg).map(|r| r.table),
        Scenario::QfiTable => Err(Error::InvalidParameter(
            "use the qfi-table command for the comparison table".into(),
        )),
    }
}

/// One line of the Fisher-information comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct QfiRow {
    pub case: &'static str,
    pub size: f64,
    pub phi: f64,
    pub f_q: f64,
    pub f_q_numeric: f64,
    pub delta_phi_min: f64,
    pub delta_phi_propagation: f64,
    pub ratio: f64,
    pub note: &'static str,
}

pub const QFI_HEADER: &str = "case,size,phi,f_q,f_q_numeric,delta_phi_min,delta_phi_propagation,ratio,note";

pub fn qfi_table_csv(rows: &[QfiRow]) -> String {
    let mut out = format!("{QFI_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.case,
            fmt_float(r.size),
            fmt_float(r.phi),
            fmt_float(r.f_q),
            fmt_float(r.f_q_numeric),
            fmt_float(r.delta_phi_min),
            fmt_float(r.delta_phi_propagation),
            fmt_float(r.ratio),
            r.note
        );
    }
    out
}

fn qfi_row(p: &Pipeline, table: &SweepTable, case: &'static str, size: f64, note: &'static str) -> Result<QfiRow> {
    let (phi, propagated) = table.delta_phi_min().ok_or(Error::NoInformation { f_q: 0.0 })?;
    let f_q = qfi_analytic(&p.shifted(phi), p.generator)?.f_q;
    let f_q_numeric = qfi_numeric(|x| Ok(p.shifted(x)), phi, 1e-4)?.f_q;
    let bound = cramer_rao(f_q)?;
    Ok(QfiRow {
        case,
        size,
        phi,
        f_q,
        f_q_numeric,
        delta_phi_min: bound,
        delta_phi_propagation: propagated,
        ratio: propagated / bound,
        note,
    })
}

/// Coherent, Fock and NOON probes: Fisher information, its bound, and the
/// best error-propagation uncertainty on the configured grid.
pub fn run_qfi_table(cfg: &ScenarioConfig) -> Result<Vec<QfiRow>> {
    cfg.validate()?;
    let coherent_cfg = with_scenario(cfg, Scenario::Coherent);
    let fock_cfg = ScenarioConfig {
        n: cfg.table_fock_n,
        ..with_scenario(cfg, Scenario::Fock)
    };
    let noon_cfg = ScenarioConfig {
        n: cfg.table_noon_n,
        ..with_scenario(cfg, Scenario::Noon)
    };
    let coherent = pipeline(&coherent_cfg)?;
    let fock = pipeline(&fock_cfg)?;
    let noon = pipeline(&noon_cfg)?;
    Ok(vec![
        qfi_row(
            &coherent,
            &run_scenario_coherent(&coherent_cfg)?,
            "coherent",
            cfg.beta_mag,
            "number-difference readout sits a factor sqrt 2 above the bound",
        )?,
        qfi_row(
            &fock,
            &run_scenario_fock(&fock_cfg)?,
            "fock",
            cfg.table_fock_n as f64,
            "readout saturates the bound",
        )?,
        qfi_row(
            &noon,
            &noon.table(&noon_cfg, |phi| {
                Some(closed_form::noon_delta_phi(cfg.table_noon_n, phi))
            })?,
            "noon",
            cfg.table_noon_n as f64,
            "parity readout saturates the bound",
        )?,
    ])
}

/// `(dL/dphi)^2` from the Hilbert-space distance of neighbouring states,
/// against `F_Q / 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub family: &'static str,
    pub phi: f64,
    pub dphi: f64,
    pub metric_rate: f64,
    pub f_q_over_4: f64,
    pub relative_error: f64,
}

pub const METRIC_HEADER: &str = "family,phi,dphi,dl_dphi_sq,f_q_over_4,relative_error";

pub fn metric_csv(rows: &[MetricRow]) -> String {
    let mut out = format!("{METRIC_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.family,
            fmt_float(r.phi),
            fmt_float(r.dphi),
            fmt_float(r.metric_rate),
            fmt_float(r.f_q_over_4),
            fmt_float(r.relative_error)
        );
    }
    out
}

fn metric_row(p: &Pipeline, family: &'static str, phi: f64, dphi: f64) -> Result<MetricRow> {
    let d = metric_distance(&p.shifted(phi), &p.shifted(phi + dphi))?;
    let metric_rate = (d / dphi).powi(2);
    let f_q_over_4 = qfi_analytic(&p.shifted(phi), p.generator)?.f_q / 4.0;
    Ok(MetricRow {
        family,
        phi,
        dphi,
        metric_rate,
        f_q_over_4,
        relative_error: (metric_rate - f_q_over_4).abs() / f_q_over_4,
    })
}

/// Metric cross-check on the NOON (`table_noon_n`) and coherent families at
/// `sample_phi`.
pub fn metric_check(cfg: &ScenarioConfig) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    let dphi = 1e-4;
    let noon = noon_pipeline(cfg.table_noon_n)?;
    let coherent = pipeline(&with_scenario(cfg, Scenario::Coherent))?;
    Ok(vec![
        metric_row(&noon, "noon", cfg.sample_phi, dphi)?,
        metric_row(&coherent, "coherent", cfg.sample_phi, dphi)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::basis_index;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::default()
    }

    #[test]
    fn grid_parsing() {
        let g: PhiGrid = "0:3.5:181".parse().unwrap();
        assert_eq!(g.steps, 181);
        assert_eq!(g.points().len(), 181);
        assert_eq!(*g.points().last().unwrap(), 3.5);
        assert!("0:1".parse::<PhiGrid>().is_err());
        assert!("0:1:2".parse::<PhiGrid>().is_err());
        assert!("1:0:5".parse::<PhiGrid>().is_err());
        assert!("a:1:5".parse::<PhiGrid>().is_err());
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        assert!(ScenarioConfig {
            epsilon_trunc: 1e-5,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            epsilon_trunc: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig { eta_a: 1.5, ..cfg() }.validate().is_err());
        assert!(ScenarioConfig { trials: 0, ..cfg() }.validate().is_err());
        assert!(ScenarioConfig { n: 0, ..cfg() }.validate().is_err());
        assert_eq!(cfg().squeeze_f(), PI / 2.0);
        assert_eq!("twin_fock".parse::<Scenario>().unwrap(), Scenario::TwinFock);
    }

    #[test]
    fn coherent_examples() {
        let table = run_scenario_coherent(&cfg()).unwrap();
        let (phi, d) = table.delta_phi_min().unwrap();
        assert!((phi - PI / 2.0).abs() < 1e-12);
        assert!((d - 1.0 / 8f64.sqrt()).abs() < 1e-10);
        assert!((table.rows[0].mean_o - 4.0).abs() < 1e-9);
        for r in &table.rows {
            assert!((r.mean_o - closed_form::coherent_mean(2.0, 2.0, r.phi)).abs() < 1e-9);
            match (r.delta_phi, r.closed_form_delta_phi.unwrap()) {
                (DeltaPhi::Finite(a), DeltaPhi::Finite(b)) => assert!((a - b).abs() < 1e-6 * b.max(1.0)),
                (DeltaPhi::Singular, _) => {}
                (a, b) => panic!("{a:?} vs {b:?} at {}", r.phi),
            }
        }
        let dark = run_scenario_coherent(&ScenarioConfig { beta_mag: 0.0, ..cfg() }).unwrap();
        assert!(dark
            .rows
            .iter()
            .all(|r| r.delta_phi.is_singular() && r.d_mean_dphi == 0.0));
    }

    #[test]
    fn coherent_phase_offsets_shift_the_fringe() {
        let c = ScenarioConfig {
            theta1: 0.4,
            theta2: 0.1,
            ..cfg()
        };
        let t = run_scenario_coherent(&c).unwrap();
        for r in &t.rows {
            assert!((r.mean_o - closed_form::coherent_mean(2.0, 2.0, r.phi - 0.3)).abs() < 1e-9);
        }
    }

    #[test]
    fn fock_examples() {
        let t = run_scenario_fock(&ScenarioConfig {
            n: 4,
            phi: "0:3.141592653589793:7".parse().unwrap(),
            ..cfg()
        })
        .unwrap();
        assert!((t.rows[2].mean_o - 1.0).abs() < 1e-12);
        assert!((t.rows[3].var_o - 1.0).abs() < 1e-12);
        assert!(t.rows[0].delta_phi.is_singular());
        let t = run_scenario_fock(&ScenarioConfig { n: 16, ..cfg() }).unwrap();
        assert!((t.rows[90].delta_phi.value().unwrap() - 0.25).abs() < 1e-8);
        let t = run_scenario_fock(&ScenarioConfig { n: 1, ..cfg() }).unwrap();
        assert!((t.rows[90].delta_phi.value().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn twin_fock_has_no_signal() {
        for n in 1..=4 {
            let t = run_scenario_twin_fock(&ScenarioConfig { n, ..cfg() }).unwrap();
            assert!(t
                .rows
                .iter()
                .all(|r| r.mean_o.abs() <= 1e-12 && r.delta_phi.is_singular()));
            assert!(t.rows.iter().all(|r| r.closed_form_delta_phi.is_none()));
            assert_eq!(t.annotations.len(), 1);
        }
    }

    /// Oracle: expand (a†^2 - b†^2)^N / (2^N N!) with integer binomials.
    #[test]
    fn twin_fock_support_matches_polynomial_expansion() {
        for n in 1..=4usize {
            let s = beam_splitter(&twin_fock(n).unwrap(), &BeamSplitterSpec::Bs1Symmetric).unwrap();
            let fact = |k: usize| -> f64 { (1..=k).map(|x| x as f64).product() };
            let mut expect = vec![0.0; s.dim()];
            for k in 0..=n {
                let coeff = fact(n) / (fact(k) * fact(n - k)) * if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
                let (n1, n2) = (2 * k, 2 * (n - k));
                expect[basis_index(n1, n2)] = coeff * (fact(n1) * fact(n2)).sqrt() / (2f64.powi(n as i32) * fact(n));
            }
            for (n1, n2, z) in s.iter() {
                assert!((z.re - expect[basis_index(n1, n2)]).abs() < 1e-12 && z.im.abs() < 1e-12);
                if (n1 as i64 - n2 as i64) % 2 != 0 {
                    assert_eq!(z.norm(), 0.0);
                }
            }
        }
    }

    #[test]
    fn squeezed_regime_is_enforced() {
        let c = ScenarioConfig {
            scenario: Scenario::Squeezed,
            alpha_mag: 2.0,
            r: 1.0,
            ..cfg()
        };
        assert!(matches!(run_scenario_squeezed(&c), Err(Error::RegimeViolation(_))));
    }

    #[test]
    fn squeezed_mean_below_regime_matches_closed_form() {
        // alpha = 2, r = 1 lies outside the enforced regime, so build the
        // pipeline by hand.
        let c = ScenarioConfig {
            alpha_mag: 2.0,
            r: 1.0,
            ..cfg()
        };
        let p = number_difference(squeezed_input(&c).unwrap());
        let e = p.evaluate(0.0).unwrap();
        assert!((2.0 * e.mean - (4.0 - 1f64.sinh().powi(2))).abs() < 1e-8);
        assert!((2.0 * e.mean - 2.618_90).abs() < 1e-5);
    }

    #[test]
    fn squeezed_without_squeezing_is_coherent_in_one_port() {
        let c = ScenarioConfig {
            alpha_mag: 3.0,
            r: 0.0,
            ..cfg()
        };
        let opt = squeezed_optimum(&c).unwrap();
        assert!((opt.delta_phi - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn squeezed_variance_matches_closed_form_off_optimum() {
        let c = ScenarioConfig {
            alpha_mag: 3.0,
            r: 0.5,
            theta: 0.7,
            f: Some(0.2),
            ..cfg()
        };
        let p = number_difference(squeezed_input(&c).unwrap());
        for &phi in &[0.3, 1.1, 2.0] {
            let e = p.evaluate(phi).unwrap();
            let v = closed_form::squeezed_variance(3.0, 0.5, 0.7, 0.2, phi);
            assert!((e.variance() - v).abs() < 1e-8, "phi={phi} {} {v}", e.variance());
            assert!((e.mean - closed_form::squeezed_mean(3.0, 0.5, phi)).abs() < 1e-8);
        }
    }

    #[test]
    fn noon_examples() {
        for n in [1usize, 4] {
            let run = run_scenario_noon(&ScenarioConfig { n, ..cfg() }).unwrap();
            for r in &run.table.rows {
                assert!((r.mean_o - closed_form::noon_parity(n, r.phi)).abs() < 1e-12);
                if let DeltaPhi::Finite(d) = r.delta_phi {
                    assert!((d - 1.0 / n as f64).abs() < 1e-9);
                }
            }
        }
        let p = noon_pipeline(4).unwrap().evaluate(PI / 8.0).unwrap();
        assert!(p.mean.abs() < 1e-12);
    }

    #[test]
    fn noon_sampling_with_loss() {
        let c = ScenarioConfig {
            scenario: Scenario::Noon,
            eta_a: 0.9,
            eta_b: 0.9,
            post_select: true,
            ..cfg()
        };
        let (h, rep) = run_sampling(&c).unwrap();
        assert_eq!(h.trials(), 100_000);
        let f = rep.filtered.unwrap();
        assert!((rep.expected_kept_fraction.unwrap() - 0.6561).abs() < 1e-12);
        let se = (0.6561f64 * 0.3439 / 1e5).sqrt();
        assert!((f.kept_fraction - 0.6561).abs() < 4.0 * se);
        assert!((f.estimate - (4.0 * 0.3f64).cos()).abs() < 4.0 * f.stderr);
        assert!((rep.exact_filtered.unwrap() - rep.exact).abs() < 1e-12);
        assert_eq!(run_sampling(&c).unwrap().1, rep);
        let bad = ScenarioConfig {
            scenario: Scenario::Coherent,
            post_select: true,
            ..cfg()
        };
        assert!(run_sampling(&bad).is_err());
    }

    #[test]
    fn qfi_table_examples() {
        let rows = run_qfi_table(&cfg()).unwrap();
        assert_eq!(rows.len(), 3);
        let c = &rows[0];
        assert!(
            (c.f_q - 16.0).abs() < 1e-8 && (c.delta_phi_min - 0.25).abs() < 1e-9,
            "{c:?}"
        );
        assert!((c.delta_phi_propagation - 1.0 / 8f64.sqrt()).abs() < 1e-9);
        assert!((c.ratio - 2f64.sqrt()).abs() < 1e-4);
        assert!((rows[1].f_q - 9.0).abs() < 1e-8);
        assert!((rows[1].delta_phi_propagation - 1.0 / 3.0).abs() < 1e-9);
        assert!((rows[2].f_q - 16.0).abs() < 1e-8);
        assert!((rows[2].delta_phi_propagation - 0.25).abs() < 1e-9);
        for r in &rows {
            assert!((r.f_q_numeric - r.f_q).abs() / r.f_q < 1e-5, "{}", r.case);
        }
        assert_eq!(qfi_table_csv(&rows).lines().count(), 4);
    }

    #[test]
    fn metric_check_rows() {
        let rows = metric_check(&cfg()).unwrap();
        for r in &rows {
            assert!(r.relative_error < 1e-5, "{} {}", r.family, r.relative_error);
        }
    }

    #[test]
    fn propagation_never_beats_the_bound() {
        let tables = [
            run_scenario_coherent(&cfg()).unwrap(),
            run_scenario_fock(&ScenarioConfig { n: 9, ..cfg() }).unwrap(),
            run_scenario_noon(&ScenarioConfig { n: 6, ..cfg() }).unwrap().table,
            run_scenario_squeezed(&ScenarioConfig {
                alpha_mag: 4.0,
                r: 1.0,
                ..cfg()
            })
            .unwrap(),
        ];
        for t in &tables {
            for r in &t.rows {
                if let DeltaPhi::Finite(d) = r.delta_phi {
                    assert!(d >= r.crb * (1.0 - 1e-9), "{:?} phi={}", t.scenario, r.phi);
                }
            }
        }
    }

    #[test]
    fn csv_shape() {
        let t = run_scenario_fock(&ScenarioConfig {
            n: 2,
            phi: "0:1:3".parse().unwrap(),
            ..cfg()
        })
        .unwrap();
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 4);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(first.len(), 10);
        assert_eq!(first[5], "inf");
        assert_eq!(first[8], "inf");
        assert_eq!(first[9], "mode_b:mean_jz_half_convention");
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        let twin = run_scenario_twin_fock(&ScenarioConfig {
            n: 1,
            phi: "0:1:3".parse().unwrap(),
            ..cfg()
        })
        .unwrap();
        assert!(twin
            .to_csv()
            .lines()
            .nth(1)
            .unwrap()
            .ends_with(",,mode_b:mean_jz_half_convention"));
    }
}
