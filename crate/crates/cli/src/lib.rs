//! Command-line front end: `sweep`, `sample`, `qfi-table` and
//! `metric-check`.
//!
//! Settings are layered as defaults, then an optional `--config` file, then
//! flags. Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
//! numerical failures such as an exceeded truncation deficit.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mzi_core::config::{apply_config_text, to_config_text};
use mzi_core::scenarios::{
    metric_check, metric_csv, qfi_table_csv, run_qfi_table, run_sampling, run_sweep, PhiGrid, Scenario, ScenarioConfig,
};
use mzi_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mzi",
    version,
    about = "Phase-estimation sweeps for a Mach-Zehnder interferometer"
)]
struct Cli {
    /// Read settings from a `key = value` file; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output path for the CSV (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    epsilon_trunc: Option<f64>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Write the effective configuration to this path before running.
    #[arg(long, global = true)]
    save_config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Phase sweep with error propagation and Fisher information per point.
    Sweep(ScenarioArgs),
    /// Monte Carlo photon counts at one phase, with optional loss.
    Sample(ScenarioArgs),
    /// Fisher information against error propagation for three probes.
    QfiTable(ScenarioArgs),
    /// Hilbert-space distance rate against F_Q / 4.
    MetricCheck(ScenarioArgs),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[arg(long, value_parser = parse_scenario)]
    scenario: Option<Scenario>,
    /// Photon number of the Fock, twin-Fock or NOON input.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    theta2: Option<f64>,
    /// Squeezing strength.
    #[arg(long)]
    r: Option<f64>,
    /// Squeezing phase.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    /// Coherent phase in the squeezed scenario (default: optimum).
    #[arg(long, allow_hyphen_values = true)]
    f: Option<f64>,
    /// Detector efficiency applied to both modes.
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    eta_a: Option<f64>,
    #[arg(long)]
    eta_b: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Keep only events with the prepared total photon number.
    #[arg(long)]
    post_select: bool,
    #[arg(long, allow_hyphen_values = true)]
    sample_phi: Option<f64>,
    /// Phase grid as `start:stop:steps`.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    phi: Option<PhiGrid>,
    #[arg(long)]
    n_cap: Option<usize>,
    #[arg(long)]
    table_fock_n: Option<usize>,
    #[arg(long)]
    table_noon_n: Option<usize>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_grid(s: &str) -> Result<PhiGrid, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl ScenarioArgs {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),* $(,)?) => {
                $(if let Some(v) = self.$field { cfg.$target = v; })*
            };
        }
        set!(
            scenario => scenario, n => n, alpha => alpha_mag, beta => beta_mag,
            theta1 => theta1, theta2 => theta2, r => r, theta => theta,
            trials => trials, sample_phi => sample_phi, phi => phi,
            table_fock_n => table_fock_n, table_noon_n => table_noon_n,
        );
        if let Some(eta) = self.eta {
            cfg.eta_a = eta;
            cfg.eta_b = eta;
        }
        set!(eta_a => eta_a, eta_b => eta_b);
        if self.f.is_some() {
            cfg.f = self.f;
        }
        if self.n_cap.is_some() {
            cfg.n_cap = self.n_cap;
        }
        if self.post_select {
            cfg.post_select = true;
        }
    }
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| Failure::Usage(format!("cannot write stdout: {e}")))
        }
    }
}

fn effective_config(cli: &Cli, args: &ScenarioArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = ScenarioConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        apply_config_text(&mut cfg, &text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    args.apply(&mut cfg);
    if let Some(eps) = cli.epsilon_trunc {
        cfg.epsilon_trunc = eps;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (args, name) = match &cli.command {
        Command::Sweep(a) => (a, "sweep"),
        Command::Sample(a) => (a, "sample"),
        Command::QfiTable(a) => (a, "qfi-table"),
        Command::MetricCheck(a) => (a, "metric-check"),
    };
    let cfg = effective_config(&cli, args)?;
    if let Some(path) = &cli.save_config {
        fs::write(path, to_config_text(&cfg))
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?;
    }
    let out = cli.out.as_ref();
    match name {
        "sweep" => {
            let table = run_sweep(&cfg)?;
            for note in &table.annotations {
                eprintln!("# {note}");
            }
            write_output(out, &table.to_csv())
        }
        "sample" => {
            let (hist, report) = run_sampling(&cfg)?;
            write_output(out, &hist.to_csv())?;
            let text = report.to_text();
            if out.is_some() {
                print!("{text}");
            } else {
                eprint!("{text}");
            }
            Ok(())
        }
        "qfi-table" => write_output(out, &qfi_table_csv(&run_qfi_table(&cfg)?)),
        _ => write_output(out, &metric_csv(&metric_check(&cfg)?)),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: mzi [--config FILE] [--out FILE] <sweep|sample|qfi-table|metric-check> [OPTIONS]");
            EXIT_USAGE
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            EXIT_NUMERICAL
        }
    }
}
