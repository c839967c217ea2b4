//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored; unknown keys are errors. Floats
//! are written with Rust's shortest round-trip formatting, so saving a
//! configuration and loading it again reproduces it bit for bit.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scenarios::{PhiGrid, ScenarioConfig};

/// Keys accepted in configuration files.
pub const KEYS: &[&str] = &[
    "scenario",
    "alpha",
    "beta",
    "theta1",
    "theta2",
    "n",
    "r",
    "theta",
    "f",
    "eta_a",
    "eta_b",
    "trials",
    "seed",
    "post_select",
    "sample_phi",
    "phi",
    "epsilon_trunc",
    "n_cap",
    "table_fock_n",
    "table_noon_n",
];

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("line {line}: cannot parse {key} = '{value}'")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidParameter(format!(
            "line {line}: {key} expects true or false, got '{value}'"
        ))),
    }
}

/// Applies every assignment in `text` on top of `cfg`.
pub fn apply_config_text(cfg: &mut ScenarioConfig, text: &str) -> Result<()> {
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::InvalidParameter(format!("line {line}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "scenario" => cfg.scenario = value.parse().map_err(|e: Error| prefix(line, e))?,
            "alpha" => cfg.alpha_mag = parse(line, key, value)?,
            "beta" => cfg.beta_mag = parse(line, key, value)?,
            "theta1" => cfg.theta1 = parse(line, key, value)?,
            "theta2" => cfg.theta2 = parse(line, key, value)?,
            "n" => cfg.n = parse(line, key, value)?,
            "r" => cfg.r = parse(line, key, value)?,
            "theta" => cfg.theta = parse(line, key, value)?,
            "f" => {
                cfg.f = if value == "optimal" {
                    None
                } else {
                    Some(parse(line, key, value)?)
                }
            }
            "eta_a" => cfg.eta_a = parse(line, key, value)?,
            "eta_b" => cfg.eta_b = parse(line, key, value)?,
            "trials" => cfg.trials = parse(line, key, value)?,
            "seed" => cfg.seed = parse(line, key, value)?,
            "post_select" => cfg.post_select = parse_bool(line, key, value)?,
            "sample_phi" => cfg.sample_phi = parse(line, key, value)?,
            "phi" => cfg.phi = value.parse::<PhiGrid>().map_err(|e| prefix(line, e))?,
            "epsilon_trunc" => cfg.epsilon_trunc = parse(line, key, value)?,
            "n_cap" => {
                cfg.n_cap = if value == "auto" {
                    None
                } else {
                    Some(parse(line, key, value)?)
                }
            }
            "table_fock_n" => cfg.table_fock_n = parse(line, key, value)?,
            "table_noon_n" => cfg.table_noon_n = parse(line, key, value)?,
            other => return Err(Error::InvalidParameter(format!("line {line}: unknown key '{other}'"))),
        }
    }
    Ok(())
}

fn prefix(line: usize, e: Error) -> Error {
    match e {
        Error::InvalidParameter(msg) => Error::InvalidParameter(format!("line {line}: {msg}")),
        other => other,
    }
}

/// Parses a file onto the defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let mut cfg = ScenarioConfig::default();
    apply_config_text(&mut cfg, text)?;
    Ok(cfg)
}

/// Writes every key, so the result does not depend on the defaults of the
/// reader.
pub fn to_config_text(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("scenario", cfg.scenario.name().into());
    kv("alpha", format!("{:?}", cfg.alpha_mag));
    kv("beta", format!("{:?}", cfg.beta_mag));
    kv("theta1", format!("{:?}", cfg.theta1));
    kv("theta2", format!("{:?}", cfg.theta2));
    kv("n", cfg.n.to_string());
    kv("r", format!("{:?}", cfg.r));
    kv("theta", format!("{:?}", cfg.theta));
    kv("f", cfg.f.map_or("optimal".into(), |f| format!("{f:?}")));
    kv("eta_a", format!("{:?}", cfg.eta_a));
    kv("eta_b", format!("{:?}", cfg.eta_b));
    kv("trials", cfg.trials.to_string());
    kv("seed", cfg.seed.to_string());
    kv("post_select", cfg.post_select.to_string());
    kv("sample_phi", format!("{:?}", cfg.sample_phi));
    kv(
        "phi",
        format!("{:?}:{:?}:{}", cfg.phi.start, cfg.phi.stop, cfg.phi.steps),
    );
    kv("epsilon_trunc", format!("{:?}", cfg.epsilon_trunc));
    kv("n_cap", cfg.n_cap.map_or("auto".into(), |c| c.to_string()));
    kv("table_fock_n", cfg.table_fock_n.to_string());
    kv("table_noon_n", cfg.table_noon_n.to_string());
    out
}
