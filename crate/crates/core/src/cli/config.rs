//! Flat key=value config files. One assignment per line, `#` starts a
//! comment, sweep lists are comma separated:
//!
//! ```text
//! n = 20
//! p_direct = 0.9
//! trials = 10000
//! p_sweep = 0.2,0.4,0.6,0.8
//! ```
//!
//! Unset keys keep the defaults of [`ExperimentConfig::default`]; unset
//! sweeps collapse to the single configured point.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rates::ExperimentConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// direct-link retain probabilities swept by cmd_rates
    pub p_sweep: Vec<f64>,
    /// total powers swept by cmd_rates
    pub pt_sweep: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let experiment = ExperimentConfig::default();
        RunConfig {
            p_sweep: vec![experiment.p_direct],
            pt_sweep: vec![experiment.p_t],
            experiment,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{}`", value.trim())))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    if value.trim().is_empty() {
        return Err(Error::config(key, "empty list"));
    }
    value.split(',').map(|item| parse_num(key, item)).collect()
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut p_sweep = None;
    let mut pt_sweep = None;
    let mut seen = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(
                line,
                format!("line {}: expected key = value", idx + 1),
            ));
        };
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::config(key, "duplicate key"));
        }
        match key {
            "n" => cfg.experiment.n = parse_num(key, value)?,
            "k" => cfg.experiment.k = parse_num(key, value)?,
            "p_direct" => cfg.experiment.p_direct = parse_num(key, value)?,
            "p_cross" => cfg.experiment.p_cross = parse_num(key, value)?,
            "p_t" => cfg.experiment.p_t = parse_num(key, value)?,
            "noise" => cfg.experiment.noise = parse_num(key, value)?,
            "trials" => cfg.experiment.trials = parse_num(key, value)?,
            "seed" => cfg.experiment.base_seed = parse_num(key, value)?,
            "p_sweep" => p_sweep = Some(parse_list(key, value)?),
            "pt_sweep" => pt_sweep = Some(parse_list(key, value)?),
            _ => return Err(Error::config(key, "unknown key")),
        }
    }
    cfg.p_sweep = p_sweep.unwrap_or_else(|| vec![cfg.experiment.p_direct]);
    cfg.pt_sweep = pt_sweep.unwrap_or_else(|| vec![cfg.experiment.p_t]);
    validate(&cfg)?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

fn validate(cfg: &RunConfig) -> Result<()> {
    // surface parameter violations under the config key that set them
    if let Err(Error::Parameter { name, reason }) = cfg.experiment.validate() {
        let key = if name == "base_seed" { "seed" } else { name };
        return Err(Error::config(key, reason));
    }
    for &p in &cfg.p_sweep {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::config("p_sweep", format!("probability {p} outside [0, 1]")));
        }
    }
    for &p_t in &cfg.pt_sweep {
        if !(p_t > 0.0 && p_t.is_finite()) {
            return Err(Error::config("pt_sweep", format!("power {p_t} must be positive")));
        }
    }
    Ok(())
}
