//! Experiment settings: a flat `key = value` file overlaid by flags.
//!
//! Grammar of the file, one entry per line:
//!
//! ```text
//! # comment
//! key = value
//! ```
//!
//! Keys are the long flag names without the leading dashes. Blank lines and
//! lines starting with `#` are ignored, a key may appear once, and unknown
//! keys are rejected. Reals accept fractions such as `1/4`; lists are
//! comma-separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use feller::McConfig;

pub const KEYS: &[&str] = &[
    "model",
    "lambda",
    "seed",
    "samples",
    "confidence",
    "workers",
    "monte-carlo",
    "initials",
    "times",
    "eps",
    "z",
    "window-start",
    "window-end",
    "pairs",
    "horizon",
    "trajectories",
    "t-search",
    "n-trunc",
    "f",
    "out",
    "format",
    "plot",
];

/// Keys that never change output bytes and so stay out of manifests.
const NOT_IN_MANIFEST: &[&str] = &["workers", "out", "plot"];

pub const WORKERS_ENV: &str = "FELLER_WORKERS";

/// Raw settings, validated for known keys only.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut settings = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            let key = key.trim();
            if settings.0.contains_key(key) {
                bail!("line {}: duplicate key `{key}`", i + 1);
            }
            settings.set(key, value.trim()).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(settings)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KEYS.contains(&key) {
            bail!("unknown key `{key}`");
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Entries of `over` replace those of `self`.
    pub fn overlay(mut self, over: Settings) -> Settings {
        self.0.extend(over.0);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    Ctmc,
    Flip,
    Halving,
}

impl fmt::Display for ModelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelName::Ctmc => "ctmc",
            ModelName::Flip => "flip",
            ModelName::Halving => "halving",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Pairs {
    Auto,
    List(Vec<(f64, f64)>),
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: ModelName,
    pub lambda: f64,
    pub seed: u64,
    pub samples: usize,
    pub confidence: f64,
    pub workers: usize,
    pub monte_carlo_only: bool,
    pub initials: Option<Vec<f64>>,
    pub times: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub z: f64,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    pub pairs: Pairs,
    pub horizon: f64,
    pub trajectories: usize,
    pub t_search: f64,
    pub n_trunc: usize,
    pub f: String,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub plot: Option<PathBuf>,
    settings: Settings,
}

/// A real number, optionally written as a fraction `a/b`.
pub fn parse_real(text: &str) -> Result<f64> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse()?, b.trim().parse()?);
            a / b
        }
        None => text.parse()?,
    };
    if !value.is_finite() {
        bail!("`{text}` is not a finite number");
    }
    Ok(value)
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|item| parse_real(item).with_context(|| format!("bad list entry `{}`", item.trim())))
        .collect()
}

fn parse_pairs(text: &str) -> Result<Pairs> {
    if text.trim() == "auto" {
        return Ok(Pairs::Auto);
    }
    let pairs = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (x, t) = item
                .split_once('@')
                .ok_or_else(|| anyhow!("pair `{}` is not of the form x@t", item.trim()))?;
            Ok((parse_real(x)?, parse_real(t)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Pairs::List(pairs))
}

fn parse_bool(text: &str) -> Result<bool> {
    match text {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("`{text}` is not a boolean"),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        bail!("{key} must be positive, got {v}")
    }
}

impl ExperimentConfig {
    /// Resolves settings against defaults; `env_workers` is the value of
    /// [`WORKERS_ENV`], used when no worker count is set.
    pub fn resolve(settings: Settings, env_workers: Option<&str>) -> Result<Self> {
        let s = &settings;
        let field = |key: &str| s.get(key);
        let with = |key: &'static str| move |e: anyhow::Error| e.context(format!("invalid value for {key}"));

        let model = match field("model").unwrap_or("halving") {
            "ctmc" => ModelName::Ctmc,
            "flip" => ModelName::Flip,
            "halving" => ModelName::Halving,
            other => bail!("unknown model `{other}` (expected ctmc, flip or halving)"),
        };
        let real = |key: &'static str, default: f64| -> Result<f64> {
            field(key).map_or(Ok(default), |v| parse_real(v).map_err(with(key)))
        };
        let count = |key: &'static str, default: usize| -> Result<usize> {
            field(key).map_or(Ok(default), |v| {
                v.parse::<usize>().map_err(|e| with(key)(e.into()))
            })
        };
        let list = |key: &'static str| -> Result<Option<Vec<f64>>> {
            field(key).map(|v| parse_list(v).map_err(with(key))).transpose()
        };
        let opt_real = |key: &'static str| -> Result<Option<f64>> {
            field(key).map(|v| parse_real(v).map_err(with(key))).transpose()
        };

        let workers = match field("workers").or(env_workers) {
            Some(v) => v
                .trim()
                .parse::<usize>()
                .map_err(|e| with("workers")(e.into()))?,
            None => std::thread::available_parallelism().map_or(1, usize::from),
        };
        let confidence = real("confidence", feller::montecarlo::DEFAULT_CONFIDENCE)?;
        if !(confidence > 0.0 && confidence < 1.0) {
            bail!("confidence must lie in (0, 1), got {confidence}");
        }
        let horizon = real("horizon", 10.0)?;
        if horizon < 0.0 {
            bail!("horizon must be nonnegative, got {horizon}");
        }
        let samples = count("samples", 10_000)?;
        let trajectories = count("trajectories", 10)?;
        if samples == 0 || trajectories == 0 || workers == 0 {
            bail!("samples, trajectories and workers must be positive");
        }
        let format = match field("format").unwrap_or("csv") {
            "csv" => Format::Csv,
            "json" => Format::Json,
            other => bail!("unknown format `{other}` (expected csv or json)"),
        };
        let seed = field("seed").map_or(Ok(0), |v| v.parse::<u64>().map_err(|e| with("seed")(e.into())))?;

        Ok(ExperimentConfig {
            model,
            lambda: positive("lambda", real("lambda", 1.0)?)?,
            seed,
            samples,
            confidence,
            workers,
            monte_carlo_only: field("monte-carlo").map_or(Ok(false), parse_bool)?,
            initials: list("initials")?,
            times: list("times")?,
            eps: list("eps")?,
            z: real("z", 0.0)?,
            window_start: opt_real("window-start")?,
            window_end: opt_real("window-end")?,
            pairs: field("pairs").map_or(Ok(Pairs::Auto), parse_pairs)?,
            horizon,
            trajectories,
            t_search: positive("t-search", real("t-search", 256.0)?)?,
            n_trunc: count("n-trunc", feller::diagnostics::DEFAULT_B5_TRUNCATION)?,
            f: field("f").unwrap_or("xmin1").to_string(),
            out: field("out").map(PathBuf::from),
            format,
            plot: field("plot").map(PathBuf::from),
            settings,
        })
    }

    pub fn mc(&self) -> McConfig {
        let mc = McConfig::new(self.samples, self.seed)
            .with_confidence(self.confidence)
            .with_workers(self.workers);
        if self.monte_carlo_only {
            mc.monte_carlo_only()
        } else {
            mc
        }
    }

    /// Settings that determine the output, as `key=value` pairs: the
    /// resolved scalars plus every grid key that was given explicitly.
    pub fn manifest(&self) -> Vec<(String, String)> {
        let mut entries = vec![
            ("model".to_string(), self.model.to_string()),
            ("lambda".to_string(), self.lambda.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("samples".to_string(), self.samples.to_string()),
            ("confidence".to_string(), self.confidence.to_string()),
            ("monte-carlo".to_string(), self.monte_carlo_only.to_string()),
            (
                "format".to_string(),
                match self.format {
                    Format::Csv => "csv",
                    Format::Json => "json",
                }
                .to_string(),
            ),
        ];
        for (key, value) in &self.settings.0 {
            let resolved = entries.iter().any(|(k, _)| k == key);
            if !resolved && !NOT_IN_MANIFEST.contains(&key.as_str()) {
                entries.push((key.clone(), value.clone()));
            }
        }
        entries
    }
}
