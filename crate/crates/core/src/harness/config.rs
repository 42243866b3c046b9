//! Experiment configuration: a versioned JSON file, per-experiment
//! defaults, and command-line overrides applied last.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    All,
    VerifyLbSc,
    VerifyLbSmooth,
    RateFit,
    LemmaB3,
    Stochastic,
    RestartDemo,
    Polybound,
}

impl Experiment {
    /// Every concrete experiment, in the order `all` runs them.
    pub const CONCRETE: [Experiment; 7] = [
        Experiment::VerifyLbSc,
        Experiment::VerifyLbSmooth,
        Experiment::RateFit,
        Experiment::LemmaB3,
        Experiment::Stochastic,
        Experiment::RestartDemo,
        Experiment::Polybound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::All => "all",
            Experiment::VerifyLbSc => "verify-lb-sc",
            Experiment::VerifyLbSmooth => "verify-lb-smooth",
            Experiment::RateFit => "rate-fit",
            Experiment::LemmaB3 => "lemma-b3",
            Experiment::Stochastic => "stochastic",
            Experiment::RestartDemo => "restart-demo",
            Experiment::Polybound => "polybound",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        std::iter::once(Experiment::All)
            .chain(Experiment::CONCRETE)
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// The JSON document. Everything but the version is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub config_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    /// Smoothness constant for the experiments that use only `L`.
    #[serde(default, rename = "L", skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    /// Components of the finite-sum split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    /// Curvatures in the rate-fit sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eta: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        if file.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config_version {} is not supported (expected {CONFIG_VERSION})",
                file.config_version
            )));
        }
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Values given on the command line; they win over the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub kappa_list: Option<Vec<f64>>,
    pub k_list: Option<Vec<usize>>,
    pub eps: Option<f64>,
    pub seed: Option<u64>,
    pub output_path: Option<PathBuf>,
}

/// A fully resolved configuration for one concrete experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub kappa_list: Vec<f64>,
    pub k_list: Vec<usize>,
    pub eps: f64,
    pub d: usize,
    #[serde(rename = "R")]
    pub r: f64,
    /// `None` picks a grid from the residual degree.
    pub n_grid: Option<usize>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    #[serde(rename = "L")]
    pub l: f64,
    pub m: usize,
    pub replicates: usize,
    pub n_eta: usize,
}

pub const DEFAULT_SEED: u64 = 20_240_417;

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let mut cfg = ExperimentConfig {
            experiment,
            kappa_list: vec![1e2, 1e3, 1e4],
            k_list: (0..=60).collect(),
            eps: 1e-6,
            d: 1,
            r: 1.0,
            n_grid: None,
            seed: DEFAULT_SEED,
            output_path: None,
            l: 1.0,
            m: 5,
            replicates: 100_000,
            n_eta: 65,
        };
        match experiment {
            Experiment::LemmaB3 => cfg.k_list = (0..=20).collect(),
            Experiment::Stochastic => {
                cfg.d = 4;
                cfg.k_list = vec![1, 2, 5, 10];
            }
            Experiment::RestartDemo => {
                cfg.kappa_list = vec![25.0, 100.0, 400.0];
                cfg.eps = 1e-8;
            }
            Experiment::Polybound => {
                cfg.kappa_list = vec![1.5, 2.0, 4.0, 10.0, 25.0, 100.0];
                cfg.k_list = (1..=20).collect();
            }
            _ => {}
        }
        cfg
    }

    /// Defaults, then the file, then the overrides.
    pub fn resolve(
        experiment: Experiment,
        file: Option<&ConfigFile>,
        over: &Overrides,
    ) -> Result<Self> {
        if experiment == Experiment::All {
            return Err(Error::Config(
                "resolve a concrete experiment, not \"all\"".into(),
            ));
        }
        let mut cfg = Self::defaults(experiment);
        if let Some(f) = file {
            macro_rules! take {
                ($($field:ident),*) => {$(
                    if let Some(v) = &f.$field {
                        cfg.$field = v.clone();
                    }
                )*};
            }
            take!(kappa_list, k_list, eps, d, r, seed, l, m, replicates, n_eta);
            if f.n_grid.is_some() {
                cfg.n_grid = f.n_grid;
            }
            if f.output_path.is_some() {
                cfg.output_path = f.output_path.clone();
            }
        }
        if let Some(v) = &over.kappa_list {
            cfg.kappa_list = v.clone();
        }
        if let Some(v) = &over.k_list {
            cfg.k_list = v.clone();
        }
        if let Some(v) = over.eps {
            cfg.eps = v;
        }
        if let Some(v) = over.seed {
            cfg.seed = v;
        }
        if over.output_path.is_some() {
            cfg.output_path = over.output_path.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.kappa_list.is_empty()
            || self
                .kappa_list
                .iter()
                .any(|k| !(k.is_finite() && *k >= 1.0))
        {
            return bad(format!(
                "kappa_list must be non-empty with entries >= 1: {:?}",
                self.kappa_list
            ));
        }
        if self.k_list.is_empty() {
            return bad("k_list must be non-empty".into());
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return bad(format!("eps must be positive, got {}", self.eps));
        }
        if !(self.r.is_finite() && self.r != 0.0) {
            return bad(format!("R must be finite and nonzero, got {}", self.r));
        }
        if !(self.l.is_finite() && self.l > 0.0) {
            return bad(format!("L must be positive, got {}", self.l));
        }
        if self.d == 0 || self.m == 0 || self.n_eta < 2 || self.replicates < 2 {
            return bad("d and m must be >= 1, n_eta and replicates >= 2".into());
        }
        if self.n_grid.is_some_and(|n| n < 2) {
            return bad("n_grid must be >= 2".into());
        }
        match self.experiment {
            Experiment::RateFit | Experiment::RestartDemo
                if self.kappa_list.iter().any(|&k| k <= 1.0) =>
            {
                bad(format!("{} needs every kappa > 1", self.experiment))
            }
            Experiment::RateFit if !spans_two_decades(&self.kappa_list) => {
                bad("rate-fit needs at least three kappa values spanning two decades".into())
            }
            Experiment::Polybound if self.kappa_list.iter().any(|&k| k <= 1.0) => {
                bad("polybound needs every kappa > 1".into())
            }
            _ => Ok(()),
        }
    }
}

fn spans_two_decades(kappas: &[f64]) -> bool {
    let lo = kappas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = kappas.iter().copied().fold(0.0, f64::max);
    kappas.len() >= 3 && hi >= 100.0 * lo
}

/// Parse `"1,2,5"` or ranges `"0:60"` (inclusive), mixed freely.
pub fn parse_k_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad iteration count {t:?}")))
        };
        match part.split_once(':') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(Error::Config(format!("empty range {part:?}")));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty k list".into()));
    }
    Ok(out)
}

pub fn parse_kappa_list(s: &str) -> Result<Vec<f64>> {
    let out = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad kappa {t:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if out.is_empty() {
        return Err(Error::Config("empty kappa list".into()));
    }
    Ok(out)
}
