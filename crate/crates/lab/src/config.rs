//! `key = value` configuration with defaults and command-line overrides.
//!
//! Every key has a default. A config file may set any subset of keys, and a
//! command-line flag `--<key> <value>` overrides both. Unknown keys are
//! errors so typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use oneclass_core::model::LikableLayout;
use oneclass_core::{AlgoParams, BoundsInput, ModelParams};

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key { name, default, help }
}

pub const EXPERIMENT_KEYS: &[Key] = &[
    key("experiment", "synthetic-theorem", "one-vs-two, sim-scaling, pref-scaling or synthetic-theorem"),
    key("seed", "1", "root seed; every random stream derives from it"),
    key("replicates", "20", "independent replicates per curve point"),
    key("threads", "0", "worker threads, 0 for one per core"),
    key("output", "out.csv", "curve CSV path; the metadata sidecar goes next to it"),
    key("pf", "1,0.5", "reveal probabilities, one curve each"),
    key("ts_grid", "0,1,2,4,6,8,12,16,24,32,48,64", "similarity steps at pf = 1 (scaled by 1/pf^2 per curve)"),
    key("tr_grid", "0,1,2,4,6,8,12,16,24,32,48,64", "preference steps at pf = 1 (scaled by 1/pf per curve)"),
    key("sim_warmup", "25", "similarity steps at pf = 1 before the preference sweep (scaled by 1/pf^2)"),
    key("pref_warmup", "3", "c in the c M/(k pf) random preference steps before the similarity sweep"),
    key("n_users", "400", "number of users N"),
    key("n_items", "600", "number of items M"),
    key("n_types", "4", "number of user types K"),
    key("delta", "0.3", "noise gap"),
    key("nu", "0.3", "minimum likable fraction"),
    key("gamma_target", "none", "largest acceptable separation, or none"),
    key("retry_budget", "100", "model redraws allowed to reach gamma_target"),
    key("layout", "random", "likable sets: random or disjoint"),
    key("construction", "bands", "synthetic model: bands or non-overlapping"),
    key("fixed_ratings", "false", "draw hidden ratings once per (user, item) instead of per recommendation"),
    key("corpus", "none", "signed grid file to replay, or none for a synthetic clustered matrix"),
    key("cluster_observe_min", "0.05", "smallest per-item observation rate of the synthetic corpus"),
    key("cluster_observe_max", "0.8", "largest per-item observation rate of the synthetic corpus"),
    key("cluster_agree", "0.85", "chance an observed rating agrees with the cluster's taste"),
    key("one_class_pf", "1", "reveal probability of the one-class arm in one-vs-two"),
    key("alpha", "0.5", "learning rate of the similarity schedule"),
    key("eta", "0.5", "preference step spacing factor"),
    key("batch_size", "10", "preference batch size Q"),
    key("k_neighbors", "20", "neighborhood size k"),
    key("recommended", "false", "use the recommended eta, k and Q from the bounds"),
    key("allow_repeat", "true", "allow re-recommending unrated items"),
    key("random_on_cold", "false", "draw uniformly when every estimate is zero"),
    key("sim_skip_rated_only", "false", "similarity steps skip only rated items"),
    key("horizon", "200", "steps per run"),
    key("confidence_delta", "0.1", "failure probability of the reward guarantee"),
    key("lambda", "0.5", "fraction used by the necessity bound"),
];

pub const BOUNDS_KEYS: &[Key] = &[
    key("n_users", "1000", "number of users N"),
    key("n_items", "5000", "number of items M"),
    key("n_types", "10", "number of user types K"),
    key("delta", "0.25", "noise gap"),
    key("nu", "0.3", "minimum likable fraction"),
    key("pf", "0.5", "reveal probability"),
    key("gamma", "0.5", "separation"),
    key("alpha", "0.1", "learning rate of the similarity schedule"),
    key("eta", "0.15", "preference step spacing factor"),
    key("batch_size", "50", "preference batch size Q"),
    key("k_neighbors", "50", "neighborhood size k"),
    key("confidence_delta", "0.1", "failure probability of the guarantee"),
    key("horizon", "100000", "horizon T"),
    key("lambda", "0.5", "fraction used by the necessity bound"),
];

/// Parses a bounds configuration.
pub fn bounds_input(c: &Config) -> Result<BoundsInput> {
    Ok(BoundsInput {
        n_users: c.get("n_users")?,
        n_items: c.get("n_items")?,
        n_types: c.get("n_types")?,
        delta_gap: c.get("delta")?,
        nu: c.get("nu")?,
        pf: c.get("pf")?,
        gamma: c.get("gamma")?,
        alpha: c.get("alpha")?,
        eta: c.get("eta")?,
        batch_size: c.get("batch_size")?,
        k_neighbors: c.get("k_neighbors")?,
        confidence_delta: c.get("confidence_delta")?,
        horizon: c.get("horizon")?,
        lambda: c.get("lambda")?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn defaults(keys: &[Key]) -> Self {
        Self { values: keys.iter().map(|k| (k.name.to_string(), k.default.to_string())).collect() }
    }

    pub fn experiment_defaults() -> Self {
        Self::defaults(EXPERIMENT_KEYS)
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => bail!("unknown config key `{key}`"),
        }
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{raw}`", n + 1))?;
            self.set(k.trim(), v.trim()).with_context(|| format!("line {}", n + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values.get(key).map(String::as_str).ok_or_else(|| anyhow!("unknown config key `{key}`"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e| anyhow!("config key `{key}` = `{raw}`: {e}"))
    }

    /// `None` for the literal `none`.
    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        if self.raw(key)? == "none" {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        self.raw(key)?
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| anyhow!("config key `{key}`, entry `{s}`: {e}")))
            .collect()
    }

    /// Resolved configuration as `key = value` lines, sorted by key.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    OneVsTwo,
    SimScaling,
    PrefScaling,
    SyntheticTheorem,
}

impl FromStr for ExperimentKind {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "one-vs-two" => Self::OneVsTwo,
            "sim-scaling" => Self::SimScaling,
            "pref-scaling" => Self::PrefScaling,
            "synthetic-theorem" => Self::SyntheticTheorem,
            other => bail!("unknown experiment `{other}`"),
        })
    }
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::OneVsTwo => "one-vs-two",
            Self::SimScaling => "sim-scaling",
            Self::PrefScaling => "pref-scaling",
            Self::SyntheticTheorem => "synthetic-theorem",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    Bands,
    NonOverlapping,
}

/// Parsed experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub replicates: usize,
    pub threads: usize,
    pub output: PathBuf,
    pub pf: Vec<f64>,
    pub ts_grid: Vec<usize>,
    pub tr_grid: Vec<usize>,
    pub sim_warmup: f64,
    pub pref_warmup: f64,
    pub model: ModelParams,
    pub construction: Construction,
    pub fixed_ratings: bool,
    pub corpus: Option<PathBuf>,
    pub cluster_observe: (f64, f64),
    pub cluster_agree: f64,
    pub one_class_pf: f64,
    pub algo: AlgoParams,
    pub recommended: bool,
    pub horizon: usize,
    pub confidence_delta: f64,
    pub lambda: f64,
}

impl ExperimentConfig {
    pub fn from_config(c: &Config) -> Result<Self> {
        let layout = match c.raw("layout")? {
            "random" => LikableLayout::Random,
            "disjoint" => LikableLayout::Disjoint,
            other => bail!("unknown layout `{other}`"),
        };
        let construction = match c.raw("construction")? {
            "bands" => Construction::Bands,
            "non-overlapping" => Construction::NonOverlapping,
            other => bail!("unknown construction `{other}`"),
        };
        let pf: Vec<f64> = c.get_list("pf")?;
        let mut model = ModelParams::new(
            c.get("n_users")?,
            c.get("n_items")?,
            c.get("n_types")?,
            c.get("delta")?,
            c.get("nu")?,
            pf.first().copied().unwrap_or(1.0),
        );
        model.gamma_target = c.get_opt("gamma_target")?;
        model.retry_budget = c.get("retry_budget")?;
        model.layout = layout;

        let mut algo = AlgoParams::new(c.get("alpha")?, c.get("eta")?, c.get("batch_size")?, c.get("k_neighbors")?);
        algo.allow_repeat = c.get("allow_repeat")?;
        algo.random_on_cold = c.get("random_on_cold")?;
        algo.sim_skip_rated_only = c.get("sim_skip_rated_only")?;

        let cfg = Self {
            kind: c.get("experiment")?,
            seed: c.get("seed")?,
            replicates: c.get("replicates")?,
            threads: c.get("threads")?,
            output: c.get("output")?,
            pf,
            ts_grid: c.get_list("ts_grid")?,
            tr_grid: c.get_list("tr_grid")?,
            sim_warmup: c.get("sim_warmup")?,
            pref_warmup: c.get("pref_warmup")?,
            model,
            construction,
            fixed_ratings: c.get("fixed_ratings")?,
            corpus: c.get_opt("corpus")?,
            cluster_observe: (c.get("cluster_observe_min")?, c.get("cluster_observe_max")?),
            cluster_agree: c.get("cluster_agree")?,
            one_class_pf: c.get("one_class_pf")?,
            algo,
            recommended: c.get("recommended")?,
            horizon: c.get("horizon")?,
            confidence_delta: c.get("confidence_delta")?,
            lambda: c.get("lambda")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if self.pf.is_empty() {
            bail!("the pf list is empty");
        }
        if let Some(bad) = self.pf.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
            bail!("pf = {bad} outside (0, 1]");
        }
        match self.kind {
            ExperimentKind::SimScaling if self.ts_grid.is_empty() => bail!("ts_grid is empty"),
            ExperimentKind::PrefScaling if self.tr_grid.is_empty() => bail!("tr_grid is empty"),
            ExperimentKind::SyntheticTheorem if self.horizon == 0 => bail!("horizon must be positive"),
            _ => Ok(()),
        }
    }

    /// Bounds input for the synthetic model and algorithm settings at reveal
    /// probability `pf` and separation `gamma`.
    pub fn bounds_input(&self, pf: f64, gamma: f64) -> BoundsInput {
        BoundsInput {
            n_users: self.model.n_users,
            n_items: self.model.n_items,
            n_types: self.model.n_types,
            delta_gap: self.model.delta,
            nu: self.model.nu,
            pf,
            gamma,
            alpha: self.algo.alpha,
            eta: self.algo.eta,
            batch_size: self.algo.batch_size,
            k_neighbors: self.algo.k_neighbors,
            confidence_delta: self.confidence_delta,
            horizon: self.horizon as u64,
            lambda: self.lambda,
        }
    }
}
