//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Keys not listed in
//! [`KEYS`] are rejected. List-valued keys take comma-separated values.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::metrics::Gain;
use crate::mf::TrainConfig;
use crate::propensity::PropensityKind;
use crate::synthetic::{SyntheticParams, VerifyOptions};
use crate::tri::TriConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DatasetKind {
    MovieLens,
    Yahoo,
    Coat,
    Synthetic,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::MovieLens => "movielens",
            DatasetKind::Yahoo => "yahoo",
            DatasetKind::Coat => "coat",
            DatasetKind::Synthetic => "synthetic",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "movielens" | "ml100k" | "ml-100k" => Ok(DatasetKind::MovieLens),
            "yahoo" | "yahoo-r3" => Ok(DatasetKind::Yahoo),
            "coat" => Ok(DatasetKind::Coat),
            "synthetic" => Ok(DatasetKind::Synthetic),
            other => Err(Error::invalid(format!("unknown dataset {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    MfNaive,
    MfIps,
    /// IPS-trained `A1`, `A2` with a naive `A3` refined by tri-training.
    MfIpsAt,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::MfNaive => "mf_naive",
            Method::MfIps => "mf_ips",
            Method::MfIpsAt => "mf_ips_at",
        }
    }

    pub fn uses_propensity(self) -> bool {
        !matches!(self, Method::MfNaive)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mf_naive" => Ok(Method::MfNaive),
            "mf_ips" => Ok(Method::MfIps),
            "mf_ips_at" => Ok(Method::MfIpsAt),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMetric {
    /// Plain MSE on the validation split.
    Naive,
    /// Propensity-weighted MSE on the validation split.
    Ips,
}

impl FromStr for SweepMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(SweepMetric::Naive),
            "ips" => Ok(SweepMetric::Ips),
            other => Err(Error::invalid(format!("unknown sweep metric {other:?}"))),
        }
    }
}

impl fmt::Display for SweepMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMetric::Naive => "naive",
            SweepMetric::Ips => "ips",
        })
    }
}

/// Every recognized key with a one-line description, in output order.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", "movielens | yahoo | coat | synthetic"),
    ("ratings", "MovieLens u.data path"),
    ("train", "Coat train.ascii or Yahoo! R3 train file"),
    ("test", "Coat test.ascii or Yahoo! R3 test file"),
    ("output", "output directory"),
    (
        "min_items",
        "MovieLens: keep items with at least this many ratings",
    ),
    (
        "test_fraction",
        "MovieLens: share of records in the test pool",
    ),
    (
        "validation_fraction",
        "share of training records held out for validation",
    ),
    ("split_seed", "seed of the data splits"),
    ("propensity", "comma list of propensity kinds"),
    (
        "propensity_smoothing",
        "add-one smoothing of naive-Bayes tables",
    ),
    (
        "propensity_floor",
        "lower clamp for estimated propensities, or none",
    ),
    ("method", "comma list of mf_naive | mf_ips | mf_ips_at"),
    ("learning_rate", "Adam step size"),
    ("batch_size", "mini-batch size"),
    ("l2", "L2 penalty"),
    ("dim", "latent dimension"),
    ("epochs", "pre-training epochs"),
    ("patience", "early-stopping patience in epochs, or none"),
    ("seed", "base seed; run k uses seed + k"),
    ("epsilon", "pseudo-label agreement threshold"),
    ("n_iterations", "tri-training iterations"),
    (
        "n_steps",
        "epochs over the pseudo-labeled set per iteration",
    ),
    (
        "dprime_fraction",
        "share of grid pairs offered for pseudo-labeling",
    ),
    (
        "trace_loss",
        "loss of the recorded bound terms: absolute | squared",
    ),
    ("n_seeds", "independent runs per setting"),
    ("sweep_budget", "random-search trials"),
    ("sweep_seed", "seed of the random search"),
    ("sweep_metric", "validation selection metric: naive | ips"),
    ("gain", "nDCG gain: exponential | linear"),
    ("ndcg_k", "nDCG cutoff"),
    ("syn_users", "synthetic grid users"),
    ("syn_items", "synthetic grid items"),
    ("syn_rank", "synthetic latent rank"),
    ("syn_skew", "synthetic item popularity exponent"),
    (
        "syn_correlation",
        "synthetic rating-observation correlation",
    ),
    ("syn_base_rate", "synthetic largest propensity"),
    ("syn_p_min", "synthetic propensity lower end"),
    ("syn_seed", "synthetic instance seed"),
    ("verify_trials", "bound verification trials"),
    ("delta", "bound confidence parameter"),
    (
        "propensity_noise",
        "log-normal noise on verified propensity estimates",
    ),
    ("predictor_noise", "spread of verified random predictors"),
    ("rq1_min_items", "comma list of min_items settings"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub ratings: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub output: PathBuf,
    pub min_items: usize,
    pub test_fraction: f64,
    pub validation_fraction: f64,
    pub split_seed: u64,
    pub propensities: Vec<PropensityKind>,
    pub propensity_smoothing: bool,
    pub propensity_floor: Option<f64>,
    pub methods: Vec<Method>,
    pub train_cfg: TrainConfig,
    pub epsilon: f64,
    pub n_iterations: usize,
    pub n_steps: usize,
    pub dprime_fraction: f64,
    pub trace_loss: LossKind,
    pub n_seeds: usize,
    pub sweep_budget: usize,
    pub sweep_seed: u64,
    pub sweep_metric: SweepMetric,
    pub gain: Gain,
    pub ndcg_k: usize,
    pub synthetic: SyntheticParams,
    pub syn_seed: u64,
    pub verify: VerifyOptions,
    pub rq1_min_items: Vec<usize>,
    /// Keys given explicitly (file or override), as opposed to defaults.
    pub explicit: BTreeSet<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Synthetic,
            ratings: None,
            train: None,
            test: None,
            output: PathBuf::from("out"),
            min_items: 1,
            test_fraction: 0.5,
            validation_fraction: 0.1,
            split_seed: 0,
            propensities: vec![PropensityKind::Uniform],
            propensity_smoothing: false,
            propensity_floor: None,
            methods: vec![Method::MfIps],
            train_cfg: TrainConfig::default(),
            epsilon: 0.1,
            n_iterations: 10,
            n_steps: 10,
            dprime_fraction: 1.0,
            trace_loss: LossKind::Absolute,
            n_seeds: 20,
            sweep_budget: 50,
            sweep_seed: 0,
            sweep_metric: SweepMetric::Naive,
            gain: Gain::Exponential,
            ndcg_k: 3,
            synthetic: SyntheticParams::default(),
            syn_seed: 0,
            verify: VerifyOptions::default(),
            rq1_min_items: vec![1, 2, 5, 10, 20, 50],
            explicit: BTreeSet::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid(format!("{key}: empty list")));
    }
    Ok(items)
}

fn parse_optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::invalid(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn optional<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref()
        .map_or_else(|| "none".to_owned(), ToString::to_string)
}

impl ExperimentConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train_cfg;
        match key {
            "dataset" => self.dataset = v.parse()?,
            "ratings" => self.ratings = Some(PathBuf::from(v)),
            "train" => self.train = Some(PathBuf::from(v)),
            "test" => self.test = Some(PathBuf::from(v)),
            "output" => self.output = PathBuf::from(v),
            "min_items" => self.min_items = parse(key, v)?,
            "test_fraction" => self.test_fraction = parse(key, v)?,
            "validation_fraction" => self.validation_fraction = parse(key, v)?,
            "split_seed" => self.split_seed = parse(key, v)?,
            "propensity" => self.propensities = parse_list(key, v)?,
            "propensity_smoothing" => self.propensity_smoothing = parse_bool(key, v)?,
            "propensity_floor" => self.propensity_floor = parse_optional(key, v)?,
            "method" => self.methods = parse_list(key, v)?,
            "learning_rate" => t.learning_rate = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "l2" => t.l2 = parse(key, v)?,
            "dim" => t.dim = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "patience" => t.patience = parse_optional(key, v)?,
            "seed" => t.seed = parse(key, v)?,
            "epsilon" => self.epsilon = parse(key, v)?,
            "n_iterations" => self.n_iterations = parse(key, v)?,
            "n_steps" => self.n_steps = parse(key, v)?,
            "dprime_fraction" => self.dprime_fraction = parse(key, v)?,
            "trace_loss" => self.trace_loss = v.parse()?,
            "n_seeds" => self.n_seeds = parse(key, v)?,
            "sweep_budget" => self.sweep_budget = parse(key, v)?,
            "sweep_seed" => self.sweep_seed = parse(key, v)?,
            "sweep_metric" => self.sweep_metric = v.parse()?,
            "gain" => self.gain = v.parse()?,
            "ndcg_k" => self.ndcg_k = parse(key, v)?,
            "syn_users" => self.synthetic.n_users = parse(key, v)?,
            "syn_items" => self.synthetic.n_items = parse(key, v)?,
            "syn_rank" => self.synthetic.rank = parse(key, v)?,
            "syn_skew" => self.synthetic.skew = parse(key, v)?,
            "syn_correlation" => self.synthetic.correlation = parse(key, v)?,
            "syn_base_rate" => self.synthetic.base_rate = parse(key, v)?,
            "syn_p_min" => self.synthetic.p_min = parse(key, v)?,
            "syn_seed" => self.syn_seed = parse(key, v)?,
            "verify_trials" => self.verify.trials = parse(key, v)?,
            "delta" => self.verify.delta = parse(key, v)?,
            "propensity_noise" => self.verify.propensity_noise = parse(key, v)?,
            "predictor_noise" => self.verify.predictor_noise = parse(key, v)?,
            "rq1_min_items" => self.rq1_min_items = parse_list(key, v)?,
            other => return Err(Error::invalid(format!("unknown config key {other:?}"))),
        }
        self.explicit.insert(key.to_owned());
        Ok(())
    }

    /// Applies `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("config line {}: expected key = value", no + 1))
            })?;
            self.set(k.trim(), v)
                .map_err(|e| Error::invalid(format!("config line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults, then the file (if any), then the overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            cfg.apply_text(&text)?;
        }
        for kv in overrides {
            cfg.apply_override(kv)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train_cfg.validate()?;
        self.tri_config(0).validate()?;
        if self.n_seeds == 0 {
            return Err(Error::invalid("n_seeds must be at least 1"));
        }
        if self.sweep_budget == 0 {
            return Err(Error::invalid("sweep_budget must be at least 1"));
        }
        if self.ndcg_k == 0 {
            return Err(Error::invalid("ndcg_k must be at least 1"));
        }
        if self.min_items == 0 || self.rq1_min_items.contains(&0) {
            return Err(Error::invalid("min_items must be at least 1"));
        }
        if let Some(f) = self.propensity_floor {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid("propensity_floor must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Pre-training config for run `k`.
    pub fn train_config(&self, k: usize) -> TrainConfig {
        TrainConfig {
            seed: self.train_cfg.seed.wrapping_add(k as u64),
            ..self.train_cfg.clone()
        }
    }

    pub fn tri_config(&self, k: usize) -> TriConfig {
        TriConfig {
            n_iterations: self.n_iterations,
            n_steps: self.n_steps,
            dprime_fraction: self.dprime_fraction,
            trace_loss: self.trace_loss,
            ..TriConfig::with_shared(
                &self.train_config(k),
                self.epsilon,
                self.train_cfg.seed.wrapping_add(k as u64),
            )
        }
    }

    /// The resolved configuration as `key = value` text that [`Self::parse`] reads back.
    pub fn to_text(&self) -> String {
        let t = &self.train_cfg;
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
        let mut out = String::new();
        for (key, doc) in KEYS {
            let value = match *key {
                "dataset" => self.dataset.to_string(),
                "ratings" => match path(&self.ratings) {
                    Some(p) => p,
                    None => continue,
                },
                "train" => match path(&self.train) {
                    Some(p) => p,
                    None => continue,
                },
                "test" => match path(&self.test) {
                    Some(p) => p,
                    None => continue,
                },
                "output" => self.output.display().to_string(),
                "min_items" => self.min_items.to_string(),
                "test_fraction" => self.test_fraction.to_string(),
                "validation_fraction" => self.validation_fraction.to_string(),
                "split_seed" => self.split_seed.to_string(),
                "propensity" => join(&self.propensities),
                "propensity_smoothing" => self.propensity_smoothing.to_string(),
                "propensity_floor" => optional(&self.propensity_floor),
                "method" => join(&self.methods),
                "learning_rate" => t.learning_rate.to_string(),
                "batch_size" => t.batch_size.to_string(),
                "l2" => t.l2.to_string(),
                "dim" => t.dim.to_string(),
                "epochs" => t.epochs.to_string(),
                "patience" => optional(&t.patience),
                "seed" => t.seed.to_string(),
                "epsilon" => self.epsilon.to_string(),
                "n_iterations" => self.n_iterations.to_string(),
                "n_steps" => self.n_steps.to_string(),
                "dprime_fraction" => self.dprime_fraction.to_string(),
                "trace_loss" => self.trace_loss.to_string(),
                "n_seeds" => self.n_seeds.to_string(),
                "sweep_budget" => self.sweep_budget.to_string(),
                "sweep_seed" => self.sweep_seed.to_string(),
                "sweep_metric" => self.sweep_metric.to_string(),
                "gain" => match self.gain {
                    Gain::Exponential => "exponential".to_owned(),
                    Gain::Linear => "linear".to_owned(),
                },
                "ndcg_k" => self.ndcg_k.to_string(),
                "syn_users" => self.synthetic.n_users.to_string(),
                "syn_items" => self.synthetic.n_items.to_string(),
                "syn_rank" => self.synthetic.rank.to_string(),
                "syn_skew" => self.synthetic.skew.to_string(),
                "syn_correlation" => self.synthetic.correlation.to_string(),
                "syn_base_rate" => self.synthetic.base_rate.to_string(),
                "syn_p_min" => self.synthetic.p_min.to_string(),
                "syn_seed" => self.syn_seed.to_string(),
                "verify_trials" => self.verify.trials.to_string(),
                "delta" => self.verify.delta.to_string(),
                "propensity_noise" => self.verify.propensity_noise.to_string(),
                "predictor_noise" => self.verify.predictor_noise.to_string(),
                "rq1_min_items" => join(&self.rq1_min_items),
                other => unreachable!("key {other} has no printer"),
            };
            out.push_str(&format!("# {doc}\n{key} = {value}\n"));
        }
        out
    }
}
