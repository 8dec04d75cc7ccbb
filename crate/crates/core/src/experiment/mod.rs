//! Experiment drivers behind the command-line front end.
//!
//! Each command reads an [`ExperimentConfig`], writes its outputs into the
//! configured directory (always including the resolved `config.txt`) and
//! returns a short text summary.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rayon::prelude::*;

pub use config::{DatasetKind, ExperimentConfig, Method, SweepMetric, KEYS};

use crate::datasets::{
    build_ml_test, filter_min_items, load_coat, load_movielens, load_yahoo, rating_shift,
    split_validation, write_canonical, DatasetBundle, KlDirection, Provenance, RatingHistogram,
    SplitOptions,
};
use crate::domain::{InteractionRecord, RatingDataset};
use crate::error::{Error, Result};
use crate::metrics::{self, MeanStderr, MetricsReport, MetricsRow};
use crate::mf::{train, FactorModel, Objective};
use crate::propensity::{self, EstimateOptions, PropensityKind, PropensityModel, PropensityScore};
use crate::rng::seeded;
use crate::synthetic::{self, SyntheticInstance};
use crate::tri::{self, IterationTrace, TriHooks, TriModels, TRACE_HEADER};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else if err.is_data() {
        EXIT_DATA
    } else {
        EXIT_USAGE
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Run,
    Sweep,
    Verify,
    Rq1,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandReport {
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// Runs that failed numerically but did not stop the command.
    pub failures: usize,
}

impl CommandReport {
    pub fn exit_code(&self) -> i32 {
        if self.failures > 0 {
            EXIT_NUMERICAL
        } else {
            EXIT_OK
        }
    }

    fn write(&mut self, dir: &Path, name: &str, contents: &str) -> Result<()> {
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

pub fn execute(cmd: Command, cfg: &ExperimentConfig) -> Result<CommandReport> {
    match cmd {
        Command::Ingest => cmd_ingest(cfg),
        Command::Run => cmd_run(cfg),
        Command::Sweep => cmd_sweep(cfg),
        Command::Verify => cmd_verify(cfg),
        Command::Rq1 => cmd_rq1(cfg),
    }
}

fn start(cfg: &ExperimentConfig) -> Result<CommandReport> {
    let mut report = CommandReport::default();
    std::fs::create_dir_all(&cfg.output).map_err(|e| Error::io(&cfg.output, e))?;
    report.write(&cfg.output, "config.txt", &cfg.to_text())?;
    Ok(report)
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str, dataset: DatasetKind) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| {
        Error::MissingInput(format!(
            "dataset {dataset} needs `{key}`; download the files manually (licenses forbid \
             redistribution) and point the config at them"
        ))
    })
}

/// Loaded splits plus the synthetic instance they came from, if any.
pub struct LoadedData {
    pub bundle: DatasetBundle,
    pub instance: Option<SyntheticInstance<f64>>,
    /// MovieLens ratings after the min-items filter, before splitting.
    pub filtered: Option<RatingDataset>,
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<LoadedData> {
    let split = SplitOptions {
        validation_fraction: cfg.validation_fraction,
        seed: cfg.split_seed,
    };
    let bundle = match cfg.dataset {
        DatasetKind::MovieLens => {
            let ratings = required(&cfg.ratings, "ratings", cfg.dataset)?;
            let full = filter_min_items(&load_movielens(ratings)?, cfg.min_items)?;
            let mut b = build_ml_test(
                &full,
                cfg.test_fraction,
                cfg.validation_fraction,
                cfg.split_seed,
            )?;
            b.provenance
                .params
                .push(("min_items".into(), cfg.min_items.to_string()));
            return Ok(LoadedData {
                bundle: b,
                instance: None,
                filtered: Some(full),
            });
        }
        DatasetKind::Coat => load_coat(
            required(&cfg.train, "train", cfg.dataset)?,
            required(&cfg.test, "test", cfg.dataset)?,
            split,
        )?,
        DatasetKind::Yahoo => load_yahoo(
            required(&cfg.train, "train", cfg.dataset)?,
            required(&cfg.test, "test", cfg.dataset)?,
            split,
        )?,
        DatasetKind::Synthetic => {
            let inst = synthetic::generate::<f64>(&cfg.synthetic, cfg.syn_seed)?;
            let observed =
                synthetic::sample_observations(&inst, crate::rng::derive_seed(cfg.syn_seed, 1));
            observed.ensure_nonempty("synthetic observations")?;
            let (train, validation) =
                split_validation(&observed, cfg.validation_fraction, cfg.split_seed)?;
            let (m, n) = (inst.n_users(), inst.n_items());
            let truth = inst.observed_truth();
            let test = RatingDataset::new(
                m,
                n,
                (0..m * n)
                    .map(|k| InteractionRecord::new(k / n, k % n, truth.get(k / n, k % n) as u8))
                    .collect(),
            )?;
            return Ok(LoadedData {
                bundle: DatasetBundle {
                    train,
                    validation,
                    test,
                    provenance: Provenance {
                        source: "synthetic".into(),
                        seed: cfg.syn_seed,
                        params: vec![("test".into(), "full grid".into())],
                        user_ids: Vec::new(),
                        item_ids: Vec::new(),
                    },
                },
                instance: Some(inst),
                filtered: None,
            });
        }
    };
    Ok(LoadedData {
        bundle,
        instance: None,
        filtered: None,
    })
}

fn merged(a: &RatingDataset, b: &RatingDataset) -> Result<RatingDataset> {
    let records: Vec<_> = a.records().iter().chain(b.records()).copied().collect();
    if a.has_repeats() || b.has_repeats() {
        RatingDataset::with_repeats(a.n_users(), a.n_items(), records)
    } else {
        RatingDataset::new(a.n_users(), a.n_items(), records)
    }
}

fn histogram_line(ds: &RatingDataset) -> String {
    let h = RatingHistogram::from_dataset(ds);
    h.counts
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn cmd_ingest(cfg: &ExperimentConfig) -> Result<CommandReport> {
    let data = load_data(cfg)?;
    let mut report = start(cfg)?;
    let b = &data.bundle;
    for (name, ds) in [
        ("train.txt", &b.train),
        ("validation.txt", &b.validation),
        ("test.txt", &b.test),
    ] {
        let path = cfg.output.join(name);
        write_canonical(ds, &path)?;
        report.files.push(path);
    }
    if let Some(inst) = &data.instance {
        synthetic::write_instance(inst, &cfg.output.join("instance"))?;
    }
    let full_train = merged(&b.train, &b.validation)?;
    let mut text = String::new();
    let _ = writeln!(text, "source = {}", b.provenance.source);
    let _ = writeln!(text, "m = {}", b.train.n_users());
    let _ = writeln!(text, "n = {}", b.train.n_items());
    let _ = writeln!(text, "train_ratings = {}", b.train.len());
    let _ = writeln!(text, "validation_ratings = {}", b.validation.len());
    let _ = writeln!(text, "test_ratings = {}", b.test.len());
    let _ = writeln!(text, "train_histogram = {}", histogram_line(&full_train));
    let _ = writeln!(text, "test_histogram = {}", histogram_line(&b.test));
    for dir in [KlDirection::TestToTrain, KlDirection::TrainToTest] {
        let _ = writeln!(
            text,
            "{dir} = {:.6}",
            rating_shift(&full_train, &b.test, dir)
        );
    }
    if let Some(full) = &data.filtered {
        let p: Vec<f64> = propensity::relative_item_propensity(full)?;
        let _ = writeln!(
            text,
            "min_item_propensity = {:.6}",
            p.iter().copied().fold(f64::INFINITY, f64::min)
        );
    }
    let _ = writeln!(text, "split_seed = {}", b.provenance.seed);
    for (k, v) in &b.provenance.params {
        let _ = writeln!(text, "param.{k} = {v}");
    }
    report.write(&cfg.output, "report.txt", &text)?;
    report.summary = text;
    Ok(report)
}

/// Fits `kind` on the training split; `nb_true` takes its prior from the MCAR test ratings.
pub fn fit_propensity(
    kind: PropensityKind,
    bundle: &DatasetBundle,
    cfg: &ExperimentConfig,
) -> Result<PropensityModel<f64>> {
    let opts = EstimateOptions {
        smoothing: cfg.propensity_smoothing,
        clamp_floor: cfg.propensity_floor,
    };
    propensity::estimate(kind, &bundle.train, Some(&bundle.test), opts)
}

/// One trained model with its tri-training traces (empty for plain MF).
pub struct TrainedRun {
    pub model: FactorModel<f64>,
    pub traces: Vec<IterationTrace<f64>>,
}

/// Trains `method` for run index `k`.
pub fn train_method(
    method: Method,
    bundle: &DatasetBundle,
    prop: Option<&PropensityModel<f64>>,
    cfg: &ExperimentConfig,
    k: usize,
    eval_test: bool,
) -> Result<TrainedRun> {
    let validation = Some(&bundle.validation).filter(|v| !v.is_empty());
    let objective = match (method, prop) {
        (Method::MfNaive, _) => Objective::Naive,
        (_, Some(p)) => Objective::Ips(p as &dyn PropensityScore<f64>),
        (_, None) => {
            return Err(Error::MissingInput(format!(
                "{method} needs a propensity model"
            )))
        }
    };
    let (m, n) = (bundle.train.n_users(), bundle.train.n_items());
    match method {
        Method::MfNaive | Method::MfIps => {
            let tc = cfg.train_config(k);
            let mut model = FactorModel::init(m, n, &tc)?;
            train(&mut model, &bundle.train, objective, &tc, validation)?;
            Ok(TrainedRun {
                model,
                traces: Vec::new(),
            })
        }
        Method::MfIpsAt => {
            let tcfg = cfg.tri_config(k);
            let mut models = TriModels::init(&bundle.train, &tcfg)?;
            let mut eval = |a3: &FactorModel<f64>| metrics::mse(a3, &bundle.test);
            let hooks = TriHooks {
                on_relabel: None,
                evaluate: if eval_test { Some(&mut eval) } else { None },
            };
            let traces = tri::tri_train(
                &mut models,
                &bundle.train,
                objective,
                &tcfg,
                validation,
                hooks,
            )?;
            Ok(TrainedRun {
                model: models.a3,
                traces,
            })
        }
    }
}

struct SeedOutcome {
    row: MetricsRow,
    traces: Vec<IterationTrace<f64>>,
}

fn propensity_label(method: Method, kind: PropensityKind) -> String {
    if method.uses_propensity() {
        kind.name().to_owned()
    } else {
        "none".to_owned()
    }
}

fn aggregate_groups(rows: &[MetricsRow]) -> Vec<(String, String, String, metrics::Aggregate)> {
    let mut keys: Vec<(String, String, String)> = Vec::new();
    for r in rows {
        let k = (r.dataset.clone(), r.propensity.clone(), r.method.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .filter_map(|(d, p, m)| {
            let reports: Vec<MetricsReport> = rows
                .iter()
                .filter(|r| r.dataset == d && r.propensity == p && r.method == m)
                .map(|r| r.report.clone())
                .collect();
            metrics::aggregate(&reports).ok().map(|a| (d, p, m, a))
        })
        .collect()
}

pub fn cmd_run(cfg: &ExperimentConfig) -> Result<CommandReport> {
    let data = load_data(cfg)?;
    let bundle = &data.bundle;
    let mut report = start(cfg)?;
    let dataset = cfg.dataset.name();
    let mut rows = Vec::new();
    let mut failures = String::from("dataset,propensity,method,seed,error\n");
    let mut merged_traces = format!("propensity,seed,{TRACE_HEADER}\n");
    let mut done_naive = false;
    for &kind in &cfg.propensities {
        let needs_prop = cfg.methods.iter().any(|m| m.uses_propensity());
        let prop = if needs_prop {
            Some(fit_propensity(kind, bundle, cfg)?)
        } else {
            None
        };
        for &method in &cfg.methods {
            if !method.uses_propensity() {
                if done_naive {
                    continue;
                }
                done_naive = true;
            }
            let label = propensity_label(method, kind);
            let outcomes: Vec<(u64, Result<SeedOutcome>)> = (0..cfg.n_seeds)
                .into_par_iter()
                .map(|k| {
                    let seed = cfg.train_config(k).seed;
                    let out =
                        train_method(method, bundle, prop.as_ref(), cfg, k, true).and_then(|run| {
                            let r = MetricsReport::evaluate(
                                &run.model,
                                &bundle.test,
                                &[cfg.ndcg_k],
                                cfg.gain,
                                seed,
                            )?;
                            Ok(SeedOutcome {
                                row: MetricsRow {
                                    dataset: dataset.to_owned(),
                                    propensity: label.clone(),
                                    method: method.name().to_owned(),
                                    report: r,
                                },
                                traces: run.traces,
                            })
                        });
                    (seed, out)
                })
                .collect();
            for (seed, out) in outcomes {
                match out {
                    Ok(o) => {
                        if method == Method::MfIpsAt {
                            let name = format!("traces/{dataset}_{label}_seed{seed}.csv");
                            report.write(&cfg.output, &name, &tri::traces_to_csv(&o.traces))?;
                            for line in tri::traces_to_csv(&o.traces).lines().skip(1) {
                                let _ = writeln!(merged_traces, "{label},{seed},{line}");
                            }
                        }
                        rows.push(o.row);
                    }
                    Err(e) if e.is_numerical() => {
                        report.failures += 1;
                        let _ = writeln!(failures, "{dataset},{label},{method},{seed},{e}");
                    }
                    Err(e) => return Err(e),
                }
            }
        }
    }
    report.write(
        &cfg.output,
        "metrics.csv",
        &metrics::metrics_csv(&rows, cfg.ndcg_k),
    )?;
    let groups = aggregate_groups(&rows);
    report.write(
        &cfg.output,
        "aggregate.csv",
        &metrics::aggregate_csv(&groups, cfg.ndcg_k),
    )?;
    let table = metrics::comparison_table(&groups, cfg.ndcg_k);
    report.write(&cfg.output, "table.txt", &table)?;
    if cfg.methods.contains(&Method::MfIpsAt) {
        report.write(&cfg.output, "traces.csv", &merged_traces)?;
    }
    if report.failures > 0 {
        report.write(&cfg.output, "failures.csv", &failures)?;
    }
    let mut summary = String::new();
    for r in &rows {
        let _ = writeln!(
            summary,
            "{} {} {} seed {}: mae {:.4} mse {:.4} ndcg@{} {:.4}",
            r.dataset,
            r.propensity,
            r.method,
            r.report.seed,
            r.report.mae,
            r.report.mse,
            cfg.ndcg_k,
            r.report.ndcg.get(&cfg.ndcg_k).copied().unwrap_or(f64::NAN)
        );
    }
    if !groups.is_empty() {
        summary.push_str(&table);
    }
    if report.failures > 0 {
        let _ = writeln!(
            summary,
            "{} run(s) failed, see failures.csv",
            report.failures
        );
    }
    report.summary = summary;
    Ok(report)
}

/// Hyperparameters drawn by one random-search trial.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepTrial {
    pub l2: f64,
    pub dim: usize,
    pub epsilon: f64,
}

/// `budget` trials: `l2` log-uniform on `[1e-6, 1]`, `dim` uniform on
/// `{5, 6, ..., 50}`, `epsilon` log-uniform on `[1e-3, 1]`.
pub fn sweep_trials(budget: usize, seed: u64) -> Vec<SweepTrial> {
    let mut rng = seeded(seed);
    (0..budget)
        .map(|_| SweepTrial {
            l2: 10f64.powf(rng.random_range(-6.0..=0.0)),
            dim: rng.random_range(5..=50usize),
            epsilon: 10f64.powf(rng.random_range(-3.0..=0.0)),
        })
        .collect()
}

fn validation_score(
    model: &FactorModel<f64>,
    validation: &RatingDataset,
    metric: SweepMetric,
    prop: Option<&PropensityModel<f64>>,
) -> Result<f64> {
    match (metric, prop) {
        (SweepMetric::Naive, _) | (SweepMetric::Ips, None) => metrics::mse(model, validation),
        (SweepMetric::Ips, Some(p)) => {
            // Self-normalized inverse-propensity weighted squared error.
            let (mut num, mut den) = (0.0, 0.0);
            for r in validation.records() {
                let w = 1.0 / p.propensity(r.user, r.item, Some(r.rating))?;
                let e =
                    crate::domain::clamp_rating(model.predict(r.user, r.item)?) - r.rating as f64;
                num += w * e * e;
                den += w;
            }
            Ok(num / den)
        }
    }
}

pub const SWEEP_HEADER: &str = "trial,l2,dim,epsilon,validation_score,status";

pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<CommandReport> {
    if cfg.methods.len() != 1 || cfg.propensities.len() != 1 {
        return Err(Error::invalid(
            "sweep needs exactly one method and one propensity",
        ));
    }
    let (method, kind) = (cfg.methods[0], cfg.propensities[0]);
    let data = load_data(cfg)?;
    let bundle = &data.bundle;
    bundle.validation.ensure_nonempty("validation split")?;
    let mut report = start(cfg)?;
    let prop = if method.uses_propensity() || cfg.sweep_metric == SweepMetric::Ips {
        Some(fit_propensity(kind, bundle, cfg)?)
    } else {
        None
    };
    let trials = sweep_trials(cfg.sweep_budget, cfg.sweep_seed);
    let candidate = |t: &SweepTrial| {
        let mut c = cfg.clone();
        c.train_cfg.l2 = t.l2;
        c.train_cfg.dim = t.dim;
        if method == Method::MfIpsAt {
            c.epsilon = t.epsilon;
        }
        c
    };
    let scores: Vec<Result<f64>> = trials
        .par_iter()
        .map(|t| {
            let c = candidate(t);
            let run = train_method(method, bundle, prop.as_ref(), &c, 0, false)?;
            validation_score(
                &run.model,
                &bundle.validation,
                cfg.sweep_metric,
                prop.as_ref(),
            )
        })
        .collect();
    let mut log = format!("{SWEEP_HEADER}\n");
    let mut best: Option<(usize, f64)> = None;
    for (k, (t, s)) in trials.iter().zip(&scores).enumerate() {
        let eps = if method == Method::MfIpsAt {
            t.epsilon.to_string()
        } else {
            String::new()
        };
        match s {
            Ok(v) => {
                let _ = writeln!(log, "{k},{},{},{eps},{v},ok", t.l2, t.dim);
                if best.is_none_or(|(_, b)| *v < b) {
                    best = Some((k, *v));
                }
            }
            Err(e) if e.is_numerical() => {
                report.failures += 1;
                let _ = writeln!(log, "{k},{},{},{eps},,failed", t.l2, t.dim);
            }
            Err(e) => return Err(Error::invalid(format!("sweep trial {k}: {e}"))),
        }
    }
    report.write(&cfg.output, "trials.csv", &log)?;
    let (k, score) = best.ok_or(Error::TrainingDiverged {
        epoch: 0,
        objective: f64::NAN,
    })?;
    let winner = candidate(&trials[k]);
    let best_text = format!(
        "# best of {} trials: trial {k}, {} validation score {score}\n{}",
        trials.len(),
        cfg.sweep_metric,
        winner.to_text()
    );
    report.write(&cfg.output, "best.conf", &best_text)?;
    report.summary = format!(
        "best trial {k}: l2 {} dim {} epsilon {} ({} validation score {score:.5})\n",
        winner.train_cfg.l2, winner.train_cfg.dim, winner.epsilon, cfg.sweep_metric
    );
    // A sweep with some failed trials still produced a winner.
    report.failures = 0;
    Ok(report)
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Result<CommandReport> {
    if cfg.dataset != DatasetKind::Synthetic || !cfg.explicit.contains("dataset") {
        return Err(Error::MissingInput(
            "verify runs on a synthetic instance: set dataset = synthetic and the syn_* keys"
                .into(),
        ));
    }
    let inst = synthetic::generate::<f64>(&cfg.synthetic, cfg.syn_seed)?;
    let mut opts = cfg.verify.clone();
    opts.seed = cfg.train_cfg.seed;
    opts.loss = cfg.trace_loss;
    let v = synthetic::verify_bounds(&inst, &opts)?;
    let mut report = start(cfg)?;
    let text = v.report();
    report.write(&cfg.output, "bounds.csv", &text)?;
    report.summary = format!(
        "{text}ips bias term zero in {}/{} trials\n",
        v.ips_zero_bias, v.trials
    );
    Ok(report)
}

const RQ1_REFERENCE: usize = 50;

pub const RQ1_HEADER: &str = "min_items,method,min_propensity,n,mse_mean,mse_stderr,relative_mse";

pub fn cmd_rq1(cfg: &ExperimentConfig) -> Result<CommandReport> {
    if cfg.dataset != DatasetKind::MovieLens {
        return Err(Error::invalid("rq1 runs on dataset = movielens"));
    }
    let ratings = required(&cfg.ratings, "ratings", cfg.dataset)?;
    let full = load_movielens(ratings)?;
    let kind = if cfg.explicit.contains("propensity") {
        cfg.propensities[0]
    } else {
        PropensityKind::RelativeItem
    };
    let methods = [Method::MfIps, Method::MfIpsAt];
    let mut report = start(cfg)?;
    let mut rows = Vec::new();
    let mut stats: Vec<(usize, Method, f64, Vec<f64>)> = Vec::new();
    for &mi in &cfg.rq1_min_items {
        let filtered = filter_min_items(&full, mi)?;
        let rel: Vec<f64> = propensity::relative_item_propensity(&filtered)?;
        let min_p = rel.iter().copied().fold(f64::INFINITY, f64::min);
        let bundle = build_ml_test(
            &filtered,
            cfg.test_fraction,
            cfg.validation_fraction,
            cfg.split_seed,
        )?;
        let prop = fit_propensity(kind, &bundle, cfg)?;
        for method in methods {
            let outs: Vec<(u64, Result<MetricsReport>)> = (0..cfg.n_seeds)
                .into_par_iter()
                .map(|k| {
                    let seed = cfg.train_config(k).seed;
                    let r =
                        train_method(method, &bundle, Some(&prop), cfg, k, false).and_then(|run| {
                            MetricsReport::evaluate(
                                &run.model,
                                &bundle.test,
                                &[cfg.ndcg_k],
                                cfg.gain,
                                seed,
                            )
                        });
                    (seed, r)
                })
                .collect();
            let mut mses = Vec::new();
            for (_, r) in outs {
                match r {
                    Ok(rep) => {
                        mses.push(rep.mse);
                        rows.push(MetricsRow {
                            dataset: format!("movielens_min{mi}"),
                            propensity: kind.name().to_owned(),
                            method: method.name().to_owned(),
                            report: rep,
                        });
                    }
                    Err(e) if e.is_numerical() => report.failures += 1,
                    Err(e) => return Err(e),
                }
            }
            stats.push((mi, method, min_p, mses));
        }
    }
    // Relative MSE is against the min_items = 50 run, or the largest setting
    // when 50 is not in the list.
    let reference = |method: Method| {
        stats
            .iter()
            .filter(|s| s.1 == method && !s.3.is_empty())
            .max_by_key(|s| (s.0 == RQ1_REFERENCE, s.0))
            .map(|s| s.3.iter().sum::<f64>() / s.3.len() as f64)
    };
    let mut table = format!("{RQ1_HEADER}\n");
    for (mi, method, min_p, mses) in &stats {
        let n = mses.len();
        let (mean, se) = match n {
            0 => (String::new(), String::new()),
            1 => (mses[0].to_string(), String::new()),
            _ => {
                let s = MeanStderr::of(mses)?;
                (s.mean.to_string(), s.stderr.to_string())
            }
        };
        let rel = match (n, reference(*method)) {
            (1.., Some(r)) => (mses.iter().sum::<f64>() / n as f64 / r).to_string(),
            _ => String::new(),
        };
        let _ = writeln!(table, "{mi},{method},{min_p:.6},{n},{mean},{se},{rel}");
    }
    report.write(&cfg.output, "rq1.csv", &table)?;
    report.write(
        &cfg.output,
        "metrics.csv",
        &metrics::metrics_csv(&rows, cfg.ndcg_k),
    )?;
    report.summary = table;
    Ok(report)
}
