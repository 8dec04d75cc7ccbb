//! Synthetic MNAR instances with known ratings and propensities, and the
//! Monte Carlo harness that checks the estimators and bounds against them.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::bounds::{bound_terms, ips_bound};
use crate::datasets::write_canonical;
use crate::domain::{DenseMatrix, InteractionRecord, RatingDataset, MAX_RATING, MIN_RATING};
use crate::error::{Error, Result};
use crate::loss::{ideal_loss, ips_loss, naive_loss, LossKind, PointwiseLoss};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;
use crate::tri::make_pseudo_labels;

/// Largest grid side [`generate`] accepts.
pub const MAX_SIDE: usize = 200;
/// Fewest trials for a normal-approximation confidence interval.
pub const MIN_TRIALS: usize = 1000;
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams {
    pub n_users: usize,
    pub n_items: usize,
    pub rank: usize,
    /// Item popularity `~ popularity_rank^(-skew)`.
    pub skew: f64,
    /// Observation odds grow by `exp(correlation * (r - 3))` with the true rating.
    pub correlation: f64,
    /// Largest propensity.
    pub base_rate: f64,
    /// Lower end of the propensity range; every propensity exceeds it.
    pub p_min: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            n_users: 10,
            n_items: 10,
            rank: 2,
            skew: 1.0,
            correlation: 1.0,
            base_rate: 0.9,
            p_min: 0.05,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 || self.rank == 0 {
            return Err(Error::invalid("grid sides and rank must be positive"));
        }
        if self.n_users > MAX_SIDE || self.n_items > MAX_SIDE {
            return Err(Error::invalid(format!(
                "grid sides are limited to {MAX_SIDE}"
            )));
        }
        if !(self.p_min > 0.0) {
            return Err(Error::invalid("p_min must be positive"));
        }
        if !(self.base_rate > self.p_min && self.base_rate <= 1.0) {
            return Err(Error::invalid("base_rate must lie in (p_min, 1]"));
        }
        if !(self.skew.is_finite() && self.correlation.is_finite()) {
            return Err(Error::invalid("skew and correlation must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticInstance<F> {
    /// Real-valued ratings in `[1, 5]`.
    pub truth: DenseMatrix<F>,
    pub propensity: DenseMatrix<F>,
    pub seed: u64,
    pub params: Option<SyntheticParams>,
}

impl<F: Scalar> SyntheticInstance<F> {
    /// Instance from explicit grids, e.g. a constant propensity.
    pub fn new(truth: DenseMatrix<F>, propensity: DenseMatrix<F>, seed: u64) -> Result<Self> {
        if (truth.rows(), truth.cols()) != (propensity.rows(), propensity.cols()) {
            return Err(Error::invalid("truth and propensity grids differ in shape"));
        }
        let (lo, hi) = (F::lit(MIN_RATING as f64), F::lit(MAX_RATING as f64));
        if truth.values().iter().any(|&r| r < lo || r > hi) {
            return Err(Error::invalid("truth ratings must lie in [1, 5]"));
        }
        if propensity
            .values()
            .iter()
            .any(|&p| !(p >= F::zero() && p <= F::one()))
        {
            return Err(Error::invalid("propensities must lie in [0, 1]"));
        }
        Ok(Self {
            truth,
            propensity,
            seed,
            params: None,
        })
    }

    /// The ratings observations report: truth rounded to the nearest level.
    pub fn observed_truth(&self) -> DenseMatrix<F> {
        DenseMatrix::from_fn(self.truth.rows(), self.truth.cols(), |u, i| {
            F::lit(round_rating(self.truth.get(u, i).as_f64()) as f64)
        })
        .expect("rounded grid is finite")
    }

    pub fn n_users(&self) -> usize {
        self.truth.rows()
    }

    pub fn n_items(&self) -> usize {
        self.truth.cols()
    }
}

fn round_rating(r: f64) -> u8 {
    r.round().clamp(MIN_RATING as f64, MAX_RATING as f64) as u8
}

pub fn generate<F: Scalar>(params: &SyntheticParams, seed: u64) -> Result<SyntheticInstance<F>> {
    params.validate()?;
    let (m, n, d) = (params.n_users, params.n_items, params.rank);
    let mut rng = seeded(seed);
    let mut draw =
        |len: usize| -> Vec<f64> { (0..len).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let uf = draw(m * d);
    let vf = draw(n * d);
    let raw: Vec<f64> = (0..m * n)
        .map(|k| {
            let (u, i) = (k / n, k % n);
            (0..d).map(|j| uf[u * d + j] * vf[i * d + j]).sum()
        })
        .collect();
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let truth: Vec<f64> = raw
        .iter()
        .map(|&x| {
            let t = if span > 0.0 { (x - lo) / span } else { 0.5 };
            (1.0 + 4.0 * t).clamp(1.0, 5.0)
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut popularity = vec![0.0; n];
    for (rank, &item) in order.iter().enumerate() {
        popularity[item] = ((rank + 1) as f64).powf(-params.skew);
    }
    let score: Vec<f64> = (0..m * n)
        .map(|k| popularity[k % n] * (params.correlation * (truth[k] - 3.0)).exp())
        .collect();
    let top = score.iter().copied().fold(0.0, f64::max);
    let prop: Vec<F> = score
        .iter()
        .map(|&s| F::lit(params.p_min + (params.base_rate - params.p_min) * s / top))
        .collect();
    let truth = truth.into_iter().map(F::lit).collect();
    Ok(SyntheticInstance {
        truth: DenseMatrix::new(m, n, truth)?,
        propensity: DenseMatrix::new(m, n, prop)?,
        seed,
        params: Some(params.clone()),
    })
}

/// Independent Bernoulli(P) draw of every pair, rating rounded from the truth.
pub fn sample_observations<F: Scalar>(inst: &SyntheticInstance<F>, seed: u64) -> RatingDataset {
    let (m, n) = (inst.n_users(), inst.n_items());
    let mut rng = seeded(seed);
    let mut records = Vec::new();
    for u in 0..m {
        for i in 0..n {
            let p = inst.propensity.get(u, i).as_f64();
            if rng.random::<f64>() < p {
                records.push(InteractionRecord::new(
                    u,
                    i,
                    round_rating(inst.truth.get(u, i).as_f64()),
                ));
            }
        }
    }
    RatingDataset::new(m, n, records).expect("grid pairs are distinct and in range")
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// 95% normal-approximation radius.
    pub ci_radius: f64,
}

impl MonteCarloEstimate {
    fn of(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(
                "confidence interval needs at least two trials",
            ));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        Ok(Self {
            mean,
            stderr,
            ci_radius: Z95 * stderr,
        })
    }

    pub fn covers(&self, value: f64) -> bool {
        (self.mean - value).abs() <= self.ci_radius
    }

    /// `|mean - value|` in units of the standard error.
    pub fn z_score(&self, value: f64) -> f64 {
        (self.mean - value).abs() / self.stderr
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasStudy {
    /// Ideal loss against the rounded truth that observations report.
    pub ideal: f64,
    pub naive: MonteCarloEstimate,
    pub ips: MonteCarloEstimate,
    pub trials: usize,
    /// Trials with no observed pair, left out of both estimates.
    pub skipped: usize,
}

/// Naive and IPS (true propensities) estimates over `n_trials` resampled observation sets.
pub fn estimator_bias_study<F: Scalar>(
    inst: &SyntheticInstance<F>,
    pred: &DenseMatrix<F>,
    loss: &PointwiseLoss<F>,
    n_trials: usize,
    seed: u64,
) -> Result<BiasStudy> {
    if n_trials < MIN_TRIALS {
        return Err(Error::invalid(format!(
            "bias study needs at least {MIN_TRIALS} trials, got {n_trials}"
        )));
    }
    if inst.propensity.values().iter().any(|&p| !(p > F::zero())) {
        return Err(Error::invalid("IPS needs strictly positive propensities"));
    }
    let truth = inst.observed_truth();
    let ideal = ideal_loss(pred, &truth, loss)?.as_f64();
    let results: Vec<Option<(f64, f64)>> = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let obs = sample_observations(inst, derive_seed(seed, t as u64));
            if obs.is_empty() {
                return Ok(None);
            }
            let naive = naive_loss(pred, &obs, loss)?.as_f64();
            let ips = ips_loss(pred, &obs, &inst.propensity, loss)?.as_f64();
            Ok(Some((naive, ips)))
        })
        .collect::<Result<_>>()?;
    let kept: Vec<(f64, f64)> = results.iter().flatten().copied().collect();
    let naive: Vec<f64> = kept.iter().map(|p| p.0).collect();
    let ips: Vec<f64> = kept.iter().map(|p| p.1).collect();
    Ok(BiasStudy {
        ideal,
        naive: MonteCarloEstimate::of(&naive)?,
        ips: MonteCarloEstimate::of(&ips)?,
        trials: n_trials,
        skipped: n_trials - kept.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub trials: usize,
    pub delta: f64,
    pub seed: u64,
    /// Bounds use this loss; its `delta` must not undercut the natural bound.
    pub loss: LossKind,
    pub loss_bound: Option<f64>,
    /// Log-normal noise on the estimated propensities; 0 means exact.
    pub propensity_noise: f64,
    /// Noise scale of the random predictors around the truth.
    pub predictor_noise: f64,
    pub epsilon: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            delta: 0.05,
            seed: 0,
            loss: LossKind::Absolute,
            loss_bound: None,
            propensity_noise: 0.0,
            predictor_noise: 0.5,
            epsilon: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundVerification {
    pub trials: usize,
    pub ips_passes: usize,
    /// Trials whose propensity bias term was exactly 0.
    pub ips_zero_bias: usize,
    pub pseudo_passes: usize,
    /// Trials skipped because the predictors agreed nowhere within epsilon.
    pub pseudo_skipped: usize,
}

impl BoundVerification {
    pub fn ips_fraction(&self) -> f64 {
        self.ips_passes as f64 / self.trials as f64
    }

    pub fn pseudo_fraction(&self) -> f64 {
        let run = self.trials - self.pseudo_skipped;
        if run == 0 {
            return 0.0;
        }
        self.pseudo_passes as f64 / run as f64
    }

    pub fn report(&self) -> String {
        let mut out = String::from("bound,trials,passes,fraction\n");
        let _ = writeln!(
            out,
            "ips,{},{},{}",
            self.trials,
            self.ips_passes,
            self.ips_fraction()
        );
        let _ = writeln!(
            out,
            "pseudo,{},{},{}",
            self.trials - self.pseudo_skipped,
            self.pseudo_passes,
            self.pseudo_fraction()
        );
        out
    }
}

struct TrialOutcome {
    ips_pass: bool,
    ips_zero_bias: bool,
    pseudo: Option<bool>,
}

/// Seeded trials of both bounds with the truth known.
///
/// Each trial draws observations, random predictors scattered around the
/// truth, and (optionally noisy) estimated propensities, then checks
/// `lhs <= rhs` for a single-hypothesis class.
pub fn verify_bounds<F: Scalar>(
    inst: &SyntheticInstance<F>,
    opts: &VerifyOptions,
) -> Result<BoundVerification> {
    if opts.trials == 0 {
        return Err(Error::invalid("trial count must be positive"));
    }
    let natural = PointwiseLoss::<F>::natural_delta(opts.loss);
    let loss = match opts.loss_bound {
        Some(b) => PointwiseLoss::new(opts.loss).with_delta(F::lit(b)),
        None => PointwiseLoss::new(opts.loss),
    };
    if loss.delta < natural {
        return Err(Error::invalid(format!(
            "loss bound {} is below the attainable loss {}",
            loss.delta, natural
        )));
    }
    if inst.propensity.values().iter().any(|&p| !(p > F::zero())) {
        return Err(Error::invalid(
            "bound verification needs positive propensities",
        ));
    }
    let (m, n) = (inst.n_users(), inst.n_items());
    let truth = inst.observed_truth();
    let outcomes: Vec<TrialOutcome> = (0..opts.trials)
        .into_par_iter()
        .map(|t| -> Result<TrialOutcome> {
            let seed = derive_seed(opts.seed, t as u64);
            let obs = sample_observations(inst, derive_seed(seed, 0));
            let mut rng = seeded(derive_seed(seed, 1));
            let mut noisy = |base: &DenseMatrix<F>, scale: f64| {
                DenseMatrix::from_fn(m, n, |u, i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    F::lit((base.get(u, i).as_f64() + scale * z).clamp(1.0, 5.0))
                })
            };
            let a2 = noisy(&truth, opts.predictor_noise)?;
            let a1 = noisy(&a2, opts.predictor_noise * 0.5)?;
            let a3 = noisy(&a1, opts.predictor_noise * 0.5)?;
            let estimated = if opts.propensity_noise > 0.0 {
                DenseMatrix::from_fn(m, n, |u, i| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let p = inst.propensity.get(u, i).as_f64() * (opts.propensity_noise * z).exp();
                    F::lit(p.min(1.0))
                })?
            } else {
                inst.propensity.clone()
            };
            // An empty observation set has IPS estimate 0 and still counts.
            let ips = ips_bound(
                &a3,
                &obs,
                &estimated,
                &inst.propensity,
                &loss,
                1,
                opts.delta,
                Some(&truth),
            )?;
            let pseudo = if loss.satisfies_triangle() {
                let pairs = (0..m * n).map(|k| (k / n, k % n));
                match make_pseudo_labels(&a1, &a2, pairs, F::lit(opts.epsilon), t) {
                    Ok(pseudo) => {
                        let r = bound_terms(
                            &a1,
                            &a2,
                            &a3,
                            &pseudo,
                            &loss,
                            1,
                            opts.delta,
                            Some(&truth),
                        )?;
                        r.holds
                    }
                    Err(Error::EmptyPseudoSet { .. }) => None,
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            Ok(TrialOutcome {
                ips_pass: ips.holds == Some(true),
                ips_zero_bias: ips.bias == F::zero(),
                pseudo,
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundVerification {
        trials: opts.trials,
        ips_passes: outcomes.iter().filter(|o| o.ips_pass).count(),
        ips_zero_bias: outcomes.iter().filter(|o| o.ips_zero_bias).count(),
        pseudo_passes: outcomes.iter().filter(|o| o.pseudo == Some(true)).count(),
        pseudo_skipped: outcomes.iter().filter(|o| o.pseudo.is_none()).count(),
    })
}

/// Rows of space-separated reals, one row per user.
pub fn grid_to_string<F: Scalar>(grid: &DenseMatrix<F>) -> String {
    let mut out = String::new();
    for u in 0..grid.rows() {
        let row: Vec<String> = (0..grid.cols())
            .map(|i| grid.get(u, i).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_grid<F: Scalar>(text: &str) -> Result<DenseMatrix<F>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map(F::lit)
                    .map_err(|_| Error::invalid(format!("line {}: bad number {t:?}", no + 1)))
            })
            .collect::<Result<Vec<F>>>()?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(Error::invalid(format!("line {}: ragged grid row", no + 1)));
        }
        values.extend(row);
        rows += 1;
    }
    DenseMatrix::new(rows, cols.unwrap_or(0), values)
}

/// Writes `truth.txt` (canonical dataset of the rounded ratings),
/// `truth.ascii` (real-valued ratings) and `propensity.ascii` into `dir`.
pub fn write_instance<F: Scalar>(inst: &SyntheticInstance<F>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (m, n) = (inst.n_users(), inst.n_items());
    let records = (0..m * n)
        .map(|k| {
            let (u, i) = (k / n, k % n);
            InteractionRecord::new(u, i, round_rating(inst.truth.get(u, i).as_f64()))
        })
        .collect();
    write_canonical(&RatingDataset::new(m, n, records)?, &dir.join("truth.txt"))?;
    for (name, grid) in [
        ("truth.ascii", &inst.truth),
        ("propensity.ascii", &inst.propensity),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, grid_to_string(grid)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
