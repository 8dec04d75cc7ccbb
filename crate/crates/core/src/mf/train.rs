//! Mini-batch Adam training for [`FactorModel`].
//!
//! Every objective is a weighted squared error over samples. The L2 penalty is
//! charged per sample on the parameter rows it touches, so the full objective is
//!
//! `J = mean_j [ w_j (r_hat_j - y_j)^2 + l2 (|theta_u|^2 + |beta_i|^2 + b_u^2 + b_i^2) ]`
//!
//! and a mini-batch gradient is an unbiased estimate of `grad J`. The global
//! bias is not penalized.

use rand::seq::SliceRandom;

use super::{FactorModel, TrainConfig};
use crate::domain::{clamp_rating, PseudoLabeledSet, RatingDataset};
use crate::error::{Error, Result};
use crate::propensity::PropensityScore;
use crate::rng::{derive_seed, seeded};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample<F> {
    pub user: usize,
    pub item: usize,
    pub target: F,
    pub weight: F,
}

/// Which empirical loss over the observed ratings to minimize.
#[derive(Clone, Copy)]
pub enum Objective<'a, F: Scalar> {
    Naive,
    /// Inverse-propensity weighted.
    Ips(&'a dyn PropensityScore<F>),
}

pub fn naive_samples<F: Scalar>(ds: &RatingDataset) -> Vec<Sample<F>> {
    ds.records()
        .iter()
        .map(|r| Sample {
            user: r.user,
            item: r.item,
            target: F::lit(r.rating as f64),
            weight: F::one(),
        })
        .collect()
}

/// IPS samples with weight `(|O| / |D|) / P_hat(u, i)`.
///
/// The constant factor makes the mean over observed samples equal the IPS
/// estimate normalized by the full grid, so a uniform propensity of `|O|/|D|`
/// yields weight exactly 1 and reproduces naive training.
pub fn ips_samples<F: Scalar>(
    ds: &RatingDataset,
    prop: &(impl PropensityScore<F> + ?Sized),
) -> Result<Vec<Sample<F>>> {
    let observed_rate = F::from_usize_lossy(ds.len()) / F::from_usize_lossy(ds.grid_size());
    ds.records()
        .iter()
        .map(|r| {
            let p = prop.propensity(r.user, r.item, Some(r.rating))?;
            if !(p > F::zero()) {
                return Err(Error::DivisionHazard {
                    user: r.user,
                    item: r.item,
                    value: p.as_f64(),
                });
            }
            Ok(Sample {
                user: r.user,
                item: r.item,
                target: F::lit(r.rating as f64),
                weight: observed_rate / p,
            })
        })
        .collect()
}

pub fn pseudo_samples<F: Scalar>(set: &PseudoLabeledSet<F>) -> Vec<Sample<F>> {
    set.entries
        .iter()
        .map(|e| Sample {
            user: e.user,
            item: e.item,
            target: e.label,
            weight: F::one(),
        })
        .collect()
}

fn row_penalty<F: Scalar>(model: &FactorModel<F>, u: usize, i: usize) -> F {
    let sq = |v: &[F]| v.iter().fold(F::zero(), |a, &x| a + x * x);
    sq(model.user_factor(u))
        + sq(model.item_factor(i))
        + model.user_bias[u] * model.user_bias[u]
        + model.item_bias[i] * model.item_bias[i]
}

/// Full objective `J` over `samples`.
pub fn objective_value<F: Scalar>(model: &FactorModel<F>, samples: &[Sample<F>], l2: F) -> F {
    if samples.is_empty() {
        return F::zero();
    }
    let acc: CompensatedSum<F> = samples
        .iter()
        .map(|s| {
            let e = model.predict_unchecked(s.user, s.item) - s.target;
            s.weight * e * e + l2 * row_penalty(model, s.user, s.item)
        })
        .collect();
    acc.total() / F::from_usize_lossy(samples.len())
}

struct Layout {
    dim: usize,
    item_factors: usize,
    user_bias: usize,
    item_bias: usize,
    global: usize,
}

impl Layout {
    fn of<F: Scalar>(m: &FactorModel<F>) -> Self {
        let d = m.dim;
        let item_factors = m.n_users * d;
        let user_bias = item_factors + m.n_items * d;
        let item_bias = user_bias + m.n_users;
        Self {
            dim: d,
            item_factors,
            user_bias,
            item_bias,
            global: item_bias + m.n_items,
        }
    }
}

/// Adds `scale * grad J_batch` contributions of `batch` into `grad`
/// (flattened in [`FactorModel::params`] order).
fn accumulate<F: Scalar>(
    model: &FactorModel<F>,
    batch: &[Sample<F>],
    l2: F,
    grad: &mut [F],
    layout: &Layout,
) {
    let two = F::lit(2.0);
    let inv_b = F::one() / F::from_usize_lossy(batch.len());
    let reg = two * l2 * inv_b;
    let d = layout.dim;
    for s in batch {
        let (u, i) = (s.user, s.item);
        let e = model.predict_unchecked(u, i) - s.target;
        let g = two * s.weight * e * inv_b;
        let theta = model.user_factor(u);
        let beta = model.item_factor(i);
        for k in 0..d {
            grad[u * d + k] = grad[u * d + k] + g * beta[k] + reg * theta[k];
            let ik = layout.item_factors + i * d + k;
            grad[ik] = grad[ik] + g * theta[k] + reg * beta[k];
        }
        let ub = layout.user_bias + u;
        grad[ub] = grad[ub] + g + reg * model.user_bias[u];
        let ib = layout.item_bias + i;
        grad[ib] = grad[ib] + g + reg * model.item_bias[i];
        grad[layout.global] = grad[layout.global] + g;
    }
}

/// Analytic full-batch gradient of [`objective_value`], flattened like
/// [`FactorModel::params`].
pub fn gradient<F: Scalar>(model: &FactorModel<F>, samples: &[Sample<F>], l2: F) -> Vec<F> {
    let mut grad = vec![F::zero(); model.n_params()];
    if !samples.is_empty() {
        accumulate(model, samples, l2, &mut grad, &Layout::of(model));
    }
    grad
}

/// Adam moments for one model. Rows untouched by a batch keep their moments
/// (lazy update); the step counter is global.
#[derive(Clone, Debug)]
pub struct Adam<F> {
    m: Vec<F>,
    v: Vec<F>,
    t: i32,
}

impl<F: Scalar> Adam<F> {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![F::zero(); n_params],
            v: vec![F::zero(); n_params],
            t: 0,
        }
    }

    pub fn for_model(model: &FactorModel<F>) -> Self {
        Self::new(model.n_params())
    }
}

struct StepBuffers<F> {
    grad: Vec<F>,
    user_touched: Vec<bool>,
    item_touched: Vec<bool>,
    users: Vec<usize>,
    items: Vec<usize>,
}

#[allow(clippy::too_many_arguments)]
fn adam_update<F: Scalar>(
    params: &mut [F],
    grads: &mut [F],
    m: &mut [F],
    v: &mut [F],
    lr: F,
    b1: F,
    b2: F,
    eps: F,
    c1: F,
    c2: F,
) {
    for k in 0..params.len() {
        let g = grads[k];
        m[k] = b1 * m[k] + (F::one() - b1) * g;
        v[k] = b2 * v[k] + (F::one() - b2) * g * g;
        let m_hat = m[k] / c1;
        let v_hat = v[k] / c2;
        params[k] = params[k] - lr * m_hat / (v_hat.sqrt() + eps);
        grads[k] = F::zero();
    }
}

fn step<F: Scalar>(
    model: &mut FactorModel<F>,
    adam: &mut Adam<F>,
    batch: &[Sample<F>],
    cfg: &TrainConfig,
    buf: &mut StepBuffers<F>,
    layout: &Layout,
) {
    let l2 = F::lit(cfg.l2);
    accumulate(model, batch, l2, &mut buf.grad, layout);
    for s in batch {
        if !buf.user_touched[s.user] {
            buf.user_touched[s.user] = true;
            buf.users.push(s.user);
        }
        if !buf.item_touched[s.item] {
            buf.item_touched[s.item] = true;
            buf.items.push(s.item);
        }
    }
    adam.t += 1;
    let (b1, b2) = (F::lit(cfg.beta1), F::lit(cfg.beta2));
    let c1 = F::one() - b1.powi(adam.t);
    let c2 = F::one() - b2.powi(adam.t);
    let (lr, eps) = (F::lit(cfg.learning_rate), F::lit(cfg.epsilon));
    let d = layout.dim;
    let upd =
        |params: &mut [F], off: usize, len: usize, buf: &mut StepBuffers<F>, adam: &mut Adam<F>| {
            adam_update(
                params,
                &mut buf.grad[off..off + len],
                &mut adam.m[off..off + len],
                &mut adam.v[off..off + len],
                lr,
                b1,
                b2,
                eps,
                c1,
                c2,
            );
        };
    let users = std::mem::take(&mut buf.users);
    for &u in &users {
        upd(
            &mut model.user_factors[u * d..(u + 1) * d],
            u * d,
            d,
            buf,
            adam,
        );
        upd(
            std::slice::from_mut(&mut model.user_bias[u]),
            layout.user_bias + u,
            1,
            buf,
            adam,
        );
        buf.user_touched[u] = false;
    }
    let items = std::mem::take(&mut buf.items);
    for &i in &items {
        upd(
            &mut model.item_factors[i * d..(i + 1) * d],
            layout.item_factors + i * d,
            d,
            buf,
            adam,
        );
        upd(
            std::slice::from_mut(&mut model.item_bias[i]),
            layout.item_bias + i,
            1,
            buf,
            adam,
        );
        buf.item_touched[i] = false;
    }
    upd(
        std::slice::from_mut(&mut model.global_bias),
        layout.global,
        1,
        buf,
        adam,
    );
    buf.users = users;
    buf.items = items;
    buf.users.clear();
    buf.items.clear();
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainOutcome<F> {
    /// Full training objective after each epoch.
    pub trace: Vec<F>,
    /// Validation MSE after each epoch, when validation data was given.
    pub validation_trace: Vec<F>,
    /// Epoch (0-based) whose parameters were kept under early stopping.
    pub best_epoch: Option<usize>,
}

fn validation_mse<F: Scalar>(model: &FactorModel<F>, val: &RatingDataset) -> F {
    let acc: CompensatedSum<F> = val
        .records()
        .iter()
        .map(|r| {
            let e = clamp_rating(model.predict_unchecked(r.user, r.item)) - F::lit(r.rating as f64);
            e * e
        })
        .collect();
    acc.total() / F::from_usize_lossy(val.len())
}

/// Trains on explicit samples with a fresh optimizer.
pub fn train_samples<F: Scalar>(
    model: &mut FactorModel<F>,
    samples: &[Sample<F>],
    cfg: &TrainConfig,
    validation: Option<&RatingDataset>,
) -> Result<TrainOutcome<F>> {
    let mut adam = Adam::for_model(model);
    train_samples_with(model, &mut adam, samples, cfg, validation)
}

/// Trains on explicit samples, continuing from the given optimizer state.
pub fn train_samples_with<F: Scalar>(
    model: &mut FactorModel<F>,
    adam: &mut Adam<F>,
    samples: &[Sample<F>],
    cfg: &TrainConfig,
    validation: Option<&RatingDataset>,
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::empty("no training samples"));
    }
    for s in samples {
        if s.user >= model.n_users || s.item >= model.n_items {
            return Err(Error::invalid(format!(
                "sample ({}, {}) outside model grid",
                s.user, s.item
            )));
        }
    }
    let mut outcome = TrainOutcome::default();
    if cfg.epochs == 0 {
        return Ok(outcome);
    }
    if !model.global_initialized {
        let mean = samples
            .iter()
            .map(|s| s.target)
            .collect::<CompensatedSum<F>>()
            .total()
            / F::from_usize_lossy(samples.len());
        model.set_global_bias(mean);
    }
    let layout = Layout::of(model);
    let mut buf = StepBuffers {
        grad: vec![F::zero(); model.n_params()],
        user_touched: vec![false; model.n_users],
        item_touched: vec![false; model.n_items],
        users: Vec::new(),
        items: Vec::new(),
    };
    let validation = validation.filter(|v| !v.is_empty() && cfg.patience.is_some());
    let mut best: Option<(F, Vec<F>, usize)> = None;
    let mut since_best = 0;
    let l2 = F::lit(cfg.l2);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size.min(samples.len()));
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seeded(derive_seed(cfg.seed, epoch as u64)));
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&k| samples[k]));
            step(model, adam, &batch, cfg, &mut buf, &layout);
        }
        let obj = objective_value(model, samples, l2);
        if !obj.is_finite() || obj.abs().as_f64() > cfg.divergence_limit {
            return Err(Error::TrainingDiverged {
                epoch,
                objective: obj.as_f64(),
            });
        }
        outcome.trace.push(obj);
        if let Some(val) = validation {
            let score = validation_mse(model, val);
            outcome.validation_trace.push(score);
            let improved = best.as_ref().is_none_or(|(b, _, _)| score < *b);
            if improved {
                best = Some((score, model.params(), epoch));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.patience.unwrap_or(usize::MAX) {
                    break;
                }
            }
        }
    }
    if let Some((_, params, epoch)) = best {
        model.set_params(&params)?;
        outcome.best_epoch = Some(epoch);
    }
    Ok(outcome)
}

/// Trains `model` on `data` under `objective`.
pub fn train<F: Scalar>(
    model: &mut FactorModel<F>,
    data: &RatingDataset,
    objective: Objective<'_, F>,
    cfg: &TrainConfig,
    validation: Option<&RatingDataset>,
) -> Result<TrainOutcome<F>> {
    data.ensure_nonempty("training data")?;
    if (data.n_users(), data.n_items()) != (model.n_users, model.n_items) {
        return Err(Error::invalid(
            "training data grid does not match the model",
        ));
    }
    let samples = match objective {
        Objective::Naive => naive_samples(data),
        Objective::Ips(prop) => ips_samples(data, prop)?,
    };
    train_samples(model, &samples, cfg, validation)
}
