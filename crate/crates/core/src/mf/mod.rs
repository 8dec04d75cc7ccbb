//! Matrix factorization with user, item and global biases:
//! `r(u, i) = theta_u . beta_i + b_u + b_i + b`.

mod train;

use std::fmt::Write as _;

use rand_distr::{Distribution, Normal};

pub use train::{
    gradient, ips_samples, naive_samples, objective_value, pseudo_samples, train, train_samples,
    train_samples_with, Adam, Objective, Sample, TrainOutcome,
};

use crate::domain::{DenseMatrix, Predictor};
use crate::error::{Error, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;

/// Largest `m * n` that [`FactorModel::predict_matrix`] materializes by default.
pub const DEFAULT_MATRIX_LIMIT: usize = 1 << 26;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub l2: f64,
    pub dim: usize,
    pub epochs: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Early stopping on validation MSE; only used when validation data is given.
    pub patience: Option<usize>,
    /// Training aborts once the epoch objective exceeds this magnitude.
    pub divergence_limit: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 1024,
            l2: 1e-4,
            dim: 10,
            epochs: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            patience: Some(5),
            divergence_limit: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(msg.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if self.dim == 0 {
            return bad("latent dimension must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam moment decay must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("Adam epsilon must be positive");
        }
        if self.patience == Some(0) {
            return bad("patience must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel<F> {
    dim: usize,
    n_users: usize,
    n_items: usize,
    /// Row-major `n_users x dim`.
    pub(crate) user_factors: Vec<F>,
    /// Row-major `n_items x dim`.
    pub(crate) item_factors: Vec<F>,
    pub(crate) user_bias: Vec<F>,
    pub(crate) item_bias: Vec<F>,
    pub(crate) global_bias: F,
    /// Set once the global bias has been seeded with a mean target.
    pub(crate) global_initialized: bool,
}

impl<F: Scalar> FactorModel<F> {
    /// Factors i.i.d. `N(0, 1/d)`, zero biases. Deterministic in `config.seed`.
    pub fn init(n_users: usize, n_items: usize, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        if n_users == 0 || n_items == 0 {
            return Err(Error::invalid("model grid must be non-empty"));
        }
        let d = config.dim;
        let normal = Normal::new(0.0, 1.0 / (d as f64).sqrt()).expect("valid std");
        let mut rng = seeded(config.seed);
        let mut draw =
            |len: usize| -> Vec<F> { (0..len).map(|_| F::lit(normal.sample(&mut rng))).collect() };
        let user_factors = draw(n_users * d);
        let item_factors = draw(n_items * d);
        Ok(Self {
            dim: d,
            n_users,
            n_items,
            user_factors,
            item_factors,
            user_bias: vec![F::zero(); n_users],
            item_bias: vec![F::zero(); n_items],
            global_bias: F::zero(),
            global_initialized: false,
        })
    }

    /// All-zero model.
    pub fn zeros(n_users: usize, n_items: usize, dim: usize) -> Self {
        Self {
            dim,
            n_users,
            n_items,
            user_factors: vec![F::zero(); n_users * dim],
            item_factors: vec![F::zero(); n_items * dim],
            user_bias: vec![F::zero(); n_users],
            item_bias: vec![F::zero(); n_items],
            global_bias: F::zero(),
            global_initialized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn user_factor(&self, u: usize) -> &[F] {
        &self.user_factors[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_factor(&self, i: usize) -> &[F] {
        &self.item_factors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_factor_mut(&mut self, u: usize) -> &mut [F] {
        &mut self.user_factors[u * self.dim..(u + 1) * self.dim]
    }

    pub fn item_factor_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.item_factors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn user_bias_mut(&mut self) -> &mut [F] {
        &mut self.user_bias
    }

    pub fn item_bias_mut(&mut self) -> &mut [F] {
        &mut self.item_bias
    }

    pub fn global_bias(&self) -> F {
        self.global_bias
    }

    pub fn set_global_bias(&mut self, b: F) {
        self.global_bias = b;
        self.global_initialized = true;
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, u: usize, i: usize) -> F {
        let dot = self
            .user_factor(u)
            .iter()
            .zip(self.item_factor(i))
            .fold(F::zero(), |acc, (&a, &b)| acc + a * b);
        dot + self.user_bias[u] + self.item_bias[i] + self.global_bias
    }

    /// Unclamped prediction; out-of-range indices are an error, not a cold-start guess.
    pub fn predict(&self, u: usize, i: usize) -> Result<F> {
        if u >= self.n_users || i >= self.n_items {
            return Err(Error::invalid(format!(
                "pair ({u}, {i}) outside {}x{} model",
                self.n_users, self.n_items
            )));
        }
        Ok(self.predict_unchecked(u, i))
    }

    pub fn predict_matrix(&self) -> Result<DenseMatrix<F>> {
        self.predict_matrix_with_limit(DEFAULT_MATRIX_LIMIT)
    }

    pub fn predict_matrix_with_limit(&self, limit: usize) -> Result<DenseMatrix<F>> {
        let cells = self.n_users.saturating_mul(self.n_items);
        if cells > limit {
            return Err(Error::invalid(format!(
                "{cells} predictions exceed the materialization limit {limit}"
            )));
        }
        DenseMatrix::from_fn(self.n_users, self.n_items, |u, i| {
            self.predict_unchecked(u, i)
        })
    }

    pub fn n_params(&self) -> usize {
        (self.n_users + self.n_items) * (self.dim + 1) + 1
    }

    /// Parameters flattened as user factors, item factors, user biases, item biases, global bias.
    pub fn params(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.user_factors);
        out.extend_from_slice(&self.item_factors);
        out.extend_from_slice(&self.user_bias);
        out.extend_from_slice(&self.item_bias);
        out.push(self.global_bias);
        out
    }

    pub fn set_params(&mut self, p: &[F]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::invalid("parameter vector has the wrong length"));
        }
        let (uf, rest) = p.split_at(self.user_factors.len());
        let (itf, rest) = rest.split_at(self.item_factors.len());
        let (ub, rest) = rest.split_at(self.n_users);
        let (ib, rest) = rest.split_at(self.n_items);
        self.user_factors.copy_from_slice(uf);
        self.item_factors.copy_from_slice(itf);
        self.user_bias.copy_from_slice(ub);
        self.item_bias.copy_from_slice(ib);
        self.global_bias = rest[0];
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    pub fn l2_norm_sq(&self) -> F {
        self.user_factors
            .iter()
            .chain(&self.item_factors)
            .chain(&self.user_bias)
            .chain(&self.item_bias)
            .fold(F::zero(), |acc, &x| acc + x * x)
    }

    /// Text checkpoint: config echo, then every parameter block. Values use the
    /// shortest round-trip decimal form, so equal models give equal bytes.
    pub fn to_checkpoint(&self, config: &TrainConfig) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "factor-model v1");
        let _ = writeln!(
            out,
            "config lr={} batch={} l2={} dim={} epochs={} seed={} beta1={} beta2={} eps={}",
            config.learning_rate,
            config.batch_size,
            config.l2,
            config.dim,
            config.epochs,
            config.seed,
            config.beta1,
            config.beta2,
            config.epsilon
        );
        let _ = writeln!(out, "shape {} {} {}", self.n_users, self.n_items, self.dim);
        let block = |out: &mut String, name: &str, vals: &[F]| {
            out.push_str(name);
            for v in vals {
                let _ = write!(out, " {}", v.as_f64());
            }
            out.push('\n');
        };
        block(&mut out, "user_factors", &self.user_factors);
        block(&mut out, "item_factors", &self.item_factors);
        block(&mut out, "user_bias", &self.user_bias);
        block(&mut out, "item_bias", &self.item_bias);
        block(&mut out, "global_bias", &[self.global_bias]);
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let bad = |m: &str| Error::invalid(format!("checkpoint: {m}"));
        if lines.next() != Some("factor-model v1") {
            return Err(bad("missing header"));
        }
        lines.next().ok_or_else(|| bad("missing config line"))?;
        let shape: Vec<usize> = lines
            .next()
            .and_then(|l| l.strip_prefix("shape "))
            .ok_or_else(|| bad("missing shape"))?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad shape"))?;
        let [m, n, d] = shape[..] else {
            return Err(bad("shape needs three values"));
        };
        let mut model = Self::zeros(m, n, d);
        let mut block = |name: &str, len: usize| -> Result<Vec<F>> {
            let line = lines.next().ok_or_else(|| bad("truncated"))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(bad(&format!("expected block {name}")));
            }
            let vals: Vec<F> = parts
                .map(|s| s.parse::<f64>().map(F::lit))
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("bad number"))?;
            if vals.len() != len {
                return Err(bad(&format!(
                    "block {name} has {} values, expected {len}",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        model.user_factors = block("user_factors", m * d)?;
        model.item_factors = block("item_factors", n * d)?;
        model.user_bias = block("user_bias", m)?;
        model.item_bias = block("item_bias", n)?;
        model.global_bias = block("global_bias", 1)?[0];
        model.global_initialized = true;
        Ok(model)
    }
}

impl<F: Scalar> Predictor<F> for FactorModel<F> {
    fn n_users(&self) -> usize {
        self.n_users
    }
    fn n_items(&self) -> usize {
        self.n_items
    }
    fn rating(&self, user: usize, item: usize) -> F {
        self.predict_unchecked(user, item)
    }
}
