//! Pointwise losses and the four loss estimators (ideal, naive, IPS, pseudo).

use std::fmt;
use std::str::FromStr;

use crate::domain::{check_shape, clamp_rating, Predictor, PseudoLabeledSet, RatingDataset};
use crate::error::{Error, Result};
use crate::propensity::PropensityScore;
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LossKind {
    Absolute,
    Squared,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::Absolute => "absolute",
            LossKind::Squared => "squared",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "absolute" | "abs" | "mae" => Ok(LossKind::Absolute),
            "squared" | "sq" | "mse" => Ok(LossKind::Squared),
            other => Err(Error::invalid(format!("unknown loss `{other}`"))),
        }
    }
}

/// A loss on a pair of ratings together with its upper bound `delta` on the
/// clamped rating range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointwiseLoss<F> {
    pub kind: LossKind,
    pub delta: F,
}

impl<F: Scalar> PointwiseLoss<F> {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            delta: Self::natural_delta(kind),
        }
    }

    pub fn absolute() -> Self {
        Self::new(LossKind::Absolute)
    }

    pub fn squared() -> Self {
        Self::new(LossKind::Squared)
    }

    /// Overrides the bound. Bound verification refuses values below the natural one.
    pub fn with_delta(mut self, delta: F) -> Self {
        self.delta = delta;
        self
    }

    /// Largest loss attainable between two values in `[1, 5]`.
    pub fn natural_delta(kind: LossKind) -> F {
        match kind {
            LossKind::Absolute => F::lit(4.0),
            LossKind::Squared => F::lit(16.0),
        }
    }

    pub fn eval(&self, x: F, y: F) -> F {
        let d = x - y;
        match self.kind {
            LossKind::Absolute => d.abs(),
            LossKind::Squared => d * d,
        }
    }

    /// Exhaustive check of `l(x,z) <= l(x,y) + l(y,z)` on the half-step grid
    /// `{1.0, 1.5, ..., 5.0}^3`.
    pub fn satisfies_triangle(&self) -> bool {
        let grid: Vec<F> = (0..9).map(|k| F::lit(1.0 + 0.5 * k as f64)).collect();
        let slack = F::lit(1e-9);
        grid.iter().all(|&x| {
            grid.iter().all(|&y| {
                grid.iter()
                    .all(|&z| self.eval(x, z) <= self.eval(x, y) + self.eval(y, z) + slack)
            })
        })
    }
}

/// `(1/|D|) * sum over D of l(truth, pred)`.
///
/// `truth` may itself be a predictor, which gives the full-grid loss between
/// two predictors used by the bound terms.
pub fn ideal_loss<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    truth: &(impl Predictor<F> + ?Sized),
    loss: &PointwiseLoss<F>,
) -> Result<F> {
    let (m, n) = (truth.n_users(), truth.n_items());
    check_shape(pred, m, n)?;
    if m == 0 || n == 0 {
        return Err(Error::empty("empty grid"));
    }
    let mut acc = CompensatedSum::new();
    for u in 0..m {
        for i in 0..n {
            acc.add(loss.eval(
                clamp_rating(truth.rating(u, i)),
                clamp_rating(pred.rating(u, i)),
            ));
        }
    }
    Ok(acc.total() / F::from_usize_lossy(m * n))
}

/// Average loss over the observed ratings.
pub fn naive_loss<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    observed: &RatingDataset,
    loss: &PointwiseLoss<F>,
) -> Result<F> {
    check_shape(pred, observed.n_users(), observed.n_items())?;
    observed.ensure_nonempty("observed set")?;
    let total: CompensatedSum<F> = observed
        .records()
        .iter()
        .map(|r| {
            loss.eval(
                F::lit(r.rating as f64),
                clamp_rating(pred.rating(r.user, r.item)),
            )
        })
        .collect();
    Ok(total.total() / F::from_usize_lossy(observed.len()))
}

/// Inverse-propensity-weighted loss, normalized by the full grid size `m * n`.
pub fn ips_loss<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    observed: &RatingDataset,
    prop: &(impl PropensityScore<F> + ?Sized),
    loss: &PointwiseLoss<F>,
) -> Result<F> {
    check_shape(pred, observed.n_users(), observed.n_items())?;
    let mut acc = CompensatedSum::new();
    for r in observed.records() {
        let p = prop.propensity(r.user, r.item, Some(r.rating))?;
        if !(p > F::zero()) {
            return Err(Error::DivisionHazard {
                user: r.user,
                item: r.item,
                value: p.as_f64(),
            });
        }
        let l = loss.eval(
            F::lit(r.rating as f64),
            clamp_rating(pred.rating(r.user, r.item)),
        );
        acc.add(l / p);
    }
    Ok(acc.total() / F::from_usize_lossy(observed.grid_size()))
}

/// Average loss of `pred` against the pseudo-labels.
pub fn pseudo_loss<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    pseudo: &PseudoLabeledSet<F>,
    loss: &PointwiseLoss<F>,
) -> Result<F> {
    if pseudo.is_empty() {
        return Err(Error::empty("pseudo-labeled set"));
    }
    let (m, n) = (pred.n_users(), pred.n_items());
    let mut acc = CompensatedSum::new();
    for e in &pseudo.entries {
        if e.user >= m || e.item >= n {
            return Err(Error::invalid(format!(
                "pseudo pair ({}, {}) outside predictor grid",
                e.user, e.item
            )));
        }
        acc.add(loss.eval(
            clamp_rating(pred.rating(e.user, e.item)),
            clamp_rating(e.label),
        ));
    }
    Ok(acc.total() / F::from_usize_lossy(pseudo.len()))
}
