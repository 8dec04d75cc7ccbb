//! Observed ratings, dense rating grids and the predictor abstraction.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MIN_RATING: u8 = 1;
pub const MAX_RATING: u8 = 5;
pub const N_RATING_LEVELS: usize = 5;

/// Clamps a prediction into the rating range `[1, 5]`.
pub fn clamp_rating<F: Scalar>(x: F) -> F {
    x.max(F::lit(MIN_RATING as f64))
        .min(F::lit(MAX_RATING as f64))
}

pub fn check_rating(r: u8) -> Result<()> {
    if (MIN_RATING..=MAX_RATING).contains(&r) {
        Ok(())
    } else {
        Err(Error::invalid(format!("rating {r} outside 1..=5")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InteractionRecord {
    pub user: usize,
    pub item: usize,
    pub rating: u8,
}

impl InteractionRecord {
    pub fn new(user: usize, item: usize, rating: u8) -> Self {
        Self { user, item, rating }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.user, self.item)
    }
}

/// Sparse observed ratings over an `n_users x n_items` grid.
///
/// The grid size is part of the dataset: IPS normalizes by `n_users * n_items`,
/// never by the number of records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatingDataset {
    n_users: usize,
    n_items: usize,
    records: Vec<InteractionRecord>,
    repeats: bool,
}

impl RatingDataset {
    /// Builds a dataset; rejects duplicate pairs, out-of-range indices and ratings.
    pub fn new(n_users: usize, n_items: usize, records: Vec<InteractionRecord>) -> Result<Self> {
        Self::validate(n_users, n_items, &records)?;
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.key()) {
                return Err(Error::invalid(format!(
                    "duplicate pair ({}, {})",
                    r.user, r.item
                )));
            }
        }
        Ok(Self {
            n_users,
            n_items,
            records,
            repeats: false,
        })
    }

    /// Builds a multiset of records, as produced by resampling with replacement.
    /// Only evaluation code should consume such datasets.
    pub fn with_repeats(
        n_users: usize,
        n_items: usize,
        records: Vec<InteractionRecord>,
    ) -> Result<Self> {
        Self::validate(n_users, n_items, &records)?;
        Ok(Self {
            n_users,
            n_items,
            records,
            repeats: true,
        })
    }

    fn validate(n_users: usize, n_items: usize, records: &[InteractionRecord]) -> Result<()> {
        if n_users == 0 || n_items == 0 {
            return Err(Error::invalid("dataset grid must be non-empty"));
        }
        for r in records {
            check_rating(r.rating)?;
            if r.user >= n_users || r.item >= n_items {
                return Err(Error::invalid(format!(
                    "pair ({}, {}) outside {}x{} grid",
                    r.user, r.item, n_users, n_items
                )));
            }
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    /// `|D| = m * n`.
    pub fn grid_size(&self) -> usize {
        self.n_users * self.n_items
    }

    pub fn records(&self) -> &[InteractionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_repeats(&self) -> bool {
        self.repeats
    }

    pub fn user_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_users];
        for r in &self.records {
            counts[r.user] += 1;
        }
        counts
    }

    pub fn item_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_items];
        for r in &self.records {
            counts[r.item] += 1;
        }
        counts
    }

    /// Per-rating counts, index 0 holds rating 1.
    pub fn rating_counts(&self) -> [usize; N_RATING_LEVELS] {
        let mut counts = [0; N_RATING_LEVELS];
        for r in &self.records {
            counts[(r.rating - MIN_RATING) as usize] += 1;
        }
        counts
    }

    pub fn mean_rating(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let total: u64 = self.records.iter().map(|r| r.rating as u64).sum();
        Some(total as f64 / self.records.len() as f64)
    }

    pub fn ensure_nonempty(&self, what: &str) -> Result<()> {
        if self.records.is_empty() {
            Err(Error::empty(format!("{what} has no records")))
        } else {
            Ok(())
        }
    }
}

/// Rating function over a user/item grid.
pub trait Predictor<F: Scalar> {
    fn n_users(&self) -> usize;
    fn n_items(&self) -> usize;

    /// Unclamped prediction. Indices must lie inside the grid.
    fn rating(&self, user: usize, item: usize) -> F;
}

impl<F: Scalar, P: Predictor<F> + ?Sized> Predictor<F> for &P {
    fn n_users(&self) -> usize {
        (**self).n_users()
    }
    fn n_items(&self) -> usize {
        (**self).n_items()
    }
    fn rating(&self, user: usize, item: usize) -> F {
        (**self).rating(user, item)
    }
}

/// Fully populated `rows x cols` grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<F> {
    rows: usize,
    cols: usize,
    values: Vec<F>,
}

impl<F: Scalar> DenseMatrix<F> {
    pub fn new(rows: usize, cols: usize, values: Vec<F>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix must be non-empty"));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} values for {}x{} matrix, got {}",
                rows * cols,
                rows,
                cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix entries must be finite"));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn filled(rows: usize, cols: usize, value: F) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for u in 0..rows {
            for i in 0..cols {
                values.push(f(u, i));
            }
        }
        Self::new(rows, cols, values)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> F {
        self.values[row * self.cols + col]
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Result<Self> {
        Self::new(
            self.rows,
            self.cols,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }
}

impl<F: Scalar> Predictor<F> for DenseMatrix<F> {
    fn n_users(&self) -> usize {
        self.rows
    }
    fn n_items(&self) -> usize {
        self.cols
    }
    fn rating(&self, user: usize, item: usize) -> F {
        self.get(user, item)
    }
}

/// Predicts the same value everywhere. Handy as a baseline and test double.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPredictor<F> {
    pub n_users: usize,
    pub n_items: usize,
    pub value: F,
}

impl<F: Scalar> ConstantPredictor<F> {
    pub fn new(n_users: usize, n_items: usize, value: F) -> Self {
        Self {
            n_users,
            n_items,
            value,
        }
    }
}

impl<F: Scalar> Predictor<F> for ConstantPredictor<F> {
    fn n_users(&self) -> usize {
        self.n_users
    }
    fn n_items(&self) -> usize {
        self.n_items
    }
    fn rating(&self, _user: usize, _item: usize) -> F {
        self.value
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PseudoLabel<F> {
    pub user: usize,
    pub item: usize,
    pub label: F,
}

/// Grid pairs on which two predictors agreed within `epsilon`, labeled by the first.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoLabeledSet<F> {
    pub entries: Vec<PseudoLabel<F>>,
    pub epsilon: F,
    pub source_iteration: usize,
}

impl<F: Scalar> PseudoLabeledSet<F> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub(crate) fn check_shape<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    n_users: usize,
    n_items: usize,
) -> Result<()> {
    if pred.n_users() != n_users || pred.n_items() != n_items {
        return Err(Error::invalid(format!(
            "predictor grid {}x{} does not match {}x{}",
            pred.n_users(),
            pred.n_items(),
            n_users,
            n_items
        )));
    }
    Ok(())
}
