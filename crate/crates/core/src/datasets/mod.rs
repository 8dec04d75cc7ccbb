//! Dataset ingestion and the preprocessing recipes (min-items filter,
//! inverse-popularity test resampling, validation holdout) plus rating
//! distribution diagnostics.

mod canonical;
mod loaders;

use std::collections::HashMap;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;

pub use canonical::{parse_canonical, read_canonical, to_canonical_string, write_canonical};
pub use loaders::{
    load_coat, load_movielens, load_movielens_indexed, load_yahoo, ratings_per_user,
    IndexedDataset, SplitOptions,
};

use crate::domain::{InteractionRecord, RatingDataset, N_RATING_LEVELS};
use crate::error::{Error, Result};
use crate::propensity::relative_item_propensity;
use crate::rng::seeded;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Provenance {
    pub source: String,
    pub seed: u64,
    pub params: Vec<(String, String)>,
    /// External id for each dense user index.
    pub user_ids: Vec<u64>,
    /// External id for each dense item index.
    pub item_ids: Vec<u64>,
}

/// Train / validation / test splits over one shared index space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetBundle {
    pub train: RatingDataset,
    pub validation: RatingDataset,
    pub test: RatingDataset,
    pub provenance: Provenance,
}

/// Keeps items with at least `k` observed ratings and re-compacts item indices
/// (surviving items keep their relative order). Users are untouched.
pub fn filter_min_items(ds: &RatingDataset, k: usize) -> Result<RatingDataset> {
    Ok(filter_min_items_mapped(ds, k)?.0)
}

/// Like [`filter_min_items`], also returning the old index of each kept item.
pub fn filter_min_items_mapped(
    ds: &RatingDataset,
    k: usize,
) -> Result<(RatingDataset, Vec<usize>)> {
    if k == 0 {
        return Err(Error::invalid("min_items must be at least 1"));
    }
    let counts = ds.item_counts();
    let kept: Vec<usize> = (0..ds.n_items()).filter(|&i| counts[i] >= k).collect();
    if kept.is_empty() {
        return Err(Error::empty(format!("no item has {k} or more ratings")));
    }
    let remap: HashMap<usize, usize> = kept
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();
    let records = ds
        .records()
        .iter()
        .filter_map(|r| {
            remap
                .get(&r.item)
                .map(|&i| InteractionRecord::new(r.user, i, r.rating))
        })
        .collect();
    Ok((RatingDataset::new(ds.n_users(), kept.len(), records)?, kept))
}

fn check_fraction(name: &str, f: f64, allow_one: bool) -> Result<()> {
    let ok = f > 0.0 && (f < 1.0 || (allow_one && f == 1.0));
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} {f} outside (0, 1)")))
    }
}

/// Uniform random holdout of `floor(fraction * N)` records for validation.
/// Both parts keep the original grid and the original record order.
pub fn split_validation(
    ds: &RatingDataset,
    fraction: f64,
    seed: u64,
) -> Result<(RatingDataset, RatingDataset)> {
    check_fraction("validation fraction", fraction, false)?;
    let n_val = (fraction * ds.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut seeded(seed));
    let mut is_val = vec![false; ds.len()];
    for &k in &order[..n_val] {
        is_val[k] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (k, r) in ds.records().iter().enumerate() {
        if is_val[k] {
            val.push(*r);
        } else {
            train.push(*r);
        }
    }
    let build = |recs| {
        if ds.has_repeats() {
            RatingDataset::with_repeats(ds.n_users(), ds.n_items(), recs)
        } else {
            RatingDataset::new(ds.n_users(), ds.n_items(), recs)
        }
    };
    Ok((build(train)?, build(val)?))
}

/// Builds the MovieLens bundle with an item-uniform test set.
///
/// A `test_fraction` share of records forms the test pool; the final test set
/// draws `|pool|` records from it with replacement, each weighted by the
/// inverse relative item propensity computed on `ds`. The remaining records
/// are split into train and validation.
pub fn build_ml_test(
    ds: &RatingDataset,
    test_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<DatasetBundle> {
    check_fraction("test fraction", test_fraction, false)?;
    ds.ensure_nonempty("MovieLens data")?;
    let mut rng = seeded(seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng);
    let pool_size = (test_fraction * ds.len() as f64).floor() as usize;
    if pool_size == 0 || pool_size == ds.len() {
        return Err(Error::invalid(
            "test fraction leaves an empty train or test pool",
        ));
    }
    let mut in_pool = vec![false; ds.len()];
    for &k in &order[..pool_size] {
        in_pool[k] = true;
    }
    let records = ds.records();
    let pool: Vec<InteractionRecord> = (0..ds.len())
        .filter(|&k| in_pool[k])
        .map(|k| records[k])
        .collect();
    let rest: Vec<InteractionRecord> = (0..ds.len())
        .filter(|&k| !in_pool[k])
        .map(|k| records[k])
        .collect();

    let item_prop: Vec<f64> = relative_item_propensity(ds)?;
    let weights: Vec<f64> = pool.iter().map(|r| 1.0 / item_prop[r.item]).collect();
    let sampler = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
    let test_records: Vec<InteractionRecord> = (0..pool_size)
        .map(|_| pool[sampler.sample(&mut rng)])
        .collect();

    let remaining = RatingDataset::new(ds.n_users(), ds.n_items(), rest)?;
    let split_seed = crate::rng::derive_seed(seed, 1);
    let (train, validation) = split_validation(&remaining, validation_fraction, split_seed)?;
    Ok(DatasetBundle {
        train,
        validation,
        test: RatingDataset::with_repeats(ds.n_users(), ds.n_items(), test_records)?,
        provenance: Provenance {
            source: "movielens".into(),
            seed,
            params: vec![
                ("test_fraction".into(), test_fraction.to_string()),
                (
                    "validation_fraction".into(),
                    validation_fraction.to_string(),
                ),
                (
                    "resampling".into(),
                    "with_replacement_inverse_item_propensity".into(),
                ),
            ],
            user_ids: Vec::new(),
            item_ids: Vec::new(),
        },
    })
}

/// Rating-value histogram over 1..=5.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatingHistogram {
    pub counts: [usize; N_RATING_LEVELS],
}

impl RatingHistogram {
    pub fn from_dataset(ds: &RatingDataset) -> Self {
        Self {
            counts: ds.rating_counts(),
        }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn frequencies(&self) -> [f64; N_RATING_LEVELS] {
        let total = self.total().max(1) as f64;
        self.counts.map(|c| c as f64 / total)
    }

    /// Frequencies after adding `pseudo` counts to every level.
    pub fn smoothed(&self, pseudo: f64) -> [f64; N_RATING_LEVELS] {
        let total = self.total() as f64 + pseudo * N_RATING_LEVELS as f64;
        self.counts.map(|c| (c as f64 + pseudo) / total)
    }
}

pub const KL_SMOOTHING: f64 = 0.5;

/// `KL(p || q)` between rating distributions, `p` being the first argument,
/// with 0.5 pseudo-counts per rating level.
pub fn rating_kl(p: &RatingHistogram, q: &RatingHistogram) -> f64 {
    let p = p.smoothed(KL_SMOOTHING);
    let q = q.smoothed(KL_SMOOTHING);
    p.iter()
        .zip(&q)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum::<f64>()
        .max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum KlDirection {
    #[default]
    TestToTrain,
    TrainToTest,
}

impl fmt::Display for KlDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KlDirection::TestToTrain => "KL(test||train)",
            KlDirection::TrainToTest => "KL(train||test)",
        })
    }
}

/// Train/test rating shift in the requested direction.
pub fn rating_shift(train: &RatingDataset, test: &RatingDataset, dir: KlDirection) -> f64 {
    let (tr, te) = (
        RatingHistogram::from_dataset(train),
        RatingHistogram::from_dataset(test),
    );
    match dir {
        KlDirection::TestToTrain => rating_kl(&te, &tr),
        KlDirection::TrainToTest => rating_kl(&tr, &te),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::collections::HashSet;

    fn ds(m: usize, n: usize, recs: &[(usize, usize, u8)]) -> RatingDataset {
        RatingDataset::new(
            m,
            n,
            recs.iter()
                .map(|&(u, i, r)| InteractionRecord::new(u, i, r))
                .collect(),
        )
        .unwrap()
    }

    fn grid(m: usize, n: usize) -> RatingDataset {
        let recs: Vec<_> = (0..m * n)
            .map(|k| (k / n, k % n, (k % 5 + 1) as u8))
            .collect();
        ds(m, n, &recs)
    }

    #[test]
    fn filter_threshold() {
        let d = ds(3, 3, &[(0, 0, 1), (1, 0, 2), (2, 0, 3), (0, 2, 4)]);
        let f1 = filter_min_items(&d, 1).unwrap();
        assert_eq!(f1.n_items(), 2);
        assert_eq!(f1.len(), 4);
        assert_eq!(f1.records()[3], InteractionRecord::new(0, 1, 4));
        let f2 = filter_min_items(&d, 2).unwrap();
        assert_eq!(f2.n_items(), 1);
        assert_eq!(f2.n_users(), 3);
        assert_eq!(f2.len(), 3);
        assert!(matches!(filter_min_items(&d, 4), Err(Error::EmptyData(_))));
        assert!(filter_min_items(&d, 0).is_err());
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = grid(10, 10);
        let (tr, va) = split_validation(&d, 0.1, 7).unwrap();
        assert_eq!((tr.len(), va.len()), (90, 10));
        let (tr2, va2) = split_validation(&d, 0.1, 7).unwrap();
        assert_eq!((tr, va), (tr2, va2.clone()));
        let (_, va3) = split_validation(&d, 0.1, 8).unwrap();
        assert_ne!(va2, va3);

        let three = grid(1, 3);
        let (tr, va) = split_validation(&three, 0.5, 1).unwrap();
        assert_eq!((tr.len(), va.len()), (2, 1));
        assert!(split_validation(&three, 0.0, 1).is_err());
        assert!(split_validation(&three, 1.0, 1).is_err());
    }

    #[test]
    fn split_disjoint() {
        let d = grid(13, 7);
        let (tr, va) = split_validation(&d, 0.3, 3).unwrap();
        let a: HashSet<_> = tr.records().iter().map(|r| r.key()).collect();
        assert!(va.records().iter().all(|r| !a.contains(&r.key())));
        assert_eq!(tr.len() + va.len(), d.len());
        assert_eq!((va.n_users(), va.n_items()), (13, 7));
    }

    #[test]
    fn ml_test_is_deterministic() {
        let d = grid(20, 8);
        let a = build_ml_test(&d, 0.5, 0.1, 11).unwrap();
        let b = build_ml_test(&d, 0.5, 0.1, 11).unwrap();
        assert_eq!(to_canonical_string(&a.test), to_canonical_string(&b.test));
        assert_eq!(to_canonical_string(&a.train), to_canonical_string(&b.train));
        assert_eq!(a.test.len(), 80);
        assert_eq!(a.train.len() + a.validation.len(), 80);
        assert!(build_ml_test(&d, 1.0, 0.1, 1).is_err());
        assert!(build_ml_test(&d, 0.0, 0.1, 1).is_err());
    }

    #[test]
    fn ml_test_resampling_flattens_item_distribution() {
        // item 0 observed by every user, item 1 by a tenth of them
        let mut recs = Vec::new();
        for u in 0..1000 {
            recs.push((u, 0, 4));
            if u % 10 == 0 {
                recs.push((u, 1, 2));
            }
        }
        let d = ds(1000, 2, &recs);
        let b = build_ml_test(&d, 0.5, 0.1, 5).unwrap();
        let counts = b.test.item_counts();
        let share = counts[1] as f64 / b.test.len() as f64;
        // pool share ~ 1/11, reweighted by 10 -> ~ 1/2
        assert!((share - 0.5).abs() < 0.08, "share {share}");
    }

    #[test]
    fn kl_examples() {
        let h = RatingHistogram {
            counts: [1, 2, 3, 4, 5],
        };
        assert_eq!(rating_kl(&h, &h), 0.0);
        let q = RatingHistogram {
            counts: [5, 4, 3, 2, 1],
        };
        // brute force with 0.5 smoothing
        let p_s: Vec<f64> = [1.5, 2.5, 3.5, 4.5, 5.5].iter().map(|c| c / 17.5).collect();
        let q_s: Vec<f64> = [5.5, 4.5, 3.5, 2.5, 1.5].iter().map(|c| c / 17.5).collect();
        let expect: f64 = p_s.iter().zip(&q_s).map(|(a, b)| a * (a / b).ln()).sum();
        assert_abs_diff_eq!(rating_kl(&h, &q), expect, epsilon = 1e-12);
        let sparse = RatingHistogram {
            counts: [0, 0, 0, 0, 9],
        };
        assert!(rating_kl(&sparse, &h).is_finite());
        let f = h.frequencies();
        assert_abs_diff_eq!(f.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
    }
}
