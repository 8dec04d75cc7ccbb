//! Propensity estimators: the probability that a user/item rating is observed.
//!
//! Seven kinds are supported. `uniform`, `user`, `item` and `user_item` are
//! count-based; `nb_uniform` and `nb_true` are naive-Bayes estimators indexed
//! by the realized rating; `relative_item` is the relative item frequency used to
//! resample the MovieLens test set (numerically the same formula as `item`,
//! kept as its own kind because experiments pin it separately).

use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::domain::{check_rating, DenseMatrix, RatingDataset, MIN_RATING, N_RATING_LEVELS};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Anything that can report `P(O_{u,i} = 1)`.
///
/// `rating` is the realized rating of an observed pair; estimators that do not
/// depend on it ignore the argument.
pub trait PropensityScore<F: Scalar>: Sync {
    fn propensity(&self, user: usize, item: usize, rating: Option<u8>) -> Result<F>;
}

/// The same propensity for every pair.
#[derive(Clone, Copy, Debug)]
pub struct UniformScore<F>(pub F);

impl<F: Scalar> PropensityScore<F> for UniformScore<F> {
    fn propensity(&self, _user: usize, _item: usize, _rating: Option<u8>) -> Result<F> {
        Ok(self.0)
    }
}

/// A full grid of known propensities (synthetic ground truth).
impl<F: Scalar> PropensityScore<F> for DenseMatrix<F> {
    fn propensity(&self, user: usize, item: usize, _rating: Option<u8>) -> Result<F> {
        if user >= self.rows() || item >= self.cols() {
            return Err(Error::invalid(format!(
                "pair ({user}, {item}) outside grid"
            )));
        }
        Ok(self.get(user, item))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PropensityKind {
    Uniform,
    User,
    Item,
    UserItem,
    NbUniform,
    NbTrue,
    RelativeItem,
}

impl PropensityKind {
    pub const ALL: [PropensityKind; 7] = [
        PropensityKind::Uniform,
        PropensityKind::User,
        PropensityKind::Item,
        PropensityKind::UserItem,
        PropensityKind::NbUniform,
        PropensityKind::NbTrue,
        PropensityKind::RelativeItem,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PropensityKind::Uniform => "uniform",
            PropensityKind::User => "user",
            PropensityKind::Item => "item",
            PropensityKind::UserItem => "user_item",
            PropensityKind::NbUniform => "nb_uniform",
            PropensityKind::NbTrue => "nb_true",
            PropensityKind::RelativeItem => "relative_item",
        }
    }

    pub fn is_naive_bayes(&self) -> bool {
        matches!(self, PropensityKind::NbUniform | PropensityKind::NbTrue)
    }
}

impl fmt::Display for PropensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PropensityKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s || k.name().replace('_', "-") == s)
            .ok_or_else(|| Error::invalid(format!("unknown propensity kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateOptions<F> {
    /// Add-one smoothing over the five rating levels in the naive-Bayes tables.
    pub smoothing: bool,
    pub clamp_floor: Option<F>,
}

impl<F> Default for EstimateOptions<F> {
    fn default() -> Self {
        Self {
            smoothing: false,
            clamp_floor: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropensityModel<F> {
    pub kind: PropensityKind,
    pub n_users: usize,
    pub n_items: usize,
    /// `|O| / |D|`, i.e. `P(O = 1)`.
    pub global: F,
    pub per_user: Vec<F>,
    pub per_item: Vec<F>,
    /// `P(R = r | O = 1)`, index 0 holds rating 1.
    pub per_rating: [F; N_RATING_LEVELS],
    /// `P(R = r)` from MCAR data; only for `nb_true`.
    pub prior: Option<[F; N_RATING_LEVELS]>,
    pub clamp_floor: Option<F>,
}

/// Relative item frequency `count_i / max_j count_j`.
pub fn relative_item_propensity<F: Scalar>(ds: &RatingDataset) -> Result<Vec<F>> {
    normalized_by_max(&ds.item_counts(), "item")
}

fn normalized_by_max<F: Scalar>(counts: &[usize], what: &str) -> Result<Vec<F>> {
    let max = counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Err(Error::empty(format!("no observed {what} counts")));
    }
    let max = F::from_usize_lossy(max);
    Ok(counts
        .iter()
        .map(|&c| F::from_usize_lossy(c) / max)
        .collect())
}

fn rating_frequencies<F: Scalar>(ds: &RatingDataset, smoothing: bool) -> [F; N_RATING_LEVELS] {
    let counts = ds.rating_counts();
    let (extra, total_extra) = if smoothing {
        (1, N_RATING_LEVELS)
    } else {
        (0, 0)
    };
    let total = F::from_usize_lossy(ds.len() + total_extra);
    let mut out = [F::zero(); N_RATING_LEVELS];
    for (o, &c) in out.iter_mut().zip(counts.iter()) {
        *o = F::from_usize_lossy(c + extra) / total;
    }
    out
}

/// Fits a propensity model on the training ratings.
///
/// `mcar_ref` supplies the rating prior for `nb_true` and is ignored otherwise.
pub fn estimate<F: Scalar>(
    kind: PropensityKind,
    train: &RatingDataset,
    mcar_ref: Option<&RatingDataset>,
    opts: EstimateOptions<F>,
) -> Result<PropensityModel<F>> {
    train.ensure_nonempty("propensity training data")?;
    if let Some(floor) = opts.clamp_floor {
        if !(floor > F::zero() && floor <= F::one()) {
            return Err(Error::invalid("clamp floor must lie in (0, 1]"));
        }
    }
    let global = F::from_usize_lossy(train.len()) / F::from_usize_lossy(train.grid_size());
    let mut model = PropensityModel {
        kind,
        n_users: train.n_users(),
        n_items: train.n_items(),
        global,
        per_user: Vec::new(),
        per_item: Vec::new(),
        per_rating: [F::zero(); N_RATING_LEVELS],
        prior: None,
        clamp_floor: opts.clamp_floor,
    };
    match kind {
        PropensityKind::Uniform => {}
        PropensityKind::User => model.per_user = normalized_by_max(&train.user_counts(), "user")?,
        PropensityKind::Item | PropensityKind::RelativeItem => {
            model.per_item = relative_item_propensity(train)?
        }
        PropensityKind::UserItem => {
            model.per_user = normalized_by_max(&train.user_counts(), "user")?;
            model.per_item = relative_item_propensity(train)?;
        }
        PropensityKind::NbUniform => {
            model.per_rating = rating_frequencies(train, opts.smoothing);
        }
        PropensityKind::NbTrue => {
            let mcar = mcar_ref.ok_or_else(|| {
                Error::MissingInput("nb_true requires MCAR reference ratings".into())
            })?;
            mcar.ensure_nonempty("MCAR reference")?;
            if !opts.smoothing {
                let counts = mcar.rating_counts();
                if let Some(level) = counts.iter().position(|&c| c == 0) {
                    return Err(Error::DegeneratePrior {
                        rating: MIN_RATING + level as u8,
                    });
                }
            }
            model.per_rating = rating_frequencies(train, opts.smoothing);
            model.prior = Some(rating_frequencies(mcar, opts.smoothing));
        }
    }
    Ok(model)
}

impl<F: Scalar> PropensityModel<F> {
    fn rating_value(&self, r: u8) -> F {
        let idx = (r - MIN_RATING) as usize;
        let joint = self.per_rating[idx] * self.global;
        match self.prior {
            // The naive-Bayes ratio is not a probability by construction; cap at 1.
            Some(prior) => (joint / prior[idx]).min(F::one()),
            None => joint,
        }
    }

    fn raw(&self, user: usize, item: usize, rating: Option<u8>) -> Result<F> {
        Ok(match self.kind {
            PropensityKind::Uniform => self.global,
            PropensityKind::User => self.per_user[user],
            PropensityKind::Item | PropensityKind::RelativeItem => self.per_item[item],
            PropensityKind::UserItem => self.per_user[user] * self.per_item[item],
            PropensityKind::NbUniform | PropensityKind::NbTrue => {
                let r = rating.ok_or_else(|| {
                    Error::invalid(format!("{} propensity needs the rating", self.kind))
                })?;
                check_rating(r)?;
                self.rating_value(r)
            }
        })
    }

    fn apply_floor(&self, p: F) -> F {
        match self.clamp_floor {
            Some(floor) => p.max(floor),
            None => p,
        }
    }

    pub fn evaluate(&self, user: usize, item: usize, rating: Option<u8>) -> Result<F> {
        if user >= self.n_users || item >= self.n_items {
            return Err(Error::invalid(format!(
                "pair ({user}, {item}) outside {}x{} grid",
                self.n_users, self.n_items
            )));
        }
        Ok(self.apply_floor(self.raw(user, item, rating)?))
    }

    /// Minimum propensity over every grid pair (and every rating for the
    /// naive-Bayes kinds).
    pub fn min_propensity(&self) -> F {
        let fold_min = |v: &[F]| v.iter().copied().fold(F::infinity(), F::min);
        let raw = match self.kind {
            PropensityKind::Uniform => self.global,
            PropensityKind::User => fold_min(&self.per_user),
            PropensityKind::Item | PropensityKind::RelativeItem => fold_min(&self.per_item),
            PropensityKind::UserItem => fold_min(&self.per_user) * fold_min(&self.per_item),
            PropensityKind::NbUniform | PropensityKind::NbTrue => (MIN_RATING..=5)
                .map(|r| self.rating_value(r))
                .fold(F::infinity(), F::min),
        };
        self.apply_floor(raw)
    }

    /// Plain-text serialization with 12 fixed decimals.
    pub fn to_text(&self) -> String {
        fn row<F: Scalar>(out: &mut String, key: &str, vals: &[F]) {
            out.push_str(key);
            for v in vals {
                let _ = write!(out, " {:.12}", v.as_f64());
            }
            out.push('\n');
        }
        let mut out = String::new();
        let _ = writeln!(out, "kind {}", self.kind);
        let _ = writeln!(out, "grid {} {}", self.n_users, self.n_items);
        match self.clamp_floor {
            Some(f) => {
                let _ = writeln!(out, "clamp_floor {:.12}", f.as_f64());
            }
            None => out.push_str("clamp_floor none\n"),
        }
        row(&mut out, "global", &[self.global]);
        row(&mut out, "per_user", &self.per_user);
        row(&mut out, "per_item", &self.per_item);
        row(&mut out, "per_rating", &self.per_rating);
        match &self.prior {
            Some(p) => row(&mut out, "prior", p),
            None => out.push_str("prior none\n"),
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::invalid(format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::Parse {
                    path: "<propensity>".into(),
                    line: no + 1,
                    message: format!("expected `{key}`"),
                });
            }
            Ok((no + 1, parts.map(str::to_owned).collect()))
        };
        let parse_vals = |no: usize, vals: &[String]| -> Result<Vec<F>> {
            vals.iter()
                .map(|s| {
                    s.parse::<f64>().map(F::lit).map_err(|e| Error::Parse {
                        path: "<propensity>".into(),
                        line: no,
                        message: e.to_string(),
                    })
                })
                .collect()
        };
        let (_, kind) = next("kind")?;
        let kind: PropensityKind = kind.first().map(String::as_str).unwrap_or("").parse()?;
        let (no, grid) = next("grid")?;
        let dims: Vec<usize> = grid
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                path: "<propensity>".into(),
                line: no,
                message: e.to_string(),
            })?;
        let [n_users, n_items] = dims[..] else {
            return Err(Error::invalid("grid line needs two sizes"));
        };
        let (no, floor) = next("clamp_floor")?;
        let clamp_floor = match floor.first().map(String::as_str) {
            Some("none") => None,
            _ => parse_vals(no, &floor)?.first().copied(),
        };
        let (no, g) = next("global")?;
        let global = *parse_vals(no, &g)?
            .first()
            .ok_or_else(|| Error::invalid("missing global value"))?;
        let (no, pu) = next("per_user")?;
        let per_user = parse_vals(no, &pu)?;
        let (no, pi) = next("per_item")?;
        let per_item = parse_vals(no, &pi)?;
        let (no, pr) = next("per_rating")?;
        let per_rating: [F; N_RATING_LEVELS] = parse_vals(no, &pr)?
            .try_into()
            .map_err(|_| Error::invalid("per_rating needs five values"))?;
        let (no, prior) = next("prior")?;
        let prior = match prior.first().map(String::as_str) {
            Some("none") => None,
            _ => Some(
                parse_vals(no, &prior)?
                    .try_into()
                    .map_err(|_| Error::invalid("prior needs five values"))?,
            ),
        };
        if !(per_user.is_empty() || per_user.len() == n_users)
            || !(per_item.is_empty() || per_item.len() == n_items)
        {
            return Err(Error::invalid(
                "propensity vector length does not match grid",
            ));
        }
        Ok(Self {
            kind,
            n_users,
            n_items,
            global,
            per_user,
            per_item,
            per_rating,
            prior,
            clamp_floor,
        })
    }
}

impl<F: Scalar> PropensityScore<F> for PropensityModel<F> {
    fn propensity(&self, user: usize, item: usize, rating: Option<u8>) -> Result<F> {
        self.evaluate(user, item, rating)
    }
}
