//! Test-set metrics and their aggregation over seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::domain::{check_shape, clamp_rating, Predictor, RatingDataset};
use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Scalar};

fn mean_error<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    test: &RatingDataset,
    f: impl Fn(F) -> F,
) -> Result<F> {
    check_shape(pred, test.n_users(), test.n_items())?;
    test.ensure_nonempty("test set")?;
    let acc: CompensatedSum<F> = test
        .records()
        .iter()
        .map(|r| f(clamp_rating(pred.rating(r.user, r.item)) - F::lit(r.rating as f64)))
        .collect();
    Ok(acc.total() / F::from_usize_lossy(test.len()))
}

pub fn mae<F: Scalar>(pred: &(impl Predictor<F> + ?Sized), test: &RatingDataset) -> Result<F> {
    mean_error(pred, test, |e| e.abs())
}

pub fn mse<F: Scalar>(pred: &(impl Predictor<F> + ?Sized), test: &RatingDataset) -> Result<F> {
    mean_error(pred, test, |e| e * e)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Gain {
    /// `2^r - 1`
    #[default]
    Exponential,
    /// `r`
    Linear,
}

impl Gain {
    pub fn eval(self, rating: u8) -> f64 {
        match self {
            Gain::Exponential => 2f64.powi(rating as i32) - 1.0,
            Gain::Linear => rating as f64,
        }
    }
}

impl FromStr for Gain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exponential" | "exp" => Ok(Gain::Exponential),
            "linear" | "lin" => Ok(Gain::Linear),
            other => Err(Error::invalid(format!("unknown gain {other:?}"))),
        }
    }
}

fn dcg(gains: impl Iterator<Item = f64>, k: usize) -> f64 {
    gains
        .take(k)
        .enumerate()
        .map(|(j, g)| g / ((j + 2) as f64).log2())
        .sum()
}

/// Per-user nDCG@k over each user's test items, averaged over users.
///
/// Items are ranked by predicted rating, ties broken by ascending item index.
pub fn ndcg_at_k<F: Scalar>(
    pred: &(impl Predictor<F> + ?Sized),
    test: &RatingDataset,
    k: usize,
    gain: Gain,
) -> Result<(F, usize)> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    check_shape(pred, test.n_users(), test.n_items())?;
    let mut by_user: Vec<Vec<(usize, u8)>> = vec![Vec::new(); test.n_users()];
    for r in test.records() {
        by_user[r.user].push((r.item, r.rating));
    }
    let mut total = CompensatedSum::<f64>::new();
    let mut ranked = 0;
    for (u, mut items) in by_user.into_iter().enumerate() {
        if items.is_empty() {
            continue;
        }
        let mut ideal: Vec<f64> = items.iter().map(|&(_, r)| gain.eval(r)).collect();
        ideal.sort_by(|a, b| b.total_cmp(a));
        let idcg = dcg(ideal.into_iter(), k);
        if idcg <= 0.0 {
            continue;
        }
        items.sort_by(|a, b| {
            let (pa, pb) = (pred.rating(u, a.0), pred.rating(u, b.0));
            pb.partial_cmp(&pa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        total.add(dcg(items.iter().map(|&(_, r)| gain.eval(r)), k) / idcg);
        ranked += 1;
    }
    if ranked == 0 {
        return Err(Error::empty("no user with test ratings to rank"));
    }
    Ok((F::lit(total.total() / ranked as f64), ranked))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    pub ndcg: BTreeMap<usize, f64>,
    pub n_users_ranked: usize,
    pub seed: u64,
}

impl MetricsReport {
    pub fn evaluate<F: Scalar>(
        pred: &(impl Predictor<F> + ?Sized),
        test: &RatingDataset,
        ks: &[usize],
        gain: Gain,
        seed: u64,
    ) -> Result<Self> {
        let mut ndcg = BTreeMap::new();
        let mut n_users_ranked = 0;
        for &k in ks {
            let (v, n) = ndcg_at_k(pred, test, k, gain)?;
            ndcg.insert(k, v.as_f64());
            n_users_ranked = n;
        }
        Ok(Self {
            mae: mae(pred, test)?.as_f64(),
            mse: mse(pred, test)?.as_f64(),
            ndcg,
            n_users_ranked,
            seed,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    /// Population standard deviation over `sqrt(n)`.
    pub stderr: f64,
}

impl MeanStderr {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("aggregation needs at least two values"));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(Self {
            mean,
            stderr: var.sqrt() / n.sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub n: usize,
    pub mae: MeanStderr,
    pub mse: MeanStderr,
    pub ndcg: BTreeMap<usize, MeanStderr>,
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<Aggregate> {
    if reports.len() < 2 {
        return Err(Error::invalid("aggregation needs at least two reports"));
    }
    let col = |f: &dyn Fn(&MetricsReport) -> f64| reports.iter().map(f).collect::<Vec<_>>();
    let mut ndcg = BTreeMap::new();
    for &k in reports[0].ndcg.keys() {
        let vals = reports
            .iter()
            .map(|r| {
                r.ndcg
                    .get(&k)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("report lacks nDCG@{k}")))
            })
            .collect::<Result<Vec<_>>>()?;
        ndcg.insert(k, MeanStderr::of(&vals)?);
    }
    Ok(Aggregate {
        n: reports.len(),
        mae: MeanStderr::of(&col(&|r| r.mae))?,
        mse: MeanStderr::of(&col(&|r| r.mse))?,
        ndcg,
    })
}

/// One labeled per-seed result.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub dataset: String,
    pub propensity: String,
    pub method: String,
    pub report: MetricsReport,
}

pub const METRICS_HEADER: &str = "dataset,propensity,method,seed,mae,mse,ndcg@3";

/// [`METRICS_HEADER`] with the nDCG cutoff `k`.
pub fn metrics_header(k: usize) -> String {
    METRICS_HEADER.replace("@3", &format!("@{k}"))
}

pub fn metrics_csv(rows: &[MetricsRow], k: usize) -> String {
    let mut out = format!("{}\n", metrics_header(k));
    for r in rows {
        let ndcg = r
            .report
            .ndcg
            .get(&k)
            .map(f64::to_string)
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.dataset, r.propensity, r.method, r.report.seed, r.report.mae, r.report.mse, ndcg
        );
    }
    out
}

pub const AGGREGATE_HEADER: &str =
    "dataset,propensity,method,n,mae_mean,mae_stderr,mse_mean,mse_stderr,ndcg@3_mean,ndcg@3_stderr";

/// Groups rows by `(dataset, propensity, method)` in first-seen order and aggregates each group.
pub fn aggregate_rows(rows: &[MetricsRow]) -> Result<Vec<(String, String, String, Aggregate)>> {
    let mut groups: Vec<((String, String, String), Vec<MetricsReport>)> = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.propensity.clone(), r.method.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r.report.clone()),
            None => groups.push((key, vec![r.report.clone()])),
        }
    }
    groups
        .into_iter()
        .map(|((d, p, m), reports)| Ok((d, p, m, aggregate(&reports)?)))
        .collect()
}

/// [`AGGREGATE_HEADER`] with the nDCG cutoff `k`.
pub fn aggregate_header(k: usize) -> String {
    AGGREGATE_HEADER.replace("@3", &format!("@{k}"))
}

pub fn aggregate_csv(groups: &[(String, String, String, Aggregate)], k: usize) -> String {
    let mut out = format!("{}\n", aggregate_header(k));
    for (d, p, m, a) in groups {
        let (nm, ns) = a
            .ndcg
            .get(&k)
            .map(|x| (x.mean.to_string(), x.stderr.to_string()))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{d},{p},{m},{},{},{},{},{},{nm},{ns}",
            a.n, a.mae.mean, a.mae.stderr, a.mse.mean, a.mse.stderr
        );
    }
    out
}

type MetricColumn<'a> = dyn Fn(&Aggregate) -> Option<MeanStderr> + 'a;

/// Wide text table: one row per dataset and propensity, one column block per
/// metric with a column per method.
pub fn comparison_table(groups: &[(String, String, String, Aggregate)], k: usize) -> String {
    let mut methods: Vec<&str> = Vec::new();
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for (d, p, m, _) in groups {
        if !methods.contains(&m.as_str()) {
            methods.push(m);
        }
        if !keys.contains(&(d.as_str(), p.as_str())) {
            keys.push((d, p));
        }
    }
    let ndcg_name = format!("nDCG@{k}");
    let metrics: [(&str, &MetricColumn); 3] = [
        ("MSE", &|a| Some(a.mse)),
        ("MAE", &|a| Some(a.mae)),
        (&ndcg_name, &|a| a.ndcg.get(&k).copied()),
    ];
    let mut header = vec!["dataset".to_owned(), "propensity".to_owned()];
    for (name, _) in &metrics {
        for m in &methods {
            header.push(format!("{name} {m}"));
        }
    }
    let mut out = header.join(" | ");
    out.push('\n');
    for (d, p) in keys {
        let mut cells = vec![d.to_owned(), p.to_owned()];
        for (_, get) in &metrics {
            for m in &methods {
                let cell = groups
                    .iter()
                    .find(|(gd, gp, gm, _)| gd == d && gp == p && gm == m)
                    .and_then(|(_, _, _, a)| get(a))
                    .map(|v| format!("{:.3} ({:.3})", v.mean, v.stderr))
                    .unwrap_or_else(|| "-".to_owned());
                cells.push(cell);
            }
        }
        out.push_str(&cells.join(" | "));
        out.push('\n');
    }
    out
}
