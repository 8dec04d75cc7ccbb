//! Readers for the MovieLens 100K, Coat and Yahoo! R3 distributions.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::domain::{InteractionRecord, RatingDataset};
use crate::error::{Error, Result};

use super::{split_validation, DatasetBundle, Provenance};

/// A dataset together with the external ids behind each dense index.
#[derive(Clone, Debug)]
pub struct IndexedDataset {
    pub dataset: RatingDataset,
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_rating(path: &Path, line: usize, field: &str) -> Result<u8> {
    let r: i64 = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad rating `{field}`")))?;
    if !(1..=5).contains(&r) {
        return Err(parse_err(path, line, format!("rating {r} outside 1..=5")));
    }
    Ok(r as u8)
}

fn parse_id(path: &Path, line: usize, field: &str) -> Result<u64> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad id `{field}`")))
}

/// Parses `u.data` (tab-separated `user item rating timestamp`) and compacts
/// the external ids to dense 0-based indices in ascending id order.
pub fn load_movielens_indexed(path: &Path) -> Result<IndexedDataset> {
    let text = read(path)?;
    let mut raw = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                path,
                no + 1,
                format!("expected 4 tab-separated fields, got {}", fields.len()),
            ));
        }
        let user = parse_id(path, no + 1, fields[0])?;
        let item = parse_id(path, no + 1, fields[1])?;
        let rating = parse_rating(path, no + 1, fields[2])?;
        fields[3]
            .trim()
            .parse::<i64>()
            .map_err(|_| parse_err(path, no + 1, "bad timestamp"))?;
        raw.push((no + 1, user, item, rating));
    }
    if raw.is_empty() {
        return Err(Error::empty(format!("{} has no ratings", path.display())));
    }
    let user_ids: Vec<u64> = raw
        .iter()
        .map(|r| r.1)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let item_ids: Vec<u64> = raw
        .iter()
        .map(|r| r.2)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let user_index: HashMap<u64, usize> = user_ids
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, k))
        .collect();
    let item_index: HashMap<u64, usize> = item_ids
        .iter()
        .enumerate()
        .map(|(k, &id)| (id, k))
        .collect();
    let mut seen = HashSet::with_capacity(raw.len());
    let mut records = Vec::with_capacity(raw.len());
    for (line, u, i, r) in raw {
        let rec = InteractionRecord::new(user_index[&u], item_index[&i], r);
        if !seen.insert(rec.key()) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate rating for user {u} item {i}"),
            ));
        }
        records.push(rec);
    }
    let dataset = RatingDataset::new(user_ids.len(), item_ids.len(), records)?;
    Ok(IndexedDataset {
        dataset,
        user_ids,
        item_ids,
    })
}

pub fn load_movielens(path: &Path) -> Result<RatingDataset> {
    Ok(load_movielens_indexed(path)?.dataset)
}

/// `(row, col, rating)` of one nonzero matrix entry.
type Cell = (usize, usize, u8);

/// Reads a dense whitespace-separated integer matrix; returns `(rows, cols, cells)`.
fn read_matrix(path: &Path) -> Result<(usize, usize, Vec<Cell>)> {
    let text = read(path)?;
    let mut cols = None;
    let mut rows = 0;
    let mut cells = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(parse_err(
                    path,
                    no + 1,
                    format!("row has {} columns, expected {c}", fields.len()),
                ))
            }
            _ => {}
        }
        for (col, f) in fields.iter().enumerate() {
            let v: i64 = f
                .parse()
                .map_err(|_| parse_err(path, no + 1, format!("bad entry `{f}`")))?;
            if v != 0 {
                if !(1..=5).contains(&v) {
                    return Err(parse_err(path, no + 1, format!("rating {v} outside 1..=5")));
                }
                cells.push((rows, col, v as u8));
            }
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::empty(format!("{} has no rows", path.display())))?;
    Ok((rows, cols, cells))
}

/// Holdout settings shared by the loaders that carve a validation split.
#[derive(Clone, Copy, Debug)]
pub struct SplitOptions {
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

/// Loads Coat `train.ascii` / `test.ascii` (user-by-item matrices, 0 = missing).
pub fn load_coat(
    train_path: &Path,
    test_path: &Path,
    split: SplitOptions,
) -> Result<DatasetBundle> {
    let (m, n, train_cells) = read_matrix(train_path)?;
    let (tm, tn, test_cells) = read_matrix(test_path)?;
    if (m, n) != (tm, tn) {
        return Err(parse_err(
            test_path,
            1,
            format!("test matrix is {tm}x{tn}, train matrix is {m}x{n}"),
        ));
    }
    let to_records = |cells: Vec<(usize, usize, u8)>| -> Vec<InteractionRecord> {
        cells
            .into_iter()
            .map(|(u, i, r)| InteractionRecord::new(u, i, r))
            .collect()
    };
    let full_train = RatingDataset::new(m, n, to_records(train_cells))?;
    full_train.ensure_nonempty("coat training matrix")?;
    let test = RatingDataset::new(m, n, to_records(test_cells))?;
    let (train, validation) = split_validation(&full_train, split.validation_fraction, split.seed)?;
    Ok(DatasetBundle {
        train,
        validation,
        test,
        provenance: Provenance {
            source: "coat".into(),
            seed: split.seed,
            params: vec![(
                "validation_fraction".into(),
                split.validation_fraction.to_string(),
            )],
            user_ids: (1..=m as u64).collect(),
            item_ids: (1..=n as u64).collect(),
        },
    })
}

fn read_triples(path: &Path) -> Result<Vec<(usize, u64, u64, u8)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(
                path,
                no + 1,
                format!("expected `user item rating`, got {} fields", fields.len()),
            ));
        }
        let u = parse_id(path, no + 1, fields[0])?;
        let i = parse_id(path, no + 1, fields[1])?;
        if u == 0 || i == 0 {
            return Err(parse_err(path, no + 1, "ids are 1-based"));
        }
        out.push((no + 1, u, i, parse_rating(path, no + 1, fields[2])?));
    }
    Ok(out)
}

fn triples_to_dataset(
    path: &Path,
    triples: &[(usize, u64, u64, u8)],
    m: usize,
    n: usize,
) -> Result<RatingDataset> {
    let mut seen = HashSet::with_capacity(triples.len());
    let mut records = Vec::with_capacity(triples.len());
    for &(line, u, i, r) in triples {
        let rec = InteractionRecord::new(u as usize - 1, i as usize - 1, r);
        if !seen.insert(rec.key()) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate rating for user {u} item {i}"),
            ));
        }
        records.push(rec);
    }
    RatingDataset::new(m, n, records)
}

/// Loads Yahoo! R3 train/test triples. Ids are 1-based and map to `id - 1`
/// over the union of both files, so train and MCAR test share one grid.
pub fn load_yahoo(
    train_path: &Path,
    test_path: &Path,
    split: SplitOptions,
) -> Result<DatasetBundle> {
    let train_raw = read_triples(train_path)?;
    let test_raw = read_triples(test_path)?;
    if train_raw.is_empty() {
        return Err(Error::empty(format!(
            "{} has no ratings",
            train_path.display()
        )));
    }
    let m = train_raw
        .iter()
        .chain(&test_raw)
        .map(|t| t.1)
        .max()
        .unwrap_or(0) as usize;
    let n = train_raw
        .iter()
        .chain(&test_raw)
        .map(|t| t.2)
        .max()
        .unwrap_or(0) as usize;
    let full_train = triples_to_dataset(train_path, &train_raw, m, n)?;
    let test = triples_to_dataset(test_path, &test_raw, m, n)?;
    let (train, validation) = split_validation(&full_train, split.validation_fraction, split.seed)?;
    Ok(DatasetBundle {
        train,
        validation,
        test,
        provenance: Provenance {
            source: "yahoo".into(),
            seed: split.seed,
            params: vec![(
                "validation_fraction".into(),
                split.validation_fraction.to_string(),
            )],
            user_ids: (1..=m as u64).collect(),
            item_ids: (1..=n as u64).collect(),
        },
    })
}

/// Number of test ratings per responding user (ten for the Yahoo! R3 MCAR set).
pub fn ratings_per_user(ds: &RatingDataset) -> Vec<usize> {
    ds.user_counts().into_iter().filter(|&c| c > 0).collect()
}
