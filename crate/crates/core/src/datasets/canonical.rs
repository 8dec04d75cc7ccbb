//! Canonical on-disk dataset format: a header line `m n count` followed by one
//! `user item rating` line per record (0-based indices, LF endings).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::domain::{InteractionRecord, RatingDataset};
use crate::error::{Error, Result};

pub fn to_canonical_string(ds: &RatingDataset) -> String {
    let mut out = String::with_capacity(16 * (ds.len() + 1));
    let _ = writeln!(out, "{} {} {}", ds.n_users(), ds.n_items(), ds.len());
    for r in ds.records() {
        let _ = writeln!(out, "{} {} {}", r.user, r.item, r.rating);
    }
    out
}

pub fn write_canonical(ds: &RatingDataset, path: &Path) -> Result<()> {
    fs::write(path, to_canonical_string(ds)).map_err(|e| Error::io(path, e))
}

pub fn parse_canonical(text: &str, origin: &str) -> Result<RatingDataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_owned(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::empty(format!("{origin} is empty")))?;
    let head: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| err(1, format!("bad header: {e}")))?;
    let [m, n, count] = head[..] else {
        return Err(err(1, "header must be `m n count`".into()));
    };
    let mut records = Vec::with_capacity(count);
    for (no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(
                no + 1,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|e| err(no + 1, e.to_string()));
        let (u, i, r) = (parse(fields[0])?, parse(fields[1])?, parse(fields[2])?);
        if !(1..=5).contains(&r) {
            return Err(err(no + 1, format!("rating {r} outside 1..=5")));
        }
        records.push(InteractionRecord::new(u, i, r as u8));
    }
    if records.len() != count {
        return Err(err(
            1,
            format!("header announces {count} records, found {}", records.len()),
        ));
    }
    let mut seen = HashSet::with_capacity(records.len());
    let repeats = records.iter().any(|r| !seen.insert(r.key()));
    if repeats {
        RatingDataset::with_repeats(m, n, records)
    } else {
        RatingDataset::new(m, n, records)
    }
}

pub fn read_canonical(path: &Path) -> Result<RatingDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_canonical(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn format_is_stable() {
        let ds = RatingDataset::new(
            2,
            3,
            vec![
                InteractionRecord::new(1, 2, 4),
                InteractionRecord::new(0, 0, 1),
            ],
        )
        .unwrap();
        assert_eq!(to_canonical_string(&ds), "2 3 2\n1 2 4\n0 0 1\n");
    }

    #[test]
    fn rejects_count_mismatch_and_bad_rating() {
        assert!(parse_canonical("1 1 2\n0 0 3\n", "x").is_err());
        assert!(parse_canonical("1 1 1\n0 0 7\n", "x").is_err());
        assert!(matches!(parse_canonical("", "x"), Err(Error::EmptyData(_))));
    }

    proptest! {
        #[test]
        fn roundtrip(cells in proptest::collection::btree_map((0usize..7, 0usize..9), 1u8..=5, 0..40)) {
            let recs: Vec<_> = cells.iter().map(|(&(u, i), &r)| InteractionRecord::new(u, i, r)).collect();
            let ds = RatingDataset::new(7, 9, recs).unwrap();
            let back = parse_canonical(&to_canonical_string(&ds), "mem").unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
