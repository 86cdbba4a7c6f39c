//! Deterministic balanced fractional datasets and stratified k-fold splits.
//!
//! A fraction of size 2m takes m malware and m benign sha256s from the
//! labeled pool. The selection algorithm is pinned so third parties can
//! regenerate byte-identical fractions from the same inputs: sort each
//! label's sha256 list lexicographically, shuffle with Fisher-Yates driven
//! by SplitMix64 seeded with `seed_base XOR stream_hash(variant, label)`,
//! take the first m, then sort the merged selection for output. Variants
//! are drawn independently; nothing guarantees disjointness between them.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ingest::Label;
use crate::rng::{fisher_yates, stream_hash, SplitMix64};

/// One row of the sizes table: generate `variants` datasets of `size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FractionSpec {
    pub size: usize,
    pub variants: u32,
}

/// The published sizes table: 10 variants each of 1k/10k/100k plus one
/// full-pool dataset.
pub fn default_sizes() -> Vec<FractionSpec> {
    vec![
        FractionSpec { size: 1000, variants: 10 },
        FractionSpec { size: 10_000, variants: 10 },
        FractionSpec { size: 100_000, variants: 10 },
        FractionSpec { size: 800_000, variants: 1 },
    ]
}

#[derive(Debug, Error, PartialEq)]
pub enum FractionError {
    #[error("fraction size {0} is not even")]
    OddSize(usize),
    #[error("not enough label-{label} samples: have {have}, need {need}")]
    InsufficientSamples { label: Label, have: usize, need: usize },
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("not enough label-{label} examples for {k} folds: have {have}")]
    InsufficientForFolds { label: Label, have: usize, k: usize },
}

fn labeled_pool(pool: &[(String, Label)], label: Label) -> Vec<String> {
    let mut ids: Vec<String> = pool
        .iter()
        .filter(|(_, l)| *l == label)
        .map(|(id, _)| id.clone())
        .collect();
    ids.sort();
    ids
}

/// Selects one balanced fraction: exactly `size/2` malware and `size/2`
/// benign ids, deterministically from `(pool, size, variant, seed_base)`.
/// The result is sorted.
pub fn select_fraction(
    pool: &[(String, Label)],
    size: usize,
    variant: u32,
    seed_base: u64,
) -> Result<Vec<String>, FractionError> {
    if !size.is_multiple_of(2) {
        return Err(FractionError::OddSize(size));
    }
    let per_label = size / 2;
    let mut selected = Vec::with_capacity(size);
    for label in [0i8, 1] {
        let mut ids = labeled_pool(pool, label);
        if ids.len() < per_label {
            return Err(FractionError::InsufficientSamples {
                label,
                have: ids.len(),
                need: per_label,
            });
        }
        let mut rng = SplitMix64::new(seed_base ^ stream_hash(variant, label as u8));
        fisher_yates(&mut ids, &mut rng);
        selected.extend(ids.into_iter().take(per_label));
    }
    selected.sort();
    Ok(selected)
}

/// File names for one generated dataset: `dataset_<variant>_<size>.owl`
/// plus the `_raw.json` and `_examples.json` companions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FractionFiles {
    pub abox: PathBuf,
    pub raw: PathBuf,
    pub examples: PathBuf,
}

impl FractionFiles {
    pub fn new(out_dir: &Path, variant: u32, size: usize) -> FractionFiles {
        let stem = format!("dataset_{variant}_{size}");
        FractionFiles {
            abox: out_dir.join(format!("{stem}.owl")),
            raw: out_dir.join(format!("{stem}_raw.json")),
            examples: out_dir.join(format!("{stem}_examples.json")),
        }
    }
}

/// Writes the three files of one dataset. `raw_lines` must be the original
/// input lines of the selected samples in selection order; `abox` and
/// `examples` are the serialized documents produced by the emitter.
pub fn write_fraction(
    files: &FractionFiles,
    abox: &str,
    raw_lines: &[String],
    examples: &str,
) -> std::io::Result<()> {
    fs::write(&files.abox, abox)?;
    let mut raw = fs::File::create(&files.raw)?;
    for line in raw_lines {
        raw.write_all(line.as_bytes())?;
        raw.write_all(b"\n")?;
    }
    fs::write(&files.examples, examples)?;
    Ok(())
}

/// One stratified fold; ids within each list are sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Fold {
    pub positive: Vec<String>,
    pub negative: Vec<String>,
}

/// Splits labeled example ids into `k` stratified folds. Per label, ids are
/// sorted, shuffled with a seeded stream, and dealt round-robin, so fold
/// sizes differ by at most one per label. Folds partition the input.
pub fn kfold(
    examples: &[(String, Label)],
    k: usize,
    seed: u64,
) -> Result<Vec<Fold>, FractionError> {
    if k < 2 {
        return Err(FractionError::InvalidK(k));
    }
    let mut folds = vec![Fold::default(); k];
    for label in [0i8, 1] {
        let mut ids = labeled_pool(examples, label);
        if !ids.is_empty() && ids.len() < k {
            return Err(FractionError::InsufficientForFolds {
                label,
                have: ids.len(),
                k,
            });
        }
        let mut rng = SplitMix64::new(seed ^ stream_hash(k as u32, label as u8));
        fisher_yates(&mut ids, &mut rng);
        for (i, id) in ids.into_iter().enumerate() {
            let fold = &mut folds[i % k];
            match label {
                1 => fold.positive.push(id),
                _ => fold.negative.push(id),
            }
        }
    }
    for fold in &mut folds {
        fold.positive.sort();
        fold.negative.sort();
    }
    Ok(folds)
}

/// Union of all fold members; used by property checks.
pub fn fold_union(folds: &[Fold]) -> BTreeSet<String> {
    folds
        .iter()
        .flat_map(|f| f.positive.iter().chain(f.negative.iter()).cloned())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(positives: usize, negatives: usize) -> Vec<(String, Label)> {
        let mut out = Vec::new();
        for i in 0..positives {
            out.push((format!("p{i:03}"), 1));
        }
        for i in 0..negatives {
            out.push((format!("n{i:03}"), 0));
        }
        out
    }

    #[test]
    fn fraction_is_balanced() {
        let pool = pool(3, 3);
        let ids = select_fraction(&pool, 4, 1, 42).unwrap();
        assert_eq!(ids.len(), 4);
        assert_eq!(ids.iter().filter(|id| id.starts_with('p')).count(), 2);
        assert_eq!(ids.iter().filter(|id| id.starts_with('n')).count(), 2);
        let sorted = {
            let mut s = ids.clone();
            s.sort();
            s
        };
        assert_eq!(ids, sorted);
    }

    #[test]
    fn fraction_is_deterministic_and_variant_sensitive() {
        let pool = pool(50, 50);
        let a = select_fraction(&pool, 20, 1, 42).unwrap();
        let b = select_fraction(&pool, 20, 1, 42).unwrap();
        assert_eq!(a, b);
        let c = select_fraction(&pool, 20, 2, 42).unwrap();
        assert_ne!(a, c);
        let d = select_fraction(&pool, 20, 1, 43).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn whole_pool_fraction_takes_everything() {
        let pool = pool(40, 40);
        let ids = select_fraction(&pool, 80, 1, 7).unwrap();
        assert_eq!(ids.len(), 80);
        let unique: BTreeSet<_> = ids.iter().collect();
        assert_eq!(unique.len(), 80);
    }

    #[test]
    fn insufficient_samples_is_reported_per_label() {
        let pool = pool(10, 3);
        let err = select_fraction(&pool, 10, 1, 7).unwrap_err();
        assert_eq!(
            err,
            FractionError::InsufficientSamples {
                label: 0,
                have: 3,
                need: 5
            }
        );
        assert_eq!(
            select_fraction(&pool, 7, 1, 7).unwrap_err(),
            FractionError::OddSize(7)
        );
    }

    #[test]
    fn kfold_sizes_and_partition() {
        let small_pool = pool(5, 5);
        let folds = kfold(&small_pool, 5, 7).unwrap();
        assert_eq!(folds.len(), 5);
        for fold in &folds {
            assert_eq!(fold.positive.len(), 1);
            assert_eq!(fold.negative.len(), 1);
        }
        assert_eq!(fold_union(&folds).len(), 10);

        let big_pool = pool(500, 500);
        let folds = kfold(&big_pool, 10, 9).unwrap();
        for fold in &folds {
            assert_eq!(fold.positive.len(), 50);
            assert_eq!(fold.negative.len(), 50);
        }
    }

    #[test]
    fn kfold_is_deterministic() {
        let pool = pool(13, 17);
        let a = kfold(&pool, 5, 11).unwrap();
        let b = kfold(&pool, 5, 11).unwrap();
        assert_eq!(a, b);
        let c = kfold(&pool, 5, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn kfold_rejects_bad_k() {
        let pool = pool(5, 5);
        assert_eq!(kfold(&pool, 1, 7).unwrap_err(), FractionError::InvalidK(1));
        assert!(matches!(
            kfold(&pool, 6, 7).unwrap_err(),
            FractionError::InsufficientForFolds { .. }
        ));
    }

    #[test]
    fn file_naming_follows_convention() {
        let files = FractionFiles::new(Path::new("/tmp/out"), 3, 1000);
        assert_eq!(files.abox, Path::new("/tmp/out/dataset_3_1000.owl"));
        assert_eq!(files.raw, Path::new("/tmp/out/dataset_3_1000_raw.json"));
        assert_eq!(
            files.examples,
            Path::new("/tmp/out/dataset_3_1000_examples.json")
        );
    }
}
