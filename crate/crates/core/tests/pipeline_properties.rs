//! Whole-pipeline properties over synthetic corpora: ingest totality and
//! round-trips, knowledge-base recounts, and the threshold statistics.

mod common;

use peo_core::actions::ApiActionMap;
use peo_core::features::DerivationConfig;
use peo_core::ingest::{parse_sample, SampleStream};
use peo_core::kb::build_kb;
use peo_core::rng::SplitMix64;
use peo_core::stats::EntropyHistogram;
use peo_core::vocab::Vocabulary;

#[test]
fn parsing_is_total_and_roundtrips_canonically() {
    let lines = common::gen_mixed_corpus(3, 500);
    for line in &lines {
        let sample = parse_sample(line).expect("synthetic record parses");
        let canonical = serde_json::to_string(&sample.to_canonical_json()).unwrap();
        let reparsed = parse_sample(&canonical).expect("canonical form parses");
        assert_eq!(sample, reparsed);
    }
}

#[test]
fn streaming_yields_every_line_exactly_once() {
    let lines = common::gen_mixed_corpus(17, 10_000);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.jsonl");
    common::write_corpus(&path, &lines);

    let mut stream = SampleStream::open(&path).unwrap();
    let mut count = 0usize;
    for (line_no, result) in &mut stream {
        assert!(result.is_ok(), "line {line_no}");
        count += 1;
    }
    assert_eq!(count, 10_000);
    let report = stream.report();
    assert_eq!(report.ok, 10_000);
    assert_eq!(report.skipped, 0);
}

#[test]
fn kb_counts_match_recount_from_corpus() {
    let lines = common::gen_mixed_corpus(29, 1000);
    let samples: Vec<_> = lines.iter().map(|l| parse_sample(l).unwrap()).collect();

    let cfg = DerivationConfig::default();
    let vocab = Vocabulary::with_config(&cfg).unwrap();
    let map = ApiActionMap::builtin(&vocab);
    let (kb, report) = build_kb(samples.iter(), &cfg, &map);

    let mut unique: std::collections::BTreeSet<&str> = Default::default();
    let mut expected_sections = 0usize;
    for sample in &samples {
        if unique.insert(&sample.sha256) {
            expected_sections += sample.section.sections.len();
        }
    }
    assert_eq!(kb.files.len(), unique.len());
    assert_eq!(kb.files.len() as u64 + report.duplicates, samples.len() as u64);
    assert_eq!(kb.section_count(), expected_sections);
}

/// A corpus engineered so about 30% of malware sections and 5% of benign
/// sections exceed the entropy threshold; the histogram's threshold report
/// must reproduce those proportions and the qualitative gap.
#[test]
fn entropy_threshold_report_reproduces_planted_proportions() {
    let mut rng = SplitMix64::new(1234);
    let mut lines = Vec::new();
    for i in 0..2000 {
        let label = i % 2;
        let hot_permille = if label == 1 { 300 } else { 50 };
        let sections: Vec<String> = (0..3)
            .map(|_| {
                let entropy = if rng.next_below(1000) < hot_permille {
                    7.2 + (rng.next_below(700) as f64) / 1000.0
                } else {
                    1.0 + (rng.next_below(5500) as f64) / 1000.0
                };
                format!(r#"{{"name":".text","entropy":{entropy},"props":[]}}"#)
            })
            .collect();
        lines.push(format!(
            r#"{{"sha256":"{:064x}","label":{label},"section":{{"entry":"","sections":[{}]}}}}"#,
            i,
            sections.join(",")
        ));
    }

    let mut hist = EntropyHistogram::new(0.1, 7.0);
    let mut brute_hot = [0u64; 2];
    let mut brute_total = [0u64; 2];
    for line in &lines {
        let sample = parse_sample(line).unwrap();
        hist.add_sample(&sample);
        for section in &sample.section.sections {
            brute_total[sample.label as usize] += 1;
            if section.entropy > 7.0 {
                brute_hot[sample.label as usize] += 1;
            }
        }
    }

    let report = hist.inner().threshold_report();
    let brute_benign = brute_hot[0] as f64 / brute_total[0] as f64;
    let brute_malware = brute_hot[1] as f64 / brute_total[1] as f64;
    assert!((report.benign - brute_benign).abs() < 1e-12);
    assert!((report.malware - brute_malware).abs() < 1e-12);
    assert!((report.malware - 0.30).abs() < 0.05, "{}", report.malware);
    assert!((report.benign - 0.05).abs() < 0.03, "{}", report.benign);
    assert!(
        report.malware > 2.0 * report.benign,
        "high-entropy sections should be far more common in malware: {report:?}"
    );
}

#[test]
fn corpus_generator_is_deterministic() {
    assert_eq!(common::gen_mixed_corpus(7, 50), common::gen_mixed_corpus(7, 50));
    assert_ne!(common::gen_mixed_corpus(7, 50), common::gen_mixed_corpus(8, 50));
}

/// Fold invariants over randomized pools, checked with brute-force set
/// operations: the folds partition the input, are pairwise disjoint, and
/// per-label sizes differ by at most one.
#[test]
fn kfold_invariants_over_random_pools() {
    use peo_core::fraction::{fold_union, kfold};
    use std::collections::BTreeSet;

    let mut rng = SplitMix64::new(0xF01D);
    for round in 0..50 {
        let k = 2 + rng.next_below(7) as usize;
        let positives = k as u64 + rng.next_below(60);
        let negatives = k as u64 + rng.next_below(60);
        let mut pool: Vec<(String, i8)> = Vec::new();
        for i in 0..positives {
            pool.push((format!("p{round}-{i}"), 1));
        }
        for i in 0..negatives {
            pool.push((format!("n{round}-{i}"), 0));
        }
        let seed = rng.next_u64();
        let folds = kfold(&pool, k, seed).unwrap();
        assert_eq!(folds.len(), k);

        let everything: BTreeSet<String> = pool.iter().map(|(id, _)| id.clone()).collect();
        assert_eq!(fold_union(&folds), everything, "round {round}");

        let mut seen: BTreeSet<&String> = BTreeSet::new();
        for fold in &folds {
            for id in fold.positive.iter().chain(&fold.negative) {
                assert!(seen.insert(id), "round {round}: {id} in two folds");
            }
        }

        for (label, count) in [(1usize, positives), (0, negatives)] {
            let sizes: Vec<usize> = folds
                .iter()
                .map(|f| if label == 1 { f.positive.len() } else { f.negative.len() })
                .collect();
            let min = *sizes.iter().min().unwrap();
            let max = *sizes.iter().max().unwrap();
            assert!(max - min <= 1, "round {round}: label {label} sizes {sizes:?}");
            assert_eq!(sizes.iter().sum::<usize>() as u64, count);
        }

        assert_eq!(folds, kfold(&pool, k, seed).unwrap());
    }
}
