//! Per-label histograms over section entropy and import counts, plus the
//! threshold fractions used to sanity-check the derivation defaults.
//!
//! Bins are left-closed right-open: a value v lands in bin floor(v / w).
//! Only labeled samples contribute; merging partial histograms is
//! associative and commutative, so the accumulation order is irrelevant.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::ingest::RawSample;

/// Counts per bin index, split by label: `[benign, malware]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledHistogram {
    bins: BTreeMap<i64, [u64; 2]>,
    totals: [u64; 2],
    /// Observations above/below the reference threshold, per label.
    threshold_hits: [u64; 2],
}

impl LabeledHistogram {
    fn add(&mut self, label: i8, bin: i64, beyond_threshold: bool) {
        let slot = match label {
            0 => 0,
            1 => 1,
            _ => return,
        };
        self.bins.entry(bin).or_default()[slot] += 1;
        self.totals[slot] += 1;
        if beyond_threshold {
            self.threshold_hits[slot] += 1;
        }
    }

    pub fn merge(&mut self, other: &LabeledHistogram) {
        for (bin, counts) in &other.bins {
            let entry = self.bins.entry(*bin).or_default();
            entry[0] += counts[0];
            entry[1] += counts[1];
        }
        for i in 0..2 {
            self.totals[i] += other.totals[i];
            self.threshold_hits[i] += other.threshold_hits[i];
        }
    }

    pub fn total(&self, label: i8) -> u64 {
        self.totals[label as usize]
    }

    pub fn count(&self, label: i8, bin: i64) -> u64 {
        self.bins
            .get(&bin)
            .map(|c| c[label as usize])
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Fraction of observations beyond the reference threshold, per label.
    pub fn threshold_report(&self) -> ThresholdReport {
        let frac = |slot: usize| {
            if self.totals[slot] == 0 {
                0.0
            } else {
                self.threshold_hits[slot] as f64 / self.totals[slot] as f64
            }
        };
        ThresholdReport {
            benign: frac(0),
            malware: frac(1),
        }
    }

    fn write_csv_rows(
        &self,
        mut writer: impl Write,
        start_of: impl Fn(i64) -> String,
    ) -> std::io::Result<()> {
        writeln!(writer, "bin_start,benign_count,malware_count")?;
        for (bin, counts) in &self.bins {
            writeln!(writer, "{},{},{}", start_of(*bin), counts[0], counts[1])?;
        }
        Ok(())
    }
}

/// Per-label fraction of observations beyond the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ThresholdReport {
    pub benign: f64,
    pub malware: f64,
}

/// Histogram of section entropies with real-valued bin width.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyHistogram {
    pub bin_width: f64,
    pub threshold: f64,
    histogram: LabeledHistogram,
}

impl EntropyHistogram {
    pub fn new(bin_width: f64, threshold: f64) -> Self {
        assert!(bin_width > 0.0, "bin width must be positive");
        EntropyHistogram {
            bin_width,
            threshold,
            histogram: LabeledHistogram::default(),
        }
    }

    pub fn bin_of(&self, value: f64) -> i64 {
        (value / self.bin_width).floor() as i64
    }

    pub fn add_sample(&mut self, sample: &RawSample) {
        for section in &sample.section.sections {
            self.histogram.add(
                sample.label,
                self.bin_of(section.entropy),
                section.entropy > self.threshold,
            );
        }
    }

    pub fn inner(&self) -> &LabeledHistogram {
        &self.histogram
    }

    pub fn merge(&mut self, other: &EntropyHistogram) {
        self.histogram.merge(&other.histogram);
    }

    pub fn write_csv(&self, writer: impl Write) -> std::io::Result<()> {
        let decimals = decimal_places(self.bin_width);
        let width = self.bin_width;
        self.histogram
            .write_csv_rows(writer, move |bin| format!("{:.*}", decimals, bin as f64 * width))
    }
}

/// Histogram of per-sample import counts with integer bin width.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportsHistogram {
    pub bin_width: u64,
    pub threshold: u64,
    histogram: LabeledHistogram,
}

impl ImportsHistogram {
    pub fn new(bin_width: u64, threshold: u64) -> Self {
        assert!(bin_width >= 1, "bin width must be at least 1");
        ImportsHistogram {
            bin_width,
            threshold,
            histogram: LabeledHistogram::default(),
        }
    }

    pub fn add_sample(&mut self, sample: &RawSample) {
        let imports = sample.general.imports;
        self.histogram.add(
            sample.label,
            (imports / self.bin_width) as i64,
            imports < self.threshold,
        );
    }

    pub fn inner(&self) -> &LabeledHistogram {
        &self.histogram
    }

    pub fn merge(&mut self, other: &ImportsHistogram) {
        self.histogram.merge(&other.histogram);
    }

    pub fn write_csv(&self, writer: impl Write) -> std::io::Result<()> {
        let width = self.bin_width;
        self.histogram
            .write_csv_rows(writer, move |bin| (bin as u64 * width).to_string())
    }
}

/// Number of decimal places in the shortest representation of `w`; used to
/// print bin starts without float noise.
fn decimal_places(w: f64) -> usize {
    let text = crate::rdf::term::format_double(w);
    match text.split_once('.') {
        Some((_, frac)) if !frac.contains('e') => frac.len(),
        _ => 1,
    }
}
