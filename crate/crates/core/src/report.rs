//! Run reporting. Every CLI invocation prints machine-readable JSON to
//! standard error: commands that ingest a JSON-Lines file first print the
//! ingestion report `{"ok":N,"skipped":M}`, then all commands print a run
//! report with the pipeline counters.

use serde::Serialize;

use crate::ingest::IngestReport;
use crate::kb::BuildReport;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunReport {
    /// Records parsed successfully.
    pub parsed: u64,
    /// Lines that failed to parse and were skipped.
    pub skipped: u64,
    /// Records dropped because their sha256 was already seen.
    pub duplicates: u64,
    /// Imported functions without an action mapping.
    pub unmapped_imports: u64,
    /// Samples whose entry-point section could not be identified.
    pub entry_point_unresolved: u64,
}

impl RunReport {
    pub fn from_parts(ingest: IngestReport, build: BuildReport) -> RunReport {
        RunReport {
            parsed: ingest.ok,
            skipped: ingest.skipped,
            duplicates: build.duplicates,
            unmapped_imports: build.unmapped_imports,
            entry_point_unresolved: build.entry_point_unresolved,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// The ingestion report as a single JSON object line.
pub fn ingest_report_json(report: IngestReport) -> String {
    serde_json::to_string(&report).expect("report serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_json_shape() {
        let ingest = IngestReport { ok: 2, skipped: 1 };
        assert_eq!(ingest_report_json(ingest), r#"{"ok":2,"skipped":1}"#);
        let run = RunReport::from_parts(ingest, BuildReport::default());
        let value: serde_json::Value = serde_json::from_str(&run.to_json()).unwrap();
        assert_eq!(value["parsed"], 2);
        assert_eq!(value["skipped"], 1);
        assert_eq!(value["duplicates"], 0);
    }
}
