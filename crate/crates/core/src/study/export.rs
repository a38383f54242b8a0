//! Flat export of recorded responses for external analysis.
//!
//! One row per rating phase (diagnose, predict, certify). Columns, in order:
//!
//! | column | content |
//! |---|---|
//! | `session_id` | opaque session id |
//! | `block` | `prediction`, `cert_examples` or `cert_no_examples` |
//! | `trial_index` | 0..24, position in the session |
//! | `block_trial_index` | 0..8, position within the block |
//! | `phase` | `diagnose`, `predict` or `certify` |
//! | `target_id`, `category`, `ai_label`, `ground_truth` | trial target |
//! | `diagnosis`, `prediction` | integer ratings 0..=100, empty if n/a |
//! | `certify`, `agree_with_ai` | `true`/`false`, empty if n/a |
//! | `justification_bits` | bit k set for option k+1, empty if n/a |
//! | `justifications` | `;`-separated option names |
//! | `free_text` | participant text |
//! | `feedback_correct` | prediction matched the AI label, empty if n/a |
//! | `shown_at_ms`, `submitted_at_ms` | Unix milliseconds |

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::study::session::{read_session_file, PhaseRecord, SessionError, SessionLine};

pub const EXPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub session_id: String,
    pub block: String,
    pub trial_index: usize,
    pub block_trial_index: usize,
    pub phase: String,
    pub target_id: String,
    pub category: String,
    pub ai_label: String,
    pub ground_truth: String,
    pub diagnosis: Option<u8>,
    pub prediction: Option<u8>,
    pub certify: Option<bool>,
    pub agree_with_ai: Option<bool>,
    pub justification_bits: Option<u8>,
    pub justifications: String,
    pub free_text: String,
    pub feedback_correct: Option<bool>,
    pub shown_at_ms: u64,
    pub submitted_at_ms: u64,
}

pub const COLUMNS: [&str; 19] = [
    "session_id",
    "block",
    "trial_index",
    "block_trial_index",
    "phase",
    "target_id",
    "category",
    "ai_label",
    "ground_truth",
    "diagnosis",
    "prediction",
    "certify",
    "agree_with_ai",
    "justification_bits",
    "justifications",
    "free_text",
    "feedback_correct",
    "shown_at_ms",
    "submitted_at_ms",
];

fn enum_str<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

impl ExportRow {
    pub fn from_record(r: &PhaseRecord) -> Self {
        let is_cert = r.certify.is_some();
        Self {
            session_id: r.session_id.clone(),
            block: r.block.as_str().to_string(),
            trial_index: r.trial_index,
            block_trial_index: r.block_trial_index,
            phase: enum_str(&r.phase),
            target_id: r.target_id.clone(),
            category: r.category.short().to_string(),
            ai_label: r.ai_label.to_string(),
            ground_truth: r.ground_truth.to_string(),
            diagnosis: r.diagnosis,
            prediction: r.prediction,
            certify: r.certify,
            agree_with_ai: r.agree_with_ai,
            justification_bits: is_cert.then(|| r.justifications.iter().map(|j| j.bit()).fold(0, |a, b| a | b)),
            justifications: r
                .justifications
                .iter()
                .map(|j| j.as_str())
                .collect::<Vec<_>>()
                .join(";"),
            free_text: r.free_text.clone(),
            feedback_correct: r.feedback_correct,
            shown_at_ms: r.shown_at_ms,
            submitted_at_ms: r.submitted_at_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Export {
    pub rows: Vec<ExportRow>,
}

impl Export {
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(COLUMNS).expect("in-memory write");
        for r in &self.rows {
            w.serialize(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({
            "schema_version": EXPORT_SCHEMA_VERSION,
            "columns": COLUMNS,
            "rows": self.rows,
        }))
        .expect("rows serialize")
    }

    /// Parses CSV produced by [`Export::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<Result<Vec<ExportRow>, _>>()?;
        Ok(Self { rows })
    }
}

/// Collects every rating row from the `*.jsonl` files in `dir`, ordered by
/// session id and then by record order.
pub fn export_sessions(dir: &Path) -> Result<Export, SessionError> {
    let mut paths: Vec<_> = match fs::read_dir(dir) {
        Ok(rd) => rd
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e.into()),
    };
    paths.sort();
    let mut rows = Vec::new();
    for p in paths {
        for line in read_session_file(&p)? {
            if let SessionLine::Record(r) = line {
                if r.phase.is_rating() {
                    rows.push(ExportRow::from_record(&r));
                }
            }
        }
    }
    Ok(Export { rows })
}

/// Writes `responses.csv` and `responses.json` into `out_dir`.
pub fn write_export(export: &Export, out_dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(out_dir)?;
    fs::write(out_dir.join("responses.csv"), export.to_csv())?;
    fs::write(out_dir.join("responses.json"), export.to_json())
}
