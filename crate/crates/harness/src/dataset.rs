//! Evaluation datasets: JSONL, one record per line.
//!
//! ```text
//! {"id": "1", "source_lang": "xho_Latn", "target_lang": "eng_Latn",
//!  "source": "...", "reference": "...", "alignments": {"pairs": [[1, 1]], "m": 3, "n": 4}}
//! ```

use std::collections::HashSet;
use std::path::Path;

use scale_core::metrics::AlignmentSet;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub source_lang: String,
    pub target_lang: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignments: Option<AlignmentSet>,
}

pub fn parse_dataset(text: &str) -> Result<Vec<DatasetRecord>> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fail = |message: String| HarnessError::DatasetParse { line, message };
        let record: DatasetRecord = serde_json::from_str(raw).map_err(|e| fail(e.to_string()))?;
        if record.source.trim().is_empty() {
            return Err(fail(format!("record `{}` has an empty source", record.id)));
        }
        if !seen.insert(record.id.clone()) {
            return Err(fail(format!("duplicate id `{}`", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DatasetRecord>> {
    parse_dataset(&std::fs::read_to_string(path)?)
}
