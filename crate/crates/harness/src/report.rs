//! Report files: the full JSON report and a flat per-segment CSV.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::evaluate::EvaluationReport;

pub fn write_json(report: &EvaluationReport, path: impl AsRef<Path>) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(report)?;
    body.push(b'\n');
    std::fs::write(path, body)?;
    Ok(())
}

pub fn read_json(path: impl AsRef<Path>) -> Result<EvaluationReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per segment; external scorers become one column each.
pub fn write_csv<W: Write>(report: &EvaluationReport, out: W) -> Result<()> {
    let scorers: BTreeSet<&str> = report
        .segments
        .iter()
        .flat_map(|r| r.scores.external.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = vec![
        "id", "source_lang", "target_lang", "output", "error", "cache_hit", "chrfpp", "bleu", "ppl", "nm", "usw",
    ];
    header.extend(scorers.iter().copied());
    header.extend(["stm_ms", "llm_ms", "overhead_ms", "total_ms", "prompt_tokens"]);
    w.write_record(&header)?;
    for row in &report.segments {
        let s = &row.scores;
        let mut record = vec![
            row.id.clone(),
            row.source_lang.clone(),
            row.target_lang.clone(),
            row.output.clone().unwrap_or_default(),
            row.error.clone().unwrap_or_default(),
            row.cache_hit.to_string(),
            cell(s.chrfpp),
            cell(s.bleu),
            cell(s.ppl),
            cell(s.nm),
            cell(s.usw),
        ];
        record.extend(scorers.iter().map(|name| cell(s.external.get(*name).copied())));
        let l = row.latency;
        record.extend([
            cell(l.map(|l| l.stm_ms)),
            cell(l.map(|l| l.llm_ms)),
            cell(l.map(|l| l.overhead_ms)),
            cell(l.map(|l| l.total_ms)),
            l.map(|l| l.prompt_length_tokens.to_string()).unwrap_or_default(),
        ]);
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(report: &EvaluationReport, path: impl AsRef<Path>) -> Result<()> {
    write_csv(report, std::fs::File::create(path)?)
}
