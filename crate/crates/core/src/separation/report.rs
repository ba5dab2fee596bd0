//! Dataset files and distribution reports.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::estimate::SeparationRecord;
use super::estimate::quantile_sorted;
use crate::codec::ParseError;

pub fn write_jsonl<W: Write>(records: &[SeparationRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one record per non-empty line; errors carry the byte offset of the
/// offending line.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<SeparationRecord>, ParseError> {
    let mut out = Vec::new();
    let mut offset = 0usize;
    for line in r.split(b'\n') {
        let line = line.map_err(|e| ParseError::new(offset, e.to_string()))?;
        let text = std::str::from_utf8(&line).map_err(|e| ParseError::new(offset + e.valid_up_to(), "invalid UTF-8"))?;
        if !text.trim().is_empty() {
            let rec = serde_json::from_str(text)
                .map_err(|e| ParseError::new(offset + crate::codec::json_offset(text, &e), e.to_string()))?;
            out.push(rec);
        }
        offset += line.len() + 1;
    }
    Ok(out)
}

pub const PERCENTILES: [f64; 9] = [0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99];

fn sorted(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Percentile table of `d_out` and `d_trc` as CSV.
pub fn percentile_csv<W: Write>(records: &[SeparationRecord], w: W) -> csv::Result<()> {
    let dout = sorted(records.iter().map(|r| r.d_out));
    let dtrc = sorted(records.iter().map(|r| r.d_trc));
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["percentile", "d_out", "d_trc"])?;
    if !records.is_empty() {
        for p in PERCENTILES {
            wr.write_record([
                format!("{p}"),
                format!("{:e}", quantile_sorted(&dout, p)),
                format!("{:e}", quantile_sorted(&dtrc, p)),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Empirical CDF of `d_trc` as CSV: one row per record.
pub fn cdf_csv<W: Write>(records: &[SeparationRecord], w: W) -> csv::Result<()> {
    let dtrc = sorted(records.iter().map(|r| r.d_trc));
    let n = dtrc.len() as f64;
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["d_trc", "cdf"])?;
    for (i, v) in dtrc.iter().enumerate() {
        wr.write_record([format!("{v:e}"), format!("{}", (i + 1) as f64 / n)])?;
    }
    wr.flush()?;
    Ok(())
}

/// Short human-readable summary.
pub fn summary_text(records: &[SeparationRecord]) -> String {
    let mut s = String::new();
    if records.is_empty() {
        s.push_str("no records\n");
        return s;
    }
    let dout = sorted(records.iter().map(|r| r.d_out));
    let dtrc = sorted(records.iter().map(|r| r.d_trc));
    let _ = writeln!(s, "records: {}", records.len());
    let _ = writeln!(s, "{:>10} {:>14} {:>14}", "pct", "d_out", "d_trc");
    for p in PERCENTILES {
        let _ = writeln!(
            s,
            "{:>10} {:>14.6e} {:>14.6e}",
            format!("{:.0}%", p * 100.0),
            quantile_sorted(&dout, p),
            quantile_sorted(&dtrc, p)
        );
    }
    s
}
