//! Run manifests and CSV/JSON writers.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sepspec::montecarlo::SimulationTable;
#[cfg(test)]
use sepspec::montecarlo::SimulationRow;

use crate::error::CliError;

/// Provenance attached to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    /// `config` is hashed through its JSON form; struct fields serialize in
    /// declaration order, so the digest is stable.
    pub fn new<T: Serialize>(command: &str, config: &T, seed: u64) -> Self {
        let canonical = serde_json::to_vec(config).expect("configs serialize to JSON");
        Self {
            command: command.to_string(),
            config_digest: hex::encode(Sha256::digest(&canonical)),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

/// `x` with 12 significant digits, plain notation where reasonable.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

/// Writes `# manifest: {...}`, a header row and the records.
pub fn write_csv<W: Write>(out: W, manifest: &RunManifest, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = out;
    writeln!(out, "# manifest: {}", serde_json::to_string(manifest).expect("manifest serializes"))?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| CliError::data(format!("writing CSV: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub const TABLE_HEADER: [&str; 9] =
    ["p", "n", "q", "rejections", "replications", "rejection_rate", "wilson_lo", "wilson_hi", "error"];

pub fn table_rows(table: &SimulationTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.p.to_string(),
                r.n.to_string(),
                r.q.to_string(),
                r.rejections.to_string(),
                r.replications.to_string(),
                fmt_sig(r.rejection_rate),
                fmt_sig(r.wilson_lo),
                fmt_sig(r.wilson_hi),
                r.error.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

#[cfg(test)]
/// Reads back a table written by [`write_csv`] with [`TABLE_HEADER`].
pub fn parse_table(text: &str) -> Result<(RunManifest, SimulationTable), CliError> {
    let bad = |m: String| CliError::data(format!("malformed table: {m}"));
    let (first, rest) = text.split_once('\n').ok_or_else(|| bad("empty".into()))?;
    let manifest: RunManifest = serde_json::from_str(
        first.strip_prefix("# manifest: ").ok_or_else(|| bad("missing manifest line".into()))?,
    )
    .map_err(|e| bad(e.to_string()))?;
    let mut reader = csv::Reader::from_reader(rest.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record.map_err(|e| bad(e.to_string()))?;
        let int = |i: usize| r[i].parse::<usize>().map_err(|e| bad(e.to_string()));
        let real = |i: usize| r[i].parse::<f64>().map_err(|e| bad(e.to_string()));
        rows.push(SimulationRow {
            p: int(0)?,
            n: int(1)?,
            q: int(2)?,
            rejections: int(3)?,
            replications: int(4)?,
            rejection_rate: real(5)?,
            wilson_lo: real(6)?,
            wilson_hi: real(7)?,
            error: (!r[8].is_empty()).then(|| r[8].to_string()),
        });
    }
    Ok((manifest, SimulationTable { rows }))
}
