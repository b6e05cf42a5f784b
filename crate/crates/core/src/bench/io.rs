use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{OptimizerConfig, TraceRecord};
use crate::scenario::ScenarioParams;

pub const CSV_COLUMNS: [&str; 9] = [
    "scenario_id",
    "scheme",
    "seed",
    "swept_name",
    "swept_value",
    "metric",
    "value",
    "ci_halfwidth",
    "runtime_ms",
];

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// One CSV record. Empty `swept_name`/`swept_value` mean no sweep axis;
/// empty `ci_halfwidth` means a deterministic value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub scheme: String,
    pub seed: u64,
    pub swept_name: String,
    pub swept_value: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub ci_halfwidth: Option<f64>,
    pub runtime_ms: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes a `#` line with the generation time, the header, then `rows`.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W, path: &Path) -> Result<()> {
    let mut out = out;
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    writeln!(out, "# generated_unix_s={stamp}").map_err(io_err(path))?;
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_COLUMNS).map_err(csv_err(path))?;
    for row in rows {
        writer.serialize(row).map_err(csv_err(path))?;
    }
    writer.flush().map_err(io_err(path))
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    write_csv(rows, BufWriter::new(file), path)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(BufReader::new(file));
    let header = reader.headers().map_err(csv_err(path))?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::config(
            "csv header",
            format!("unexpected columns in {}", path.display()),
        ));
    }
    reader
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err(path))
}

/// Optimizer run persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDocument {
    pub schema_version: u32,
    pub scheme: String,
    pub seed: u64,
    pub scenario: ScenarioParams,
    pub optimizer: OptimizerConfig,
    /// Feed indicators `ξ_n` (1 = left).
    pub feeds: Vec<u8>,
    pub positions_m: Vec<f64>,
    pub per_user_rate: Vec<f64>,
    pub sum_rate: f64,
    pub phase_one_rate: Option<f64>,
    pub converged: Option<bool>,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceRecord>,
}

pub fn emit_json(doc: &TraceDocument, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, doc).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    writeln!(out).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

pub fn read_json(path: &Path) -> Result<TraceDocument> {
    let file = File::open(path).map_err(io_err(path))?;
    let doc: TraceDocument = serde_json::from_reader(BufReader::new(file)).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if doc.schema_version != TRACE_SCHEMA_VERSION {
        return Err(Error::config(
            "schema_version",
            format!("expected {TRACE_SCHEMA_VERSION}, found {}", doc.schema_version),
        ));
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::Phase;

    fn rows() -> Vec<ResultRow> {
        vec![
            ResultRow {
                scenario_id: "lx-0".into(),
                scheme: "DF-PAS".into(),
                seed: 3,
                swept_name: "service_length_m".into(),
                swept_value: Some(10.0),
                metric: "erate_mc".into(),
                value: 13.838_421_907_123_45,
                ci_halfwidth: Some(1.234e-3),
                runtime_ms: 17,
            },
            ResultRow {
                scenario_id: "lx-1".into(),
                scheme: "SF-PAS".into(),
                seed: u64::MAX,
                swept_name: String::new(),
                swept_value: None,
                metric: "sum_rate".into(),
                value: -0.1 + 0.2,
                ci_halfwidth: None,
                runtime_ms: 0,
            },
        ]
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        emit_csv(&rows(), &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows());
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# generated_unix_s="));
        assert!(text.contains("13.83842190712345,0.001234,17"));
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        emit_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], CSV_COLUMNS.join(","));
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let mut doc = TraceDocument {
            schema_version: TRACE_SCHEMA_VERSION,
            scheme: "DF-PAS".into(),
            seed: 1,
            scenario: ScenarioParams::default(),
            optimizer: OptimizerConfig::default(),
            feeds: vec![1, 0],
            positions_m: vec![0.1 + 0.2, 9.75],
            per_user_rate: vec![30.000_000_000_000_004, 1e-300],
            sum_rate: 30.000_000_000_000_004,
            phase_one_rate: Some(29.5),
            converged: Some(true),
            warnings: vec![],
            trace: vec![TraceRecord {
                iteration: 0,
                phase: Phase::FeedSelection,
                sum_rate: 29.5,
                step_size: None,
                feeds: vec![1, 0],
            }],
        };
        emit_json(&doc, &path).unwrap();
        assert_eq!(read_json(&path).unwrap(), doc);
        doc.schema_version = 99;
        emit_json(&doc, &path).unwrap();
        assert!(matches!(read_json(&path), Err(Error::Config { .. })));
    }

    #[test]
    fn missing_file_names_the_path() {
        let err = read_csv(Path::new("/nonexistent/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.csv"));
    }
}
