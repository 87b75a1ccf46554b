//! The `timestamps.json` record store.
//!
//! On disk the store is a JSON array of record objects sorted by path. Unknown
//! per-record fields are kept and written back unchanged. An object with a
//! `records` array is also accepted on read.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::TsaError;

pub const STORE_FILE: &str = "timestamps.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimestampRecord {
    pub path: String,
    pub sha256: String,
    pub tsa_url: String,
    pub token_b64: String,
    pub gen_time: String,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

const FIELDS: [&str; 5] = ["path", "sha256", "tsa_url", "token_b64", "gen_time"];

fn record_from_value(v: Value) -> Result<TimestampRecord, TsaError> {
    let Value::Object(mut map) = v else {
        return Err(TsaError::SchemaError("record".into()));
    };
    let mut take = |field: &str| match map.remove(field) {
        Some(Value::String(s)) => Ok(s),
        _ => Err(TsaError::SchemaError(field.into())),
    };
    let [path, sha256, tsa_url, token_b64, gen_time] = FIELDS.map(&mut take);
    let record = TimestampRecord {
        path: path?,
        sha256: sha256?,
        tsa_url: tsa_url?,
        token_b64: token_b64?,
        gen_time: gen_time?,
        extra: map.into_iter().collect(),
    };
    if record.sha256.len() != 64 || !record.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(TsaError::SchemaError("sha256".into()));
    }
    Ok(record)
}

pub fn parse_records(text: &str) -> Result<Vec<TimestampRecord>, TsaError> {
    let v: Value = serde_json::from_str(text).map_err(|_| TsaError::SchemaError("$".into()))?;
    let list = match v {
        Value::Array(items) => items,
        Value::Object(mut map) => match map.remove("records") {
            Some(Value::Array(items)) => items,
            _ => return Err(TsaError::SchemaError("records".into())),
        },
        _ => return Err(TsaError::SchemaError("$".into())),
    };
    list.into_iter().map(record_from_value).collect()
}

pub fn read_records(path: &Path) -> Result<Vec<TimestampRecord>, TsaError> {
    parse_records(&fs::read_to_string(path)?)
}

pub fn render_records(records: &[TimestampRecord]) -> String {
    let mut sorted: Vec<&TimestampRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.path.cmp(&b.path).then_with(|| a.gen_time.cmp(&b.gen_time)));
    let mut out = serde_json::to_string_pretty(&sorted).expect("records serialize");
    out.push('\n');
    out
}

/// Replaces the store at `path` atomically (temp file + rename).
pub fn write_records(path: &Path, records: &[TimestampRecord]) -> Result<(), TsaError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(render_records(records).as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| TsaError::Io(e.error))?;
    Ok(())
}

/// Adds one record to the store, creating it if needed.
pub fn append_record(path: &Path, record: TimestampRecord) -> Result<usize, TsaError> {
    let mut records = if path.exists() { read_records(path)? } else { Vec::new() };
    records.push(record);
    write_records(path, &records)?;
    Ok(records.len())
}
