//! Result serialization. Floats are written with 17 significant digits so identical runs
//! produce byte-identical files; every file goes through a temporary file and a rename.

use crate::error::{Error, Result};
use serde::Serialize;
use std::io::Write;
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// `{:.16e}` for every finite float.
#[derive(Clone, Copy, Debug, Default)]
pub struct FixedFloatFormatter;

impl serde_json::ser::Formatter for FixedFloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{}", format_f64(v))
    }
    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    kind: &'a str,
    result: &'a T,
}

pub fn to_json_bytes<T: Serialize>(kind: &str, value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloatFormatter);
    Envelope { schema_version: SCHEMA_VERSION, kind, result: value }.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    write_atomic(path, &to_json_bytes(kind, value)?)
}

/// RFC-4180 table with a leading `schema_version` column.
pub fn csv_bytes(headers: &[&str], rows: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let map = |e: csv::Error| Error::Numeric(format!("csv: {e}"));
    let mut head = vec!["schema_version"];
    head.extend_from_slice(headers);
    w.write_record(&head).map_err(map)?;
    let version = SCHEMA_VERSION.to_string();
    for row in rows {
        if row.len() != headers.len() {
            return Err(Error::Config(format!("csv row has {} fields, expected {}", row.len(), headers.len())));
        }
        let mut rec = vec![version.clone()];
        rec.extend(row.iter().map(|v| format_f64(*v)));
        w.write_record(&rec).map_err(map)?;
    }
    w.into_inner().map_err(|e| Error::Numeric(format!("csv: {e}")))
}

pub fn write_csv(path: &Path, headers: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, &csv_bytes(headers, rows)?)
}
