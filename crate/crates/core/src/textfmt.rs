//! Line-oriented numeric files: one JSON header line, then one row of
//! space-separated hex floats per line (see [`crate::hexfloat`]).

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hexfloat;

pub(crate) fn write<H: Serialize>(
    out: &mut impl Write,
    header: &H,
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<()> {
    serde_json::to_writer(&mut *out, header)?;
    out.write_all(b"\n")?;
    for row in rows {
        out.write_all(hexfloat::encode_all(&row).join(" ").as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses the header and exactly `expected_rows(&header)` rows of
/// `width` values each. Line numbers in errors are 1-based.
pub(crate) fn read<H: DeserializeOwned>(
    text: &str,
    format: &str,
    version: u32,
    shape: impl Fn(&H) -> (usize, usize),
) -> Result<(H, Vec<Vec<f64>>)> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    let raw: serde_json::Value =
        serde_json::from_str(first).map_err(|e| Error::parse(1, format!("bad header: {e}")))?;
    match raw.get("format").and_then(|v| v.as_str()) {
        Some(f) if f == format => {}
        other => return Err(Error::parse(1, format!("expected format {format:?}, found {other:?}"))),
    }
    match raw.get("version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(version) => {}
        other => return Err(Error::parse(1, format!("unknown version {other:?}"))),
    }
    let header: H =
        serde_json::from_value(raw).map_err(|e| Error::parse(1, format!("bad header: {e}")))?;
    let (count, width) = shape(&header);
    let mut rows = Vec::with_capacity(count);
    for (line_no, line) in lines.by_ref() {
        if rows.len() == count {
            if line.trim().is_empty() {
                continue;
            }
            return Err(Error::parse(line_no, "unexpected data after the last row"));
        }
        let row = line
            .split_ascii_whitespace()
            .map(|tok| {
                hexfloat::decode(tok)
                    .ok_or_else(|| Error::parse(line_no, format!("bad hex float {tok:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != width {
            return Err(Error::parse(
                line_no,
                format!("expected {width} values, found {}", row.len()),
            ));
        }
        rows.push(row);
    }
    if rows.len() != count {
        return Err(Error::parse(
            rows.len() + 2,
            format!("truncated: header declares {count} rows, found {}", rows.len()),
        ));
    }
    Ok((header, rows))
}
