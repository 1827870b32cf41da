//! On-disk formats.
//!
//! * Histograms: CSV with header `m,n,count`, one row per grid bin sorted by
//!   `(m, n)`, LF line endings. Shots beyond the grid are kept on a final
//!   `#overflow,<count>` line, written only when nonzero.
//! * Raw shot lists: one `m,n` pair per line, optional header.
//! * Parameters: JSON object with keys `eta1, eta2, r, nu1, nu2, phi`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tmsvloss_core::{Cutoff, Histogram, ParamSet};

use crate::error::{Error, Result};

const OVERFLOW_TAG: &str = "#overflow,";

/// Writes `bytes` to a temporary file next to `path` and renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn histogram_to_csv(hist: &Histogram) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["m", "n", "count"]).expect("in-memory write");
    for (m, n, c) in hist.iter() {
        w.serialize((m, n, c)).expect("in-memory write");
    }
    let mut out = String::from_utf8(w.into_inner().expect("in-memory write")).expect("ascii");
    if hist.overflow() > 0 {
        out.push_str(&format!("{OVERFLOW_TAG}{}\n", hist.overflow()));
    }
    out
}

/// Parses a histogram CSV. The grid spans the largest `m` and `n` listed;
/// missing bins count as zero and repeated bins are summed.
pub fn parse_histogram(text: &str, path: &Path) -> Result<Histogram> {
    let mut overflow = 0u64;
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        if let Some(v) = line.strip_prefix(OVERFLOW_TAG) {
            overflow += v
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::parse(path, format!("overflow count: {e}")))?;
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["m", "n", "count"] {
        return Err(Error::parse(path, "expected header `m,n,count`"));
    }
    let mut rows = Vec::new();
    for record in reader.deserialize::<(usize, usize, u64)>() {
        rows.push(record.map_err(|e| Error::parse(path, e))?);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "no histogram rows"));
    }
    let a = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let b = rows.iter().map(|r| r.1).max().unwrap_or(0);
    let cutoff = Cutoff::new(a, b);
    let mut counts = vec![0u64; (a + 1) * (b + 1)];
    for (m, n, c) in rows {
        counts[m * (b + 1) + n] += c;
    }
    Ok(Histogram::from_counts(cutoff, counts, overflow)?)
}

pub fn read_histogram(path: &Path) -> Result<Histogram> {
    parse_histogram(&read_text(path)?, path)
}

pub fn write_histogram(path: &Path, hist: &Histogram) -> Result<()> {
    write_atomic(path, histogram_to_csv(hist).as_bytes())
}

/// Bins a raw shot list, one `m,n` outcome per line.
pub fn parse_shots(text: &str, path: &Path) -> Result<Histogram> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut shots = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::parse(path, e))?;
        let parsed = (record.get(0).map(str::parse::<usize>), record.get(1).map(str::parse::<usize>));
        match parsed {
            (Some(Ok(m)), Some(Ok(n))) if record.len() == 2 => shots.push((m, n)),
            _ if i == 0 => continue,
            _ => return Err(Error::parse(path, format!("line {}: expected `m,n`", i + 1))),
        }
    }
    Histogram::from_shots(shots).map_err(|_| Error::parse(path, "no shots"))
}

pub fn read_shots(path: &Path) -> Result<Histogram> {
    parse_shots(&read_text(path)?, path)
}

/// Reads a histogram CSV, or a raw shot list when `ingest` is set.
pub fn load_histogram(path: &Path, ingest: bool) -> Result<Histogram> {
    if ingest {
        read_shots(path)
    } else {
        read_histogram(path)
    }
}

pub fn read_params(path: &Path) -> Result<ParamSet> {
    let theta: ParamSet = serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path, e))?;
    theta.validate()?;
    Ok(theta)
}

pub fn write_params(path: &Path, theta: &ParamSet) -> Result<()> {
    write_json(path, theta)
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value).as_bytes())
}
