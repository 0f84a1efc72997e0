//! `FEATSET v1` text format.
//!
//! ```text
//! FEATSET v1 c=<classes> l=<width> n=<records>
//! <label>,<f_1>,...,<f_l>
//! ```
//!
//! Records are numbered from 1; the header is record 0. Values are written
//! with Rust's shortest round-trip formatting, so save/load is lossless.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use super::dataset::Dataset;
use crate::error::{MtdError, Result};
use crate::model::{ClassLabel, FeatureVector, LabeledSample};

pub const MAGIC: &str = "FEATSET";
pub const VERSION: &str = "v1";

pub fn write_features<W: Write>(dataset: &Dataset, mut out: W) -> io::Result<()> {
    writeln!(
        out,
        "{MAGIC} {VERSION} c={} l={} n={}",
        dataset.classes(),
        dataset.width(),
        dataset.len()
    )?;
    let mut line = String::new();
    for s in dataset.samples() {
        line.clear();
        line.push_str(&s.label.index().to_string());
        for x in s.features.as_slice() {
            line.push(',');
            line.push_str(&x.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn to_feature_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_features(dataset, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "features".to_string());
    parse_features(&text, name)
}

fn parse_error(record: usize, message: impl Into<String>) -> MtdError {
    MtdError::Parse {
        record,
        line: record + 1,
        message: message.into(),
    }
}

fn header_field(token: Option<&str>, key: &str) -> Result<usize> {
    let token = token.ok_or_else(|| parse_error(0, format!("missing {key}= field")))?;
    let value = token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| parse_error(0, format!("expected {key}=<int>, found {token:?}")))?;
    value
        .parse()
        .map_err(|_| parse_error(0, format!("{key} is not a non-negative integer: {value:?}")))
}

pub fn parse_features(text: &str, name: impl Into<String>) -> Result<Dataset> {
    let mut lines: Vec<&str> = text.lines().map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    let header = lines.first().ok_or_else(|| parse_error(0, "empty file"))?;

    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(MAGIC) {
        return Err(parse_error(0, format!("header must start with {MAGIC}")));
    }
    match tokens.next() {
        Some(VERSION) => {}
        other => return Err(parse_error(0, format!("unsupported version {other:?}"))),
    }
    let classes = header_field(tokens.next(), "c")?;
    let width = header_field(tokens.next(), "l")?;
    let declared = header_field(tokens.next(), "n")?;
    if let Some(extra) = tokens.next() {
        return Err(parse_error(0, format!("unexpected header token {extra:?}")));
    }
    if classes == 0 || width == 0 {
        return Err(parse_error(0, "c and l must be at least 1"));
    }

    let records = &lines[1..];
    if records.len() > declared {
        return Err(parse_error(
            declared + 1,
            format!("header declares n={declared} but more records follow"),
        ));
    }

    let mut samples = Vec::with_capacity(declared);
    for (k, line) in records.iter().enumerate() {
        let record = k + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != width + 1 {
            return Err(parse_error(
                record,
                format!("expected {} fields, found {}", width + 1, fields.len()),
            ));
        }
        let label: usize = fields[0]
            .parse()
            .map_err(|_| parse_error(record, format!("invalid label {:?}", fields[0])))?;
        if label >= classes {
            return Err(parse_error(
                record,
                format!("label {label} outside [0, {classes})"),
            ));
        }
        let mut values = Vec::with_capacity(width);
        for (col, field) in fields[1..].iter().enumerate() {
            let x: f64 = field
                .parse()
                .map_err(|_| parse_error(record, format!("invalid number {field:?} in column {}", col + 1)))?;
            if !x.is_finite() {
                return Err(parse_error(
                    record,
                    format!("non-finite value in column {}", col + 1),
                ));
            }
            values.push(x);
        }
        samples.push(LabeledSample::new(
            FeatureVector::new(values)?,
            ClassLabel::new(label, classes)?,
        ));
    }
    if samples.len() != declared {
        return Err(parse_error(
            samples.len() + 1,
            format!("header declares n={declared}, found {} records", samples.len()),
        ));
    }
    Dataset::new(name, classes, width, samples)
}
