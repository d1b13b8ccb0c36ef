//! CSV emission and parsing for sweep records.
//!
//! Header comment lines are prefixed with `#` and carry the configuration
//! echo and run metadata; the body is one row per radius with a fixed column
//! order. Floats are written in scientific notation with 17 significant
//! digits, which round-trips `f64` exactly.

use crate::error::{CliError, Result};
use capacity::sweep::SweepRecord;

pub fn column_header(d: usize) -> String {
    let mut cols = vec!["r".to_string()];
    for i in 0..d {
        cols.push(format!("z{i}"));
    }
    for c in [
        "cap_a",
        "cap_a_err",
        "cap_b",
        "cap_b_err",
        "cap_union",
        "cap_union_err",
        "kernel",
        "ratio",
        "ratio_err",
        "target",
        "target_err",
        "n",
        "flags",
    ] {
        cols.push(c.to_string());
    }
    cols.join(",")
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn record_row(rec: &SweepRecord) -> String {
    let mut fields = vec![rec.r.to_string()];
    for &c in &rec.z {
        fields.push(c.to_string());
    }
    for v in [
        rec.cap_a,
        rec.cap_a_err,
        rec.cap_b,
        rec.cap_b_err,
        rec.cap_union,
        rec.cap_union_err,
        rec.kernel_at_z,
        rec.ratio,
        rec.ratio_err,
        rec.target,
        rec.target_err,
    ] {
        fields.push(fmt(v));
    }
    fields.push(rec.n_samples.to_string());
    fields.push(rec.flags.clone());
    fields.join(",")
}

/// Full document: `#` header lines, the column header, then one row per
/// record.
pub fn write_csv(header_comments: &[String], d: usize, records: &[SweepRecord]) -> String {
    let mut out = String::new();
    for line in header_comments {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&column_header(d));
    out.push('\n');
    for rec in records {
        out.push_str(&record_row(rec));
        out.push('\n');
    }
    out
}

/// The non-comment part of a document: used for byte-identity comparisons
/// across worker counts (header comments echo the worker setting).
pub fn body_of(document: &str) -> String {
    document
        .lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

fn parse_f64(s: &str, col: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| CliError::Config(format!("bad float '{s}' in column {col}")))
}

/// Parse a document back into records. Inverse of [`write_csv`] on the body.
pub fn parse_csv(document: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = document.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty csv document".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let d = cols
        .iter()
        .filter(|c| c.starts_with('z') && c[1..].chars().all(|ch| ch.is_ascii_digit()))
        .count();
    if d == 0 || cols.len() != d + 14 {
        return Err(CliError::Config(format!(
            "unrecognized csv header with {} columns",
            cols.len()
        )));
    }
    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != d + 14 {
            return Err(CliError::Config(format!(
                "row has {} fields, expected {}",
                f.len(),
                d + 14
            )));
        }
        let r = f[0]
            .parse::<i64>()
            .map_err(|_| CliError::Config(format!("bad radius '{}'", f[0])))?;
        let mut z = Vec::with_capacity(d);
        for zi in &f[1..1 + d] {
            z.push(
                zi.parse::<i64>()
                    .map_err(|_| CliError::Config(format!("bad z coordinate '{zi}'")))?,
            );
        }
        let g = |i: usize| -> &str { f[1 + d + i] };
        records.push(SweepRecord {
            r,
            z,
            cap_a: parse_f64(g(0), "cap_a")?,
            cap_a_err: parse_f64(g(1), "cap_a_err")?,
            cap_b: parse_f64(g(2), "cap_b")?,
            cap_b_err: parse_f64(g(3), "cap_b_err")?,
            cap_union: parse_f64(g(4), "cap_union")?,
            cap_union_err: parse_f64(g(5), "cap_union_err")?,
            kernel_at_z: parse_f64(g(6), "kernel")?,
            ratio: parse_f64(g(7), "ratio")?,
            ratio_err: parse_f64(g(8), "ratio_err")?,
            target: parse_f64(g(9), "target")?,
            target_err: parse_f64(g(10), "target_err")?,
            n_samples: g(11)
                .parse::<u64>()
                .map_err(|_| CliError::Config(format!("bad sample count '{}'", g(11))))?,
            flags: g(12).to_string(),
        });
    }
    Ok(records)
}
