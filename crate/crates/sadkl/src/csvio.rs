//! Dataset and score files.
//!
//! Datasets use the header `f0,...,f{d-1},label_state,ground_truth,y`, one
//! sample per row, with floats written to 17 significant digits so that a
//! save/load round trip is exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use sadkl_core::data::{Dataset, GroundTruth, LabelState, Sample};

use crate::error::{CliError, Context, Result};

/// `{:.16e}`: 17 significant digits, enough to recover any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

pub(crate) fn finish(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    header.extend(["label_state", "ground_truth", "y"].map(String::from));
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for s in ds.samples() {
        let mut row: Vec<String> = s.features.iter().map(|&v| fmt_f64(v)).collect();
        row.push(s.label_state.to_string());
        row.push(s.ground_truth.to_string());
        row.push(fmt_f64(s.y));
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    finish(path, w)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn records(path: &Path) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(io) => CliError::io(path, io),
                kind => CliError::parse(path, line, format!("{kind:?}")),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_finite(path: &Path, line: u64, column: &str, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| CliError::parse(path, line, format!("{column}: {field:?} is not a number")))?;
    if !v.is_finite() {
        return Err(CliError::parse(
            path,
            line,
            format!("{column}: {field} is not finite"),
        ));
    }
    Ok(v)
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let rows = records(path)?;
    let Some(((header_line, header), body)) = rows.split_first() else {
        return Err(CliError::parse(path, 1, "empty file, expected a header"));
    };
    let cols: Vec<&str> = header.iter().collect();
    let dim = cols.len().saturating_sub(3);
    let expected: Vec<String> = (0..dim)
        .map(|i| format!("f{i}"))
        .chain(["label_state", "ground_truth", "y"].map(String::from))
        .collect();
    if dim == 0 || cols != expected {
        return Err(CliError::parse(
            path,
            *header_line,
            format!(
                "header must be f0,...,f<d-1>,label_state,ground_truth,y, got {}",
                cols.join(",")
            ),
        ));
    }
    if body.is_empty() {
        return Err(CliError::parse(
            path,
            *header_line,
            "no samples after the header",
        ));
    }
    let mut samples = Vec::with_capacity(body.len());
    for (line, rec) in body {
        let line = *line;
        if rec.len() != dim + 3 {
            return Err(CliError::parse(
                path,
                line,
                format!("expected {} fields, found {}", dim + 3, rec.len()),
            ));
        }
        let features = (0..dim)
            .map(|i| parse_finite(path, line, &expected[i], &rec[i]))
            .collect::<Result<Vec<f64>>>()?;
        let label_state: LabelState = rec[dim]
            .parse()
            .map_err(|e| CliError::parse(path, line, format!("{e}")))?;
        let ground_truth: GroundTruth = rec[dim + 1]
            .parse()
            .map_err(|e| CliError::parse(path, line, format!("{e}")))?;
        let y = parse_finite(path, line, "y", &rec[dim + 2])?;
        samples.push(Sample {
            features,
            label_state,
            ground_truth,
            y,
        });
    }
    Dataset::new(samples).context("dataset")
}

/// Reads a one-column file of scores. A non-numeric first row is taken as a
/// header.
pub fn load_scores(path: &Path) -> Result<Vec<f64>> {
    let rows = records(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, (line, rec)) in rows.iter().enumerate() {
        if rec.len() != 1 {
            return Err(CliError::parse(
                path,
                *line,
                format!("expected one column, found {}", rec.len()),
            ));
        }
        if i == 0 && rec[0].parse::<f64>().is_err() {
            continue;
        }
        out.push(parse_finite(path, *line, "score", &rec[0])?);
    }
    if out.is_empty() {
        return Err(CliError::parse(path, 1, "no scores"));
    }
    Ok(out)
}

pub fn save_scores(scores: &[f64], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "score").map_err(io)?;
    for &s in scores {
        writeln!(w, "{}", fmt_f64(s)).map_err(io)?;
    }
    finish(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            1.7976931348623157e308,
            5e-324,
            0.0,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
