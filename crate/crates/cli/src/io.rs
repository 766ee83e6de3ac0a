//! Space files in JSON and CSV.
//!
//! JSON: `{"labels": [...], "weights": [...], "distances": [[...], ...]}`.
//! CSV: optional `# labels: ...` and `# weights: ...` header lines followed by
//! one matrix row per line. In both formats the matrix may be given in full
//! or as its lower triangle (row `i` holding `i` or `i + 1` entries); labels
//! default to `0..n` and weights to `1/n`.

use std::fs;
use std::path::Path;

use cel_core::metric::{validate_metric, MetricMatrix, SquareMatrix, ValidationMode, DEFAULT_EXHAUSTIVE_CAP};
use cel_core::MetricMeasureSpace;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    #[serde(default)]
    labels: Option<Vec<String>>,
    #[serde(default)]
    weights: Option<Vec<f64>>,
    distances: Vec<Vec<f64>>,
}

/// Exhaustive-validation cap, overridable through `CEL_MAX_N`.
pub fn exhaustive_cap() -> usize {
    std::env::var("CEL_MAX_N")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_EXHAUSTIVE_CAP)
}

/// Expands a full or lower-triangular row list into a square matrix.
fn square_from_rows(rows: Vec<Vec<f64>>, origin: &dyn Fn(usize) -> String) -> Result<SquareMatrix, CliError> {
    let n = rows.len();
    if n == 0 {
        return Err(CliError::input("distance matrix is empty"));
    }
    if rows.iter().all(|r| r.len() == n) {
        return SquareMatrix::from_rows(&rows).map_err(CliError::from);
    }
    // lower triangle, with or without the diagonal
    let offset = if rows[0].is_empty() { 0 } else { 1 };
    let mut m = SquareMatrix::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != i + offset {
            return Err(CliError::input(format!(
                "{}: expected {} entries for a {} of {n} rows, found {}",
                origin(i),
                i + offset,
                if offset == 1 { "lower triangle with diagonal" } else { "strict lower triangle" },
                row.len()
            )));
        }
        for (j, v) in row.iter().enumerate().take(i) {
            m.set(i, j, *v);
            m.set(j, i, *v);
        }
        if offset == 1 {
            m.set(i, i, row[i]);
        }
    }
    Ok(m)
}

fn assemble(
    labels: Option<Vec<String>>,
    weights: Option<Vec<f64>>,
    matrix: SquareMatrix,
    weight_origin: &dyn Fn(usize) -> String,
) -> Result<MetricMeasureSpace, CliError> {
    let n = matrix.n();
    let labels = labels.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
    let weights = weights.unwrap_or_else(|| vec![1.0 / n as f64; n]);
    if labels.len() != n {
        return Err(CliError::input(format!("{} labels for {n} points", labels.len())));
    }
    if weights.len() != n {
        return Err(CliError::input(format!("{} weights for {n} points", weights.len())));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(CliError::input(format!(
            "{}: weight of `{}` must be positive and finite, got {}",
            weight_origin(i),
            labels[i],
            weights[i]
        )));
    }
    let distances = MetricMatrix::new(matrix)?;
    Ok(MetricMeasureSpace::from_trusted_parts(labels, distances, weights)?)
}

/// Exhaustive up to [`exhaustive_cap`] points, sampled with a warning beyond.
pub fn validation_mode(n: usize, seed: u64) -> ValidationMode {
    let cap = exhaustive_cap();
    if n > cap {
        log::warn!("{n} points exceed the exhaustive cap {cap}; sampling triples instead");
    }
    ValidationMode::for_size(n, cap, seed)
}

pub fn check_axioms(space: MetricMeasureSpace) -> Result<MetricMeasureSpace, CliError> {
    let report = validate_metric(space.distances(), validation_mode(space.n(), 0));
    if report.passed {
        Ok(space)
    } else {
        Err(CliError::Axiom(Box::new(report)))
    }
}

/// Parses without the axiom scan.
pub fn parse_space_json_unchecked(text: &str) -> Result<MetricMeasureSpace, CliError> {
    let file: SpaceFile = serde_json::from_str(text)
        .map_err(|e| CliError::input(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    let matrix = square_from_rows(file.distances, &|i| format!("distances row {i}"))?;
    assemble(file.labels, file.weights, matrix, &|i| format!("weights[{i}]"))
}

fn parse_header_fields(line: &str, lineno: usize) -> Result<Vec<String>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(line.trim().as_bytes());
    match reader.records().next() {
        Some(Ok(rec)) => Ok(rec.iter().map(str::to_string).collect()),
        Some(Err(e)) => Err(CliError::input(format!("line {lineno}: {e}"))),
        None => Ok(Vec::new()),
    }
}

/// Parses without the axiom scan.
pub fn parse_space_csv_unchecked(text: &str) -> Result<MetricMeasureSpace, CliError> {
    let mut labels = None;
    let mut weights: Option<Vec<f64>> = None;
    let mut weights_line = 0;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_lines: Vec<usize> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim_start();
            if let Some(rest) = comment.strip_prefix("labels:") {
                labels = Some(parse_header_fields(rest, lineno)?);
            } else if let Some(rest) = comment.strip_prefix("weights:") {
                let fields = parse_header_fields(rest, lineno)?;
                let parsed = fields
                    .iter()
                    .enumerate()
                    .map(|(k, f)| {
                        f.parse::<f64>().map_err(|_| {
                            CliError::input(format!("line {lineno}, weight {}: `{f}` is not a number", k + 1))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                weights = Some(parsed);
                weights_line = lineno;
            }
            continue;
        }
        let fields = parse_header_fields(line, lineno)?;
        let row = fields
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_empty())
            .map(|(k, f)| {
                f.parse::<f64>().map_err(|_| {
                    CliError::input(format!("line {lineno}, column {}: `{f}` is not a number", k + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
        row_lines.push(lineno);
    }
    let matrix = square_from_rows(rows, &|i| format!("line {}", row_lines[i]))?;
    assemble(labels, weights, matrix, &|i| format!("line {weights_line}, weight {}", i + 1))
}

pub fn parse_space_json(text: &str) -> Result<MetricMeasureSpace, CliError> {
    check_axioms(parse_space_json_unchecked(text)?)
}

pub fn parse_space_csv(text: &str) -> Result<MetricMeasureSpace, CliError> {
    check_axioms(parse_space_csv_unchecked(text)?)
}

pub fn parse_space_unchecked(path: &Path, format: Option<Format>) -> Result<MetricMeasureSpace, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let parsed = match format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Json => parse_space_json_unchecked(&text),
        Format::Csv => parse_space_csv_unchecked(&text),
    };
    parsed.map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_space(path: &Path, format: Option<Format>) -> Result<MetricMeasureSpace, CliError> {
    check_axioms(parse_space_unchecked(path, format)?)
}

pub fn space_to_json(space: &MetricMeasureSpace) -> String {
    let file = SpaceFile {
        labels: Some(space.labels().to_vec()),
        weights: Some(space.weights().to_vec()),
        distances: space.distances().to_rows(),
    };
    serde_json::to_string_pretty(&file).expect("space serializes")
}

fn csv_line(fields: impl IntoIterator<Item = String>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(fields).expect("in-memory write");
    let bytes = w.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("utf-8 input")
}

pub fn space_to_csv(space: &MetricMeasureSpace) -> String {
    let mut out = String::new();
    out.push_str("# labels: ");
    out.push_str(&csv_line(space.labels().iter().cloned()));
    out.push_str("# weights: ");
    out.push_str(&csv_line(space.weights().iter().map(|w| w.to_string())));
    for i in 0..space.n() {
        out.push_str(&csv_line(space.distances().row(i).iter().map(|v| v.to_string())));
    }
    out
}

/// A flat table written with the `csv` crate.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
    w.write_record(header).map_err(|e| CliError::input(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| CliError::input(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::input(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use cel_core::fixtures;

    #[test]
    fn json_and_csv_round_trip() {
        for (_, space) in fixtures::standard() {
            assert_eq!(parse_space_json(&space_to_json(&space)).unwrap(), space);
            assert_eq!(parse_space_csv(&space_to_csv(&space)).unwrap(), space);
        }
    }

    #[test]
    fn lower_triangles_are_accepted() {
        let with_diag = r#"{"distances": [[0], [1, 0], [1, 1, 0]]}"#;
        let strict = r#"{"distances": [[], [1], [1, 1]]}"#;
        let a = parse_space_json(with_diag).unwrap();
        let b = parse_space_json(strict).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.d(2, 0), 1.0);
        assert_eq!(a.weights(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn csv_errors_name_their_line() {
        let neg = "# labels: a,b\n# weights: 0.5,-0.5\n0,1\n1,0\n";
        let err = parse_space_csv(neg).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("`b`"), "{err}");
        let bad = "0,1\n1,x\n";
        let err = parse_space_csv(bad).unwrap_err().to_string();
        assert!(err.contains("line 2, column 2"), "{err}");
        let asym = "0,1,1\n1,0,1\n2,1,0\n";
        match parse_space_csv(asym).unwrap_err() {
            CliError::Axiom(report) => assert!(!report.passed),
            other => panic!("expected an axiom error, got {other}"),
        }
    }

    #[test]
    fn quoted_labels_survive() {
        let space = MetricMeasureSpace::new(
            vec!["a,b".into(), "c\"d".into()],
            fixtures::p2().distances().clone(),
            vec![0.25, 0.75],
        )
        .unwrap();
        assert_eq!(parse_space_csv(&space_to_csv(&space)).unwrap(), space);
    }
}
