//! Text formats: numeric matrices (CSV/TSV, rows = features, columns =
//! points), label files and constraint files. Labels and point indices are
//! one-based on disk and zero-based in memory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Constraint, LinkKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Csv,
    Tsv,
}

impl Delimiter {
    /// `.tsv` / `.tab` files are tab separated, everything else comma separated.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("tsv") || e.eq_ignore_ascii_case("tab") => Delimiter::Tsv,
            _ => Delimiter::Csv,
        }
    }

    fn char(self) -> char {
        match self {
            Delimiter::Csv => ',',
            Delimiter::Tsv => '\t',
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn parse_error(path: &Path, line: usize, column: Option<usize>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message: message.into(),
    }
}

/// Non-blank lines with their one-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Parses a rectangular numeric table; `path` is only used in diagnostics.
pub fn parse_matrix(text: &str, delim: Delimiter, path: &Path) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (line_no, line) in content_lines(text) {
        let row = line
            .split(delim.char())
            .enumerate()
            .map(|(col, cell)| {
                let cell = cell.trim();
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_error(path, line_no, Some(col + 1), format!("not a finite number: {cell:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_error(
                    path,
                    line_no,
                    None,
                    format!("row has {} fields, expected {w}", row.len()),
                ))
            }
            Some(_) => {}
        }
        rows.push(row);
    }
    let Some(width) = width else {
        return Err(parse_error(path, 1, None, "empty matrix file"));
    };
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

pub fn load_matrix(path: &Path, delim: Delimiter) -> Result<DMatrix<f64>> {
    parse_matrix(&read(path)?, delim, path)
}

/// Row per line, 17 significant digits, so a load of the output is exact.
pub fn format_matrix(m: &DMatrix<f64>, delim: Delimiter) -> String {
    let mut out = String::with_capacity(m.len() * 24);
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(delim.char());
            }
            write!(out, "{v:.16e}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn save_matrix(path: &Path, m: &DMatrix<f64>, delim: Delimiter) -> Result<()> {
    write(path, &format_matrix(m, delim))
}

pub fn save_mask(path: &Path, m: &DMatrix<bool>) -> Result<()> {
    let mut out = String::with_capacity(m.len() * 2);
    for row in m.row_iter() {
        let cells: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    write(path, &out)
}

/// One positive label per line, or all labels on one delimited line.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (line_no, line) in content_lines(text) {
        for (col, cell) in line.split([',', '\t', ' ']).filter(|c| !c.trim().is_empty()).enumerate() {
            let v: usize = cell
                .trim()
                .parse()
                .map_err(|_| parse_error(path, line_no, Some(col + 1), format!("not a label: {cell:?}")))?;
            if v == 0 {
                return Err(parse_error(path, line_no, Some(col + 1), "labels are one-based"));
            }
            labels.push(v - 1);
        }
    }
    if labels.is_empty() {
        return Err(parse_error(path, 1, None, "empty label file"));
    }
    Ok(labels)
}

pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&read(path)?, path)
}

pub fn format_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        writeln!(out, "{}", l + 1).expect("writing to a String");
    }
    out
}

pub fn save_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write(path, &format_labels(labels))
}

/// Lines `i,j,must` or `i,j,cannot` with one-based indices. When `n_points`
/// is given, indices are range-checked. Conflicting constraints on the same
/// unordered pair are rejected.
pub fn parse_constraints(text: &str, n_points: Option<usize>, path: &Path) -> Result<Vec<Constraint>> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for (line_no, line) in content_lines(text) {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_error(path, line_no, None, format!("expected i,j,must|cannot, got {line:?}")));
        }
        let index = |k: usize| -> Result<usize> {
            let v: usize = fields[k]
                .parse()
                .map_err(|_| parse_error(path, line_no, Some(k + 1), format!("bad index {:?}", fields[k])))?;
            if v == 0 || n_points.is_some_and(|n| v > n) {
                return Err(parse_error(
                    path,
                    line_no,
                    Some(k + 1),
                    format!("index {v} out of range 1..={}", n_points.map_or("N".into(), |n| n.to_string())),
                ));
            }
            Ok(v - 1)
        };
        let (i, j) = (index(0)?, index(1)?);
        if i == j {
            return Err(parse_error(path, line_no, None, "constraint links a point to itself"));
        }
        let kind = match fields[2].to_ascii_lowercase().as_str() {
            "must" => LinkKind::Must,
            "cannot" => LinkKind::Cannot,
            other => return Err(parse_error(path, line_no, Some(3), format!("bad link kind {other:?}"))),
        };
        let c = Constraint::new(i, j, kind);
        match seen.insert(c.pair(), (kind, line_no)) {
            Some((prev, prev_line)) if prev != kind => {
                return Err(parse_error(
                    path,
                    line_no,
                    None,
                    format!("conflicts with line {prev_line} for pair ({}, {})", c.pair().0 + 1, c.pair().1 + 1),
                ))
            }
            Some(_) => {}
            None => out.push(c),
        }
    }
    Ok(out)
}

pub fn load_constraints(path: &Path, n_points: Option<usize>) -> Result<Vec<Constraint>> {
    parse_constraints(&read(path)?, n_points, path)
}

pub fn format_constraints(constraints: &[Constraint]) -> String {
    let mut out = String::new();
    for c in constraints {
        let kind = match c.kind {
            LinkKind::Must => "must",
            LinkKind::Cannot => "cannot",
        };
        writeln!(out, "{},{},{kind}", c.i + 1, c.j + 1).expect("writing to a String");
    }
    out
}

pub fn save_constraints(path: &Path, constraints: &[Constraint]) -> Result<()> {
    write(path, &format_constraints(constraints))
}
