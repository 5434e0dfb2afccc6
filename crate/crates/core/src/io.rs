//! Text formats: points, Gram matrices, grids (plain or PGM), joint tables,
//! weight vectors, CSV traces and JSON-lines counterexample records.
//!
//! Blank lines are ignored everywhere. Errors carry the 1-based line number
//! of the offending input.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::divergence::EmpiricalMeasure;
use crate::entropy::DiscreteDistribution;
use crate::error::{GaitError, Result};
use crate::kernels::{GridMeasure, Points, SimilaritySpace};
use crate::modes::SweepResult;
use crate::optimize::TraceRow;
use crate::verify::CounterexampleRecord;

fn err(line: usize, msg: impl Into<String>) -> GaitError {
    GaitError::Parse { line, msg: msg.into() }
}

/// Non-blank lines with their line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn number(tok: &str, line: usize) -> Result<f64> {
    let v: f64 = tok.parse().map_err(|_| err(line, format!("'{tok}' is not a decimal number")))?;
    if !v.is_finite() {
        return Err(err(line, format!("'{tok}' is not finite")));
    }
    Ok(v)
}

fn count(tok: &str, line: usize, what: &str) -> Result<usize> {
    tok.parse().map_err(|_| err(line, format!("{what} '{tok}' is not a non-negative integer")))
}

fn row(text: &str, line: usize, expect: usize) -> Result<Vec<f64>> {
    let vals = text.split_whitespace().map(|t| number(t, line)).collect::<Result<Vec<f64>>>()?;
    if vals.len() != expect {
        return Err(err(line, format!("expected {expect} columns, found {}", vals.len())));
    }
    Ok(vals)
}

fn header<'a>(it: &mut impl Iterator<Item = (usize, &'a str)>, names: &[&str]) -> Result<(usize, Vec<usize>)> {
    let (line, text) = it.next().ok_or_else(|| err(1, "empty input"))?;
    let toks: Vec<&str> = text.split_whitespace().collect();
    if toks.len() != names.len() {
        return Err(err(line, format!("header must be '{}'", names.join(" "))));
    }
    let vals = toks.iter().zip(names).map(|(t, n)| count(t, line, n)).collect::<Result<Vec<usize>>>()?;
    Ok((line, vals))
}

/// Exactly `rows` rows of `cols` numbers, then end of input.
fn table<'a>(
    it: &mut impl Iterator<Item = (usize, &'a str)>,
    header_line: usize,
    rows: usize,
    cols: usize,
) -> Result<Vec<f64>> {
    let mut data = Vec::new();
    let mut last = header_line;
    for r in 0..rows {
        let (line, text) = it.next().ok_or_else(|| err(last + 1, format!("expected {rows} rows, found {r}")))?;
        data.extend(row(text, line, cols)?);
        last = line;
    }
    if let Some((line, _)) = it.next() {
        return Err(err(line, format!("unexpected extra row after {rows} rows")));
    }
    Ok(data)
}

/// `d n` header, then `n` rows of `d` coordinates.
pub fn parse_points(text: &str) -> Result<Points> {
    let mut it = lines(text);
    let (hl, h) = header(&mut it, &["d", "n"])?;
    let (d, n) = (h[0], h[1]);
    if d == 0 || n == 0 {
        return Err(err(hl, "dimension and point count must be positive"));
    }
    Points::new(d, table(&mut it, hl, n, d)?)
}

/// `d n` header, then `n` rows of `d` coordinates followed by a weight.
pub fn parse_weighted_points(text: &str) -> Result<EmpiricalMeasure> {
    let mut it = lines(text);
    let (hl, h) = header(&mut it, &["d", "n"])?;
    let (d, n) = (h[0], h[1]);
    if d == 0 || n == 0 {
        return Err(err(hl, "dimension and point count must be positive"));
    }
    let cols = d.checked_add(1).ok_or_else(|| err(hl, "dimension too large"))?;
    let data = table(&mut it, hl, n, cols)?;
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for r in data.chunks(cols) {
        coords.extend_from_slice(&r[..d]);
        weights.push(r[d]);
    }
    let w = DiscreteDistribution::from_weights(nalgebra::DVector::from_vec(weights))?;
    EmpiricalMeasure::new(Points::new(d, coords)?, w)
}

/// `n` header, then `n` rows of `n` similarities.
pub fn parse_gram(text: &str) -> Result<SimilaritySpace> {
    let mut it = lines(text);
    let (hl, h) = header(&mut it, &["n"])?;
    let n = h[0];
    if n == 0 {
        return Err(err(hl, "size must be positive"));
    }
    let data = table(&mut it, hl, n, n)?;
    SimilaritySpace::explicit(DMatrix::from_row_slice(n, n, &data))
}

/// `n m` header, then `n` rows of `m` nonnegative entries (not normalized).
pub fn parse_joint(text: &str) -> Result<DMatrix<f64>> {
    let mut it = lines(text);
    let (hl, h) = header(&mut it, &["n", "m"])?;
    let (n, m) = (h[0], h[1]);
    if n == 0 || m == 0 {
        return Err(err(hl, "table dimensions must be positive"));
    }
    let data = table(&mut it, hl, n, m)?;
    if data.iter().any(|v| *v < 0.0) {
        return Err(GaitError::NotADistribution("joint table has a negative entry".into()));
    }
    Ok(DMatrix::from_row_slice(n, m, &data))
}

/// Whitespace-separated decimals over any number of lines.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line, l) in lines(text) {
        for t in l.split_whitespace() {
            out.push(number(t, line)?);
        }
    }
    if out.is_empty() {
        return Err(err(1, "no values found"));
    }
    Ok(out)
}

/// Plain `d` header plus `d x d` intensities, or an ASCII PGM (`P2`).
pub fn parse_grid(text: &str) -> Result<GridMeasure> {
    let first = lines(text).next().map(|(_, l)| l);
    if first.is_some_and(|l| l.starts_with("P2")) {
        return parse_pgm(text);
    }
    let mut it = lines(text);
    let (hl, h) = header(&mut it, &["d"])?;
    let d = h[0];
    if d == 0 {
        return Err(err(hl, "grid side must be positive"));
    }
    let data = table(&mut it, hl, d, d)?;
    if data.iter().any(|v| *v < 0.0) {
        return Err(GaitError::NotADistribution("grid has a negative intensity".into()));
    }
    GridMeasure::from_intensities(DMatrix::from_row_slice(d, d, &data))
}

/// Tokens of a PGM file with comments stripped.
fn pgm_tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().flat_map(|(i, l)| {
        let body = l.split('#').next().unwrap_or("");
        body.split_whitespace().map(move |t| (i + 1, t))
    })
}

fn parse_pgm(text: &str) -> Result<GridMeasure> {
    let mut toks = pgm_tokens(text);
    let mut last_line = 1;
    let mut next = |what: &str| -> Result<(usize, String)> {
        match toks.next() {
            Some((l, t)) => {
                last_line = l;
                Ok((l, t.to_string()))
            }
            None => Err(err(last_line, format!("unexpected end of PGM data, expected {what}"))),
        }
    };
    let (l, magic) = next("magic")?;
    if magic != "P2" {
        return Err(err(l, "expected magic 'P2'"));
    }
    let (l, w) = next("width")?;
    let w = count(&w, l, "width")?;
    let (l, h) = next("height")?;
    let h = count(&h, l, "height")?;
    if w != h || w == 0 {
        return Err(err(l, format!("grid must be square and non-empty, got {w} x {h}")));
    }
    let (l, maxval) = next("maxval")?;
    let maxval = count(&maxval, l, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(err(l, "maxval must lie in 1..=65535"));
    }
    let total = w.checked_mul(h).ok_or_else(|| err(l, "grid too large"))?;
    let mut data = Vec::new();
    for _ in 0..total {
        let (l, t) = next("pixel value")?;
        let v = count(&t, l, "pixel")?;
        if v > maxval {
            return Err(err(l, format!("pixel {v} exceeds maxval {maxval}")));
        }
        data.push(v as f64);
    }
    if let Some((l, _)) = toks.next() {
        return Err(err(l, "unexpected data after the last pixel"));
    }
    GridMeasure::from_intensities(DMatrix::from_row_slice(w, w, &data))
}

/// Counterexample records, one JSON object per line.
pub fn parse_records(text: &str) -> Result<Vec<CounterexampleRecord>> {
    lines(text).map(|(line, l)| serde_json::from_str(l).map_err(|e| err(line, e.to_string()))).collect()
}

/// Shortest form with 12 significant digits, like C's `%.12g`.
pub fn fmt12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub fn format_points(points: &Points) -> String {
    let mut s = format!("{} {}\n", points.dim(), points.len());
    for r in points.rows() {
        let cells: Vec<String> = r.iter().map(|&v| fmt12(v)).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    s
}

pub fn format_weighted_points(m: &EmpiricalMeasure) -> String {
    let mut s = format!("{} {}\n", m.dim(), m.len());
    for (r, w) in m.atoms.rows().zip(m.weights.as_slice()) {
        let cells: Vec<String> = r.iter().chain(std::iter::once(w)).map(|&v| fmt12(v)).collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    s
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|&x| fmt12(x) + "\n").collect()
}

/// ASCII PGM scaled so the largest cell maps to 255.
pub fn format_pgm(grid: &DMatrix<f64>) -> String {
    let max = grid.iter().cloned().fold(0.0, f64::max);
    let mut s = format!("P2\n{} {}\n255\n", grid.ncols(), grid.nrows());
    for r in 0..grid.nrows() {
        let cells: Vec<String> = (0..grid.ncols())
            .map(|c| {
                let v = if max > 0.0 { (grid[(r, c)] / max * 255.0).round() } else { 0.0 };
                format!("{}", v as u32)
            })
            .collect();
        let _ = writeln!(s, "{}", cells.join(" "));
    }
    s
}

/// Solver trace as CSV with header `step,objective`.
pub fn format_trace(rows: &[TraceRow]) -> String {
    let mut s = String::from("step,objective\n");
    for r in rows {
        let _ = writeln!(s, "{},{}", r.step, fmt12(r.objective));
    }
    s
}

/// Sweep as CSV with header `scale,value,smoothed_d2`.
pub fn format_sweep(sweep: &SweepResult) -> String {
    let mut s = String::from("scale,value,smoothed_d2\n");
    for i in 0..sweep.scales.len() {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt12(sweep.scales[i]),
            fmt12(sweep.values[i]),
            fmt12(sweep.smoothed_second_deriv[i])
        );
    }
    s
}

pub fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| GaitError::Io(format!("{}: {e}", path.display())))
}

pub fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| GaitError::Io(format!("{}: {e}", path.display())))
}
