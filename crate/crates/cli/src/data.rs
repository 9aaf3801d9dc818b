//! CSV input and output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use countshrink::mcmc::format_f64;
use countshrink::model::CountDataset;
use nalgebra::DMatrix;

use crate::CliError;

fn parse_err(line: u64, message: String) -> CliError {
    CliError::Validation(format!("parse error at line {line}: {message}"))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(p) => parse_err(p.line(), e.to_string()),
        None => CliError::Validation(format!("{}: {e}", path.display())),
    }
}

/// Covariate column index for headers `x1`, `x2`, ...
fn covariate_index(name: &str) -> Option<usize> {
    name.strip_prefix('x')?.parse::<usize>().ok().filter(|&k| k >= 1)
}

/// Reads `id, y[, offset][, x1..xp]`. Only `y` is required.
pub fn read_dataset(path: &Path) -> Result<CountDataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let y_col = find("y").ok_or_else(|| parse_err(1, "missing required column `y`".into()))?;
    let id_col = find("id");
    let offset_col = find("offset");
    let mut x_cols: Vec<(usize, usize)> = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        let h = h.to_ascii_lowercase();
        if let Some(k) = covariate_index(&h) {
            x_cols.push((k, c));
        } else if !matches!(h.as_str(), "id" | "y" | "offset") {
            return Err(parse_err(1, format!("unknown column `{h}`")));
        }
    }
    x_cols.sort();
    if x_cols.iter().enumerate().any(|(j, (k, _))| *k != j + 1) {
        return Err(parse_err(1, "covariate columns must be x1..xp without gaps".into()));
    }

    let (mut ids, mut counts, mut offsets, mut xs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |c: usize| rec.get(c).unwrap_or("");
        let raw_y = field(y_col);
        let y = match raw_y.parse::<i64>() {
            Ok(v) if v < 0 => {
                return Err(CliError::Validation(format!("negative count {v} at line {line}")))
            }
            Ok(v) => v as u64,
            Err(_) => return Err(parse_err(line, format!("count `{raw_y}` is not an integer"))),
        };
        let offset = match offset_col.map(field) {
            None | Some("") => 1.0,
            Some(raw) => raw
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("offset `{raw}` is not a number")))?,
        };
        for &(_, c) in &x_cols {
            let raw = field(c);
            xs.push(
                raw.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("covariate `{raw}` is not a number")))?,
            );
        }
        ids.push(match id_col {
            Some(c) => field(c).to_string(),
            None => counts.len().saturating_add(1).to_string(),
        });
        counts.push(y);
        offsets.push(offset);
    }
    if counts.is_empty() {
        return Err(CliError::Validation(format!("{} has no data rows", path.display())));
    }
    let p = x_cols.len();
    let covariates = (p > 0).then(|| DMatrix::from_row_slice(counts.len(), p, &xs));
    Ok(CountDataset::new(ids, counts, offsets, covariates)?)
}

pub fn write_dataset(path: &Path, data: &CountDataset) -> Result<(), CliError> {
    let mut out = create(path)?;
    let p = data.n_covariates();
    let mut header = vec!["id".to_string(), "y".into(), "offset".into()];
    header.extend((1..=p).map(|j| format!("x{j}")));
    writeln!(out, "{}", header.join(","))?;
    for i in 0..data.len() {
        let mut row = vec![data.ids[i].clone(), data.counts[i].to_string(), format_f64(data.offsets[i])];
        if let Some(x) = &data.covariates {
            row.extend((0..p).map(|j| format_f64(x[(i, j)])));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a draws file written by `fit`: a `draw` column then one column per parameter.
pub fn read_draws(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let skip = usize::from(headers.get(0) == Some("draw"));
    let names: Vec<String> = headers.iter().skip(skip).map(str::to_string).collect();
    if names.is_empty() {
        return Err(parse_err(1, "no parameter columns".into()));
    }
    let mut cols = vec![Vec::new(); names.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        for (col, raw) in cols.iter_mut().zip(rec.iter().skip(skip)) {
            col.push(
                raw.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("`{raw}` is not a number")))?,
            );
        }
    }
    Ok((names, cols))
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let f = File::create(path)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}
