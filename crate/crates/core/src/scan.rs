//! Growth scans of smoothed twisted L-values over (Q, t) grids, their CSV
//! form, and the exponent-fit report built from a scan file.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characters::CharacterGroup;
use crate::config::ScanConfig;
use crate::error::{Error, Result};
use crate::forms::HeckeEigenform;
use crate::lfunc::{exponent_fit, rational_to_f64, smoothed_l, truncation, ExponentFit, ExponentTable, MAX_TERMS};

/// CSV column order.
pub const COLUMNS: [&str; 9] = ["Q", "chi_index", "t", "x", "re_L", "im_L", "abs_L", "n_terms", "millis"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(rename = "Q")]
    pub q: u64,
    pub chi_index: u64,
    pub t: f64,
    pub x: f64,
    #[serde(rename = "re_L")]
    pub re_l: f64,
    #[serde(rename = "im_L")]
    pub im_l: f64,
    #[serde(rename = "abs_L")]
    pub abs_l: f64,
    pub n_terms: u64,
    pub millis: f64,
}

/// Index of the character scanned at modulus `q`.
fn chi_index_for(cfg: &ScanConfig, group: &CharacterGroup) -> Result<u64> {
    match cfg.chi_index {
        Some(i) if i < group.order() => Ok(i),
        Some(i) => Err(Error::invalid(format!(
            "character index {i} out of range for modulus {} (order {})",
            group.modulus(),
            group.order()
        ))),
        // First nonprincipal character; the principal one when it is alone.
        None => Ok(1.min(group.order() - 1)),
    }
}

/// Evaluates the smoothed L-value at every grid point, in grid order.
///
/// x = x_factor Q (1+|t|) at each point; a point needing more than 10^8
/// terms is rejected before any work starts.
pub fn run_scan(cfg: &ScanConfig, f: &HeckeEigenform) -> Result<Vec<ScanRow>> {
    if !(cfg.x_factor > 0.0) {
        return Err(Error::invalid("x_factor must be positive"));
    }
    let points = cfg.points();
    for &(q, t) in &points {
        let x = cfg.x_factor * q as f64 * (1.0 + t.abs());
        let n = truncation(x);
        if n > MAX_TERMS {
            return Err(Error::TruncationOverflow(format!(
                "point Q = {q}, t = {t} needs {n} terms at x = {x} (limit {MAX_TERMS})"
            )));
        }
        if x < 10.0 {
            return Err(Error::invalid(format!(
                "point Q = {q}, t = {t} has x = {x} below the smoothed-sum minimum 10"
            )));
        }
    }
    let mut groups = BTreeMap::new();
    for &(q, _) in &points {
        if let std::collections::btree_map::Entry::Vacant(e) = groups.entry(q) {
            let g = Arc::new(CharacterGroup::new(q)?);
            let idx = chi_index_for(cfg, &g)?;
            e.insert(g.character(idx)?);
        }
    }
    points
        .par_iter()
        .map(|&(q, t)| {
            let chi = &groups[&q];
            let x = cfg.x_factor * q as f64 * (1.0 + t.abs());
            let start = Instant::now();
            let v = smoothed_l(f, chi, t, x)?;
            let millis = if cfg.timings {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            Ok(ScanRow {
                q,
                chi_index: chi.index(),
                t,
                x,
                re_l: v.value.re,
                im_l: v.value.im,
                abs_l: v.value.norm(),
                n_terms: v.n_terms,
                millis,
            })
        })
        .collect()
}

/// Writes the fingerprint comment line, the resolved configuration as
/// further comment lines, the header row and the rows.
pub fn write_csv<W: Write>(rows: &[ScanRow], fingerprint: &str, echo: &str, mut out: W) -> Result<()> {
    writeln!(out, "# twistlab scan config={fingerprint}")?;
    for line in echo.lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record(COLUMNS).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_csv`]; '#' lines are skipped.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ScanRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(&e, "header"))?
        .clone();
    for (i, col) in COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(col) {
            return Err(Error::Parse {
                line: 1,
                field: col.to_string(),
                message: format!("expected column `{col}` at position {i}"),
            });
        }
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<ScanRow>() {
        rows.push(rec.map_err(|e| parse_error(&e, "row"))?);
    }
    Ok(rows)
}

fn parse_error(e: &csv::Error, default_field: &str) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    let field = match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => err
            .field()
            .and_then(|i| COLUMNS.get(i as usize))
            .map(|s| s.to_string())
            .unwrap_or_else(|| default_field.to_string()),
        _ => default_field.to_string(),
    };
    Error::Parse {
        line,
        field,
        message: e.to_string(),
    }
}

/// A named reference exponent next to its decimal value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceExponent {
    pub name: String,
    pub exact: String,
    pub value: f64,
}

/// Regression of log|L| on (log Q, log(1+|t|)) with reference exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub samples: usize,
    pub slope_q: f64,
    pub slope_t: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub references: Vec<ReferenceExponent>,
}

pub fn fit_rows(rows: &[ScanRow], table: &ExponentTable) -> Result<FitReport> {
    let samples: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.q as f64, r.t, r.abs_l)).collect();
    let ExponentFit {
        slope_q,
        slope_t,
        intercept,
        r_squared,
        samples,
    } = exponent_fit(&samples)?;
    let references = table
        .comparison_rows()
        .into_iter()
        .map(|(name, r)| ReferenceExponent {
            name: name.to_string(),
            exact: format!("{}/{}", r.numer(), r.denom()),
            value: rational_to_f64(r),
        })
        .collect();
    Ok(FitReport {
        samples,
        slope_q,
        slope_t,
        intercept,
        r_squared,
        references,
    })
}

impl FitReport {
    /// Plain-text rendering with the side-by-side reference table.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "samples   {}\nslope_Q   {:.6}\nslope_t   {:.6}\nintercept {:.6}\nr^2       {:.6}\n\nreference exponents\n",
            self.samples, self.slope_q, self.slope_t, self.intercept, self.r_squared
        );
        for r in &self.references {
            s.push_str(&format!("  {:<18} {:>8} = {:.6}\n", r.name, r.exact, r.value));
        }
        s
    }
}
