//! Ordinary least squares for the small fits used across the crate.

use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// Result of a straight-line fit y = slope * x + intercept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub rms_residual: f64,
    pub r_squared: f64,
}

fn mean(v: &[f64]) -> f64 {
    let mut s = NeumaierSum::new();
    s.extend(v.iter().copied());
    s.value() / v.len() as f64
}

/// Least-squares line through `(xs[i], ys[i])`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let (mx, my) = (mean(xs), mean(ys));
    let (mut sxx, mut sxy, mut syy) = (NeumaierSum::new(), NeumaierSum::new(), NeumaierSum::new());
    for (&x, &y) in xs.iter().zip(ys) {
        sxx.add((x - mx) * (x - mx));
        sxy.add((x - mx) * (y - my));
        syy.add((y - my) * (y - my));
    }
    let sxx = sxx.value();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let slope = sxy.value() / sxx;
    let intercept = my - slope * mx;
    let mut ss = NeumaierSum::new();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - slope * x - intercept;
        ss.add(r * r);
    }
    let ss = ss.value();
    let syy = syy.value();
    Ok(LineFit {
        slope,
        intercept,
        rms_residual: (ss / xs.len() as f64).sqrt(),
        r_squared: if syy > 0.0 { 1.0 - ss / syy } else { 1.0 },
    })
}

/// Result of a plane fit z = a * x + b * y + c.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneFit {
    pub slope_x: f64,
    pub slope_y: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares plane through `(x, y, z)` triples, solved on centred data.
pub fn fit_plane(points: &[(f64, f64, f64)]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least three points, got {}",
            points.len()
        )));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let zs: Vec<f64> = points.iter().map(|p| p.2).collect();
    let (mx, my, mz) = (mean(&xs), mean(&ys), mean(&zs));
    let mut acc = [NeumaierSum::new(); 6];
    for &(x, y, z) in points {
        let (dx, dy, dz) = (x - mx, y - my, z - mz);
        acc[0].add(dx * dx);
        acc[1].add(dx * dy);
        acc[2].add(dy * dy);
        acc[3].add(dx * dz);
        acc[4].add(dy * dz);
        acc[5].add(dz * dz);
    }
    let [sxx, sxy, syy, sxz, syz, szz] = acc.map(|a| a.value());
    let det = sxx * syy - sxy * sxy;
    let scale = sxx * syy;
    if !(scale > 0.0) || det.abs() <= 1e-12 * scale {
        return Err(Error::Degenerate(
            "design matrix is singular (a regressor is constant or the two are collinear)".into(),
        ));
    }
    let a = (sxz * syy - syz * sxy) / det;
    let b = (syz * sxx - sxz * sxy) / det;
    let mut ss = NeumaierSum::new();
    for &(x, y, z) in points {
        let r = z - mz - a * (x - mx) - b * (y - my);
        ss.add(r * r);
    }
    let ss = ss.value();
    Ok(PlaneFit {
        slope_x: a,
        slope_y: b,
        intercept: mz - a * mx - b * my,
        r_squared: if szz > 0.0 { 1.0 - ss / szz } else { 1.0 },
    })
}
