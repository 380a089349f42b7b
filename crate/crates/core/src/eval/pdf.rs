//! Distance-distribution estimation and the two comparison scores.
//!
//! Distances are summarized as a Gaussian kernel density estimate with
//! Scott's-rule bandwidth, evaluated on a shared 1000-point grid spanning
//! [0, 1.05 × max distance across both sets]. Mass below zero is reflected
//! back (distances are nonnegative) and the discretized curve is normalized
//! to unit trapezoidal integral.

use serde::{Deserialize, Serialize};

use super::EvalError;

pub const GRID_POINTS: usize = 1000;
/// Densities are floored at this value inside the KLD sum.
pub const DENSITY_FLOOR: f64 = 1e-10;

/// Evaluation grid shared by a pair of PDFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceGrid {
    /// Inclusive upper end of the grid; lower end is 0.
    pub upper: f64,
    pub points: usize,
}

impl DistanceGrid {
    /// Grid spanning both distance sets: [0, max × 1.05].
    pub fn spanning(a: &[f64], b: &[f64]) -> Result<Self, EvalError> {
        let max = a.iter().chain(b).fold(0.0f64, |acc, &d| acc.max(d));
        if !max.is_finite() {
            return Err(EvalError::BadDistances("non-finite distance".into()));
        }
        // degenerate all-zero distances still need a positive span
        let upper = if max > 0.0 { max * 1.05 } else { 1.0 };
        Ok(Self { upper, points: GRID_POINTS })
    }

    pub fn x(&self, i: usize) -> f64 {
        self.upper * i as f64 / (self.points - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.upper / (self.points - 1) as f64
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }
}

/// A probability density evaluated on a [`DistanceGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistancePdf {
    pub grid: DistanceGrid,
    pub density: Vec<f64>,
    pub bandwidth: f64,
    pub sample_count: usize,
}

fn gaussian(u: f64) -> f64 {
    (-(u * u) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Scott's rule for one dimension: σ̂ · n^(−1/5), with a small positive
/// fallback when the sample is degenerate.
fn scott_bandwidth(distances: &[f64], span: f64) -> f64 {
    let n = distances.len() as f64;
    let mean = distances.iter().sum::<f64>() / n;
    let var = distances.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let h = var.sqrt() * n.powf(-0.2);
    if h.is_finite() && h > 0.0 {
        h
    } else {
        (span / GRID_POINTS as f64).max(1e-12)
    }
}

/// Gaussian KDE of a distance sample on the given grid.
pub fn distance_pdf(distances: &[f64], grid: &DistanceGrid) -> Result<DistancePdf, EvalError> {
    if distances.len() < 2 {
        return Err(EvalError::BadDistances(format!(
            "need at least 2 distances, got {}",
            distances.len()
        )));
    }
    if distances.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(EvalError::BadDistances("distances must be finite and nonnegative".into()));
    }
    let h = scott_bandwidth(distances, grid.upper);
    let norm = 1.0 / (distances.len() as f64 * h);
    let mut density: Vec<f64> = (0..grid.points)
        .map(|i| {
            let x = grid.x(i);
            let mut acc = 0.0;
            for &d in distances {
                // reflect at zero: distances live on the half-line
                acc += gaussian((x - d) / h) + gaussian((x + d) / h);
            }
            acc * norm
        })
        .collect();
    let integral = trapezoid(&density, grid.step());
    if integral <= 0.0 || !integral.is_finite() {
        return Err(EvalError::BadDistances("degenerate density".into()));
    }
    for v in &mut density {
        *v /= integral;
    }
    Ok(DistancePdf { grid: grid.clone(), density, bandwidth: h, sample_count: distances.len() })
}

fn trapezoid(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    (inner + (values[0] + values[values.len() - 1]) / 2.0) * step
}

/// Overlap area and KL divergence between two densities on one grid.
///
/// OA is the trapezoidal integral of the pointwise minimum (symmetric in its
/// arguments); KLD is Σ p·ln(p/q)·Δx with both densities floored, and is
/// directional: p is the inter-set density, q the intra-set density.
pub fn kld_oa(p: &DistancePdf, q: &DistancePdf) -> Result<(f64, f64), EvalError> {
    if p.grid != q.grid {
        return Err(EvalError::GridMismatch);
    }
    let step = p.grid.step();
    let mins: Vec<f64> = p
        .density
        .iter()
        .zip(&q.density)
        .map(|(&a, &b)| a.min(b))
        .collect();
    let oa = trapezoid(&mins, step);
    let kld: f64 = p
        .density
        .iter()
        .zip(&q.density)
        .map(|(&a, &b)| {
            let pa = a.max(DENSITY_FLOOR);
            let qb = b.max(DENSITY_FLOOR);
            pa * (pa / qb).ln() * step
        })
        .sum();
    Ok((kld, oa))
}

/// Standard normal density (shared by tests and closed-form oracles).
pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    gaussian((x - mean) / sd) / sd
}
