//! Least-squares power-law fits in log₁₀–log₁₀ coordinates.

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub log_x: Vec<f64>,
    pub log_y: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// Largest vertical distance (in log₁₀) of a point from the line.
    pub max_residual: f64,
}

impl SlopeFit {
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.slope >= lo && self.slope <= hi
    }
}

pub fn fit_slope(points: &[(f64, f64)]) -> CliResult<SlopeFit> {
    if points.len() < 3 {
        return Err(CliError::Fit(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(*x > 0.0) || !(*y > 0.0) || !x.is_finite() || !y.is_finite()) {
        return Err(CliError::Fit(format!("nonpositive data point ({x}, {y})")));
    }
    let log_x: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let log_y: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let n = points.len() as f64;
    let mx = log_x.iter().sum::<f64>() / n;
    let my = log_y.iter().sum::<f64>() / n;
    let sxx: f64 = log_x.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(CliError::Fit("all x values coincide".into()));
    }
    let sxy: f64 = log_x.iter().zip(&log_y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = log_x
        .iter()
        .zip(&log_y)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    Ok(SlopeFit {
        log_x,
        log_y,
        slope,
        intercept,
        max_residual,
    })
}
