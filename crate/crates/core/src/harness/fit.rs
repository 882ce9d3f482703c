//! Log-log least-squares rate fits.

use serde::Serialize;

use crate::error::{invalid, Result};

/// One sweep point: x, mean of y over replications, standard error of the mean.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub x: f64,
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% band on the slope.
    pub band: f64,
    pub used: usize,
    /// Points dropped for a nonpositive x or mean.
    pub excluded: usize,
}

pub const MIN_FIT_POINTS: usize = 4;

/// OLS of ln(mean) on ln(x). The band propagates the standard errors
/// through the delta method: se(ln ȳᵢ) ≈ seᵢ/ȳᵢ and the slope is Σ cᵢ ln ȳᵢ
/// with cᵢ = (ln xᵢ − mean ln x)/Sxx, so band = 1.96 √(Σ cᵢ² (seᵢ/ȳᵢ)²).
pub fn fit_rate_exponent(points: &[RatePoint]) -> Result<RateFit> {
    let kept: Vec<&RatePoint> = points.iter().filter(|p| p.x > 0.0 && p.mean > 0.0).collect();
    if kept.len() < MIN_FIT_POINTS {
        return Err(invalid(format!(
            "rate fit needs {MIN_FIT_POINTS} positive points, have {}",
            kept.len()
        )));
    }
    let k = kept.len() as f64;
    let lx: Vec<f64> = kept.iter().map(|p| p.x.ln()).collect();
    let ly: Vec<f64> = kept.iter().map(|p| p.mean.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs at least two distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let var: f64 = kept
        .iter()
        .zip(&lx)
        .map(|(p, x)| ((x - mx) / sxx).powi(2) * (p.stderr / p.mean).powi(2))
        .sum();
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        band: 1.96 * var.sqrt(),
        used: kept.len(),
        excluded: points.len() - kept.len(),
    })
}
