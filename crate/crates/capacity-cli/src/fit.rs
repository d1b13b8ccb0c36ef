//! Convergence-rate fitting for sweep outputs.

use crate::error::{CliError, Result};
use capacity::reference::least_squares_line;
use capacity::sweep::SweepRecord;

#[derive(Debug, Clone, Copy)]
pub struct FitResult {
    /// Extrapolated limit of the ratio as the radius grows.
    pub limit_estimate: f64,
    /// Log-log slope of `|ratio - target|` against the radius.
    pub slope: f64,
    pub r_squared: f64,
    /// Set when the residuals are at noise level and no rate can be fitted;
    /// the limit is then the target itself.
    pub degenerate: bool,
}

const RESIDUAL_FLOOR: f64 = 1e-13;

/// Least-squares fit of `log |ratio - target|` against `log r`, plus a
/// Richardson-style extrapolation of the ratio against `r^slope`.
pub fn fit_convergence(records: &[SweepRecord]) -> Result<FitResult> {
    let usable: Vec<&SweepRecord> = records.iter().filter(|r| !r.is_flagged()).collect();
    if usable.len() < 3 {
        return Err(CliError::Config(format!(
            "convergence fit needs at least 3 unflagged records, got {}",
            usable.len()
        )));
    }
    let target = usable.iter().map(|r| r.target).sum::<f64>() / usable.len() as f64;
    let scale = target.abs().max(1.0);
    let points: Vec<(f64, f64)> = usable
        .iter()
        .filter(|r| (r.ratio - target).abs() > RESIDUAL_FLOOR * scale)
        .map(|r| ((r.r as f64).ln(), (r.ratio - target).abs().ln()))
        .collect();
    if points.len() < 3 {
        return Ok(FitResult {
            limit_estimate: target,
            slope: 0.0,
            r_squared: 1.0,
            degenerate: true,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, _, r_squared) = least_squares_line(&xs, &ys);

    // extrapolate ratio = limit + c * r^slope by least squares in (limit, c)
    let feat: Vec<f64> = usable.iter().map(|r| (r.r as f64).powf(slope)).collect();
    let vals: Vec<f64> = usable.iter().map(|r| r.ratio).collect();
    let (c, limit, _) = least_squares_line(&feat, &vals);
    let _ = c;

    Ok(FitResult {
        limit_estimate: limit,
        slope,
        r_squared,
        degenerate: false,
    })
}
