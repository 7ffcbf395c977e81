//! Decay-exponent estimation by least squares on transformed series.

use crate::diagnostics::trace::DiagnosticsTrace;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("fit window has non-positive values: {0}")]
    Domain(String),
    #[error("fit window too small: need {need} samples, have {have}")]
    TooFew { need: usize, have: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// Slope of `log y` against `log t`: `y ~ A t^exponent`.
    ParetoPower,
    /// Slope of `log(-log(y / y0))` against `log t`: `y ~ y0 exp(-A t^exponent)`.
    FracExp,
    /// Slope of `log D` against `log t`.
    DiameterGrowth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitSeries {
    EnergyFluctuations,
    UniformFluctuations,
    Diameter,
}

#[derive(Debug, Clone, Copy)]
pub struct FitResult {
    pub exponent: f64,
    pub amplitude: f64,
    /// RMS residual of the linear fit in transformed coordinates.
    pub residual: f64,
    pub samples_used: usize,
}

/// Least-squares slope/intercept of `z` on `x`.
fn linfit(x: &[f64], z: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let mz = z.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxz = 0.0;
    for (xi, zi) in x.iter().zip(z) {
        sxx += (xi - mx) * (xi - mx);
        sxz += (xi - mx) * (zi - mz);
    }
    let slope = sxz / sxx;
    let intercept = mz - slope * mx;
    let mut ss = 0.0;
    for (xi, zi) in x.iter().zip(z) {
        let r = zi - (intercept + slope * xi);
        ss += r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

/// Fit a decay exponent on raw `(t, y)` points. For `FracExp`, `y0` is the
/// reference value the decay is measured against.
pub fn fit_points(points: &[(f64, f64)], model: FitModel, y0: f64) -> Result<FitResult, FitError> {
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for &(t, y) in points {
        if t <= 0.0 {
            continue;
        }
        match model {
            FitModel::ParetoPower | FitModel::DiameterGrowth => {
                if y <= 0.0 {
                    return Err(FitError::Domain(format!("y = {y} at t = {t}")));
                }
                xs.push(t.ln());
                zs.push(y.ln());
            }
            FitModel::FracExp => {
                if !(y > 0.0) {
                    return Err(FitError::Domain(format!("y = {y} at t = {t}")));
                }
                let ratio = y / y0;
                if !(ratio > 0.0 && ratio < 1.0) {
                    return Err(FitError::Domain(format!(
                        "y/y0 = {ratio} at t = {t} outside (0, 1)"
                    )));
                }
                xs.push(t.ln());
                zs.push((-ratio.ln()).ln());
            }
        }
    }
    if xs.len() < 10 {
        return Err(FitError::TooFew {
            need: 10,
            have: xs.len(),
        });
    }
    let (slope, intercept, residual) = linfit(&xs, &zs);
    Ok(FitResult {
        exponent: slope,
        amplitude: intercept.exp(),
        residual,
        samples_used: xs.len(),
    })
}

/// Fit a decay exponent on a trace series, discarding the initial transient
/// fraction of the time span (the asymptotic regime is the one the rates
/// describe).
pub fn fit_decay_exponent(
    trace: &DiagnosticsTrace,
    series: FitSeries,
    model: FitModel,
    transient_frac: f64,
) -> Result<FitResult, FitError> {
    let samples = &trace.samples;
    if samples.is_empty() {
        return Err(FitError::TooFew { need: 10, have: 0 });
    }
    let t0 = samples[0].t;
    let t1 = samples[samples.len() - 1].t;
    let t_start = t0 + transient_frac * (t1 - t0);
    let sel = |s: &crate::diagnostics::trace::Sample| -> f64 {
        match series {
            FitSeries::EnergyFluctuations => s.d_e,
            FitSeries::UniformFluctuations => s.d_v,
            FitSeries::Diameter => s.diameter,
        }
    };
    let y0 = sel(&samples[0]);
    let points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.t >= t_start)
        .map(|s| (s.t, sel(s)))
        .collect();
    fit_points(&points, model, y0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..200)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, 3.0 * t.powf(-2.0))
            })
            .collect();
        let fit = fit_points(&pts, FitModel::ParetoPower, 1.0).unwrap();
        assert!(
            (fit.exponent + 2.0).abs() < 1e-6,
            "exponent {}",
            fit.exponent
        );
        assert!((fit.amplitude - 3.0).abs() < 1e-6);
        assert!(fit.residual < 1e-10);
    }

    #[test]
    fn recovers_exact_fractional_exponential() {
        let pts: Vec<(f64, f64)> = (1..200)
            .map(|i| {
                let t = i as f64 * 0.1;
                (t, (-t.powf(0.75)).exp())
            })
            .collect();
        let fit = fit_points(&pts, FitModel::FracExp, 1.0).unwrap();
        assert!((fit.exponent - 0.75).abs() < 1e-6);
        assert!((fit.amplitude - 1.0).abs() < 1e-6);
    }

    #[test]
    fn recovers_exponent_under_multiplicative_noise() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        let pts: Vec<(f64, f64)> = (1..400)
            .map(|i| {
                let t = i as f64 * 0.05;
                let noise = 1.0 + 0.01 * rng.random_range(-1.0..1.0);
                (t, 2.0 * t.powf(-1.5) * noise)
            })
            .collect();
        let fit = fit_points(&pts, FitModel::ParetoPower, 1.0).unwrap();
        assert!(
            (fit.exponent + 1.5).abs() < 0.02,
            "exponent {}",
            fit.exponent
        );
    }

    #[test]
    fn domain_and_size_errors() {
        let pts = vec![(1.0, 1.0), (2.0, -1.0)];
        assert!(matches!(
            fit_points(&pts, FitModel::ParetoPower, 1.0),
            Err(FitError::Domain(_))
        ));
        let few: Vec<(f64, f64)> = (1..5).map(|i| (i as f64, 1.0 / i as f64)).collect();
        assert!(matches!(
            fit_points(&few, FitModel::ParetoPower, 1.0),
            Err(FitError::TooFew { .. })
        ));
    }
}
