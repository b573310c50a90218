//! Symmetric-ordering moment estimators over trajectory ensembles.
//!
//! Trajectory averages estimate symmetrically ordered operator moments, so
//! number moments need ordering corrections: n maps to |alpha|^2 - 1/2 and
//! n^2 to |alpha|^4 - |alpha|^2, while quadratures are their own symbols.
//! Standard errors come from per-trajectory sample variances (linearised for
//! the variance estimators); reductions are index-ordered and pairwise, as
//! in the QFI estimator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric;
use crate::phase_space::PhaseSpacePoint;

/// Mean and variance of the number operator, with standard errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NumberMoments {
    pub mean: f64,
    pub mean_stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
}

/// Means and variances of both quadratures, with standard errors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuadratureMoments {
    pub mean_x: f64,
    pub mean_x_stderr: f64,
    pub var_x: f64,
    pub var_x_stderr: f64,
    pub mean_y: f64,
    pub mean_y_stderr: f64,
    pub var_y: f64,
    pub var_y_stderr: f64,
}

/// All per-mode moments of an ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct EnsembleMoments {
    pub n_samples: usize,
    pub modes: Vec<ModeMoments>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModeMoments {
    pub number: NumberMoments,
    pub quadratures: QuadratureMoments,
}

fn ensure_ensemble(samples: &[PhaseSpacePoint], mode: usize) -> Result<()> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let modes = samples[0].layout().modes();
    if mode >= modes {
        return Err(Error::DimensionMismatch {
            expected: modes,
            found: mode,
        });
    }
    Ok(())
}

/// Ordering-corrected number moments of one mode:
/// mean n = E[|alpha|^2] - 1/2 and Var n = E[|alpha|^4 - |alpha|^2] - (mean n)^2.
pub fn number_moments(samples: &[PhaseSpacePoint], mode: usize) -> Result<NumberMoments> {
    ensure_ensemble(samples, mode)?;
    let occupancy: Vec<f64> = samples
        .iter()
        .map(|p| p.amplitude(mode).norm_sqr())
        .collect();
    let quartic: Vec<f64> = occupancy.iter().map(|&p| p * p - p).collect();
    let mean_occ = numeric::mean(&occupancy);
    let mean = mean_occ - 0.5;
    let mean_stderr = numeric::standard_error(&occupancy);
    let second = numeric::mean(&quartic);
    let variance = second - mean * mean;
    // linearised influence of E[q] - (E[p] - 1/2)^2 per trajectory
    let influence: Vec<f64> = quartic
        .iter()
        .zip(&occupancy)
        .map(|(&q, &p)| q - 2.0 * mean * p)
        .collect();
    let variance_stderr = numeric::standard_error(&influence);
    Ok(NumberMoments {
        mean,
        mean_stderr,
        variance,
        variance_stderr,
    })
}

fn mean_var_with_errors(values: &[f64]) -> (f64, f64, f64, f64) {
    let mean = numeric::mean(values);
    let mean_stderr = numeric::standard_error(values);
    let squared: Vec<f64> = values.iter().map(|&v| (v - mean) * (v - mean)).collect();
    let var = numeric::pairwise_sum(&squared) / (values.len() - 1) as f64;
    let var_stderr = numeric::standard_error(&squared);
    (mean, mean_stderr, var, var_stderr)
}

/// Direct sample moments of the X and Y quadratures of one mode; quadratures
/// are their own symmetric-ordering symbols, so no correction applies.
pub fn quadrature_moments(samples: &[PhaseSpacePoint], mode: usize) -> Result<QuadratureMoments> {
    ensure_ensemble(samples, mode)?;
    let xs: Vec<f64> = samples.iter().map(|p| p.coords()[2 * mode]).collect();
    let ys: Vec<f64> = samples.iter().map(|p| p.coords()[2 * mode + 1]).collect();
    let (mean_x, mean_x_stderr, var_x, var_x_stderr) = mean_var_with_errors(&xs);
    let (mean_y, mean_y_stderr, var_y, var_y_stderr) = mean_var_with_errors(&ys);
    Ok(QuadratureMoments {
        mean_x,
        mean_x_stderr,
        var_x,
        var_x_stderr,
        mean_y,
        mean_y_stderr,
        var_y,
        var_y_stderr,
    })
}

/// Moments of every mode of an ensemble.
pub fn ensemble_moments(samples: &[PhaseSpacePoint]) -> Result<EnsembleMoments> {
    if samples.is_empty() {
        return Err(Error::TooFewSamples { needed: 2, got: 0 });
    }
    let modes = (0..samples[0].layout().modes())
        .map(|mode| {
            Ok(ModeMoments {
                number: number_moments(samples, mode)?,
                quadratures: quadrature_moments(samples, mode)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleMoments {
        n_samples: samples.len(),
        modes,
    })
}

/// QFI of a commuting-generator encoding: 4 dt^2 Var(G). Pass dt = 1 when
/// the generator already includes the duration.
pub fn qfi_from_generator_variance(var_g: f64, dt: f64) -> Result<f64> {
    if var_g < 0.0 {
        return Err(Error::NegativeVariance(var_g));
    }
    Ok(4.0 * dt * dt * var_g)
}
