//! Weight spectra and least-squares lines.

use crate::error::{Error, Result};
use crate::rbm::RbmParams;

/// `|W_ij|` sorted in descending order.
pub fn weight_spectrum(params: &RbmParams) -> Vec<f64> {
    let mut mags: Vec<f64> = params.weights.iter().map(|w| w.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags
}

/// Share of `Σ|W|` carried by the leading `fraction` of a descending
/// spectrum (at least one entry).
pub fn top_share(spectrum: &[f64], fraction: f64) -> f64 {
    let total: f64 = spectrum.iter().sum();
    if spectrum.is_empty() || total == 0.0 {
        return 0.0;
    }
    let k = ((fraction * spectrum.len() as f64).ceil() as usize).clamp(1, spectrum.len());
    spectrum[..k].iter().sum::<f64>() / total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return Err(Error::Domain("a line fit needs at least 2 points".into()));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("a line fit needs 2 distinct abscissae".into()));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_norm = points
        .iter()
        .map(|&(x, y)| (y - slope * x - intercept).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(LinearFit {
        slope,
        intercept,
        residual_norm,
    })
}
