//! Spin-basis RBMs and global spin-flip (Z₂) diagnostics.
//!
//! A bias-free RBM over ±1 units, `E(σ^v, σ^h) = -Σ W̃_ij σ^v_i σ^h_j`, has a
//! marginal invariant under `σ^v → -σ^v`. Substituting `σ = 2v - 1` gives an
//! occupation-basis RBM with `W = 4W̃`, `b_i = -2 Σ_j W̃_ij` and
//! `c_j = -2 Σ_i W̃_ij`; the leftover constant `Σ_ij W̃_ij` is dropped because
//! it cancels in the normalization. For such models the ratios
//! `α_i = Σ_j W_ij / b_i` and `β_j = Σ_i W_ij / c_j` are exactly -2.

use crate::error::{Error, Result};
use crate::math::{fmt_f64, softplus};
use crate::rbm::{exact_distribution, RbmParams};

/// Biases with magnitude below this are treated as zero when forming ratios.
pub const RATIO_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpinRbm {
    pub n_visible: usize,
    pub n_hidden: usize,
    /// Row-major `n_visible × n_hidden`.
    pub weights: Vec<f64>,
}

impl SpinRbm {
    pub fn new(n_visible: usize, n_hidden: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != n_visible * n_hidden {
            return Err(Error::Dimension(format!(
                "expected {} weights, got {}",
                n_visible * n_hidden,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Invalid("spin RBM weights must be finite".into()));
        }
        Ok(Self {
            n_visible,
            n_hidden,
            weights,
        })
    }

    /// `ln Σ_{σ^h} exp(-E)` = `Σ_j ln(2 cosh(Σ_i W̃_ij σ_i))` for occupations `v`.
    pub fn log_marginal(&self, v: &[u8]) -> f64 {
        (0..self.n_hidden)
            .map(|j| {
                let x: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(i, &vi)| self.weights[i * self.n_hidden + j] * (2.0 * vi as f64 - 1.0))
                    .sum();
                // ln(2 cosh x) = |x| + ln(1 + e^{-2|x|})
                softplus(2.0 * x) - x
            })
            .sum()
    }
}

pub fn spin_to_occupation(spin: &SpinRbm) -> RbmParams {
    let (n, nh) = (spin.n_visible, spin.n_hidden);
    let mut p = RbmParams::zeros(n, nh);
    for i in 0..n {
        for j in 0..nh {
            let w = spin.weights[i * nh + j];
            p.weights[i * nh + j] = 4.0 * w;
            p.visible_bias[i] -= 2.0 * w;
            p.hidden_bias[j] -= 2.0 * w;
        }
    }
    p
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    /// `α_i = Σ_j W_ij / b_i`, `None` where `|b_i| < RATIO_GUARD`.
    pub alpha: Vec<Option<f64>>,
    /// `β_j = Σ_i W_ij / c_j`, `None` where `|c_j| < RATIO_GUARD`.
    pub beta: Vec<Option<f64>>,
    pub undefined_visible: Vec<usize>,
    pub undefined_hidden: Vec<usize>,
    /// `max_v |p(v) - p(v̄)|`, when the model is small enough to enumerate.
    pub z2_deviation: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    })
}

impl SymmetryReport {
    pub fn median_alpha(&self) -> Option<f64> {
        median(self.alpha.iter().flatten().copied().collect())
    }

    pub fn median_beta(&self) -> Option<f64> {
        median(self.beta.iter().flatten().copied().collect())
    }

    /// `kind,index,value` rows: one per α_i, one per β_j, then the Z₂ summary.
    pub fn to_csv(&self) -> String {
        let cell = |r: &Option<f64>| r.map(fmt_f64).unwrap_or_else(|| "undefined".into());
        let mut out = String::from("kind,index,value\n");
        for (i, a) in self.alpha.iter().enumerate() {
            out.push_str(&format!("alpha,{i},{}\n", cell(a)));
        }
        for (j, b) in self.beta.iter().enumerate() {
            out.push_str(&format!("beta,{j},{}\n", cell(b)));
        }
        out.push_str(&format!("z2_deviation,,{}\n", cell(&self.z2_deviation)));
        out
    }
}

pub fn bias_ratios(params: &RbmParams) -> SymmetryReport {
    let (n, nh) = (params.n_visible, params.n_hidden);
    let ratio = |sum: f64, bias: f64| (bias.abs() >= RATIO_GUARD).then(|| sum / bias);
    let alpha: Vec<Option<f64>> = (0..n)
        .map(|i| ratio(params.weight_row(i).iter().sum(), params.visible_bias[i]))
        .collect();
    let beta: Vec<Option<f64>> = (0..nh)
        .map(|j| ratio((0..n).map(|i| params.weight(i, j)).sum(), params.hidden_bias[j]))
        .collect();
    let undefined = |xs: &[Option<f64>]| {
        xs.iter()
            .enumerate()
            .filter(|(_, x)| x.is_none())
            .map(|(i, _)| i)
            .collect()
    };
    SymmetryReport {
        undefined_visible: undefined(&alpha),
        undefined_hidden: undefined(&beta),
        alpha,
        beta,
        z2_deviation: None,
    }
}

/// `max_v |p(v) - p(v̄)|` under the exact model distribution.
pub fn z2_invariance_check(params: &RbmParams) -> Result<f64> {
    let probs = exact_distribution(params)?.probs;
    let full = probs.len() - 1;
    Ok((0..probs.len())
        .map(|s| (probs[s] - probs[full ^ s]).abs())
        .fold(0.0, f64::max))
}

/// Ratios plus the Z₂ deviation when enumeration is possible.
pub fn symmetry_report(params: &RbmParams) -> SymmetryReport {
    let mut report = bias_ratios(params);
    report.z2_deviation = z2_invariance_check(params).ok();
    report
}
