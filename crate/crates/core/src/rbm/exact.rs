//! Exact enumeration over all 2^N visible states, for small models.

use super::params::{Gradient, RbmParams};
use crate::dataset::{index_to_bits, MeasurementDataset};
use crate::error::{Error, Result};
use crate::math::{log_sum_exp, sigmoid};

/// Largest visible layer the enumeration routines accept.
pub const MAX_ENUM_VISIBLE: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactRbmStats {
    /// `p(v)` indexed by basis state (bit `i` = visible unit `i`).
    pub probs: Vec<f64>,
    pub log_partition: f64,
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_ENUM_VISIBLE {
        return Err(Error::Capacity {
            what: "n_visible",
            value: n,
            cap: MAX_ENUM_VISIBLE,
        });
    }
    Ok(())
}

/// `-F(v)` for every basis state.
pub fn log_unnormalized(params: &RbmParams) -> Result<Vec<f64>> {
    check_cap(params.n_visible)?;
    let n = params.n_visible;
    let mut field = vec![0.0; params.n_hidden];
    let mut v = vec![0u8; n];
    Ok((0..1usize << n)
        .map(|s| {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = ((s >> i) & 1) as u8;
            }
            -params.free_energy_with(&v, &mut field)
        })
        .collect())
}

pub fn exact_distribution(params: &RbmParams) -> Result<ExactRbmStats> {
    let logits = log_unnormalized(params)?;
    let log_partition = log_sum_exp(&logits);
    let probs = logits.iter().map(|l| (l - log_partition).exp()).collect();
    Ok(ExactRbmStats { probs, log_partition })
}

/// `KL(q || p_λ) = Σ q log(q / p_λ)` with `0 log 0 = 0`.
pub fn kl_divergence(target: &[f64], params: &RbmParams) -> Result<f64> {
    check_cap(params.n_visible)?;
    if target.len() != 1usize << params.n_visible {
        return Err(Error::Dimension(format!(
            "target has {} entries, expected 2^{}",
            target.len(),
            params.n_visible
        )));
    }
    let logits = log_unnormalized(params)?;
    let log_z = log_sum_exp(&logits);
    let kl = target
        .iter()
        .zip(&logits)
        .filter(|(&q, _)| q > 0.0)
        .map(|(&q, &l)| q * (q.ln() - (l - log_z)))
        .sum::<f64>();
    Ok(kl.max(0.0))
}

/// Mean log-likelihood of the dataset under the model.
pub fn log_likelihood(params: &RbmParams, dataset: &MeasurementDataset) -> Result<f64> {
    check_dataset(params, dataset)?;
    let log_z = log_sum_exp(&log_unnormalized(params)?);
    let mut field = vec![0.0; params.n_hidden];
    let total: f64 = dataset.shots().map(|v| -params.free_energy_with(v, &mut field)).sum();
    Ok(total / dataset.len() as f64 - log_z)
}

fn check_dataset(params: &RbmParams, dataset: &MeasurementDataset) -> Result<()> {
    if dataset.n_qubits() != params.n_visible {
        return Err(Error::Dimension(format!(
            "dataset has {} qubits, model has {} visible units",
            dataset.n_qubits(),
            params.n_visible
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Invalid("dataset is empty".into()));
    }
    Ok(())
}

/// Accumulate `weight · (v_i P(h_j|v), v_i, P(h_j|v))` into `grad`.
pub(crate) fn accumulate_stats(params: &RbmParams, v: &[u8], weight: f64, field: &mut [f64], grad: &mut Gradient) {
    params.hidden_field_into(v, field);
    field.iter_mut().for_each(|f| *f = sigmoid(*f));
    let nh = params.n_hidden;
    for (i, &vi) in v.iter().enumerate() {
        if vi != 0 {
            grad.visible_bias[i] += weight;
            for (g, &p) in grad.weights[i * nh..(i + 1) * nh].iter_mut().zip(field.iter()) {
                *g += weight * p;
            }
        }
    }
    for (g, &p) in grad.hidden_bias.iter_mut().zip(field.iter()) {
        *g += weight * p;
    }
}

/// Exact gradient of the mean log-likelihood: data statistics minus
/// statistics under the exact model distribution.
pub fn exact_log_likelihood_gradient(params: &RbmParams, dataset: &MeasurementDataset) -> Result<Gradient> {
    check_dataset(params, dataset)?;
    let model = exact_distribution(params)?;
    let (n, nh) = (params.n_visible, params.n_hidden);
    let mut field = vec![0.0; nh];
    let mut grad = Gradient::zeros(n, nh);
    let w = 1.0 / dataset.len() as f64;
    for v in dataset.shots() {
        accumulate_stats(params, v, w, &mut field, &mut grad);
    }
    for (s, &p) in model.probs.iter().enumerate() {
        let v = index_to_bits(s, n);
        accumulate_stats(params, &v, -p, &mut field, &mut grad);
    }
    Ok(grad)
}
