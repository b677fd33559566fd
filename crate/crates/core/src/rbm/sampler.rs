//! Block Gibbs sampling of the visible marginal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::params::RbmParams;
use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::math::sigmoid;

/// Reusable buffers for repeated sweeps on one chain.
#[derive(Debug, Clone)]
pub struct GibbsScratch {
    pub hidden_field: Vec<f64>,
    pub hidden: Vec<u8>,
}

impl GibbsScratch {
    pub fn new(params: &RbmParams) -> Self {
        Self {
            hidden_field: vec![0.0; params.n_hidden],
            hidden: vec![0; params.n_hidden],
        }
    }
}

/// Sample `h | v`, leaving `P(h_j = 1 | v)` in `scratch.hidden_field`.
#[inline]
pub fn sample_hidden<R: Rng + ?Sized>(params: &RbmParams, v: &[u8], scratch: &mut GibbsScratch, rng: &mut R) {
    params.hidden_field_into(v, &mut scratch.hidden_field);
    for (h, f) in scratch.hidden.iter_mut().zip(scratch.hidden_field.iter_mut()) {
        *f = sigmoid(*f);
        *h = (rng.random::<f64>() < *f) as u8;
    }
}

/// Sample `v | h` from `scratch.hidden` into `v`.
#[inline]
pub fn sample_visible<R: Rng + ?Sized>(params: &RbmParams, v: &mut [u8], scratch: &GibbsScratch, rng: &mut R) {
    for (i, vi) in v.iter_mut().enumerate() {
        let row = params.weight_row(i);
        let mut a = params.visible_bias[i];
        for (w, &h) in row.iter().zip(&scratch.hidden) {
            if h != 0 {
                a += w;
            }
        }
        *vi = (rng.random::<f64>() < sigmoid(a)) as u8;
    }
}

/// One full block sweep `v → h → v'` in place.
#[inline]
pub fn gibbs_sweep<R: Rng + ?Sized>(params: &RbmParams, v: &mut [u8], scratch: &mut GibbsScratch, rng: &mut R) {
    sample_hidden(params, v, scratch, rng);
    sample_visible(params, v, scratch, rng);
}

/// One block Gibbs sweep from `v`, returning the new visible state.
pub fn gibbs_step<R: Rng + ?Sized>(params: &RbmParams, v: &[u8], rng: &mut R) -> Result<Vec<u8>> {
    if v.len() != params.n_visible {
        return Err(Error::Dimension(format!(
            "visible vector has {} units, model has {}",
            v.len(),
            params.n_visible
        )));
    }
    let mut out = v.to_vec();
    let mut scratch = GibbsScratch::new(params);
    gibbs_sweep(params, &mut out, &mut scratch, rng);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub keep_every: usize,
    pub n_samples: usize,
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::Invalid("n_chains must be at least 1".into()));
        }
        if self.keep_every == 0 {
            return Err(Error::Invalid("keep_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// RNG for chain `chain` of a run seeded with `seed`.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Independent Gibbs chains from uniform random starts. After `burn_in`
/// sweeps each chain advances `keep_every` sweeps per record; records are
/// interleaved round-robin across chains (sample `k` comes from chain
/// `k mod n_chains`).
pub fn sample_model(params: &RbmParams, cfg: &ChainConfig, seed: u64) -> Result<MeasurementDataset> {
    cfg.validate()?;
    let n = params.n_visible;
    let per_chain: Vec<Vec<u8>> = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| {
            let records = if c < cfg.n_samples {
                (cfg.n_samples - c).div_ceil(cfg.n_chains)
            } else {
                0
            };
            let mut rng = chain_rng(seed, c);
            let mut v: Vec<u8> = (0..n).map(|_| rng.random_bool(0.5) as u8).collect();
            let mut scratch = GibbsScratch::new(params);
            let mut out = Vec::with_capacity(records * n);
            if records == 0 {
                return out;
            }
            for _ in 0..cfg.burn_in {
                gibbs_sweep(params, &mut v, &mut scratch, &mut rng);
            }
            for _ in 0..records {
                for _ in 0..cfg.keep_every {
                    gibbs_sweep(params, &mut v, &mut scratch, &mut rng);
                }
                out.extend_from_slice(&v);
            }
            out
        })
        .collect();

    let mut shots = Vec::with_capacity(cfg.n_samples);
    for k in 0..cfg.n_samples {
        let (c, r) = (k % cfg.n_chains, k / cfg.n_chains);
        shots.push(per_chain[c][r * n..(r + 1) * n].to_vec());
    }
    MeasurementDataset::from_shots(n, seed, &shots)
}
