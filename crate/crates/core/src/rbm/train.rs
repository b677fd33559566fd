//! Contrastive-divergence training.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::exact::accumulate_stats;
use super::params::{FreezeMask, Gradient, RbmParams};
use super::sampler::{sample_visible, GibbsScratch};
use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Gibbs sweeps `k` in CD-k.
    pub cd_steps: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Standard deviation of the Gaussian weight initialization.
    pub init_scale: f64,
    /// Classical momentum coefficient; 0 disables it.
    pub momentum: f64,
    pub freeze_mask: Option<FreezeMask>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 100,
            cd_steps: 1,
            epochs: 100,
            seed: 0,
            init_scale: 0.01,
            momentum: 0.0,
            freeze_mask: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Invalid("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Invalid("batch_size must be at least 1".into()));
        }
        if self.cd_steps == 0 {
            return Err(Error::Invalid("cd_steps must be at least 1".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::Invalid("init_scale must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Invalid("momentum must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Fresh parameters drawn with this config's `init_scale`.
    pub fn init_params(&self, n_visible: usize, n_hidden: usize, seed: u64) -> RbmParams {
        RbmParams::random(n_visible, n_hidden, self.init_scale, seed)
    }
}

struct CdWorkspace {
    scratch: GibbsScratch,
    chain: Vec<u8>,
}

impl CdWorkspace {
    fn new(params: &RbmParams) -> Self {
        Self {
            scratch: GibbsScratch::new(params),
            chain: vec![0; params.n_visible],
        }
    }

    /// Overwrite `grad` with the CD-k estimate for `batch`.
    fn gradient<'b, R, I>(
        &mut self,
        params: &RbmParams,
        batch: I,
        len: usize,
        k: usize,
        rng: &mut R,
        grad: &mut Gradient,
    ) where
        R: Rng + ?Sized,
        I: IntoIterator<Item = &'b [u8]>,
    {
        grad.components_mut().for_each(|g| *g = 0.0);
        let w = 1.0 / len as f64;
        for v in batch {
            accumulate_stats(params, v, w, &mut self.scratch.hidden_field, grad);
            self.chain.copy_from_slice(v);
            for step in 0..k {
                if step == 0 {
                    // reuse P(h|v) left by the positive phase
                    for (h, &p) in self.scratch.hidden.iter_mut().zip(&self.scratch.hidden_field) {
                        *h = (rng.random::<f64>() < p) as u8;
                    }
                } else {
                    super::sampler::sample_hidden(params, &self.chain, &mut self.scratch, rng);
                }
                sample_visible(params, &mut self.chain, &self.scratch, rng);
            }
            accumulate_stats(params, &self.chain, -w, &mut self.scratch.hidden_field, grad);
        }
    }
}

/// CD-k estimate of the log-likelihood ascent direction for `batch`.
pub fn cd_gradient<R: Rng + ?Sized>(params: &RbmParams, batch: &[&[u8]], k: usize, rng: &mut R) -> Result<Gradient> {
    if batch.is_empty() {
        return Err(Error::Invalid("batch is empty".into()));
    }
    if k == 0 {
        return Err(Error::Invalid("cd steps must be at least 1".into()));
    }
    if let Some(bad) = batch.iter().find(|v| v.len() != params.n_visible) {
        return Err(Error::Dimension(format!(
            "batch element has {} units, model has {}",
            bad.len(),
            params.n_visible
        )));
    }
    let mut grad = Gradient::zeros(params.n_visible, params.n_hidden);
    CdWorkspace::new(params).gradient(params, batch.iter().copied(), batch.len(), k, rng, &mut grad);
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    /// 1-based epoch index.
    pub epoch: usize,
    pub mean_gradient_norm: f64,
    pub weight_norm: f64,
}

/// Stateful CD trainer; one [`run_epoch`](Self::run_epoch) is a full pass
/// over the shuffled dataset.
pub struct Trainer<'a> {
    params: RbmParams,
    dataset: &'a MeasurementDataset,
    config: TrainConfig,
    rng: ChaCha8Rng,
    velocity: Gradient,
    grad: Gradient,
    order: Vec<usize>,
    workspace: CdWorkspace,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(mut params: RbmParams, dataset: &'a MeasurementDataset, config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        params.check_shape()?;
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
        if let Some(mask) = &config.freeze_mask {
            if !mask.matches(&params) {
                return Err(Error::Dimension("freeze mask shape does not match model".into()));
            }
            mask.apply(&mut params);
        }
        let (n, nh) = (params.n_visible, params.n_hidden);
        Ok(Self {
            workspace: CdWorkspace::new(&params),
            params,
            dataset,
            config: config.clone(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            velocity: Gradient::zeros(n, nh),
            grad: Gradient::zeros(n, nh),
            order: (0..dataset.len()).collect(),
            epoch: 0,
        })
    }

    pub fn params(&self) -> &RbmParams {
        &self.params
    }

    pub fn into_params(self) -> RbmParams {
        self.params
    }

    pub fn epochs_run(&self) -> usize {
        self.epoch
    }

    pub fn run_epoch(&mut self) -> Result<EpochLog> {
        self.order.shuffle(&mut self.rng);
        let bs = self.config.batch_size;
        let lr = self.config.learning_rate;
        let mu = self.config.momentum;
        let mut norm_sum = 0.0;
        let mut batches = 0usize;
        for start in (0..self.order.len()).step_by(bs) {
            let idx = &self.order[start..(start + bs).min(self.order.len())];
            let ds = self.dataset;
            self.workspace.gradient(
                &self.params,
                idx.iter().map(|&k| ds.shot(k)),
                idx.len(),
                self.config.cd_steps,
                &mut self.rng,
                &mut self.grad,
            );
            norm_sum += self.grad.norm();
            batches += 1;
            apply_update(
                &mut self.params,
                &mut self.velocity,
                &self.grad,
                lr,
                mu,
                self.config.freeze_mask.as_ref(),
            );
        }
        self.epoch += 1;
        if !self.params.is_finite() {
            return Err(Error::NonFinite { epoch: self.epoch });
        }
        Ok(EpochLog {
            epoch: self.epoch,
            mean_gradient_norm: norm_sum / batches as f64,
            weight_norm: self.params.weights.iter().map(|w| w * w).sum::<f64>().sqrt(),
        })
    }
}

fn apply_update(
    params: &mut RbmParams,
    velocity: &mut Gradient,
    grad: &Gradient,
    lr: f64,
    mu: f64,
    mask: Option<&FreezeMask>,
) {
    for (k, ((w, vel), g)) in params
        .weights
        .iter_mut()
        .zip(velocity.weights.iter_mut())
        .zip(&grad.weights)
        .enumerate()
    {
        if mask.is_some_and(|m| m.is_frozen_flat(k)) {
            *w = 0.0;
            *vel = 0.0;
            continue;
        }
        *vel = mu * *vel + lr * g;
        *w += *vel;
    }
    for ((b, vel), g) in params
        .visible_bias
        .iter_mut()
        .zip(velocity.visible_bias.iter_mut())
        .zip(&grad.visible_bias)
        .chain(
            params
                .hidden_bias
                .iter_mut()
                .zip(velocity.hidden_bias.iter_mut())
                .zip(&grad.hidden_bias),
        )
    {
        *vel = mu * *vel + lr * g;
        *b += *vel;
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: RbmParams,
    pub log: Vec<EpochLog>,
}

/// Train for `config.epochs` epochs starting from `params`.
pub fn train(params: RbmParams, dataset: &MeasurementDataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(params, dataset, config)?;
    let mut log = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        log.push(trainer.run_epoch()?);
    }
    Ok(TrainOutcome {
        params: trainer.into_params(),
        log,
    })
}
