//! Monte Carlo energy estimation for an RBM wavefunction and the
//! relative-observable-error learning criterion.

use crate::dataset::{index_to_bits, MeasurementDataset};
use crate::error::{Error, Result};
use crate::math::{fmt_f64, softplus};
use crate::rbm::{exact_distribution, sample_model, ChainConfig, RbmParams, TrainConfig, Trainer};
use crate::tfim::TfimSpec;

/// z-value of a two-sided 99% Gaussian interval.
pub const DEFAULT_CONFIDENCE: f64 = 2.576;
/// Relative error bound a reconstruction has to reach.
pub const DEFAULT_THRESHOLD: f64 = 0.002;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub n_samples: usize,
    pub n_chains: usize,
    pub burn_in: usize,
    pub keep_every: usize,
    pub confidence_c: f64,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_samples: 100_000,
            n_chains: 100,
            burn_in: 200,
            keep_every: 5,
            confidence_c: DEFAULT_CONFIDENCE,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(Error::Invalid("estimator needs at least 2 samples".into()));
        }
        if !(self.confidence_c.is_finite() && self.confidence_c > 0.0) {
            return Err(Error::Invalid("confidence_c must be positive".into()));
        }
        self.chain_config().validate()
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            n_chains: self.n_chains,
            burn_in: self.burn_in,
            keep_every: self.keep_every,
            n_samples: self.n_samples,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyEstimate {
    pub mean: f64,
    /// Sample standard deviation of the local energies.
    pub std_dev: f64,
    pub n_samples: usize,
}

impl EnergyEstimate {
    pub fn std_err(&self) -> f64 {
        self.std_dev / (self.n_samples as f64).sqrt()
    }

    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Invalid("need at least 2 local energies".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mean,
            std_dev: var.sqrt(),
            n_samples: values.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoeResult {
    pub epsilon: f64,
    pub exact_energy: f64,
    pub estimate: EnergyEstimate,
    pub threshold: f64,
    pub converged: bool,
}

fn check_dims(params: &RbmParams, spec: &TfimSpec) -> Result<()> {
    if params.n_visible != spec.n_qubits {
        return Err(Error::Dimension(format!(
            "model has {} visible units, Hamiltonian has {} sites",
            params.n_visible, spec.n_qubits
        )));
    }
    Ok(())
}

/// Local energy evaluator with reusable scratch space.
pub struct LocalEnergy<'a> {
    params: &'a RbmParams,
    spec: &'a TfimSpec,
    field: Vec<f64>,
}

impl<'a> LocalEnergy<'a> {
    pub fn new(params: &'a RbmParams, spec: &'a TfimSpec) -> Result<Self> {
        check_dims(params, spec)?;
        Ok(Self {
            params,
            spec,
            field: vec![0.0; params.n_hidden],
        })
    }

    /// `-J Σ s_i s_{i+1} - h Σ_i ψ(flip_i v) / ψ(v)` with `s_i = 2 v_i - 1`.
    pub fn eval(&mut self, v: &[u8]) -> f64 {
        let p = self.params;
        let spins = |i: usize| 2.0 * v[i] as f64 - 1.0;
        let diag: f64 = (0..v.len().saturating_sub(1)).map(|i| spins(i) * spins(i + 1)).sum();
        let mut e = -self.spec.coupling * diag;
        if self.spec.field == 0.0 {
            return e;
        }
        p.hidden_field_into(v, &mut self.field);
        let base: f64 = self.field.iter().map(|&t| softplus(t)).sum();
        let mut off = 0.0;
        for i in 0..v.len() {
            let d = 1.0 - 2.0 * v[i] as f64;
            let flipped: f64 = self
                .field
                .iter()
                .zip(p.weight_row(i))
                .map(|(&t, &w)| softplus(t + w * d))
                .sum();
            // F(v') - F(v)
            let delta_f = -p.visible_bias[i] * d - (flipped - base);
            off += (-0.5 * delta_f).exp();
        }
        e -= self.spec.field * off;
        e
    }
}

pub fn local_energy(params: &RbmParams, spec: &TfimSpec, v: &[u8]) -> Result<f64> {
    if v.len() != params.n_visible {
        return Err(Error::Dimension("visible vector length".into()));
    }
    Ok(LocalEnergy::new(params, spec)?.eval(v))
}

/// Local energies of every sample.
pub fn local_energies(params: &RbmParams, spec: &TfimSpec, samples: &MeasurementDataset) -> Result<Vec<f64>> {
    let mut le = LocalEnergy::new(params, spec)?;
    Ok(samples.shots().map(|v| le.eval(v)).collect())
}

/// Mean and spread of the local energy over Gibbs samples of the model.
pub fn estimate_energy(params: &RbmParams, spec: &TfimSpec, cfg: &EstimatorConfig) -> Result<EnergyEstimate> {
    cfg.validate()?;
    check_dims(params, spec)?;
    let samples = sample_model(params, &cfg.chain_config(), cfg.seed)?;
    EnergyEstimate::from_values(&local_energies(params, spec, &samples)?)
}

/// `Σ_v p(v) E_loc(v)` by enumeration.
pub fn exact_rbm_energy(params: &RbmParams, spec: &TfimSpec) -> Result<f64> {
    check_dims(params, spec)?;
    let dist = exact_distribution(params)?;
    let mut le = LocalEnergy::new(params, spec)?;
    Ok(dist
        .probs
        .iter()
        .enumerate()
        .map(|(s, &p)| p * le.eval(&index_to_bits(s, params.n_visible)))
        .sum())
}

/// Upper bound on the relative error of the estimate: the worse end of
/// `Ū ± C σ/√n` relative to the exact energy.
pub fn roe(estimate: &EnergyEstimate, exact_u: f64, threshold: f64, c: f64) -> Result<RoeResult> {
    if exact_u == 0.0 || !exact_u.is_finite() {
        return Err(Error::Domain("relative error undefined for exact energy 0".into()));
    }
    if estimate.n_samples < 2 {
        return Err(Error::Domain("need at least 2 samples".into()));
    }
    let half = c * estimate.std_err();
    let epsilon = [estimate.mean + half, estimate.mean - half]
        .iter()
        .map(|end| ((exact_u - end) / exact_u).abs())
        .fold(0.0, f64::max);
    Ok(RoeResult {
        epsilon,
        exact_energy: exact_u,
        estimate: *estimate,
        threshold,
        converged: epsilon <= threshold,
    })
}

/// Estimate the energy and apply the criterion in one step.
pub fn evaluate_criterion(
    params: &RbmParams,
    spec: &TfimSpec,
    exact_u: f64,
    threshold: f64,
    cfg: &EstimatorConfig,
) -> Result<RoeResult> {
    let est = estimate_energy(params, spec, cfg)?;
    roe(&est, exact_u, threshold, cfg.confidence_c)
}

/// How often the criterion is checked while training, and for how long.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionSchedule {
    pub check_every: usize,
    pub epoch_budget: usize,
    pub threshold: f64,
}

impl Default for CriterionSchedule {
    fn default() -> Self {
        Self {
            check_every: 50,
            epoch_budget: 1000,
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CriterionRun {
    pub params: RbmParams,
    /// Epochs trained when the run stopped.
    pub epochs_used: usize,
    /// Result of the last criterion check.
    pub result: RoeResult,
    /// Every check as `(epoch, result)`.
    pub history: Vec<(usize, RoeResult)>,
}

impl CriterionRun {
    pub fn converged(&self) -> bool {
        self.result.converged
    }
}

/// Train with CD until the criterion holds or the epoch budget runs out.
///
/// The criterion is checked before any training and then every
/// `check_every` epochs; the check at epoch `t` uses estimator seed
/// `cfg.seed + t`.
pub fn train_until_converged(
    params: RbmParams,
    dataset: &MeasurementDataset,
    spec: &TfimSpec,
    exact_u: f64,
    train_cfg: &TrainConfig,
    est_cfg: &EstimatorConfig,
    schedule: &CriterionSchedule,
) -> Result<CriterionRun> {
    if schedule.check_every == 0 {
        return Err(Error::Invalid("check_every must be at least 1".into()));
    }
    check_dims(&params, spec)?;
    let mut trainer = Trainer::new(params, dataset, train_cfg)?;
    let mut history = Vec::new();
    let check = |trainer: &Trainer, epoch: usize| {
        evaluate_criterion(
            trainer.params(),
            spec,
            exact_u,
            schedule.threshold,
            &est_cfg.with_seed(est_cfg.seed.wrapping_add(epoch as u64)),
        )
    };
    let mut result = check(&trainer, 0)?;
    history.push((0, result));
    while !result.converged && trainer.epochs_run() < schedule.epoch_budget {
        let stop = (trainer.epochs_run() + schedule.check_every).min(schedule.epoch_budget);
        while trainer.epochs_run() < stop {
            trainer.run_epoch()?;
        }
        result = check(&trainer, trainer.epochs_run())?;
        history.push((trainer.epochs_run(), result));
    }
    Ok(CriterionRun {
        epochs_used: trainer.epochs_run(),
        params: trainer.into_params(),
        result,
        history,
    })
}

/// One row of the criterion log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoeRecord {
    pub n_qubits: usize,
    pub h_over_j: f64,
    pub n_hidden: usize,
    pub m: usize,
    pub epoch: usize,
    pub result: RoeResult,
    pub seed: u64,
}

impl RoeRecord {
    pub const CSV_HEADER: &'static str = "N,h_over_J,N_hidden,M,epoch,U_exact,U_mean,sigma,n,epsilon,converged,seed";

    pub fn to_csv(&self) -> String {
        let r = &self.result;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n_qubits,
            fmt_f64(self.h_over_j),
            self.n_hidden,
            self.m,
            self.epoch,
            fmt_f64(r.exact_energy),
            fmt_f64(r.estimate.mean),
            fmt_f64(r.estimate.std_dev),
            r.estimate.n_samples,
            fmt_f64(r.epsilon),
            r.converged,
            self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, j: f64, h: f64) -> TfimSpec {
        TfimSpec::new(n, j, h).unwrap()
    }

    #[test]
    fn local_energy_examples() {
        let z = RbmParams::zeros(3, 2);
        assert_eq!(local_energy(&z, &spec(3, 1.0, 0.0), &[1, 1, 1]).unwrap(), -2.0);
        let z2 = RbmParams::zeros(2, 2);
        assert_eq!(local_energy(&z2, &spec(2, 1.0, 1.0), &[1, 1]).unwrap(), -3.0);
        assert!(local_energy(&z2, &spec(3, 1.0, 1.0), &[1, 1, 1]).is_err());
    }

    #[test]
    fn local_energy_matches_dense_matrix_vector_product() {
        let p = RbmParams::random(3, 2, 0.9, 4);
        let mut p = p;
        p.visible_bias = vec![0.3, -0.2, 0.5];
        p.hidden_bias = vec![-0.1, 0.4];
        let s = spec(3, 0.7, 1.3);
        let h = s.dense_matrix().unwrap();
        let psi: Vec<f64> = exact_distribution(&p).unwrap().probs.iter().map(|q| q.sqrt()).collect();
        for st in 0..8 {
            let hpsi: f64 = (0..8).map(|t| h[(st, t)] * psi[t]).sum();
            let le = local_energy(&p, &s, &index_to_bits(st, 3)).unwrap();
            assert!((le - hpsi / psi[st]).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_energy_examples() {
        assert!((exact_rbm_energy(&RbmParams::zeros(5, 2), &spec(5, 0.0, 1.0)).unwrap() + 5.0).abs() < 1e-12);
        assert!(
            exact_rbm_energy(&RbmParams::zeros(3, 2), &spec(3, 1.0, 0.0))
                .unwrap()
                .abs()
                < 1e-12
        );

        let p = RbmParams::random(2, 3, 1.1, 8);
        let s = spec(2, 1.0, 0.8);
        let h = s.dense_matrix().unwrap();
        let psi: Vec<f64> = exact_distribution(&p).unwrap().probs.iter().map(|q| q.sqrt()).collect();
        let mut num = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                num += psi[a] * h[(a, b)] * psi[b];
            }
        }
        let den: f64 = psi.iter().map(|x| x * x).sum();
        assert!((exact_rbm_energy(&p, &s).unwrap() - num / den).abs() < 1e-12);
    }

    #[test]
    fn constant_estimator_has_zero_spread() {
        let cfg = EstimatorConfig {
            n_samples: 1000,
            n_chains: 10,
            ..EstimatorConfig::default()
        };
        let est = estimate_energy(&RbmParams::zeros(6, 3), &spec(6, 0.0, 1.0), &cfg).unwrap();
        assert_eq!(est.mean, -6.0);
        assert_eq!(est.std_dev, 0.0);
        assert_eq!(est.n_samples, 1000);
    }

    #[test]
    fn estimate_is_deterministic_under_seed() {
        let p = RbmParams::random(4, 2, 0.5, 1);
        let cfg = EstimatorConfig {
            n_samples: 2000,
            n_chains: 10,
            seed: 12,
            ..EstimatorConfig::default()
        };
        let s = spec(4, 1.0, 1.0);
        assert_eq!(
            estimate_energy(&p, &s, &cfg).unwrap(),
            estimate_energy(&p, &s, &cfg).unwrap()
        );
    }

    #[test]
    fn roe_examples() {
        let exact = EnergyEstimate {
            mean: -3.0,
            std_dev: 0.0,
            n_samples: 100,
        };
        let r = roe(&exact, -3.0, 0.002, DEFAULT_CONFIDENCE).unwrap();
        assert_eq!(r.epsilon, 0.0);
        assert!(r.converged);

        let est = EnergyEstimate {
            mean: -2.23,
            std_dev: 0.001 * 10.0,
            n_samples: 100,
        };
        let r = roe(&est, -2.2360680, 0.002, DEFAULT_CONFIDENCE).unwrap();
        assert!((r.epsilon - 0.003866).abs() < 5e-7, "{}", r.epsilon);
        assert!(!r.converged);

        let sym = EnergyEstimate {
            mean: -4.0,
            std_dev: 2.0,
            n_samples: 400,
        };
        let r = roe(&sym, -4.0, 1.0, 1.5).unwrap();
        assert!((r.epsilon - 1.5 * 0.1 / 4.0).abs() < 1e-15);

        assert!(matches!(roe(&sym, 0.0, 0.1, 1.0), Err(Error::Domain(_))));
        let one = EnergyEstimate { n_samples: 1, ..sym };
        assert!(roe(&one, -1.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn roe_with_zero_confidence_is_relative_error() {
        let est = EnergyEstimate {
            mean: -9.9,
            std_dev: 3.0,
            n_samples: 10,
        };
        let r = roe(&est, -10.0, 0.1, 0.0).unwrap();
        assert!((r.epsilon - 0.01).abs() < 1e-14);
    }

    #[test]
    fn roe_record_csv() {
        let est = EnergyEstimate {
            mean: -2.0,
            std_dev: 0.5,
            n_samples: 10,
        };
        let r = roe(&est, -2.0, 0.002, 2.576).unwrap();
        let rec = RoeRecord {
            n_qubits: 3,
            h_over_j: 1.0,
            n_hidden: 2,
            m: 100,
            epoch: 50,
            result: r,
            seed: 9,
        };
        let row = rec.to_csv();
        assert_eq!(row.split(',').count(), RoeRecord::CSV_HEADER.split(',').count());
        assert!(row.starts_with("3,1.0000000000000000e0,2,100,50,"));
        assert!(row.ends_with(",false,9"));
    }
}
