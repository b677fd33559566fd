//! Iterative magnitude pruning of RBM weights with fine-tuning.
//!
//! Each iteration zeroes and freezes the smallest-magnitude surviving
//! weights, then fine-tunes the rest until the energy criterion is met again.
//! Biases are never pruned. The loop stops at the first iteration whose
//! fine-tuning cannot restore the criterion and reports the last model that
//! passed.

use crate::dataset::MeasurementDataset;
use crate::error::{Error, Result};
use crate::estimator::{
    evaluate_criterion, train_until_converged, CriterionSchedule, EstimatorConfig, DEFAULT_THRESHOLD,
};
use crate::math::fmt_f64;
use crate::rbm::{FreezeMask, RbmParams, TrainConfig};
use crate::tfim::TfimSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneSchedule {
    pub first_fraction: f64,
    pub later_fraction: f64,
    pub finetune_epoch_budget: usize,
    pub check_every: usize,
    pub criterion_threshold: f64,
    /// Retry a failed iteration once with fresh training/estimator seeds.
    pub retry_failed: bool,
}

impl Default for PruneSchedule {
    fn default() -> Self {
        Self {
            first_fraction: 0.40,
            later_fraction: 0.05,
            finetune_epoch_budget: 500,
            check_every: 25,
            criterion_threshold: DEFAULT_THRESHOLD,
            retry_failed: false,
        }
    }
}

impl PruneSchedule {
    pub fn validate(&self) -> Result<()> {
        for f in [self.first_fraction, self.later_fraction] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Invalid(format!("prune fraction {f} must lie in (0, 1)")));
            }
        }
        if self.check_every == 0 {
            return Err(Error::Invalid("check_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Magnitude cut for one pruning step: exactly `count` weights with
/// `|W| <= delta` are removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneThreshold {
    pub delta: f64,
    pub count: usize,
}

fn candidates(params: &RbmParams, mask: &FreezeMask) -> Vec<usize> {
    (0..params.weights.len())
        .filter(|&k| !mask.is_frozen_flat(k) && params.weights[k] != 0.0)
        .collect()
}

/// Candidate weights in pruning order: ascending magnitude, then flat index.
fn pruning_order(params: &RbmParams, mut idx: Vec<usize>) -> Vec<usize> {
    idx.sort_by(|&a, &b| {
        params.weights[a]
            .abs()
            .total_cmp(&params.weights[b].abs())
            .then(a.cmp(&b))
    });
    idx
}

/// `delta` is the magnitude of the `k`-th smallest surviving weight with
/// `k = floor(fraction × survivors)`. For `k = 0` it sits below every
/// surviving magnitude so nothing is pruned.
pub fn prune_threshold(params: &RbmParams, mask: &FreezeMask, fraction: f64) -> Result<PruneThreshold> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Invalid(format!("prune fraction {fraction} must lie in (0, 1)")));
    }
    if !mask.matches(params) {
        return Err(Error::Dimension("freeze mask shape does not match model".into()));
    }
    let order = pruning_order(params, candidates(params, mask));
    if order.is_empty() {
        return Err(Error::Precondition("no unpruned weights left".into()));
    }
    let k = (fraction * order.len() as f64).floor() as usize;
    let delta = if k == 0 {
        0.5 * params.weights[order[0]].abs()
    } else {
        params.weights[order[k - 1]].abs()
    };
    Ok(PruneThreshold { delta, count: k })
}

/// Zero and freeze every unfrozen weight with `|W| <= delta`, smallest first,
/// stopping after `limit` weights when given. Biases are left alone.
pub fn apply_prune(params: &RbmParams, mask: &FreezeMask, delta: f64, limit: Option<usize>) -> (RbmParams, FreezeMask) {
    let mut params = params.clone();
    let mut mask = mask.clone();
    let unfrozen = (0..params.weights.len()).filter(|&k| !mask.is_frozen_flat(k)).collect();
    let order = pruning_order(&params, unfrozen);
    let limit = limit.unwrap_or(usize::MAX);
    let selected: Vec<usize> = order
        .into_iter()
        .take_while(|&k| params.weights[k].abs() <= delta)
        .take(limit)
        .collect();
    for k in selected {
        params.weights[k] = 0.0;
        mask.freeze_flat(k);
    }
    (params, mask)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneIteration {
    pub iteration: usize,
    pub delta: f64,
    pub weights_remaining: usize,
    pub finetune_epochs: usize,
    pub epsilon: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct PruneReport {
    pub initial_weights: usize,
    pub iterations: Vec<PruneIteration>,
    pub final_model: RbmParams,
    pub final_mask: FreezeMask,
    pub final_nonzero_weights: usize,
}

impl PruneReport {
    pub const CSV_HEADER: &'static str = "iteration,delta,weights_remaining,finetune_epochs,epsilon,passed";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for it in &self.iterations {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                it.iteration,
                fmt_f64(it.delta),
                it.weights_remaining,
                it.finetune_epochs,
                fmt_f64(it.epsilon),
                it.passed
            ));
        }
        out
    }
}

/// Everything `prune_loop` needs besides the model.
#[derive(Debug, Clone)]
pub struct PruneContext<'a> {
    pub dataset: &'a MeasurementDataset,
    pub spec: &'a TfimSpec,
    pub exact_energy: f64,
    pub train: &'a TrainConfig,
    pub estimator: &'a EstimatorConfig,
}

const SEED_STRIDE: u64 = 1_000_003;

/// Prune, fine-tune, repeat until fine-tuning fails.
pub fn prune_loop(params: &RbmParams, ctx: &PruneContext<'_>, schedule: &PruneSchedule) -> Result<PruneReport> {
    schedule.validate()?;
    let initial = evaluate_criterion(
        params,
        ctx.spec,
        ctx.exact_energy,
        schedule.criterion_threshold,
        ctx.estimator,
    )?;
    if !initial.converged {
        return Err(Error::Precondition(format!(
            "starting model fails the criterion (epsilon = {:.6})",
            initial.epsilon
        )));
    }

    let mut current = params.clone();
    let mut mask = FreezeMask::none(params.n_visible, params.n_hidden);
    let mut iterations = Vec::new();
    let criterion = CriterionSchedule {
        check_every: schedule.check_every,
        epoch_budget: schedule.finetune_epoch_budget,
        threshold: schedule.criterion_threshold,
    };

    for iteration in 1.. {
        let fraction = if iteration == 1 {
            schedule.first_fraction
        } else {
            schedule.later_fraction
        };
        if candidates(&current, &mask).is_empty() {
            break;
        }
        let cut = prune_threshold(&current, &mask, fraction)?;
        if cut.count == 0 {
            break;
        }
        let (pruned, pruned_mask) = apply_prune(&current, &mask, cut.delta, Some(cut.count));
        let remaining = pruned.nonzero_weights();

        let attempts = if schedule.retry_failed { 2 } else { 1 };
        let mut outcome = None;
        for attempt in 0..attempts {
            let offset = (iteration as u64 * 2 + attempt as u64) * SEED_STRIDE;
            let train_cfg = TrainConfig {
                seed: ctx.train.seed.wrapping_add(offset),
                freeze_mask: Some(pruned_mask.clone()),
                ..ctx.train.clone()
            };
            let est_cfg = ctx.estimator.with_seed(ctx.estimator.seed.wrapping_add(offset));
            let run = train_until_converged(
                pruned.clone(),
                ctx.dataset,
                ctx.spec,
                ctx.exact_energy,
                &train_cfg,
                &est_cfg,
                &criterion,
            )?;
            let passed = run.converged();
            outcome = Some(run);
            if passed {
                break;
            }
        }
        let run = outcome.expect("at least one attempt");
        let passed = run.converged();
        iterations.push(PruneIteration {
            iteration,
            delta: cut.delta,
            weights_remaining: remaining,
            finetune_epochs: run.epochs_used,
            epsilon: run.result.epsilon,
            passed,
        });
        if !passed {
            break;
        }
        current = run.params;
        mask = pruned_mask;
    }

    Ok(PruneReport {
        initial_weights: params.nonzero_weights(),
        final_nonzero_weights: current.nonzero_weights(),
        iterations,
        final_model: current,
        final_mask: mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::sample_measurements;
    use crate::tfim::solve_ground_state;

    fn five() -> RbmParams {
        RbmParams::from_parts(5, 1, vec![0.3, -0.1, 0.5, 0.2, -0.4], vec![0.0; 5], vec![0.0]).unwrap()
    }

    #[test]
    fn threshold_examples() {
        let p = five();
        let m = FreezeMask::none(5, 1);
        let t = prune_threshold(&p, &m, 0.4).unwrap();
        assert_eq!(t.count, 2);
        assert_eq!(t.delta, 0.2);

        let t = prune_threshold(&p, &m, 1e-9).unwrap();
        assert_eq!(t.count, 0);
        let (q, m2) = apply_prune(&p, &m, t.delta, None);
        assert_eq!(q, p);
        assert_eq!(m2.frozen_count(), 0);

        assert!(prune_threshold(&p, &m, 0.0).is_err());
        assert!(prune_threshold(&p, &m, 1.0).is_err());
        assert!(prune_threshold(&p, &FreezeMask::all(5, 1), 0.5).is_err());
    }

    #[test]
    fn ties_broken_by_flat_index() {
        let p = RbmParams::from_parts(5, 1, vec![0.5, -0.5, 0.5, 0.5, -0.5], vec![0.0; 5], vec![0.0]).unwrap();
        let m = FreezeMask::none(5, 1);
        let t = prune_threshold(&p, &m, 0.4).unwrap();
        let (q, mask) = apply_prune(&p, &m, t.delta, Some(t.count));
        assert_eq!(q.weights, vec![0.0, 0.0, 0.5, 0.5, -0.5]);
        assert!(mask.is_frozen_flat(0) && mask.is_frozen_flat(1));
        assert_eq!(mask.frozen_count(), 2);
    }

    #[test]
    fn apply_examples() {
        let p = five();
        let m = FreezeMask::none(5, 1);
        let (q, _) = apply_prune(&p, &m, 0.0, None);
        assert_eq!(q, p);

        let (q, mask) = apply_prune(&p, &m, 1.0, None);
        assert!(q.weights.iter().all(|&w| w == 0.0));
        assert_eq!(mask, FreezeMask::all(5, 1));
        assert_eq!(q.visible_bias, p.visible_bias);

        let (q, mask) = apply_prune(&p, &m, 0.2, None);
        assert_eq!(q.weights, vec![0.3, 0.0, 0.5, 0.0, -0.4]);
        assert_eq!(mask.frozen_count(), 2);
    }

    #[test]
    fn csv_layout() {
        let report = PruneReport {
            initial_weights: 4,
            iterations: vec![PruneIteration {
                iteration: 1,
                delta: 0.25,
                weights_remaining: 3,
                finetune_epochs: 0,
                epsilon: 0.001,
                passed: true,
            }],
            final_model: RbmParams::zeros(2, 2),
            final_mask: FreezeMask::none(2, 2),
            final_nonzero_weights: 3,
        };
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], PruneReport::CSV_HEADER);
        assert_eq!(lines[1], "1,2.5000000000000000e-1,3,0,1.0000000000000000e-3,true");
    }

    /// Product state |+>^N at J = 0: a zero-weight RBM with any visible
    /// biases at zero is exact, so equal-magnitude weights that only shift the
    /// normalization keep the criterion satisfied after pruning.
    fn paramagnet_setup() -> (TfimSpec, f64, MeasurementDataset, RbmParams) {
        let spec = TfimSpec::new(4, 0.0, 1.0).unwrap();
        let gs = solve_ground_state(&spec).unwrap();
        let ds = sample_measurements(&gs, 200, 1).unwrap();
        // weights tiny compared with the threshold's energy tolerance
        let params = RbmParams::from_parts(4, 2, vec![1e-6; 8], vec![0.0; 4], vec![0.0; 2]).unwrap();
        (spec, gs.energy, ds, params)
    }

    fn small_estimator() -> EstimatorConfig {
        EstimatorConfig {
            n_samples: 2000,
            n_chains: 20,
            burn_in: 200,
            keep_every: 2,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn loop_prunes_with_zero_finetune_when_margin_is_huge() {
        let (spec, u, ds, params) = paramagnet_setup();
        let train = TrainConfig::default();
        let est = small_estimator();
        let ctx = PruneContext {
            dataset: &ds,
            spec: &spec,
            exact_energy: u,
            train: &train,
            estimator: &est,
        };
        let report = prune_loop(&params, &ctx, &PruneSchedule::default()).unwrap();
        assert_eq!(report.iterations[0].weights_remaining, 5);
        assert_eq!(report.iterations[0].finetune_epochs, 0);
        assert!(report.iterations[0].passed);
        for w in report.iterations.windows(2) {
            assert!(w[1].weights_remaining < w[0].weights_remaining);
        }
        // floor(0.05 * n) reaches 0 once fewer than 20 weights survive
        assert_eq!(report.final_nonzero_weights, 5);
        for k in 0..8 {
            if report.final_mask.is_frozen_flat(k) {
                assert_eq!(report.final_model.weights[k].to_bits(), 0);
            }
        }
    }

    #[test]
    fn loop_requires_passing_start() {
        let (spec, u, ds, _) = paramagnet_setup();
        let mut bad = RbmParams::zeros(4, 2);
        bad.visible_bias = vec![6.0; 4];
        let train = TrainConfig::default();
        let est = small_estimator();
        let ctx = PruneContext {
            dataset: &ds,
            spec: &spec,
            exact_energy: u,
            train: &train,
            estimator: &est,
        };
        assert!(matches!(
            prune_loop(&bad, &ctx, &PruneSchedule::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn zero_budget_stops_at_first_break() {
        // Classical ferromagnet: one hidden unit with strong equal weights
        // pins the all-up state. Removing any weight frees that site, which
        // breaks its bonds half the time.
        let spec = TfimSpec::new(4, 1.0, 0.0).unwrap();
        let gs = solve_ground_state(&spec).unwrap();
        let ds = sample_measurements(&gs, 100, 1).unwrap();
        let w = 20.0;
        let params = RbmParams::from_parts(4, 1, vec![w; 4], vec![0.0; 4], vec![-2.0 * w]).unwrap();
        let train = TrainConfig::default();
        let est = small_estimator();
        let ctx = PruneContext {
            dataset: &ds,
            spec: &spec,
            exact_energy: gs.energy,
            train: &train,
            estimator: &est,
        };
        let schedule = PruneSchedule {
            finetune_epoch_budget: 0,
            ..PruneSchedule::default()
        };
        let report = prune_loop(&params, &ctx, &schedule).unwrap();
        assert_eq!(report.iterations.len(), 1);
        assert!(!report.iterations[0].passed);
        assert_eq!(report.iterations[0].finetune_epochs, 0);
        assert!(report.iterations[0].epsilon > schedule.criterion_threshold);
        assert_eq!(report.final_model, params);
    }
}
