//! Minimal-hidden-unit and sample-complexity sweeps.
//!
//! Every grid point `(N, h/J)` owns a measurement pool drawn once from the
//! exact ground state. Points are independent and may run in parallel;
//! results are returned in grid order regardless of scheduling.

use rayon::prelude::*;

use super::config::SweepConfig;
use super::{derive_seed, ratio_key};
use crate::dataset::{sample_measurements_with, MeasurementDataset, SamplingOptions};
use crate::error::{Error, Result};
use crate::estimator::{train_until_converged, CriterionRun};
use crate::math::fmt_f64;
use crate::rbm::TrainConfig;
use crate::tfim::{solve_ground_state, GroundState, TfimSpec};

/// One training run at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub n_qubits: usize,
    pub h_over_j: f64,
    pub n_hidden: usize,
    /// Training examples used.
    pub m: usize,
    pub repeat: usize,
    /// Training seed; the estimator seed is derived from it.
    pub seed: u64,
    pub epochs_used: usize,
    /// Relative error bound at the last check.
    pub epsilon: f64,
    /// Smallest bound over all checks of the run.
    pub best_epsilon: f64,
    pub converged: bool,
}

impl SweepRecord {
    pub const CSV_HEADER: &'static str = "N,h_over_J,N_hidden,M,repeat,seed,epochs_used,epsilon,best_epsilon,converged";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.n_qubits,
            fmt_f64(self.h_over_j),
            self.n_hidden,
            self.m,
            self.repeat,
            self.seed,
            self.epochs_used,
            fmt_f64(self.epsilon),
            fmt_f64(self.best_epsilon),
            self.converged
        )
    }

    fn from_run(point: &Point, n_hidden: usize, m: usize, repeat: usize, seed: u64, run: &CriterionRun) -> Self {
        let best = run.history.iter().map(|(_, r)| r.epsilon).fold(f64::INFINITY, f64::min);
        Self {
            n_qubits: point.n,
            h_over_j: point.h_over_j,
            n_hidden,
            m,
            repeat,
            seed,
            epochs_used: run.epochs_used,
            epsilon: run.result.epsilon,
            best_epsilon: best,
            converged: run.converged(),
        }
    }
}

fn records_csv(records: &[SweepRecord]) -> String {
    let mut out = format!("{}\n", SweepRecord::CSV_HEADER);
    for r in records {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimalHidden {
    pub n_qubits: usize,
    pub h_over_j: f64,
    /// `None` when the grid ran out first.
    pub n_hidden: Option<usize>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSweep {
    pub records: Vec<SweepRecord>,
    pub minimal: Vec<MinimalHidden>,
    /// `(label, seed)` for every measurement pool.
    pub pool_seeds: Vec<(String, u64)>,
}

impl HiddenSweep {
    pub const MINIMAL_HEADER: &'static str = "N,h_over_J,minimal_N_hidden,flagged";

    pub fn records_csv(&self) -> String {
        records_csv(&self.records)
    }

    pub fn minimal_csv(&self) -> String {
        let mut out = format!("{}\n", Self::MINIMAL_HEADER);
        for m in &self.minimal {
            let nh = m.n_hidden.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                m.n_qubits,
                fmt_f64(m.h_over_j),
                nh,
                m.flagged
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimalSamples {
    pub n_qubits: usize,
    pub h_over_j: f64,
    pub n_hidden: usize,
    /// Smallest passing `M` per repeat; `None` when the cap was reached.
    pub per_repeat: Vec<Option<usize>>,
    /// Mean over the repeats that found a minimum.
    pub mean: Option<f64>,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSweep {
    pub records: Vec<SweepRecord>,
    pub minimal: Vec<MinimalSamples>,
    pub pool_seeds: Vec<(String, u64)>,
}

impl SampleSweep {
    pub const MINIMAL_HEADER: &'static str = "N,h_over_J,N_hidden,repeat_minima,mean_M,flagged";

    pub fn records_csv(&self) -> String {
        records_csv(&self.records)
    }

    /// `repeat_minima` is `;`-separated with `-` for a repeat that hit the cap.
    pub fn minimal_csv(&self) -> String {
        let mut out = format!("{}\n", Self::MINIMAL_HEADER);
        for m in &self.minimal {
            let minima: Vec<String> = m
                .per_repeat
                .iter()
                .map(|x| x.map(|v| v.to_string()).unwrap_or_else(|| "-".into()))
                .collect();
            let mean = m.mean.map(fmt_f64).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                m.n_qubits,
                fmt_f64(m.h_over_j),
                m.n_hidden,
                minima.join(";"),
                mean,
                m.flagged
            ));
        }
        out
    }
}

struct Point {
    n: usize,
    h_over_j: f64,
    spec: TfimSpec,
    ground: GroundState,
    exact_energy: f64,
}

impl Point {
    fn new(cfg: &SweepConfig, n: usize, h_over_j: f64) -> Result<Self> {
        let spec = TfimSpec::new(n, cfg.coupling, h_over_j * cfg.coupling)?;
        let ground = solve_ground_state(&spec)?;
        Ok(Self {
            n,
            h_over_j,
            spec,
            exact_energy: ground.energy,
            ground,
        })
    }

    fn key(&self) -> [u64; 2] {
        [self.n as u64, ratio_key(self.h_over_j)]
    }

    fn pool(&self, cfg: &SweepConfig, size: usize, seed: u64) -> Result<MeasurementDataset> {
        let opts = SamplingOptions {
            symmetry_break: cfg.symmetry_break,
        };
        sample_measurements_with(&self.ground, size, seed, opts)
    }

    fn train(
        &self,
        cfg: &SweepConfig,
        data: &MeasurementDataset,
        n_hidden: usize,
        init_seed: u64,
        train_seed: u64,
    ) -> Result<CriterionRun> {
        let train_cfg = TrainConfig {
            seed: train_seed,
            ..cfg.train.clone()
        };
        let est = cfg.estimator.with_seed(derive_seed(train_seed, "estimate", &[]));
        train_until_converged(
            train_cfg.init_params(self.n, n_hidden, init_seed),
            data,
            &self.spec,
            self.exact_energy,
            &train_cfg,
            &est,
            &cfg.criterion,
        )
    }
}

fn majority(repeats: usize) -> usize {
    repeats / 2 + 1
}

fn grid_points(cfg: &SweepConfig) -> Vec<(usize, f64)> {
    cfg.qubit_sizes
        .iter()
        .flat_map(|&n| cfg.field_ratios.iter().map(move |&h| (n, h)))
        .collect()
}

fn run_points<T, F>(cfg: &SweepConfig, workers: usize, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, f64) -> Result<T> + Sync,
{
    let points = grid_points(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(|| points.par_iter().map(|&(n, h)| job(n, h)).collect())
}

/// Increase `N_h` along the grid until a majority of `repeats` seeds pass.
///
/// Repeats at a grid value stop as soon as the majority is decided. A
/// point whose grid runs out is flagged.
pub fn sweep_hidden_units(cfg: &SweepConfig, seed: u64, workers: usize) -> Result<HiddenSweep> {
    cfg.validate()?;
    let need = majority(cfg.repeats);
    let per_point = run_points(cfg, workers, |n, h| {
        let point = Point::new(cfg, n, h)?;
        let pool_seed = derive_seed(seed, "pool", &point.key());
        let pool = point.pool(cfg, cfg.pool_size, pool_seed)?;
        let mut records = Vec::new();
        let mut minimal = None;
        for nh in cfg.hidden_grid.values() {
            let (mut pass, mut fail) = (0, 0);
            for r in 0..cfg.repeats {
                let [a, b] = point.key();
                let init_seed = derive_seed(seed, "init", &[a, b, nh as u64, r as u64]);
                let train_seed = derive_seed(seed, "train", &[a, b, nh as u64, r as u64]);
                let run = point.train(cfg, &pool, nh, init_seed, train_seed)?;
                let rec = SweepRecord::from_run(&point, nh, pool.len(), r, train_seed, &run);
                if rec.converged {
                    pass += 1;
                } else {
                    fail += 1;
                }
                records.push(rec);
                if pass >= need || fail > cfg.repeats - need {
                    break;
                }
            }
            if pass >= need {
                minimal = Some(nh);
                break;
            }
        }
        let summary = MinimalHidden {
            n_qubits: n,
            h_over_j: h,
            n_hidden: minimal,
            flagged: minimal.is_none(),
        };
        Ok((records, summary, (format!("pool/{n}/{h}"), pool_seed)))
    })?;
    let mut out = HiddenSweep {
        records: Vec::new(),
        minimal: Vec::new(),
        pool_seeds: Vec::new(),
    };
    for (records, summary, pool_seed) in per_point {
        out.records.extend(records);
        out.minimal.push(summary);
        out.pool_seeds.push(pool_seed);
    }
    Ok(out)
}

/// Recompute minimal `N_h` per point from stored records at a different
/// threshold: a run passes when its best bound is at most `threshold`, a
/// grid value passes when a majority of `repeats` runs pass.
pub fn minimal_from_records(records: &[SweepRecord], threshold: f64, repeats: usize) -> Vec<MinimalHidden> {
    let need = majority(repeats);
    let mut points: Vec<(usize, f64)> = Vec::new();
    for r in records {
        if !points.iter().any(|&(n, h)| n == r.n_qubits && h == r.h_over_j) {
            points.push((r.n_qubits, r.h_over_j));
        }
    }
    points
        .into_iter()
        .map(|(n, h)| {
            let mut grid: Vec<usize> = records
                .iter()
                .filter(|r| r.n_qubits == n && r.h_over_j == h)
                .map(|r| r.n_hidden)
                .collect();
            grid.sort_unstable();
            grid.dedup();
            let minimal = grid.into_iter().find(|&nh| {
                records
                    .iter()
                    .filter(|r| r.n_qubits == n && r.h_over_j == h && r.n_hidden == nh)
                    .filter(|r| r.best_epsilon <= threshold)
                    .count()
                    >= need
            });
            MinimalHidden {
                n_qubits: n,
                h_over_j: h,
                n_hidden: minimal,
                flagged: minimal.is_none(),
            }
        })
        .collect()
}

/// Hidden units used by the sample-complexity sweep: `round(α N)`, at least 1.
pub fn hidden_for_alpha(n: usize, alpha: f64) -> usize {
    ((alpha * n as f64).round() as usize).max(1)
}

/// Grow the training set along nested prefixes `ΔM, 2ΔM, ...` of one pool
/// until the criterion holds, separately for each repeat's initial weights.
pub fn sweep_sample_complexity(cfg: &SweepConfig, seed: u64, workers: usize) -> Result<SampleSweep> {
    cfg.validate()?;
    let per_point = run_points(cfg, workers, |n, h| {
        let point = Point::new(cfg, n, h)?;
        let nh = hidden_for_alpha(n, cfg.alpha_ratio);
        let pool_seed = derive_seed(seed, "pool-m", &point.key());
        let pool = point.pool(cfg, cfg.sample_max, pool_seed)?;
        let [a, b] = point.key();
        let mut records = Vec::new();
        let mut per_repeat = Vec::with_capacity(cfg.repeats);
        for r in 0..cfg.repeats {
            let init_seed = derive_seed(seed, "init-m", &[a, b, r as u64]);
            let mut found = None;
            for m in (cfg.sample_step..=cfg.sample_max).step_by(cfg.sample_step) {
                let train_seed = derive_seed(seed, "train-m", &[a, b, m as u64, r as u64]);
                let run = point.train(cfg, &pool.prefix(m), nh, init_seed, train_seed)?;
                let rec = SweepRecord::from_run(&point, nh, m, r, train_seed, &run);
                records.push(rec);
                if rec.converged {
                    found = Some(m);
                    break;
                }
            }
            per_repeat.push(found);
        }
        let hits: Vec<f64> = per_repeat.iter().flatten().map(|&m| m as f64).collect();
        let summary = MinimalSamples {
            n_qubits: n,
            h_over_j: h,
            n_hidden: nh,
            mean: (!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64),
            flagged: hits.len() < per_repeat.len(),
            per_repeat,
        };
        Ok((records, summary, (format!("pool-m/{n}/{h}"), pool_seed)))
    })?;
    let mut out = SampleSweep {
        records: Vec::new(),
        minimal: Vec::new(),
        pool_seeds: Vec::new(),
    };
    for (records, summary, pool_seed) in per_point {
        out.records.extend(records);
        out.minimal.push(summary);
        out.pool_seeds.push(pool_seed);
    }
    Ok(out)
}
