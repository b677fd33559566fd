//! Line-oriented `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Lists are comma-separated.
//! Unknown keys are errors. [`RunConfig::to_text`] writes every key, so its
//! output parses back to an identical config.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::{CriterionSchedule, EstimatorConfig};
use crate::pruner::PruneSchedule;
use crate::rbm::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HiddenGrid {
    pub start: usize,
    pub step: usize,
    pub max: usize,
}

impl HiddenGrid {
    pub fn values(&self) -> impl Iterator<Item = usize> {
        (self.start..=self.max).step_by(self.step.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub qubit_sizes: Vec<usize>,
    pub field_ratios: Vec<f64>,
    pub coupling: f64,
    pub hidden_grid: HiddenGrid,
    pub sample_step: usize,
    pub sample_max: usize,
    pub alpha_ratio: f64,
    pub repeats: usize,
    /// Shots in the training pool standing in for unlimited data.
    pub pool_size: usize,
    pub symmetry_break: bool,
    pub criterion: CriterionSchedule,
    pub train: TrainConfig,
    pub estimator: EstimatorConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            qubit_sizes: vec![6, 8, 10],
            field_ratios: vec![1.0],
            coupling: 1.0,
            hidden_grid: HiddenGrid {
                start: 1,
                step: 1,
                max: 20,
            },
            sample_step: 500,
            sample_max: 50_000,
            alpha_ratio: 0.5,
            repeats: 3,
            pool_size: 100_000,
            symmetry_break: false,
            criterion: CriterionSchedule {
                check_every: 25,
                epoch_budget: 500,
                ..CriterionSchedule::default()
            },
            train: TrainConfig {
                learning_rate: 0.05,
                ..TrainConfig::default()
            },
            estimator: EstimatorConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.qubit_sizes.is_empty() || self.field_ratios.is_empty() {
            return Err(Error::Invalid("qubit_sizes and field_ratios must be nonempty".into()));
        }
        if self.hidden_grid.start == 0 || self.hidden_grid.step == 0 || self.hidden_grid.max < self.hidden_grid.start {
            return Err(Error::Invalid(
                "hidden grid needs 1 <= start <= max and step >= 1".into(),
            ));
        }
        if self.sample_step == 0 || self.sample_max < self.sample_step {
            return Err(Error::Invalid(
                "sample grid needs 1 <= sample_step <= sample_max".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(Error::Invalid("repeats must be at least 1".into()));
        }
        if self.pool_size == 0 {
            return Err(Error::Invalid("pool_size must be at least 1".into()));
        }
        if !(self.alpha_ratio.is_finite() && self.alpha_ratio > 0.0) {
            return Err(Error::Invalid("alpha_ratio must be positive".into()));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::Invalid("coupling must be non-negative".into()));
        }
        if self.field_ratios.iter().any(|h| !(h.is_finite() && *h >= 0.0)) {
            return Err(Error::Invalid("field ratios must be non-negative".into()));
        }
        if self.criterion.check_every == 0 {
            return Err(Error::Invalid("check_every must be at least 1".into()));
        }
        if !(self.criterion.threshold > 0.0) {
            return Err(Error::Invalid("threshold must be positive".into()));
        }
        self.train.validate()?;
        self.estimator.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub n_qubits: usize,
    pub h_over_j: f64,
    pub n_hidden: usize,
    /// Worker threads for independent jobs; 0 uses every core.
    pub workers: usize,
    pub dataset: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub fit_input: Option<PathBuf>,
    pub sweep: SweepConfig,
    pub prune: PruneSchedule,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_qubits: 10,
            h_over_j: 1.0,
            n_hidden: 5,
            workers: 1,
            dataset: None,
            model: None,
            fit_input: None,
            sweep: SweepConfig::default(),
            prune: PruneSchedule::default(),
        }
    }
}

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Invalid(format!("cannot parse {key} = {raw:?}")))
}

fn list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(key, s))
        .collect()
}

fn path(raw: &str) -> Option<PathBuf> {
    (!raw.is_empty()).then(|| PathBuf::from(raw))
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply `key = value` lines on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: k + 1,
                msg: format!("expected `key = value`, got {line:?}"),
            })?;
            self.set(key.trim(), raw.trim()).map_err(|e| Error::Parse {
                line: k + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Invalid(format!("expected key=value, got {assignment:?}")))?;
        self.set(key.trim(), raw.trim())
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let s = &mut self.sweep;
        match key {
            "seed" => self.seed = value(key, raw)?,
            "n_qubits" => self.n_qubits = value(key, raw)?,
            "h_over_j" => self.h_over_j = value(key, raw)?,
            "n_hidden" => self.n_hidden = value(key, raw)?,
            "workers" => self.workers = value(key, raw)?,
            "dataset" => self.dataset = path(raw),
            "model" => self.model = path(raw),
            "fit_input" => self.fit_input = path(raw),
            "qubit_sizes" => s.qubit_sizes = list(key, raw)?,
            "field_ratios" => s.field_ratios = list(key, raw)?,
            "coupling" => s.coupling = value(key, raw)?,
            "hidden_start" => s.hidden_grid.start = value(key, raw)?,
            "hidden_step" => s.hidden_grid.step = value(key, raw)?,
            "hidden_max" => s.hidden_grid.max = value(key, raw)?,
            "sample_step" => s.sample_step = value(key, raw)?,
            "sample_max" => s.sample_max = value(key, raw)?,
            "alpha_ratio" => s.alpha_ratio = value(key, raw)?,
            "repeats" => s.repeats = value(key, raw)?,
            "pool_size" => s.pool_size = value(key, raw)?,
            "symmetry_break" => s.symmetry_break = value(key, raw)?,
            "threshold" => s.criterion.threshold = value(key, raw)?,
            "check_every" => s.criterion.check_every = value(key, raw)?,
            "epoch_budget" => s.criterion.epoch_budget = value(key, raw)?,
            "learning_rate" => s.train.learning_rate = value(key, raw)?,
            "batch_size" => s.train.batch_size = value(key, raw)?,
            "cd_steps" => s.train.cd_steps = value(key, raw)?,
            "init_scale" => s.train.init_scale = value(key, raw)?,
            "momentum" => s.train.momentum = value(key, raw)?,
            "n_samples" => s.estimator.n_samples = value(key, raw)?,
            "n_chains" => s.estimator.n_chains = value(key, raw)?,
            "burn_in" => s.estimator.burn_in = value(key, raw)?,
            "keep_every" => s.estimator.keep_every = value(key, raw)?,
            "confidence_c" => s.estimator.confidence_c = value(key, raw)?,
            "first_fraction" => self.prune.first_fraction = value(key, raw)?,
            "later_fraction" => self.prune.later_fraction = value(key, raw)?,
            "finetune_epoch_budget" => self.prune.finetune_epoch_budget = value(key, raw)?,
            "prune_check_every" => self.prune.check_every = value(key, raw)?,
            "retry_failed" => self.prune.retry_failed = value(key, raw)?,
            _ => return Err(Error::Invalid(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_hidden == 0 {
            return Err(Error::Invalid("n_qubits and n_hidden must be at least 1".into()));
        }
        if !(self.h_over_j.is_finite() && self.h_over_j >= 0.0) {
            return Err(Error::Invalid("h_over_j must be non-negative".into()));
        }
        self.sweep.validate()?;
        self.prune.validate()
    }

    /// Every key with its current value, one per line.
    pub fn to_text(&self) -> String {
        let s = &self.sweep;
        let p = |x: &Option<PathBuf>| x.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let f = |x: f64| x.to_string();
        let rows: Vec<(&str, String)> = vec![
            ("seed", self.seed.to_string()),
            ("n_qubits", self.n_qubits.to_string()),
            ("h_over_j", f(self.h_over_j)),
            ("n_hidden", self.n_hidden.to_string()),
            ("workers", self.workers.to_string()),
            ("dataset", p(&self.dataset)),
            ("model", p(&self.model)),
            ("fit_input", p(&self.fit_input)),
            ("qubit_sizes", join(&s.qubit_sizes)),
            ("field_ratios", join(&s.field_ratios)),
            ("coupling", f(s.coupling)),
            ("hidden_start", s.hidden_grid.start.to_string()),
            ("hidden_step", s.hidden_grid.step.to_string()),
            ("hidden_max", s.hidden_grid.max.to_string()),
            ("sample_step", s.sample_step.to_string()),
            ("sample_max", s.sample_max.to_string()),
            ("alpha_ratio", f(s.alpha_ratio)),
            ("repeats", s.repeats.to_string()),
            ("pool_size", s.pool_size.to_string()),
            ("symmetry_break", s.symmetry_break.to_string()),
            ("threshold", f(s.criterion.threshold)),
            ("check_every", s.criterion.check_every.to_string()),
            ("epoch_budget", s.criterion.epoch_budget.to_string()),
            ("learning_rate", f(s.train.learning_rate)),
            ("batch_size", s.train.batch_size.to_string()),
            ("cd_steps", s.train.cd_steps.to_string()),
            ("init_scale", f(s.train.init_scale)),
            ("momentum", f(s.train.momentum)),
            ("n_samples", s.estimator.n_samples.to_string()),
            ("n_chains", s.estimator.n_chains.to_string()),
            ("burn_in", s.estimator.burn_in.to_string()),
            ("keep_every", s.estimator.keep_every.to_string()),
            ("confidence_c", f(s.estimator.confidence_c)),
            ("first_fraction", f(self.prune.first_fraction)),
            ("later_fraction", f(self.prune.later_fraction)),
            ("finetune_epoch_budget", self.prune.finetune_epoch_budget.to_string()),
            ("prune_check_every", self.prune.check_every.to_string()),
            ("retry_failed", self.prune.retry_failed.to_string()),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Prune schedule with the sweep's criterion threshold.
    pub fn prune_schedule(&self) -> PruneSchedule {
        PruneSchedule {
            criterion_threshold: self.sweep.criterion.threshold,
            ..self.prune
        }
    }

    pub fn field(&self) -> f64 {
        self.h_over_j * self.sweep.coupling
    }
}
