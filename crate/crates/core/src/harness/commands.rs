//! The subcommands behind the CLI. Each writes its outputs into one
//! directory and finishes with `manifest.txt`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::config::RunConfig;
use super::fit::{linear_fit, weight_spectrum};
use super::manifest::{sha256_file, RunManifest};
use super::sweep::{sweep_hidden_units, sweep_sample_complexity};
use super::{derive_seed, ratio_key};
use crate::dataset::{dataset_statistics, sample_measurements_with, MeasurementDataset, SamplingOptions};
use crate::error::{Error, Result};
use crate::estimator::{evaluate_criterion, train_until_converged, RoeRecord};
use crate::math::fmt_f64;
use crate::pruner::{prune_loop, PruneContext, PruneReport};
use crate::rbm::{FreezeMask, RbmParams, TrainConfig};
use crate::symmetry::symmetry_report;
use crate::tfim::{solve_ground_state, GroundState, TfimSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenData,
    Train,
    Estimate,
    SweepNh,
    SweepM,
    Prune,
    Spectrum,
    Symmetry,
    Fit,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::GenData,
        Command::Train,
        Command::Estimate,
        Command::SweepNh,
        Command::SweepM,
        Command::Prune,
        Command::Spectrum,
        Command::Symmetry,
        Command::Fit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::Estimate => "estimate",
            Command::SweepNh => "sweep-nh",
            Command::SweepM => "sweep-m",
            Command::Prune => "prune",
            Command::Spectrum => "spectrum",
            Command::Symmetry => "symmetry",
            Command::Fit => "fit",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Output files, manifest last.
    pub files: Vec<PathBuf>,
    /// False when a training or sweep budget ran out before the criterion held.
    pub criterion_met: bool,
    pub manifest: RunManifest,
}

struct Output {
    dir: PathBuf,
    files: Vec<String>,
    seeds: Vec<(String, u64)>,
    criterion_met: bool,
}

impl Output {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn seed(&mut self, label: &str, seed: u64) -> u64 {
        self.seeds.push((label.to_string(), seed));
        seed
    }
}

fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Run `command` with `cfg`, writing every output under `out_dir`.
pub fn run_command(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let started_unix = now_unix();
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
        seeds: vec![("master".into(), cfg.seed)],
        criterion_met: true,
    };
    match command {
        Command::GenData => gen_data(cfg, &mut out)?,
        Command::Train => train(cfg, &mut out)?,
        Command::Estimate => estimate(cfg, &mut out)?,
        Command::SweepNh => sweep_nh(cfg, &mut out)?,
        Command::SweepM => sweep_m(cfg, &mut out)?,
        Command::Prune => prune(cfg, &mut out)?,
        Command::Spectrum => spectrum(cfg, &mut out)?,
        Command::Symmetry => symmetry(cfg, &mut out)?,
        Command::Fit => fit(cfg, &mut out)?,
    }
    let digests = out
        .files
        .iter()
        .map(|f| Ok((f.clone(), sha256_file(&out_dir.join(f))?)))
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix,
        finished_unix: now_unix(),
        seeds: out.seeds,
        digests,
        config: cfg.clone(),
    };
    std::fs::write(out_dir.join("manifest.txt"), manifest.to_text())?;
    let mut files: Vec<PathBuf> = out.files.iter().map(|f| out_dir.join(f)).collect();
    files.push(out_dir.join("manifest.txt"));
    Ok(RunOutcome {
        files,
        criterion_met: out.criterion_met,
        manifest,
    })
}

struct Problem {
    spec: TfimSpec,
    ground: GroundState,
}

impl Problem {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let spec = TfimSpec::new(cfg.n_qubits, cfg.sweep.coupling, cfg.field())?;
        let ground = solve_ground_state(&spec)?;
        Ok(Self { spec, ground })
    }

    fn key(&self, cfg: &RunConfig) -> [u64; 2] {
        [cfg.n_qubits as u64, ratio_key(cfg.h_over_j)]
    }

    /// The configured dataset file, or the pool a sweep would draw for this point.
    fn dataset(&self, cfg: &RunConfig, out: &mut Output) -> Result<MeasurementDataset> {
        let ds = match &cfg.dataset {
            Some(path) => MeasurementDataset::read_from(BufReader::new(File::open(path)?))?,
            None => {
                let seed = out.seed("pool", derive_seed(cfg.seed, "pool", &self.key(cfg)));
                let opts = SamplingOptions {
                    symmetry_break: cfg.sweep.symmetry_break,
                };
                sample_measurements_with(&self.ground, cfg.sweep.pool_size, seed, opts)?
            }
        };
        if ds.n_qubits() != cfg.n_qubits {
            return Err(Error::Dimension(format!(
                "dataset has {} qubits, config says {}",
                ds.n_qubits(),
                cfg.n_qubits
            )));
        }
        Ok(ds)
    }
}

fn load_model(cfg: &RunConfig) -> Result<(RbmParams, Option<FreezeMask>)> {
    let path = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::Invalid("this command needs `model`".into()))?;
    RbmParams::read_checkpoint(BufReader::new(File::open(path)?))
}

fn gen_data(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let p = Problem::new(cfg)?;
    let ds = p.dataset(cfg, out)?;
    out.write_with("dataset.txt", |w| ds.write_to(w))?;
    out.write(
        "energies.csv",
        &format!(
            "N,J,h,energy\n{},{},{},{}\n",
            p.spec.n_qubits,
            fmt_f64(p.spec.coupling),
            fmt_f64(p.spec.field),
            fmt_f64(p.ground.energy)
        ),
    )?;
    let stats = dataset_statistics(&ds)?;
    let mut csv = String::from("kind,index,value\n");
    for (i, o) in stats.occupation.iter().enumerate() {
        csv.push_str(&format!("occupation,{i},{}\n", fmt_f64(*o)));
    }
    csv.push_str(&format!("magnetization,,{}\n", fmt_f64(stats.magnetization)));
    csv.push_str(&format!("magnetization_std,,{}\n", fmt_f64(stats.magnetization_std)));
    out.write("stats.csv", &csv)
}

fn train(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let p = Problem::new(cfg)?;
    let ds = p.dataset(cfg, out)?;
    let [a, b] = p.key(cfg);
    let nh = cfg.n_hidden as u64;
    let init_seed = out.seed("init", derive_seed(cfg.seed, "init", &[a, b, nh, 0]));
    let train_seed = out.seed("train", derive_seed(cfg.seed, "train", &[a, b, nh, 0]));
    let est_seed = out.seed("estimate", derive_seed(train_seed, "estimate", &[]));
    let train_cfg = TrainConfig {
        seed: train_seed,
        ..cfg.sweep.train.clone()
    };
    let est = cfg.sweep.estimator.with_seed(est_seed);
    let run = train_until_converged(
        train_cfg.init_params(cfg.n_qubits, cfg.n_hidden, init_seed),
        &ds,
        &p.spec,
        p.ground.energy,
        &train_cfg,
        &est,
        &cfg.sweep.criterion,
    )?;
    out.write_with("model.txt", |w| run.params.write_checkpoint(w, None))?;
    let mut csv = format!("{}\n", RoeRecord::CSV_HEADER);
    for (epoch, result) in &run.history {
        let rec = RoeRecord {
            n_qubits: cfg.n_qubits,
            h_over_j: cfg.h_over_j,
            n_hidden: cfg.n_hidden,
            m: ds.len(),
            epoch: *epoch,
            result: *result,
            seed: est_seed.wrapping_add(*epoch as u64),
        };
        csv.push_str(&rec.to_csv());
        csv.push('\n');
    }
    out.write("roe.csv", &csv)?;
    out.criterion_met = run.converged();
    Ok(())
}

fn estimate(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let p = Problem::new(cfg)?;
    let (model, _) = load_model(cfg)?;
    let est_seed = out.seed("estimate", derive_seed(cfg.seed, "estimate-model", &[]));
    let est = cfg.sweep.estimator.with_seed(est_seed);
    let result = evaluate_criterion(&model, &p.spec, p.ground.energy, cfg.sweep.criterion.threshold, &est)?;
    let rec = RoeRecord {
        n_qubits: cfg.n_qubits,
        h_over_j: cfg.h_over_j,
        n_hidden: model.n_hidden,
        m: 0,
        epoch: 0,
        result,
        seed: est_seed,
    };
    out.write("roe.csv", &format!("{}\n{}\n", RoeRecord::CSV_HEADER, rec.to_csv()))?;
    out.criterion_met = result.converged;
    Ok(())
}

fn sweep_nh(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let sweep = sweep_hidden_units(&cfg.sweep, cfg.seed, cfg.workers)?;
    out.seeds.extend(sweep.pool_seeds.iter().cloned());
    for r in &sweep.records {
        out.seeds.push((
            format!("train/{}/{}/{}/{}", r.n_qubits, r.h_over_j, r.n_hidden, r.repeat),
            r.seed,
        ));
    }
    out.write("sweep_nh.csv", &sweep.records_csv())?;
    out.write("minimal_nh.csv", &sweep.minimal_csv())?;
    out.criterion_met = sweep.minimal.iter().all(|m| !m.flagged);
    Ok(())
}

fn sweep_m(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let sweep = sweep_sample_complexity(&cfg.sweep, cfg.seed, cfg.workers)?;
    out.seeds.extend(sweep.pool_seeds.iter().cloned());
    for r in &sweep.records {
        out.seeds.push((
            format!("train-m/{}/{}/{}/{}", r.n_qubits, r.h_over_j, r.m, r.repeat),
            r.seed,
        ));
    }
    out.write("sweep_m.csv", &sweep.records_csv())?;
    out.write("minimal_m.csv", &sweep.minimal_csv())?;
    out.criterion_met = sweep.minimal.iter().all(|m| !m.flagged);
    Ok(())
}

fn prune(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let p = Problem::new(cfg)?;
    let (model, _) = load_model(cfg)?;
    let ds = p.dataset(cfg, out)?;
    let train_cfg = TrainConfig {
        seed: out.seed("prune-train", derive_seed(cfg.seed, "prune-train", &[])),
        ..cfg.sweep.train.clone()
    };
    let est = cfg
        .sweep
        .estimator
        .with_seed(out.seed("prune-estimate", derive_seed(cfg.seed, "prune-estimate", &[])));
    let ctx = PruneContext {
        dataset: &ds,
        spec: &p.spec,
        exact_energy: p.ground.energy,
        train: &train_cfg,
        estimator: &est,
    };
    let report: PruneReport = prune_loop(&model, &ctx, &cfg.prune_schedule())?;
    out.write("prune.csv", &report.to_csv())?;
    out.write_with("pruned_model.txt", |w| {
        report.final_model.write_checkpoint(w, Some(&report.final_mask))
    })
}

fn spectrum(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (model, _) = load_model(cfg)?;
    let spec = weight_spectrum(&model);
    let total: f64 = spec.iter().sum();
    let mut csv = String::from("rank,magnitude,cumulative_share\n");
    let mut acc = 0.0;
    for (k, m) in spec.iter().enumerate() {
        acc += m;
        let share = if total > 0.0 { acc / total } else { 0.0 };
        csv.push_str(&format!("{},{},{}\n", k + 1, fmt_f64(*m), fmt_f64(share)));
    }
    out.write("spectrum.csv", &csv)
}

fn symmetry(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let (model, _) = load_model(cfg)?;
    out.write("symmetry.csv", &symmetry_report(&model).to_csv())
}

/// Rows of a minimal-`N_h` table as `(N, h/J, N_h)`, skipping flagged points.
pub fn read_minimal_table(text: &str) -> Result<Vec<(usize, f64, usize)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == super::sweep::HiddenSweep::MINIMAL_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "expected a minimal_nh.csv header".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (k, line) in lines {
        let bad = |msg: &str| Error::Parse {
            line: k + 1,
            msg: msg.to_string(),
        };
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad("expected 4 columns"));
        }
        if cols[3].trim() == "true" || cols[2].trim().is_empty() {
            continue;
        }
        let n = cols[0].trim().parse().map_err(|_| bad("bad N"))?;
        let h = cols[1].trim().parse().map_err(|_| bad("bad h_over_J"))?;
        let nh = cols[2].trim().parse().map_err(|_| bad("bad minimal_N_hidden"))?;
        rows.push((n, h, nh));
    }
    Ok(rows)
}

fn fit(cfg: &RunConfig, out: &mut Output) -> Result<()> {
    let path = cfg
        .fit_input
        .as_ref()
        .ok_or_else(|| Error::Invalid("fit needs `fit_input`".into()))?;
    let rows = read_minimal_table(&std::fs::read_to_string(path)?)?;
    let mut fields: Vec<f64> = Vec::new();
    for &(_, h, _) in &rows {
        if !fields.contains(&h) {
            fields.push(h);
        }
    }
    let mut csv = String::from("h_over_J,points,slope,intercept,residual_norm\n");
    for h in fields {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.1 == h)
            .map(|&(n, _, nh)| (n as f64, nh as f64))
            .collect();
        let f = linear_fit(&pts)?;
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(h),
            pts.len(),
            fmt_f64(f.slope),
            fmt_f64(f.intercept),
            fmt_f64(f.residual_norm)
        ));
    }
    out.write("fit.csv", &csv)
}
