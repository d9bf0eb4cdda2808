//! Seeded runs, baselines, ablations and m-sweeps, with file output.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use crate::error::{DadaError, Result};
use crate::losses::LossWeights;
use crate::networks::DadaModel;
use crate::synth::{
    eval_labels_to_csv, make_gaussian_domains, make_two_moons_shift, save_csv, EvalLabels,
    LabeledDataset,
};
use crate::trainer::{evaluate, fit_with, init_model, MetricsRecord, TargetEvaluator, TrainConfig};

use super::config::{Baseline, DatasetFamily, RunConfig, OUT_DIR_ENV};

#[derive(Debug, Clone)]
pub struct DomainData {
    pub source: LabeledDataset,
    pub target: LabeledDataset,
    pub truth: EvalLabels,
}

/// Generates the datasets for one repeat.
pub fn prepare_data(cfg: &RunConfig, repeat: usize) -> Result<DomainData> {
    let seed = cfg.data_seed.wrapping_add(repeat as u64);
    let (source, target, truth) = match cfg.dataset {
        DatasetFamily::Gaussian => make_gaussian_domains(&cfg.shift, seed)?,
        DatasetFamily::Moons => make_two_moons_shift(cfg.shift.magnitude, cfg.moons_n, cfg.shift.noise, seed)?,
    };
    Ok(DomainData { source, target, truth })
}

/// The training configuration actually used for `cfg.baseline`.
pub fn effective_train_config(cfg: &RunConfig) -> TrainConfig {
    let mut t = cfg.train.clone();
    match cfg.baseline {
        Baseline::Dada => {}
        Baseline::MmdDirect => t.ablation.disable_pseudo_domains = true,
        Baseline::SourceOnly => {
            t.ablation.disable_pseudo_domains = true;
            t.ablation.disable_pseudo_labels = true;
            t.weights = LossWeights::zero();
        }
    }
    t
}

pub struct SeedRun {
    pub repeat: usize,
    pub model: DadaModel,
    pub metrics: Vec<MetricsRecord>,
    pub data: DomainData,
    pub final_accuracy: f64,
}

fn metrics_path(dir: &Path, repeat: usize) -> PathBuf {
    dir.join(format!("metrics_seed{repeat}.csv"))
}

fn run_seed_inner(cfg: &RunConfig, repeat: usize, csv: Option<&Path>) -> Result<SeedRun> {
    let data = prepare_data(cfg, repeat)?;
    let mut train = effective_train_config(cfg);
    train.seed = train.seed.wrapping_add(repeat as u64);
    let arch = cfg.model_config(data.source.input_dim(), cfg.classes());
    let mut model = init_model(arch, train.seed)?;

    let mut writer = match csv {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{}", MetricsRecord::CSV_HEADER)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let evaluator = TargetEvaluator {
        features: &data.target.features,
        truth: &data.truth,
    };
    let metrics = fit_with(&mut model, &data.source, &data.target, &train, Some(&evaluator), |rec| {
        if let Some(w) = writer.as_mut() {
            writeln!(w, "{}", rec.to_csv_row())?;
            w.flush()?;
        }
        Ok(())
    })?;
    let final_accuracy = match metrics.last() {
        Some(r) => r.target_accuracy,
        None => evaluate(&model, &data.target.features, &data.truth.labels)?,
    };
    Ok(SeedRun {
        repeat,
        model,
        metrics,
        data,
        final_accuracy,
    })
}

/// Trains repeat `repeat` in memory. Repeat `k` uses `seed + k` for the model
/// and optimizer and `data_seed + k` for the datasets.
pub fn run_seed(cfg: &RunConfig, repeat: usize) -> Result<SeedRun> {
    run_seed_inner(cfg, repeat, None)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub mean: f64,
    pub std: f64,
}

impl SummaryRow {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub final_accuracies: Vec<f64>,
    pub rows: Vec<(&'static str, SummaryRow)>,
}

impl Summary {
    fn from_runs(runs: &[SeedRun]) -> Self {
        let last = |f: fn(&MetricsRecord) -> f64| -> Vec<f64> {
            runs.iter()
                .map(|r| r.metrics.last().map_or(f64::NAN, f))
                .collect()
        };
        let acc: Vec<f64> = runs.iter().map(|r| r.final_accuracy).collect();
        let rows = vec![
            ("final_target_accuracy", SummaryRow::of(&acc)),
            ("final_pseudo_label_agreement", SummaryRow::of(&last(|r| r.pseudo_label_agreement))),
            ("final_mean_pseudo_target_mmd", SummaryRow::of(&last(|r| r.mean_pseudo_target_mmd))),
            ("final_total_loss", SummaryRow::of(&last(|r| r.total))),
        ];
        Self {
            final_accuracies: acc,
            rows,
        }
    }

    pub fn accuracy(&self) -> SummaryRow {
        self.rows[0].1
    }

    /// `metric<TAB>mean<TAB>std` lines.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (name, row) in &self.rows {
            let _ = writeln!(s, "{name}\t{:.16e}\t{:.16e}", row.mean, row.std);
        }
        s
    }
}

/// `cfg.out_dir`, unless `DADA_OUT` is set.
pub fn output_root(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => cfg.out_dir.clone(),
    }
}

fn run_all(cfg: &RunConfig, dir: Option<&Path>) -> Result<Vec<SeedRun>> {
    let repeats: Vec<usize> = (0..cfg.repeat).collect();
    let mut runs = Vec::with_capacity(cfg.repeat);
    for chunk in repeats.chunks(cfg.threads) {
        let results: Vec<Result<SeedRun>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|&k| {
                    let path = dir.map(|d| metrics_path(d, k));
                    s.spawn(move || run_seed_inner(cfg, k, path.as_deref()))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(DadaError::contract("training thread panicked"))))
                .collect()
        });
        for r in results {
            runs.push(r?);
        }
    }
    Ok(runs)
}

/// Runs every repeat, writing `metrics_seed{k}.csv` per repeat and
/// `summary.tsv` into `<out>/<label>/`. Per-epoch rows are flushed as they
/// are produced, so an aborted run leaves its partial CSVs behind.
pub fn run_experiment(cfg: &RunConfig) -> Result<(Summary, Vec<SeedRun>)> {
    cfg.validate()?;
    let dir = output_root(cfg).join(&cfg.label);
    fs::create_dir_all(&dir)?;
    let runs = run_all(cfg, Some(&dir))?;
    let summary = Summary::from_runs(&runs);
    fs::write(dir.join("summary.tsv"), summary.to_tsv())?;
    Ok((summary, runs))
}

/// Full method, no mapping, no separation term, and direct MMD alignment.
pub fn ablation_arms(cfg: &RunConfig) -> Vec<(&'static str, RunConfig)> {
    let mut base = cfg.clone();
    base.baseline = Baseline::Dada;
    base.train.ablation = Default::default();
    let mut no_mapping = base.clone();
    no_mapping.train.ablation.disable_mapping = true;
    let mut no_ddm = base.clone();
    no_ddm.train.ablation.disable_ddm = true;
    let mut mmd_only = base.clone();
    mmd_only.train.ablation.disable_pseudo_domains = true;
    let mut arms = vec![
        ("full", base),
        ("no_mapping", no_mapping),
        ("no_ddm", no_ddm),
        ("mmd_only", mmd_only),
    ];
    for (name, arm) in &mut arms {
        arm.label = format!("{}_{name}", cfg.label);
    }
    arms
}

/// Runs the four ablation arms; writes `ablation.tsv` with one
/// `arm<TAB>mean<TAB>std` accuracy row per arm.
pub fn run_ablations(cfg: &RunConfig) -> Result<Vec<(&'static str, Summary)>> {
    let mut out = Vec::new();
    for (name, arm) in ablation_arms(cfg) {
        let (summary, _) = run_experiment(&arm)?;
        out.push((name, summary));
    }
    let mut text = String::new();
    for (name, s) in &out {
        let a = s.accuracy();
        let _ = writeln!(text, "{name}\t{:.16e}\t{:.16e}", a.mean, a.std);
    }
    let root = output_root(cfg);
    fs::create_dir_all(&root)?;
    fs::write(root.join(format!("{}_ablation.tsv", cfg.label)), text)?;
    Ok(out)
}

/// One experiment per `m`; writes `sweep_m.tsv` with `m<TAB>mean<TAB>std`
/// accuracy rows.
pub fn sweep_m(cfg: &RunConfig, ms: &[usize]) -> Result<Vec<(usize, Summary)>> {
    if ms.is_empty() {
        return Err(DadaError::Config {
            key: "m".into(),
            message: "no values given".into(),
        });
    }
    let grid = cfg.train.grid.len();
    for (i, &m) in ms.iter().enumerate() {
        if ms[..i].contains(&m) {
            return Err(DadaError::Config {
                key: "m".into(),
                message: format!("duplicate value {m}"),
            });
        }
        if m == 0 || m > grid {
            return Err(DadaError::Config {
                key: "m".into(),
                message: format!("{m} is outside 1..={grid}"),
            });
        }
    }
    let mut out = Vec::new();
    for &m in ms {
        let mut c = cfg.clone();
        c.train.m = m;
        c.label = format!("{}_m{m}", cfg.label);
        let (summary, _) = run_experiment(&c)?;
        out.push((m, summary));
    }
    let mut text = String::new();
    for (m, s) in &out {
        let a = s.accuracy();
        let _ = writeln!(text, "{m}\t{:.16e}\t{:.16e}", a.mean, a.std);
    }
    let root = output_root(cfg);
    fs::create_dir_all(&root)?;
    fs::write(root.join(format!("{}_sweep_m.tsv", cfg.label)), text)?;
    Ok(out)
}

/// Writes `source.csv`, `target.csv` and `target_eval.csv` for repeat 0
/// into `<out>/<label>/`.
pub fn write_datasets(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = output_root(cfg).join(&cfg.label);
    fs::create_dir_all(&dir)?;
    let data = prepare_data(cfg, 0)?;
    save_csv(&data.source, &dir.join("source.csv"))?;
    save_csv(&data.target, &dir.join("target.csv"))?;
    fs::write(dir.join("target_eval.csv"), eval_labels_to_csv(&data.truth))?;
    Ok(dir)
}
