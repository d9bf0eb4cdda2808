//! Flat `key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Every key has a
//! default, unknown keys are rejected, and command-line overrides are
//! applied after the file.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::discrepancy::BandwidthMode;
use crate::error::{DadaError, Result};
use crate::losses::{SimilarityMode, WeightSign};
use crate::networks::ModelConfig;
use crate::synth::{ShiftFamily, ShiftSpec};
use crate::trainer::TrainConfig;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "DADA_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFamily {
    Gaussian,
    Moons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Dada,
    /// Supervised source training only.
    SourceOnly,
    /// Direct source/target MMD alignment with plain pseudo labels.
    MmdDirect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub latent_dim: usize,
    pub extractor_hidden: Vec<usize>,
    pub generator_hidden: Vec<usize>,
    pub estimator_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    pub dataset: DatasetFamily,
    pub shift: ShiftSpec,
    /// Points per domain for the two-moons family.
    pub moons_n: usize,
    pub data_seed: u64,
    pub out_dir: PathBuf,
    pub label: String,
    pub baseline: Baseline,
    pub repeat: usize,
    /// Upper bound on concurrently running repeats.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let arch = ModelConfig::new(2, 16, 3);
        Self {
            train: TrainConfig::default(),
            latent_dim: arch.latent_dim,
            extractor_hidden: arch.extractor_hidden,
            generator_hidden: arch.generator_hidden,
            estimator_hidden: arch.estimator_hidden,
            classifier_hidden: arch.classifier_hidden,
            dataset: DatasetFamily::Gaussian,
            shift: ShiftSpec::default(),
            moons_n: 400,
            data_seed: 0,
            out_dir: PathBuf::from("runs"),
            label: "dada".into(),
            baseline: Baseline::Dada,
            repeat: 1,
            threads: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| DadaError::Config {
        key: key.into(),
        message: format!("cannot parse `{value}`"),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(DadaError::Config {
            key: key.into(),
            message: format!("expected a boolean, got `{value}`"),
        }),
    }
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|w| {
            let w: usize = parse_value(key, w.trim())?;
            if w == 0 {
                return Err(DadaError::Config {
                    key: key.into(),
                    message: "widths must be positive".into(),
                });
            }
            Ok(w)
        })
        .collect()
}

fn join_widths(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> Result<T> {
    options
        .iter()
        .find(|(name, _)| *name == value)
        .map(|&(_, v)| v)
        .ok_or_else(|| DadaError::Config {
            key: key.into(),
            message: format!(
                "expected one of {}, got `{value}`",
                options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join("|")
            ),
        })
}

const WEIGHT_SIGNS: &[(&str, WeightSign)] = &[("negated", WeightSign::Negated), ("printed", WeightSign::AsPrinted)];
const SIMILARITY_MODES: &[(&str, SimilarityMode)] =
    &[("exp", SimilarityMode::Exp), ("raw_clamped", SimilarityMode::RawClamped)];
const BANDWIDTH_MODES: &[(&str, BandwidthMode)] = &[("median", BandwidthMode::Median), ("fixed", BandwidthMode::Fixed)];
const DATASETS: &[(&str, DatasetFamily)] = &[("gaussian", DatasetFamily::Gaussian), ("moons", DatasetFamily::Moons)];
const BASELINES: &[(&str, Baseline)] = &[
    ("dada", Baseline::Dada),
    ("source_only", Baseline::SourceOnly),
    ("mmd_direct", Baseline::MmdDirect),
];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, o)| *o == v).map(|(n, _)| *n).expect("listed")
}

impl RunConfig {
    pub fn model_config(&self, input_dim: usize, classes: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            latent_dim: self.latent_dim,
            classes,
            extractor_hidden: self.extractor_hidden.clone(),
            generator_hidden: self.generator_hidden.clone(),
            estimator_hidden: self.estimator_hidden.clone(),
            classifier_hidden: self.classifier_hidden.clone(),
        }
    }

    pub fn classes(&self) -> usize {
        match self.dataset {
            DatasetFamily::Gaussian => self.shift.classes,
            DatasetFamily::Moons => 2,
        }
    }

    /// Sets one key. Keys may use `-` in place of `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let k = key.as_str();
        let value = value.trim();
        let t = &mut self.train;
        match k {
            "weight_target_sup" => t.weights.target_sup = parse_value(k, value)?,
            "weight_consistency" => t.weights.consistency = parse_value(k, value)?,
            "weight_transfer" => t.weights.transfer = parse_value(k, value)?,
            "weight_ddm" => t.weights.ddm = parse_value(k, value)?,
            "weight_dde" => t.weights.dde = parse_value(k, value)?,
            "beta" => t.beta = parse_value(k, value)?,
            "m" => t.m = parse_value(k, value)?,
            "batch_size" => t.batch_size = parse_value(k, value)?,
            "epochs" => t.epochs = parse_value(k, value)?,
            "warmup_epochs" => t.warmup_epochs = parse_value(k, value)?,
            "lr" => t.lr = parse_value(k, value)?,
            "momentum" => t.momentum = parse_value(k, value)?,
            "weight_decay" => t.weight_decay = parse_value(k, value)?,
            "prior_low" => t.grid.low = parse_value(k, value)?,
            "prior_high" => t.grid.high = parse_value(k, value)?,
            "prior_step" => t.grid.step = parse_value(k, value)?,
            "margin" => t.margin = parse_value(k, value)?,
            "seed" => t.seed = parse_value(k, value)?,
            "disable_pseudo_domains" => t.ablation.disable_pseudo_domains = parse_bool(k, value)?,
            "disable_ddm" => t.ablation.disable_ddm = parse_bool(k, value)?,
            "disable_mapping" => t.ablation.disable_mapping = parse_bool(k, value)?,
            "disable_pseudo_labels" => t.ablation.disable_pseudo_labels = parse_bool(k, value)?,
            "weights_sign" => t.weight_sign = choice(k, value, WEIGHT_SIGNS)?,
            "similarity_mode" => t.similarity_mode = choice(k, value, SIMILARITY_MODES)?,
            "bandwidth_mode" => t.kernel.mode = choice(k, value, BANDWIDTH_MODES)?,
            "bandwidth" => t.kernel.bandwidth = parse_value(k, value)?,
            "pseudo_label_threshold" => t.pseudo_label_threshold = parse_value(k, value)?,
            "record_timing" => t.record_timing = parse_bool(k, value)?,
            "latent_dim" => self.latent_dim = parse_value(k, value)?,
            "extractor_hidden" => self.extractor_hidden = parse_widths(k, value)?,
            "generator_hidden" => self.generator_hidden = parse_widths(k, value)?,
            "estimator_hidden" => self.estimator_hidden = parse_widths(k, value)?,
            "classifier_hidden" => self.classifier_hidden = parse_widths(k, value)?,
            "dataset" => self.dataset = choice(k, value, DATASETS)?,
            "shift" => {
                self.shift.family = ShiftFamily::from_str(value).map_err(|message| DadaError::Config {
                    key: k.into(),
                    message,
                })?
            }
            "magnitude" => self.shift.magnitude = parse_value(k, value)?,
            "classes" => self.shift.classes = parse_value(k, value)?,
            "samples_per_class" => self.shift.samples_per_class = parse_value(k, value)?,
            "radius" => self.shift.radius = parse_value(k, value)?,
            "noise" => self.shift.noise = parse_value(k, value)?,
            "moons_n" => self.moons_n = parse_value(k, value)?,
            "data_seed" => self.data_seed = parse_value(k, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "label" => {
                if value.is_empty() || value.contains(['/', '\\']) {
                    return Err(DadaError::Config {
                        key: k.into(),
                        message: "label must be a non-empty plain name".into(),
                    });
                }
                self.label = value.into()
            }
            "baseline" => self.baseline = choice(k, value, BASELINES)?,
            "repeat" => self.repeat = parse_value(k, value)?,
            "threads" => self.threads = parse_value(k, value)?,
            _ => {
                return Err(DadaError::Config {
                    key: k.into(),
                    message: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    /// Applies `key = value` lines.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| DadaError::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Applies `--key value` pairs.
    pub fn apply_flags<S: AsRef<str>>(&mut self, flags: &[S]) -> Result<()> {
        let mut it = flags.iter().map(AsRef::as_ref);
        while let Some(flag) = it.next() {
            let key = flag.strip_prefix("--").ok_or_else(|| DadaError::Config {
                key: flag.into(),
                message: "overrides must look like `--key value`".into(),
            })?;
            if let Some((k, v)) = key.split_once('=') {
                self.set(k, v)?;
                continue;
            }
            let value = it.next().ok_or_else(|| DadaError::Config {
                key: key.into(),
                message: "missing value".into(),
            })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: &str| {
            Err(DadaError::Config {
                key: key.into(),
                message: message.into(),
            })
        };
        if self.repeat == 0 {
            return bad("repeat", "must be at least 1");
        }
        if self.threads == 0 {
            return bad("threads", "must be at least 1");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim", "must be positive");
        }
        if self.train.kernel.mode == BandwidthMode::Fixed && !(self.train.kernel.bandwidth > 0.0) {
            return bad("bandwidth", "must be positive");
        }
        self.train.validate()
    }

    /// Canonical `key = value` rendering; parsing it reproduces `self`.
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("weight_target_sup", t.weights.target_sup.to_string());
        kv("weight_consistency", t.weights.consistency.to_string());
        kv("weight_transfer", t.weights.transfer.to_string());
        kv("weight_ddm", t.weights.ddm.to_string());
        kv("weight_dde", t.weights.dde.to_string());
        kv("beta", t.beta.to_string());
        kv("m", t.m.to_string());
        kv("batch_size", t.batch_size.to_string());
        kv("epochs", t.epochs.to_string());
        kv("warmup_epochs", t.warmup_epochs.to_string());
        kv("lr", t.lr.to_string());
        kv("momentum", t.momentum.to_string());
        kv("weight_decay", t.weight_decay.to_string());
        kv("prior_low", t.grid.low.to_string());
        kv("prior_high", t.grid.high.to_string());
        kv("prior_step", t.grid.step.to_string());
        kv("margin", t.margin.to_string());
        kv("seed", t.seed.to_string());
        kv("disable_pseudo_domains", t.ablation.disable_pseudo_domains.to_string());
        kv("disable_ddm", t.ablation.disable_ddm.to_string());
        kv("disable_mapping", t.ablation.disable_mapping.to_string());
        kv("disable_pseudo_labels", t.ablation.disable_pseudo_labels.to_string());
        kv("weights_sign", name_of(WEIGHT_SIGNS, t.weight_sign).into());
        kv("similarity_mode", name_of(SIMILARITY_MODES, t.similarity_mode).into());
        kv("bandwidth_mode", name_of(BANDWIDTH_MODES, t.kernel.mode).into());
        kv("bandwidth", t.kernel.bandwidth.to_string());
        kv("pseudo_label_threshold", t.pseudo_label_threshold.to_string());
        kv("record_timing", t.record_timing.to_string());
        kv("latent_dim", self.latent_dim.to_string());
        kv("extractor_hidden", join_widths(&self.extractor_hidden));
        kv("generator_hidden", join_widths(&self.generator_hidden));
        kv("estimator_hidden", join_widths(&self.estimator_hidden));
        kv("classifier_hidden", join_widths(&self.classifier_hidden));
        kv("dataset", name_of(DATASETS, self.dataset).into());
        kv("shift", self.shift.family.to_string());
        kv("magnitude", self.shift.magnitude.to_string());
        kv("classes", self.shift.classes.to_string());
        kv("samples_per_class", self.shift.samples_per_class.to_string());
        kv("radius", self.shift.radius.to_string());
        kv("noise", self.shift.noise.to_string());
        kv("moons_n", self.moons_n.to_string());
        kv("data_seed", self.data_seed.to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("label", self.label.clone());
        kv("baseline", name_of(BASELINES, self.baseline).into());
        kv("repeat", self.repeat.to_string());
        kv("threads", self.threads.to_string());
        s
    }
}

/// Defaults, then `text`, then `flags`.
pub fn parse_config<S: AsRef<str>>(text: &str, flags: &[S]) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.apply_text(text)?;
    cfg.apply_flags(flags)?;
    cfg.validate()?;
    Ok(cfg)
}
