//! Synthetic source/target pairs with a controlled covariate shift, and
//! their CSV encoding.
//!
//! CSV layout: header `domain,label,f0,f1,...`, one row per sample, label
//! `-1` for unlabeled rows, reals written with 17 significant digits in
//! scientific notation, LF line endings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{DadaError, Result};
use crate::rng::SplitMix64;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Tensor,
    /// `None` for unlabeled target splits.
    pub labels: Option<Vec<usize>>,
    pub domain_tag: String,
    pub seed: u64,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }
}

/// Ground-truth target labels, kept apart from the training data and only
/// handed to evaluation code.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalLabels {
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftFamily {
    /// Rotation by `magnitude` degrees about the origin.
    Rotation,
    /// Translation by `(magnitude, 0)`.
    Translation,
    /// Isotropic scaling by `1 + magnitude`.
    Scale,
    /// Rotation by `magnitude` degrees followed by scaling by `1 + magnitude / 100`.
    Mixed,
}

impl std::str::FromStr for ShiftFamily {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "rotation" => Ok(Self::Rotation),
            "translation" => Ok(Self::Translation),
            "scale" => Ok(Self::Scale),
            "mixed" => Ok(Self::Mixed),
            other => Err(format!("unknown shift family `{other}`")),
        }
    }
}

impl std::fmt::Display for ShiftFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Rotation => "rotation",
            Self::Translation => "translation",
            Self::Scale => "scale",
            Self::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    pub family: ShiftFamily,
    pub magnitude: f64,
    pub classes: usize,
    pub samples_per_class: usize,
    pub radius: f64,
    pub noise: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self {
            family: ShiftFamily::Rotation,
            magnitude: 50.0,
            classes: 3,
            samples_per_class: 200,
            radius: 4.0,
            noise: 0.6,
        }
    }
}

impl ShiftSpec {
    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(DadaError::contract(format!("need at least 2 classes, got {}", self.classes)));
        }
        if !self.magnitude.is_finite() {
            return Err(DadaError::contract("shift magnitude must be finite"));
        }
        if self.samples_per_class == 0 {
            return Err(DadaError::contract("samples_per_class must be positive"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite() && self.radius.is_finite()) {
            return Err(DadaError::contract("noise and radius must be finite, noise non-negative"));
        }
        Ok(())
    }

    /// Applies the target transformation to a 2-D point.
    pub fn transform(&self, p: [f64; 2]) -> [f64; 2] {
        match self.family {
            ShiftFamily::Rotation => rotate(p, self.magnitude),
            ShiftFamily::Translation => [p[0] + self.magnitude, p[1]],
            ShiftFamily::Scale => {
                let s = 1.0 + self.magnitude;
                [p[0] * s, p[1] * s]
            }
            ShiftFamily::Mixed => {
                let r = rotate(p, self.magnitude);
                let s = 1.0 + self.magnitude / 100.0;
                [r[0] * s, r[1] * s]
            }
        }
    }
}

fn rotate(p: [f64; 2], degrees: f64) -> [f64; 2] {
    let (s, c) = degrees.to_radians().sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

const SOURCE_STREAM: u64 = 0;
const TARGET_STREAM: u64 = 1;

fn gaussian_blobs(spec: &ShiftSpec, rng: &mut SplitMix64, shifted: bool) -> (Tensor, Vec<usize>) {
    let n = spec.classes * spec.samples_per_class;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.classes {
        let angle = 2.0 * std::f64::consts::PI * c as f64 / spec.classes as f64;
        let mean = [spec.radius * angle.cos(), spec.radius * angle.sin()];
        for _ in 0..spec.samples_per_class {
            let p = [
                mean[0] + spec.noise * rng.normal(),
                mean[1] + spec.noise * rng.normal(),
            ];
            let p = if shifted { spec.transform(p) } else { p };
            data.extend_from_slice(&p);
            labels.push(c);
        }
    }
    (Tensor::new(n, 2, data).expect("sized"), labels)
}

/// Isotropic Gaussian classes with means equally spaced on a circle; the
/// target draws from the same process through `spec`'s transformation.
/// Source and target use independent sub-streams of `seed`.
pub fn make_gaussian_domains(
    spec: &ShiftSpec,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, EvalLabels)> {
    spec.validate()?;
    let (xs, ys) = gaussian_blobs(spec, &mut SplitMix64::stream(seed, SOURCE_STREAM), false);
    let (xt, yt) = gaussian_blobs(spec, &mut SplitMix64::stream(seed, TARGET_STREAM), true);
    Ok((
        LabeledDataset {
            features: xs,
            labels: Some(ys),
            domain_tag: "source".into(),
            seed,
        },
        LabeledDataset {
            features: xt,
            labels: None,
            domain_tag: "target".into(),
            seed,
        },
        EvalLabels { labels: yt },
    ))
}

fn moons(n: usize, noise: f64, rng: &mut SplitMix64, magnitude: Option<f64>) -> (Tensor, Vec<usize>) {
    let upper = n - n / 2;
    let lower = n / 2;
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    let step = |count: usize, i: usize| {
        if count > 1 {
            std::f64::consts::PI * i as f64 / (count - 1) as f64
        } else {
            0.0
        }
    };
    for i in 0..upper {
        let t = step(upper, i);
        data.extend_from_slice(&[t.cos(), t.sin()]);
        labels.push(0);
    }
    for i in 0..lower {
        let t = step(lower, i);
        data.extend_from_slice(&[1.0 - t.cos(), 0.5 - t.sin()]);
        labels.push(1);
    }
    for v in &mut data {
        *v += noise * rng.normal();
    }
    if let Some(m) = magnitude {
        for p in data.chunks_mut(2) {
            let r = rotate([p[0], p[1]], 10.0 * m);
            p[0] = r[0] + m;
            p[1] = r[1] - m / 2.0;
        }
    }
    (Tensor::new(n, 2, data).expect("sized"), labels)
}

/// Two interleaved half circles. The target is rotated about the origin by
/// `10 * magnitude` degrees and then translated by `(magnitude, -magnitude/2)`.
pub fn make_two_moons_shift(
    magnitude: f64,
    n: usize,
    noise: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, EvalLabels)> {
    if n < 2 {
        return Err(DadaError::contract(format!("two moons needs n >= 2, got {n}")));
    }
    let (xs, ys) = moons(n, noise, &mut SplitMix64::stream(seed, SOURCE_STREAM), None);
    let (xt, yt) = moons(n, noise, &mut SplitMix64::stream(seed, TARGET_STREAM), Some(magnitude));
    Ok((
        LabeledDataset {
            features: xs,
            labels: Some(ys),
            domain_tag: "source".into(),
            seed,
        },
        LabeledDataset {
            features: xt,
            labels: None,
            domain_tag: "target".into(),
            seed,
        },
        EvalLabels { labels: yt },
    ))
}

fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_csv(ds: &LabeledDataset) -> String {
    let mut out = String::from("domain,label");
    for c in 0..ds.input_dim() {
        let _ = write!(out, ",f{c}");
    }
    out.push('\n');
    for r in 0..ds.len() {
        let label = ds
            .labels
            .as_ref()
            .map_or_else(|| "-1".to_string(), |l| l[r].to_string());
        let _ = write!(out, "{},{}", ds.domain_tag, label);
        for v in ds.features.row(r) {
            out.push(',');
            out.push_str(&format_real(*v));
        }
        out.push('\n');
    }
    out
}

pub fn save_csv(ds: &LabeledDataset, path: &Path) -> Result<()> {
    fs::write(path, to_csv(ds))?;
    Ok(())
}

/// Parses the CSV layout written by [`to_csv`]. The dataset is labeled iff
/// no row carries label `-1`; mixing both is an error. `seed` is not part
/// of the file and comes back as 0.
pub fn from_csv(text: &str) -> Result<LabeledDataset> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DadaError::Parse {
        line: 1,
        message: "missing header".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "domain" || cols[1] != "label" {
        return Err(DadaError::Parse {
            line: 1,
            message: format!("unexpected header `{header}`"),
        });
    }
    for (i, name) in cols[2..].iter().enumerate() {
        if *name != format!("f{i}") {
            return Err(DadaError::Parse {
                line: 1,
                message: format!("expected column f{i}, found `{name}`"),
            });
        }
    }
    let dim = cols.len() - 2;

    let mut tag: Option<String> = None;
    let mut data = Vec::new();
    let mut labels: Vec<i64> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(DadaError::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", dim + 2, fields.len()),
            });
        }
        match &tag {
            None => tag = Some(fields[0].to_string()),
            Some(t) if t != fields[0] => {
                return Err(DadaError::Parse {
                    line: line_no,
                    message: format!("mixed domains `{t}` and `{}`", fields[0]),
                })
            }
            _ => {}
        }
        let label: i64 = fields[1].parse().map_err(|_| DadaError::Parse {
            line: line_no,
            message: format!("bad label `{}`", fields[1]),
        })?;
        if label < -1 {
            return Err(DadaError::Parse {
                line: line_no,
                message: format!("bad label `{label}`"),
            });
        }
        labels.push(label);
        for f in &fields[2..] {
            let v: f64 = f.parse().map_err(|_| DadaError::Parse {
                line: line_no,
                message: format!("bad real `{f}`"),
            })?;
            if !v.is_finite() {
                return Err(DadaError::Parse {
                    line: line_no,
                    message: format!("non-finite value `{f}`"),
                });
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(DadaError::Parse {
            line: 1,
            message: "dataset has no rows".into(),
        });
    }
    let unlabeled = labels.iter().filter(|&&l| l == -1).count();
    let labels = match unlabeled {
        0 => Some(labels.iter().map(|&l| l as usize).collect()),
        n if n == labels.len() => None,
        _ => {
            return Err(DadaError::Parse {
                line: 1,
                message: "mix of labeled and unlabeled rows".into(),
            })
        }
    };
    let n = data.len() / dim;
    Ok(LabeledDataset {
        features: Tensor::new(n, dim, data)?,
        labels,
        domain_tag: tag.unwrap_or_default(),
        seed: 0,
    })
}

pub fn load_csv(path: &Path) -> Result<LabeledDataset> {
    from_csv(&fs::read_to_string(path)?)
}

/// Evaluation sidecar: header `index,label`.
pub fn eval_labels_to_csv(labels: &EvalLabels) -> String {
    let mut out = String::from("index,label\n");
    for (i, l) in labels.labels.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}
