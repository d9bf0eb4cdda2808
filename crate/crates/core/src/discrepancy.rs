//! RBF kernels and the biased (V-statistic) squared MMD.

use crate::error::{DadaError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthMode {
    Fixed,
    /// Median heuristic on the pooled pair of batches, recomputed per call.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    /// `sigma^2` used in `Fixed` mode.
    pub bandwidth: f64,
    pub mode: BandwidthMode,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            bandwidth: 1.0,
            mode: BandwidthMode::Median,
        }
    }
}

impl KernelConfig {
    pub fn fixed(sigma2: f64) -> Result<Self> {
        check_bandwidth(sigma2)?;
        Ok(Self {
            bandwidth: sigma2,
            mode: BandwidthMode::Fixed,
        })
    }

    /// The `sigma^2` this config uses for the pair `(x, y)`.
    pub fn resolve(&self, x: &Tensor, y: &Tensor) -> Result<f64> {
        match self.mode {
            BandwidthMode::Fixed => {
                check_bandwidth(self.bandwidth)?;
                Ok(self.bandwidth)
            }
            BandwidthMode::Median => pooled_median_bandwidth(x, y),
        }
    }
}

fn check_bandwidth(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(DadaError::contract(format!("kernel bandwidth must be positive, got {sigma2}")))
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Half the median squared distance over distinct pairs of rows; 1.0 when
/// that median is zero. With an even number of pairs the two middle values
/// are averaged.
pub fn median_bandwidth(points: &Tensor) -> Result<f64> {
    let n = points.rows();
    if n < 2 {
        return Err(DadaError::contract(format!(
            "median bandwidth needs at least 2 points, got {n}"
        )));
    }
    let mut d2 = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d2.push(squared_distance(points.row(i), points.row(j)));
        }
    }
    d2.sort_unstable_by(f64::total_cmp);
    let k = d2.len();
    let median = if k % 2 == 1 {
        d2[k / 2]
    } else {
        0.5 * (d2[k / 2 - 1] + d2[k / 2])
    };
    if median > 0.0 {
        Ok(median / 2.0)
    } else {
        Ok(1.0)
    }
}

pub fn pooled_median_bandwidth(x: &Tensor, y: &Tensor) -> Result<f64> {
    if x.cols() != y.cols() {
        return Err(DadaError::Dimension {
            op: "median_bandwidth",
            left: x.shape(),
            right: y.shape(),
        });
    }
    let mut data = Vec::with_capacity(x.len() + y.len());
    data.extend_from_slice(x.data());
    data.extend_from_slice(y.data());
    median_bandwidth(&Tensor::new(x.rows() + y.rows(), x.cols(), data)?)
}

/// `K[i, j] = exp(-|x_i - y_j|^2 / (2 sigma^2))`, differentiable in both
/// inputs. Squared distances are expanded as `|x|^2 + |y|^2 - 2 x.y`.
pub fn rbf_gram(tape: &mut Tape, x: Var, y: Var, sigma2: f64) -> Result<Var> {
    check_bandwidth(sigma2)?;
    let (xs, ys) = (tape.value(x).shape(), tape.value(y).shape());
    if xs.1 != ys.1 {
        return Err(DadaError::Dimension {
            op: "rbf_gram",
            left: xs,
            right: ys,
        });
    }
    let (n, m, d) = (xs.0, ys.0, xs.1);
    let ones_d = tape.constant(Tensor::ones(d, 1));
    let ones_row_m = tape.constant(Tensor::ones(1, m));
    let ones_col_n = tape.constant(Tensor::ones(n, 1));

    let x2 = tape.square(x)?;
    let x_norms = tape.matmul(x2, ones_d)?; // n x 1
    let x_term = tape.matmul(x_norms, ones_row_m)?; // n x m

    let y2 = tape.square(y)?;
    let y_norms = tape.matmul(y2, ones_d)?; // m x 1
    let y_norms_t = tape.transpose(y_norms)?; // 1 x m
    let y_term = tape.matmul(ones_col_n, y_norms_t)?; // n x m

    let yt = tape.transpose(y)?;
    let cross = tape.matmul(x, yt)?;
    let cross2 = tape.scale(cross, -2.0)?;

    let partial = tape.add(x_term, y_term)?;
    let dist = tape.add(partial, cross2)?;
    // Cancellation can leave tiny negative distances; clip them at zero.
    let dist = tape.relu(dist)?;
    let scaled = tape.scale(dist, -1.0 / (2.0 * sigma2))?;
    tape.exp(scaled)
}

/// `mean(K_xx) + mean(K_yy) - 2 mean(K_xy)` at a given bandwidth.
pub fn mmd2_with_bandwidth(tape: &mut Tape, x: Var, y: Var, sigma2: f64) -> Result<Var> {
    let (xs, ys) = (tape.value(x).shape(), tape.value(y).shape());
    if xs.0 == 0 || ys.0 == 0 {
        return Err(DadaError::contract("mmd2 needs non-empty samples"));
    }
    let kxx = rbf_gram(tape, x, x, sigma2)?;
    let kyy = rbf_gram(tape, y, y, sigma2)?;
    let kxy = rbf_gram(tape, x, y, sigma2)?;
    let mxx = tape.mean(kxx)?;
    let myy = tape.mean(kyy)?;
    let mxy = tape.mean(kxy)?;
    let cross = tape.scale(mxy, -2.0)?;
    let within = tape.add(mxx, myy)?;
    tape.add(within, cross)
}

/// Squared MMD with the bandwidth chosen by `cfg`. The bandwidth is a
/// constant of the graph: no gradient flows through the median.
pub fn mmd2(tape: &mut Tape, x: Var, y: Var, cfg: &KernelConfig) -> Result<Var> {
    let (xv, yv) = (tape.value(x), tape.value(y));
    if xv.rows() == 0 || yv.rows() == 0 {
        return Err(DadaError::contract("mmd2 needs non-empty samples"));
    }
    let sigma2 = cfg.resolve(xv, yv)?;
    mmd2_with_bandwidth(tape, x, y, sigma2)
}

/// Plain-value squared MMD.
pub fn mmd2_value(x: &Tensor, y: &Tensor, cfg: &KernelConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let yv = tape.constant(y.clone());
    let out = mmd2(&mut tape, xv, yv, cfg)?;
    Ok(tape.value(out).item())
}
