//! Domain-augmented domain adaptation on a small reverse-mode autodiff core.
//!
//! A labeled source domain is mapped by a shared feature extractor; a
//! generator conditioned on a scalar domain prior produces pseudo domains
//! from the source features; a small estimator learns the pseudo-to-target
//! MMD as a function of the prior; the objective pulls the weighted pseudo
//! domains onto the target while keeping them apart from each other and
//! consistent with the source, and target pseudo labels come from
//! projecting the target batch into each pseudo domain by a mean shift.
//!
//! Module map:
//! - [`tensor`], [`tape`], [`params`]: dense matrices, define-by-run
//!   gradients and momentum SGD.
//! - [`networks`]: MLPs and the model bundle.
//! - [`discrepancy`]: RBF kernels and squared MMD.
//! - [`losses`]: every term of the objective and the pseudo-labeling device.
//! - [`synth`]: synthetic shifted domains and CSV I/O.
//! - [`trainer`]: the training step, epoch loop and evaluation.
//! - [`harness`]: configuration files and experiment orchestration.

pub mod discrepancy;
pub mod error;
pub mod harness;
pub mod losses;
pub mod networks;
pub mod params;
pub mod rng;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod trainer;

pub use error::{DadaError, Result};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
