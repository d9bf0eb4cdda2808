//! The parametric pieces of the model: feature extractor, pseudo-domain
//! generator, discrepancy estimator, classifier and the bilinear similarity.

use crate::error::{DadaError, Result};
use crate::params::{ParamId, ParameterStore};
use crate::rng::SplitMix64;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Identity,
    Softmax,
}

/// Layer widths from input to output, e.g. `[2, 64, 64, 16]` is a
/// two-hidden-layer network mapping 2 inputs to 16 outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub hidden: Activation,
    pub output: OutputActivation,
}

impl MlpSpec {
    pub fn new(
        input: usize,
        hidden_widths: &[usize],
        output: usize,
        hidden: Activation,
        output_activation: OutputActivation,
    ) -> Self {
        let mut widths = Vec::with_capacity(hidden_widths.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden_widths);
        widths.push(output);
        Self {
            widths,
            hidden,
            output: output_activation,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(DadaError::contract("an MLP needs at least one layer"));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(DadaError::contract(format!(
                "MLP widths must be positive, got {:?}",
                self.widths
            )));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated")
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub weight: ParamId,
    pub bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    layers: Vec<Layer>,
}

/// Glorot-uniform weights, zero biases.
fn glorot(rng: &mut SplitMix64, fan_in: usize, fan_out: usize) -> Tensor {
    let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| rng.uniform(-s, s)).collect();
    Tensor::new(fan_in, fan_out, data).expect("sized")
}

impl Mlp {
    pub fn new(
        store: &mut ParameterStore,
        prefix: &str,
        spec: MlpSpec,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        spec.validate()?;
        let mut layers = Vec::with_capacity(spec.widths.len() - 1);
        for (i, pair) in spec.widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let weight = store.add(format!("{prefix}.{i}.weight"), glorot(rng, fan_in, fan_out))?;
            let bias = store.add(format!("{prefix}.{i}.bias"), Tensor::zeros(1, fan_out))?;
            layers.push(Layer { weight, bias });
        }
        Ok(Self { spec, layers })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.layers.iter().flat_map(|l| [l.weight, l.bias])
    }

    /// Pre-activation output of the last layer.
    pub fn logits(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let (rows, cols) = tape.value(x).shape();
        if cols != self.spec.input_width() {
            return Err(DadaError::Dimension {
                op: "mlp_forward",
                left: (rows, cols),
                right: (self.spec.input_width(), self.spec.output_width()),
            });
        }
        let ones = tape.constant(Tensor::ones(rows, 1));
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            let w = tape.param(layer.weight);
            let b = tape.param(layer.bias);
            let xw = tape.matmul(h, w)?;
            let bias = tape.matmul(ones, b)?;
            h = tape.add(xw, bias)?;
            if i + 1 < self.layers.len() {
                h = match self.spec.hidden {
                    Activation::Relu => tape.relu(h)?,
                    Activation::Tanh => tape.tanh(h)?,
                };
            }
        }
        Ok(h)
    }

    pub fn forward(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let logits = self.logits(tape, x)?;
        match self.spec.output {
            OutputActivation::Identity => Ok(logits),
            OutputActivation::Softmax => tape.softmax_rows(logits),
        }
    }
}

/// Architecture of a [`DadaModel`]. Hidden widths are per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub classes: usize,
    pub extractor_hidden: Vec<usize>,
    pub generator_hidden: Vec<usize>,
    pub estimator_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
}

impl ModelConfig {
    pub fn new(input_dim: usize, latent_dim: usize, classes: usize) -> Self {
        Self {
            input_dim,
            latent_dim,
            classes,
            extractor_hidden: vec![64, 64],
            generator_hidden: vec![64, 64],
            estimator_hidden: vec![32, 32],
            classifier_hidden: vec![32],
        }
    }
}

/// Allowed range for domain priors.
pub const PRIOR_RANGE: (f64, f64) = (-0.5, 0.5);

#[derive(Debug, Clone)]
pub struct DadaModel {
    pub store: ParameterStore,
    pub extractor: Mlp,
    pub generator: Mlp,
    pub estimator: Mlp,
    pub classifier: Mlp,
    /// `d x d` matrix of the bilinear similarity `a W b^T`.
    pub similarity: ParamId,
    config: ModelConfig,
}

impl DadaModel {
    pub fn new(config: ModelConfig, rng: &mut SplitMix64) -> Result<Self> {
        if config.classes < 2 {
            return Err(DadaError::contract("need at least two classes"));
        }
        let d = config.latent_dim;
        let mut store = ParameterStore::new();
        let extractor = Mlp::new(
            &mut store,
            "extractor",
            MlpSpec::new(config.input_dim, &config.extractor_hidden, d, Activation::Relu, OutputActivation::Identity),
            rng,
        )?;
        let generator = Mlp::new(
            &mut store,
            "generator",
            MlpSpec::new(d + 1, &config.generator_hidden, d, Activation::Relu, OutputActivation::Identity),
            rng,
        )?;
        let estimator = Mlp::new(
            &mut store,
            "estimator",
            MlpSpec::new(1, &config.estimator_hidden, 1, Activation::Tanh, OutputActivation::Identity),
            rng,
        )?;
        let classifier = Mlp::new(
            &mut store,
            "classifier",
            MlpSpec::new(d, &config.classifier_hidden, config.classes, Activation::Relu, OutputActivation::Softmax),
            rng,
        )?;
        let similarity = store.add("similarity", Tensor::identity(d))?;
        Ok(Self {
            store,
            extractor,
            generator,
            estimator,
            classifier,
            similarity,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn latent_dim(&self) -> usize {
        self.config.latent_dim
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }

    /// A tape with every parameter of this model bound.
    pub fn tape(&self) -> Tape {
        Tape::with_params(&self.store)
    }

    pub fn extract(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        self.extractor.forward(tape, x)
    }

    /// Generator input `[z_s | gamma * 1]`.
    pub fn prior_augmented(&self, tape: &mut Tape, z_s: Var, gamma: f64) -> Result<Var> {
        let (lo, hi) = PRIOR_RANGE;
        if !(lo - 1e-12..=hi + 1e-12).contains(&gamma) {
            return Err(DadaError::contract(format!(
                "domain prior {gamma} outside [{lo}, {hi}]"
            )));
        }
        let rows = tape.value(z_s).rows();
        let column = tape.constant(Tensor::filled(rows, 1, gamma));
        tape.concat_cols(z_s, column)
    }

    /// One pseudo-domain row per source row, in the same order.
    pub fn generate_pseudo(&self, tape: &mut Tape, z_s: Var, gamma: f64) -> Result<Var> {
        let h = self.prior_augmented(tape, z_s, gamma)?;
        self.generator.forward(tape, h)
    }

    /// `delta(gamma)` as a 1x1 node.
    pub fn estimate_discrepancy(&self, tape: &mut Tape, gamma: f64) -> Result<Var> {
        if !gamma.is_finite() {
            return Err(DadaError::Domain {
                op: "estimate_discrepancy",
                detail: format!("non-finite prior {gamma}"),
            });
        }
        let g = tape.constant(Tensor::scalar(gamma));
        self.estimator.forward(tape, g)
    }

    pub fn classify(&self, tape: &mut Tape, z: Var) -> Result<Var> {
        self.classifier.forward(tape, z)
    }

    /// `A W B^T`: entry `(i, k)` is the similarity of row `i` of `a` and row
    /// `k` of `b`.
    pub fn similarity_matrix(&self, tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
        let w = tape.param(self.similarity);
        let aw = tape.matmul(a, w)?;
        let bt = tape.transpose(b)?;
        tape.matmul(aw, bt)
    }

    /// `a W b^T` for single rows.
    pub fn bilinear_sim(&self, tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (tape.value(a).shape(), tape.value(b).shape());
        let d = self.latent_dim();
        if sa != (1, d) || sb != (1, d) {
            return Err(DadaError::Dimension {
                op: "bilinear_sim",
                left: sa,
                right: sb,
            });
        }
        self.similarity_matrix(tape, a, b)
    }

    /// Class probabilities for raw inputs without keeping a tape around.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = self.tape();
        let xv = tape.constant(x.clone());
        let z = self.extract(&mut tape, xv)?;
        let p = self.classify(&mut tape, z)?;
        Ok(tape.value(p).clone())
    }

    /// Latent features for raw inputs.
    pub fn features(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = self.tape();
        let xv = tape.constant(x.clone());
        let z = self.extract(&mut tape, xv)?;
        Ok(tape.value(z).clone())
    }

    pub fn param_ids_of(&self, part: Component) -> Vec<ParamId> {
        match part {
            Component::Extractor => self.extractor.param_ids().collect(),
            Component::Generator => self.generator.param_ids().collect(),
            Component::Estimator => self.estimator.param_ids().collect(),
            Component::Classifier => self.classifier.param_ids().collect(),
            Component::Similarity => vec![self.similarity],
        }
    }

    /// Sets every parameter of one component to zero.
    pub fn zero_component(&mut self, part: Component) {
        for id in self.param_ids_of(part) {
            let (r, c) = self.store.get(id).shape();
            self.store.set(id, Tensor::zeros(r, c)).expect("same shape");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Extractor,
    Generator,
    Estimator,
    Classifier,
    Similarity,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model(seed: u64) -> DadaModel {
        let mut cfg = ModelConfig::new(3, 2, 4);
        cfg.extractor_hidden = vec![5];
        cfg.generator_hidden = vec![5];
        cfg.estimator_hidden = vec![4];
        cfg.classifier_hidden = vec![6];
        DadaModel::new(cfg, &mut SplitMix64::new(seed)).unwrap()
    }

    #[test]
    fn zero_extractor_gives_zero_features() {
        let mut m = small_model(1);
        m.zero_component(Component::Extractor);
        let x = Tensor::from_rows(&[&[1.0, -2.0, 3.0], &[0.5, 0.5, 0.5]]);
        assert_eq!(m.features(&x).unwrap(), Tensor::zeros(2, 2));
    }

    #[test]
    fn identity_linear_extractor_passes_input_through() {
        let mut cfg = ModelConfig::new(3, 3, 2);
        cfg.extractor_hidden = vec![];
        let mut m = DadaModel::new(cfg, &mut SplitMix64::new(2)).unwrap();
        let w = m.extractor.layers()[0].weight;
        m.store.set(w, Tensor::identity(3)).unwrap();
        let x = Tensor::from_rows(&[&[1.0, -2.0, 3.0], &[0.25, 7.0, -1.0]]);
        assert_eq!(m.features(&x).unwrap(), x);
    }

    #[test]
    fn extractor_width_mismatch_is_an_error() {
        let m = small_model(3);
        let mut tape = m.tape();
        let x = tape.constant(Tensor::zeros(2, 5));
        assert!(m.extract(&mut tape, x).is_err());
    }

    #[test]
    fn zero_generator_gives_zero_row() {
        let mut m = small_model(4);
        m.zero_component(Component::Generator);
        let mut tape = m.tape();
        let z = tape.constant(Tensor::from_rows(&[&[0.3, -0.7]]));
        let out = m.generate_pseudo(&mut tape, z, 0.2).unwrap();
        assert_eq!(tape.value(out), &Tensor::zeros(1, 2));
    }

    #[test]
    fn distinct_priors_give_distinct_pseudo_domains() {
        let m = small_model(5);
        let mut tape = m.tape();
        let z = tape.constant(Tensor::from_rows(&[&[0.3, -0.7], &[1.0, 2.0]]));
        let a = m.generate_pseudo(&mut tape, z, -0.3).unwrap();
        let b = m.generate_pseudo(&mut tape, z, 0.4).unwrap();
        assert_ne!(tape.value(a), tape.value(b));
        assert_eq!(tape.value(a).shape(), (2, 2));
    }

    #[test]
    fn augmented_input_carries_prior_column() {
        let m = small_model(6);
        let mut tape = m.tape();
        let z = tape.constant(Tensor::from_rows(&[&[0.3, -0.7], &[1.0, 2.0], &[0.0, 0.0]]));
        let h = m.prior_augmented(&mut tape, z, 0.13).unwrap();
        let hv = tape.value(h);
        assert_eq!(hv.shape(), (3, 3));
        assert!((0..3).all(|r| hv.get(r, 2) == 0.13));
    }

    #[test]
    fn prior_out_of_range_rejected() {
        let m = small_model(7);
        let mut tape = m.tape();
        let z = tape.constant(Tensor::zeros(1, 2));
        assert!(m.generate_pseudo(&mut tape, z, 0.6).is_err());
    }

    #[test]
    fn zero_estimator_predicts_zero_scalar() {
        let mut m = small_model(8);
        m.zero_component(Component::Estimator);
        let mut tape = m.tape();
        for gamma in [-0.5, 0.0, 0.37] {
            let d = m.estimate_discrepancy(&mut tape, gamma).unwrap();
            assert_eq!(tape.value(d), &Tensor::scalar(0.0));
        }
    }

    #[test]
    fn zero_classifier_is_uniform() {
        let mut m = small_model(9);
        m.zero_component(Component::Classifier);
        let mut tape = m.tape();
        let z = tape.constant(Tensor::from_rows(&[&[3.0, -1.0], &[0.0, 9.0]]));
        let p = m.classify(&mut tape, z).unwrap();
        assert!(tape.value(p).data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn classifier_rows_normalized_and_argmax_matches_logits() {
        let m = small_model(10);
        let mut rng = SplitMix64::new(99);
        let data: Vec<f64> = (0..40).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let mut tape = m.tape();
        let z = tape.constant(Tensor::new(20, 2, data).unwrap());
        let logits = m.classifier.logits(&mut tape, z).unwrap();
        let p = m.classify(&mut tape, z).unwrap();
        let pv = tape.value(p);
        for r in 0..20 {
            let s: f64 = pv.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        assert_eq!(pv.argmax_rows(), tape.value(logits).argmax_rows());
    }

    #[test]
    fn bilinear_identity_cases() {
        let m = small_model(11);
        let mut tape = m.tape();
        let e0 = tape.constant(Tensor::from_rows(&[&[1.0, 0.0]]));
        let e1 = tape.constant(Tensor::from_rows(&[&[0.0, 1.0]]));
        let same = m.bilinear_sim(&mut tape, e0, e0).unwrap();
        let orth = m.bilinear_sim(&mut tape, e0, e1).unwrap();
        assert_eq!(tape.value(same).item(), 1.0);
        assert_eq!(tape.value(orth).item(), 0.0);
        let bad = tape.constant(Tensor::zeros(1, 3));
        assert!(m.bilinear_sim(&mut tape, e0, bad).is_err());
    }

    #[test]
    fn bilinear_matches_double_sum() {
        let mut cfg = ModelConfig::new(2, 3, 2);
        cfg.extractor_hidden = vec![];
        let mut m = DadaModel::new(cfg, &mut SplitMix64::new(12)).unwrap();
        let mut rng = SplitMix64::new(13);
        let w: Vec<f64> = (0..9).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let a: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect();
        m.store.set(m.similarity, Tensor::new(3, 3, w.clone()).unwrap()).unwrap();

        let mut expected = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                expected += a[i] * w[i * 3 + j] * b[j];
            }
        }
        let mut tape = m.tape();
        let av = tape.constant(Tensor::new(1, 3, a).unwrap());
        let bv = tape.constant(Tensor::new(1, 3, b).unwrap());
        let s = m.bilinear_sim(&mut tape, av, bv).unwrap();
        assert!((tape.value(s).item() - expected).abs() < 1e-14);
    }
}
