//! Context-window MLP acoustic model.
//!
//! Each output frame `t` sees input frames `t-c ..= t+c` (zero-padded at the
//! edges), spliced into one vector, followed by `n_hidden` tanh layers and a
//! linear layer over `V+1` symbols with a log-softmax.
//!
//! Parameters live in one flat vector. For every layer, in order, the layout
//! is the weight matrix `in × out` in row-major order followed by the `out`
//! biases.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ctc::{ctc_loss_and_grad, LogPosteriorGrid, TokenSequence};
use crate::error::{Error, Result};

/// Shape of the network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    /// Input feature dimension `D`.
    pub input_dim: usize,
    /// Context radius `c`; `2c+1` frames are spliced per output frame.
    pub context: usize,
    /// Hidden width `H`.
    pub hidden: usize,
    /// Number of tanh hidden layers.
    pub n_hidden: usize,
    /// Vocabulary size `V`, excluding the blank.
    pub vocab: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden == 0 || self.n_hidden == 0 || self.vocab == 0 {
            return Err(Error::InvalidArch(format!(
                "input_dim, hidden, n_hidden and vocab must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn spliced_dim(&self) -> usize {
        (2 * self.context + 1) * self.input_dim
    }

    /// Output width, `V+1`.
    pub fn outputs(&self) -> usize {
        self.vocab + 1
    }

    /// `(fan_in, fan_out)` for each layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.n_hidden + 1);
        let mut fan_in = self.spliced_dim();
        for _ in 0..self.n_hidden {
            dims.push((fan_in, self.hidden));
            fan_in = self.hidden;
        }
        dims.push((fan_in, self.outputs()));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }
}

/// Flat parameter vector tagged with the architecture it belongs to.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    arch: Architecture,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(arch: Architecture, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if values.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, architecture needs {}",
                values.len(),
                arch.param_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector"));
        }
        Ok(ParamVector { arch, values })
    }

    pub fn zeros(arch: Architecture) -> Self {
        ParamVector {
            arch,
            values: vec![0.0; arch.param_count()],
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for optimizers and EMA; length is fixed by the architecture.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ensure_same_arch(&self, other: &ParamVector) -> Result<()> {
        if self.arch != other.arch {
            return Err(Error::ArchMismatch(format!("{:?} vs {:?}", self.arch, other.arch)));
        }
        Ok(())
    }

    fn layers(&self) -> Vec<(ArrayView2<'_, f64>, ArrayView1<'_, f64>)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in self.arch.layer_dims() {
            let w = &self.values[offset..offset + fan_in * fan_out];
            offset += fan_in * fan_out;
            let b = &self.values[offset..offset + fan_out];
            offset += fan_out;
            out.push((
                ArrayView2::from_shape((fan_in, fan_out), w).expect("layout"),
                ArrayView1::from(b),
            ));
        }
        out
    }
}

fn layers_mut<'a>(arch: &Architecture, values: &'a mut [f64]) -> Vec<(ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>)> {
    let mut out = Vec::new();
    let mut rest = values;
    for (fan_in, fan_out) in arch.layer_dims() {
        let (w, tail) = rest.split_at_mut(fan_in * fan_out);
        let (b, tail) = tail.split_at_mut(fan_out);
        rest = tail;
        out.push((
            ArrayViewMut2::from_shape((fan_in, fan_out), w).expect("layout"),
            ArrayViewMut1::from(b),
        ));
    }
    out
}

/// Deterministic initialization: weights `N(0, 1/fan_in)`, biases zero.
pub fn init_params(arch: Architecture, seed: u64) -> Result<ParamVector> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ParamVector::zeros(arch);
    for (mut w, _) in layers_mut(&arch, &mut params.values) {
        let fan_in = w.nrows();
        let normal = Normal::new(0.0, (1.0f64 / fan_in as f64).sqrt()).expect("positive std");
        w.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
    }
    Ok(params)
}

fn check_features(arch: &Architecture, features: &ArrayView2<'_, f32>) -> Result<()> {
    if features.ncols() != arch.input_dim {
        return Err(Error::Shape(format!(
            "feature width {} does not match architecture input_dim {}",
            features.ncols(),
            arch.input_dim
        )));
    }
    Ok(())
}

/// Splice `2c+1` neighbouring frames into each row, zero-padding the edges.
fn splice(features: ArrayView2<'_, f32>, context: usize) -> Array2<f64> {
    let frames = features.nrows();
    let dim = features.ncols();
    let width = 2 * context + 1;
    let mut out = Array2::zeros((frames, width * dim));
    for t in 0..frames {
        let mut row = out.row_mut(t);
        let row = row.as_slice_mut().expect("standard layout");
        for j in 0..width {
            let src = t as isize + j as isize - context as isize;
            if src < 0 || src >= frames as isize {
                continue;
            }
            let dst = &mut row[j * dim..(j + 1) * dim];
            for (d, &x) in dst.iter_mut().zip(features.row(src as usize).iter()) {
                *d = x as f64;
            }
        }
    }
    out
}

struct Activations {
    /// Layer inputs: spliced features, then each hidden layer's output.
    inputs: Vec<Array2<f64>>,
    logits: Array2<f64>,
}

fn run_layers(params: &ParamVector, features: ArrayView2<'_, f32>) -> Activations {
    let layers = params.layers();
    let mut inputs = Vec::with_capacity(layers.len());
    let mut x = splice(features, params.arch.context);
    let last = layers.len() - 1;
    for (i, (w, b)) in layers.iter().enumerate() {
        let mut z = x.dot(w);
        z += b;
        inputs.push(x);
        if i == last {
            return Activations { inputs, logits: z };
        }
        z.mapv_inplace(f64::tanh);
        x = z;
    }
    unreachable!("architecture has at least one layer")
}

/// Per-frame log-posteriors for one utterance.
pub fn forward(params: &ParamVector, features: ArrayView2<'_, f32>) -> Result<LogPosteriorGrid> {
    check_features(&params.arch, &features)?;
    let acts = run_layers(params, features);
    LogPosteriorGrid::from_logits(acts.logits.view())
}

/// Adds the gradient of `-log P(label | features)` into `grad` and returns the
/// loss. `grad` must have the parameter vector's length.
pub fn accumulate_loss_and_gradient(
    params: &ParamVector,
    features: ArrayView2<'_, f32>,
    label: &TokenSequence,
    grad: &mut [f64],
) -> Result<f64> {
    check_features(&params.arch, &features)?;
    if grad.len() != params.len() {
        return Err(Error::Shape(format!(
            "gradient buffer has {} entries, expected {}",
            grad.len(),
            params.len()
        )));
    }
    let acts = run_layers(params, features);
    let grid = LogPosteriorGrid::from_logits(acts.logits.view())?;
    let (loss, mut delta) = ctc_loss_and_grad(&grid, label)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("utterance loss"));
    }

    let layers = params.layers();
    let mut grads = layers_mut(&params.arch, grad);
    for i in (0..layers.len()).rev() {
        let input = &acts.inputs[i];
        let (gw, gb) = &mut grads[i];
        ndarray::linalg::general_mat_mul(1.0, &input.t(), &delta, 1.0, gw);
        *gb += &delta.sum_axis(Axis(0));
        if i == 0 {
            break;
        }
        // input[i] = tanh(z[i-1]); d tanh = 1 - tanh^2
        let mut back = delta.dot(&layers[i].0.t());
        ndarray::Zip::from(&mut back)
            .and(input)
            .for_each(|g, &h| *g *= 1.0 - h * h);
        delta = back;
    }
    Ok(loss)
}

/// Loss and gradient for one utterance.
pub fn loss_and_gradient(
    params: &ParamVector,
    features: ArrayView2<'_, f32>,
    label: &TokenSequence,
) -> Result<(f64, ParamVector)> {
    let mut grad = ParamVector::zeros(params.arch);
    let loss = accumulate_loss_and_gradient(params, features, label, &mut grad.values)?;
    Ok((loss, grad))
}

/// Summed loss and gradient over a batch. Losses add across utterances and are
/// not normalized by length.
pub fn batch_loss_and_gradient<'a, I>(params: &ParamVector, batch: I) -> Result<(f64, ParamVector)>
where
    I: IntoIterator<Item = (ArrayView2<'a, f32>, &'a TokenSequence)>,
{
    let mut grad = ParamVector::zeros(params.arch);
    let mut total = 0.0;
    for (features, label) in batch {
        total += accumulate_loss_and_gradient(params, features, label, &mut grad.values)?;
    }
    Ok((total, grad))
}

/// L2 norm of a flat vector.
pub fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng;

    fn small_arch() -> Architecture {
        Architecture {
            input_dim: 4,
            context: 1,
            hidden: 8,
            n_hidden: 1,
            vocab: 5,
        }
    }

    fn random_features(rng: &mut impl Rng, frames: usize, dim: usize) -> Array2<f32> {
        Array2::from_shape_fn((frames, dim), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn parameter_count_matches_layout() {
        assert_eq!(small_arch().param_count(), 158);
        assert_eq!(init_params(small_arch(), 1).unwrap().len(), 158);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let a = init_params(small_arch(), 7).unwrap();
        let b = init_params(small_arch(), 7).unwrap();
        let c = init_params(small_arch(), 8).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        // biases start at zero
        let layers = a.layers();
        assert!(layers.iter().all(|(_, b)| b.iter().all(|&x| x == 0.0)));
    }

    #[test]
    fn single_frame_row_is_normalized() {
        let params = init_params(small_arch(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let grid = forward(&params, random_features(&mut rng, 1, 4).view()).unwrap();
        let total: f64 = grid.values().row(0).iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_params_give_uniform_rows() {
        let params = ParamVector::zeros(small_arch());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let grid = forward(&params, random_features(&mut rng, 6, 4).view()).unwrap();
        let expected = -(6f64).ln();
        assert!(grid.values().iter().all(|v| (v - expected).abs() < 1e-12));
    }

    #[test]
    fn frames_are_independent_without_context() {
        let arch = Architecture {
            context: 0,
            ..small_arch()
        };
        let params = init_params(arch, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_features(&mut rng, 5, 4);
        let mut swapped = x.clone();
        for d in 0..4 {
            swapped.swap([1, d], [3, d]);
        }
        let a = forward(&params, x.view()).unwrap();
        let b = forward(&params, swapped.view()).unwrap();
        assert_eq!(a.values().row(1), b.values().row(3));
        assert_eq!(a.values().row(3), b.values().row(1));
        assert_eq!(a.values().row(0), b.values().row(0));
    }

    #[test]
    fn rejects_wrong_feature_width() {
        let params = init_params(small_arch(), 0).unwrap();
        let x = Array2::<f32>::zeros((3, 5));
        assert!(matches!(forward(&params, x.view()), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_step_reduces_loss() {
        let params = init_params(small_arch(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_features(&mut rng, 7, 4);
        let label: TokenSequence = vec![1, 3, 3].into();
        let (loss, grad) = loss_and_gradient(&params, x.view(), &label).unwrap();
        let step: Vec<f64> = params
            .values()
            .iter()
            .zip(grad.values())
            .map(|(p, g)| p - 1e-3 * g)
            .collect();
        let moved = ParamVector::new(*params.arch(), step).unwrap();
        let (after, _) = loss_and_gradient(&moved, x.view(), &label).unwrap();
        assert!(after < loss, "{after} >= {loss}");
    }

    #[test]
    fn duplicated_batch_doubles_gradient() {
        let params = init_params(small_arch(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_features(&mut rng, 6, 4);
        let label: TokenSequence = vec![0, 2].into();
        let (l1, g1) = loss_and_gradient(&params, x.view(), &label).unwrap();
        let (l2, g2) = batch_loss_and_gradient(&params, [(x.view(), &label), (x.view(), &label)]).unwrap();
        assert_eq!(l2, 2.0 * l1);
        for (a, b) in g1.values().iter().zip(g2.values()) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn infeasible_label_is_reported() {
        let params = init_params(small_arch(), 4).unwrap();
        let x = Array2::<f32>::zeros((2, 4));
        let label: TokenSequence = vec![0, 1, 2].into();
        assert!(matches!(
            loss_and_gradient(&params, x.view(), &label),
            Err(Error::InfeasibleLabel { .. })
        ));
    }
}
