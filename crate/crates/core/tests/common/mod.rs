//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use mpl_core::{init_params, loss_and_gradient, Architecture, ParamVector, TokenSequence};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random small model problem with a feasible label.
pub struct GradProblem {
    pub params: ParamVector,
    pub features: Array2<f32>,
    pub label: TokenSequence,
}

pub fn random_grad_problem(seed: u64) -> GradProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let arch = Architecture {
        input_dim: rng.random_range(1..=4),
        context: rng.random_range(0..=2),
        hidden: rng.random_range(1..=8),
        n_hidden: rng.random_range(1..=2),
        vocab: rng.random_range(1..=4),
    };
    let frames = rng.random_range(1..=8);
    let mut label = Vec::new();
    loop {
        let mut candidate = label.clone();
        candidate.push(rng.random_range(0..arch.vocab as u32));
        if TokenSequence::new(candidate.clone()).min_frames() > frames || rng.random_bool(0.3) {
            break;
        }
        label = candidate;
    }
    let mut params = init_params(arch, rng.random()).unwrap();
    // non-zero biases so every code path carries signal
    for v in params.values_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    let features = Array2::from_shape_fn((frames, arch.input_dim), |_| rng.random_range(-1.5f32..1.5));
    GradProblem {
        params,
        features,
        label: TokenSequence::new(label),
    }
}

/// `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` with central
/// differences of step `h`.
pub fn gradient_relative_error(problem: &GradProblem, h: f64) -> f64 {
    let (_, grad) = loss_and_gradient(&problem.params, problem.features.view(), &problem.label).unwrap();
    let loss_at = |p: &ParamVector| loss_and_gradient(p, problem.features.view(), &problem.label).unwrap().0;
    let mut diff = 0.0;
    let mut norm_a = 0.0;
    let mut norm_n = 0.0;
    let mut probe = problem.params.clone();
    for i in 0..probe.len() {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + h;
        let up = loss_at(&probe);
        probe.values_mut()[i] = orig - h;
        let down = loss_at(&probe);
        probe.values_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.values()[i];
        diff += (analytic - numeric).powi(2);
        norm_a += analytic * analytic;
        norm_n += numeric * numeric;
    }
    let scale = norm_a.sqrt().max(norm_n.sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff.sqrt() / scale
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}
