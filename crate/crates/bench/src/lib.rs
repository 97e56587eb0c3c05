//! Fixtures shared by the benchmarks.

use mpl_core::{init_params, Architecture, LogPosteriorGrid, ParamVector, TokenSequence};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random log-posterior grid with `frames` rows over `vocab` tokens plus blank,
/// and a random feasible label of `label_len` tokens.
pub fn ctc_fixture(frames: usize, vocab: usize, label_len: usize, seed: u64) -> (LogPosteriorGrid, TokenSequence) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = Array2::from_shape_fn((frames, vocab + 1), |_| rng.random_range(-3.0..3.0));
    let grid = LogPosteriorGrid::from_logits(logits.view()).expect("finite logits");
    // no adjacent repeats, so `label_len` frames suffice
    let mut tokens: Vec<u32> = Vec::with_capacity(label_len);
    while tokens.len() < label_len {
        let tok = rng.random_range(0..vocab as u32);
        if tokens.last() != Some(&tok) || vocab == 1 {
            tokens.push(tok);
        }
    }
    (grid, TokenSequence::new(tokens))
}

/// Default-sized model with an utterance of `frames` frames.
pub fn model_fixture(frames: usize, seed: u64) -> (ParamVector, Array2<f32>, TokenSequence) {
    let arch = Architecture {
        input_dim: 16,
        context: 2,
        hidden: 64,
        n_hidden: 1,
        vocab: 8,
    };
    let params = init_params(arch, seed).expect("valid architecture");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    let features = Array2::from_shape_fn((frames, arch.input_dim), |_| rng.random_range(-1.0f32..1.0));
    let label = TokenSequence::new((0..frames / 4).map(|_| rng.random_range(0..8)).collect());
    (params, features, label)
}
