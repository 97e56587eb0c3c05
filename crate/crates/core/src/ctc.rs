//! Connectionist temporal classification in log space.
//!
//! A [`LogPosteriorGrid`] holds per-frame log-probabilities over `V` tokens
//! plus the blank, which always sits at index `V` (the last column). Every
//! routine here is a pure function of its inputs.
//!
//! Probabilities are handled exclusively as natural logarithms; sequences of a
//! few hundred frames underflow `f64` in linear space.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when validating grid rows.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Upper bound on the number of paths [`brute_force_log_prob`] will enumerate.
pub const ENUMERATION_BOUND: u128 = 10_000_000;

/// `ln(exp(a) + exp(b))` without overflow; `-inf` is the additive identity.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp over a slice. Returns `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// An ordered label sequence of token ids in `[0, V)`. The blank never appears.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(pub Vec<u32>);

impl TokenSequence {
    pub fn new(tokens: Vec<u32>) -> Self {
        TokenSequence(tokens)
    }

    pub fn empty() -> Self {
        TokenSequence(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[u32] {
        &self.0
    }

    /// Checks every token lies in `[0, vocab)`.
    pub fn validate(&self, vocab: usize) -> Result<()> {
        for (position, &token) in self.0.iter().enumerate() {
            if token as usize >= vocab {
                return Err(Error::TokenOutOfRange { token, position, vocab });
            }
        }
        Ok(())
    }

    /// Minimum number of frames any path for this label needs: one per token
    /// plus one separating blank between each pair of equal neighbours.
    pub fn min_frames(&self) -> usize {
        let repeats = self.0.windows(2).filter(|w| w[0] == w[1]).count();
        self.0.len() + repeats
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(tokens: Vec<u32>) -> Self {
        TokenSequence(tokens)
    }
}

/// The collapse map: merge runs of equal symbols, then drop blanks.
pub fn collapse(path: &[usize], blank: usize) -> TokenSequence {
    let mut out = Vec::new();
    let mut prev = None;
    for &sym in path {
        if Some(sym) != prev && sym != blank {
            out.push(sym as u32);
        }
        prev = Some(sym);
    }
    TokenSequence(out)
}

/// `T × (V+1)` per-frame log-probabilities; column `V` is the blank.
#[derive(Clone, Debug, PartialEq)]
pub struct LogPosteriorGrid {
    values: Array2<f64>,
}

impl LogPosteriorGrid {
    /// Wraps a matrix after checking that every entry is finite and at most 0,
    /// and every row log-sum-exps to 0.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.ncols() < 1 {
            return Err(Error::InvalidGrid("grid needs at least the blank column".into()));
        }
        for (t, row) in values.axis_iter(Axis(0)).enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidGrid(format!("entry ({t}, {k}) is not finite")));
                }
                if v > GRID_TOLERANCE {
                    return Err(Error::InvalidGrid(format!("entry ({t}, {k}) = {v} is positive")));
                }
            }
            let total = log_sum_exp(row.as_slice().unwrap_or(&row.to_vec()));
            if total.abs() > GRID_TOLERANCE {
                return Err(Error::InvalidGrid(format!(
                    "row {t} log-sum-exps to {total:e}, expected 0"
                )));
            }
        }
        Ok(LogPosteriorGrid { values })
    }

    /// Builds a grid by applying a row-wise log-softmax to unnormalized logits.
    pub fn from_logits(logits: ArrayView2<'_, f64>) -> Result<Self> {
        if logits.ncols() < 1 {
            return Err(Error::InvalidGrid("grid needs at least the blank column".into()));
        }
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        let mut values = logits.to_owned();
        for mut row in values.axis_iter_mut(Axis(0)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            row.mapv_inplace(|v| v - lse);
        }
        Ok(LogPosteriorGrid { values })
    }

    /// Builds a grid from linear probabilities (rows must sum to 1).
    pub fn from_probs(probs: ArrayView2<'_, f64>) -> Result<Self> {
        Self::new(probs.mapv(f64::ln))
    }

    /// Frame count `T`.
    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    /// Vocabulary size `V`, excluding the blank.
    pub fn vocab(&self) -> usize {
        self.values.ncols() - 1
    }

    /// Column index of the blank symbol.
    pub fn blank(&self) -> usize {
        self.vocab()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    #[inline]
    fn at(&self, t: usize, k: usize) -> f64 {
        self.values[[t, k]]
    }
}

/// Blank-extended label `ε y1 ε y2 ... ε yL ε`, length `2L+1`.
fn extend_with_blanks(label: &TokenSequence, blank: usize) -> Vec<usize> {
    let mut ext = Vec::with_capacity(2 * label.len() + 1);
    ext.push(blank);
    for &tok in label.tokens() {
        ext.push(tok as usize);
        ext.push(blank);
    }
    ext
}

#[inline]
fn can_skip(ext: &[usize], s: usize, blank: usize) -> bool {
    s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]
}

/// Forward variables `alpha[t][s]`: log-probability of all prefixes of length
/// `t+1` that end in extended-label state `s`, emission at `t` included.
fn forward_table(grid: &LogPosteriorGrid, ext: &[usize]) -> Array2<f64> {
    let frames = grid.frames();
    let states = ext.len();
    let blank = grid.blank();
    let mut alpha = Array2::from_elem((frames, states), f64::NEG_INFINITY);
    alpha[[0, 0]] = grid.at(0, ext[0]);
    if states > 1 {
        alpha[[0, 1]] = grid.at(0, ext[1]);
    }
    for t in 1..frames {
        // States further than 2t+1 from the start cannot be reached yet.
        let reach = (2 * t + 2).min(states);
        for s in 0..reach {
            let mut acc = alpha[[t - 1, s]];
            if s >= 1 {
                acc = log_add(acc, alpha[[t - 1, s - 1]]);
            }
            if can_skip(ext, s, blank) {
                acc = log_add(acc, alpha[[t - 1, s - 2]]);
            }
            if acc != f64::NEG_INFINITY {
                alpha[[t, s]] = acc + grid.at(t, ext[s]);
            }
        }
    }
    alpha
}

/// Backward variables `beta[t][s]`: log-probability of all suffixes covering
/// frames `t+1..T` given state `s` at frame `t`, emission at `t` excluded.
fn backward_table(grid: &LogPosteriorGrid, ext: &[usize]) -> Array2<f64> {
    let frames = grid.frames();
    let states = ext.len();
    let blank = grid.blank();
    let mut beta = Array2::from_elem((frames, states), f64::NEG_INFINITY);
    beta[[frames - 1, states - 1]] = 0.0;
    if states > 1 {
        beta[[frames - 1, states - 2]] = 0.0;
    }
    for t in (0..frames - 1).rev() {
        for s in 0..states {
            let mut acc = beta[[t + 1, s]] + grid.at(t + 1, ext[s]);
            if s + 1 < states {
                acc = log_add(acc, beta[[t + 1, s + 1]] + grid.at(t + 1, ext[s + 1]));
            }
            if s + 2 < states && can_skip(ext, s + 2, blank) {
                acc = log_add(acc, beta[[t + 1, s + 2]] + grid.at(t + 1, ext[s + 2]));
            }
            beta[[t, s]] = acc;
        }
    }
    beta
}

fn final_log_prob(alpha: &Array2<f64>) -> f64 {
    let last = alpha.nrows() - 1;
    let states = alpha.ncols();
    let mut total = alpha[[last, states - 1]];
    if states > 1 {
        total = log_add(total, alpha[[last, states - 2]]);
    }
    total
}

/// `log P(label | grid)`, summed over every path that collapses to `label`.
///
/// Returns `-inf` when the label needs more frames than the grid has.
pub fn ctc_log_prob(grid: &LogPosteriorGrid, label: &TokenSequence) -> Result<f64> {
    label.validate(grid.vocab())?;
    if label.min_frames() > grid.frames() {
        return Ok(f64::NEG_INFINITY);
    }
    if grid.frames() == 0 {
        // Only reachable with an empty label: the empty path.
        return Ok(0.0);
    }
    let ext = extend_with_blanks(label, grid.blank());
    Ok(final_log_prob(&forward_table(grid, &ext)))
}

/// Negative log-likelihood and its gradient with respect to the pre-softmax
/// logits that produced `grid`.
///
/// The gradient is `softmax - occupancy`, where occupancy is the posterior
/// probability of emitting each symbol at each frame. Infeasible labels yield
/// [`Error::InfeasibleLabel`].
pub fn ctc_loss_and_grad(grid: &LogPosteriorGrid, label: &TokenSequence) -> Result<(f64, Array2<f64>)> {
    label.validate(grid.vocab())?;
    let frames = grid.frames();
    let required = label.min_frames();
    if required > frames || frames == 0 {
        if frames == 0 && label.is_empty() {
            return Ok((0.0, Array2::zeros((0, grid.vocab() + 1))));
        }
        return Err(Error::InfeasibleLabel {
            label_len: label.len(),
            required,
            frames,
        });
    }
    let ext = extend_with_blanks(label, grid.blank());
    let alpha = forward_table(grid, &ext);
    let beta = backward_table(grid, &ext);
    let log_prob = final_log_prob(&alpha);
    if !log_prob.is_finite() {
        return Err(Error::NonFinite("ctc log-probability"));
    }

    let mut grad = grid.values.mapv(f64::exp);
    for t in 0..frames {
        for (s, &sym) in ext.iter().enumerate() {
            let occ = alpha[[t, s]] + beta[[t, s]];
            if occ != f64::NEG_INFINITY {
                grad[[t, sym]] -= (occ - log_prob).exp();
            }
        }
    }
    Ok((-log_prob, grad))
}

/// Greedy best-path decoding: per-frame argmax, then collapse.
///
/// Ties go to the lowest column index, so the blank (last column) loses every
/// tie.
pub fn best_path_decode(grid: &LogPosteriorGrid) -> TokenSequence {
    let path: Vec<usize> = grid
        .values
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect();
    collapse(&path, grid.blank())
}

/// Reference implementation of [`ctc_log_prob`] that enumerates all
/// `(V+1)^T` paths. Refuses instances above [`ENUMERATION_BOUND`].
pub fn brute_force_log_prob(grid: &LogPosteriorGrid, label: &TokenSequence) -> Result<f64> {
    label.validate(grid.vocab())?;
    let symbols = grid.vocab() + 1;
    let frames = grid.frames();
    let paths = (symbols as u128).checked_pow(frames as u32).unwrap_or(u128::MAX);
    if paths > ENUMERATION_BOUND {
        return Err(Error::EnumerationTooLarge {
            paths,
            bound: ENUMERATION_BOUND,
        });
    }
    let blank = grid.blank();
    let mut path = vec![0usize; frames];
    let mut matching = Vec::new();
    for _ in 0..paths {
        if collapse(&path, blank) == *label {
            matching.push(path.iter().enumerate().map(|(t, &k)| grid.at(t, k)).sum());
        }
        // odometer increment
        for digit in path.iter_mut().rev() {
            *digit += 1;
            if *digit < symbols {
                break;
            }
            *digit = 0;
        }
    }
    Ok(log_sum_exp(&matching))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn uniform(frames: usize, vocab: usize) -> LogPosteriorGrid {
        let p = -((vocab + 1) as f64).ln();
        LogPosteriorGrid::new(Array2::from_elem((frames, vocab + 1), p)).unwrap()
    }

    /// Grid that is certain of `path` (blank encoded as `vocab`).
    fn one_hot(path: &[usize], vocab: usize) -> LogPosteriorGrid {
        let mut probs = Array2::zeros((path.len(), vocab + 1));
        for (t, &k) in path.iter().enumerate() {
            probs[[t, k]] = 1.0;
        }
        // ln(0) = -inf is not a valid grid entry; soften minimally.
        let logits = probs.mapv(|p: f64| if p > 0.0 { 0.0 } else { -800.0 });
        LogPosteriorGrid::from_logits(logits.view()).unwrap()
    }

    #[test]
    fn two_frame_uniform_single_token() {
        // paths aa, aε, εa each carry 1/4
        let grid = uniform(2, 1);
        let lp = ctc_log_prob(&grid, &vec![0].into()).unwrap();
        assert!((lp - 0.75f64.ln()).abs() < 1e-12);
        let (loss, _) = ctc_loss_and_grad(&grid, &vec![0].into()).unwrap();
        assert!((loss + 0.75f64.ln()).abs() < 1e-12);
        let bf = brute_force_log_prob(&grid, &vec![0].into()).unwrap();
        assert!((bf - 0.75f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn infeasible_label_gives_neg_inf() {
        let grid = uniform(1, 1);
        let label: TokenSequence = vec![0, 0].into();
        assert_eq!(ctc_log_prob(&grid, &label).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(
            ctc_loss_and_grad(&grid, &label),
            Err(Error::InfeasibleLabel {
                required: 3,
                frames: 1,
                ..
            })
        ));
        // repeated tokens need a separating blank
        let grid = uniform(2, 1);
        assert_eq!(ctc_log_prob(&grid, &label).unwrap(), f64::NEG_INFINITY);
        assert!(ctc_log_prob(&uniform(3, 1), &label).unwrap().is_finite());
    }

    #[test]
    fn certain_path_has_unit_probability() {
        // a, ε, b with V = 2 (blank = 2)
        let grid = one_hot(&[0, 2, 1], 2);
        let label: TokenSequence = vec![0, 1].into();
        let lp = ctc_log_prob(&grid, &label).unwrap();
        assert!(lp.abs() < 1e-12, "{lp}");
        let (loss, grad) = ctc_loss_and_grad(&grid, &label).unwrap();
        assert!(loss.abs() < 1e-12);
        // softmax equals occupancy at the optimum, so the residual vanishes
        assert!(grad.iter().all(|g| g.abs() < 1e-9));
    }

    #[test]
    fn empty_label_is_sum_of_blank_log_probs() {
        let grid =
            LogPosteriorGrid::from_logits(array![[0.3, -1.0, 0.5], [1.2, 0.0, -0.4], [0.1, 0.2, 0.3]].view()).unwrap();
        let expected: f64 = (0..3).map(|t| grid.values()[[t, 2]]).sum();
        let lp = ctc_log_prob(&grid, &TokenSequence::empty()).unwrap();
        assert!((lp - expected).abs() < 1e-12);
    }

    #[test]
    fn decode_examples() {
        // V = 3: a=0, b=1, c=2, blank=3
        assert_eq!(best_path_decode(&one_hot(&[0, 0, 3, 0], 3)).0, vec![0, 0]);
        assert!(best_path_decode(&one_hot(&[3, 3, 3], 3)).is_empty());
        assert_eq!(best_path_decode(&one_hot(&[0, 1, 1, 3, 2], 3)).0, vec![0, 1, 2]);
    }

    #[test]
    fn decode_ties_prefer_lowest_index_and_blank_loses() {
        let grid = uniform(3, 2);
        assert_eq!(best_path_decode(&grid).0, vec![0]);
        let tie = LogPosteriorGrid::from_probs(array![[0.1, 0.45, 0.45]].view()).unwrap();
        assert_eq!(best_path_decode(&tie).0, vec![1]);
    }

    #[test]
    fn brute_force_refuses_large_instances() {
        let grid = uniform(24, 1);
        assert!(matches!(
            brute_force_log_prob(&grid, &TokenSequence::empty()),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn brute_force_empty_label_on_certain_blank_grid() {
        let grid = one_hot(&[2, 2, 2], 2);
        let lp = brute_force_log_prob(&grid, &TokenSequence::empty()).unwrap();
        assert!(lp.abs() < 1e-12);
    }

    #[test]
    fn rejects_invalid_grids() {
        assert!(LogPosteriorGrid::new(array![[0.0, 0.0]]).is_err());
        assert!(LogPosteriorGrid::new(array![[f64::NAN, 0.0]]).is_err());
        assert!(LogPosteriorGrid::new(array![[0.5f64.ln(), 0.5f64.ln()]]).is_ok());
        assert!(LogPosteriorGrid::new(array![[1.0, f64::NEG_INFINITY]]).is_err());
    }

    #[test]
    fn rejects_out_of_vocab_tokens() {
        let grid = uniform(3, 2);
        assert!(matches!(
            ctc_log_prob(&grid, &vec![2].into()),
            Err(Error::TokenOutOfRange { token: 2, .. })
        ));
    }

    #[test]
    fn collapse_merges_then_drops_blanks() {
        assert_eq!(collapse(&[1, 1, 9, 1, 2, 2, 9], 9).0, vec![1, 1, 2]);
        assert!(collapse(&[], 9).is_empty());
    }
}
