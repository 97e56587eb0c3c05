//! Levenshtein alignment counts, pooled error rates and WER recovery rate.

use serde::{Deserialize, Serialize};

use crate::ctc::TokenSequence;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_tokens: usize,
}

impl ErrorCounts {
    pub fn edits(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// `edits / ref_tokens`, or `None` for an empty reference.
    pub fn rate(&self) -> Option<f64> {
        (self.ref_tokens > 0).then(|| self.edits() as f64 / self.ref_tokens as f64)
    }
}

impl std::ops::Add for ErrorCounts {
    type Output = ErrorCounts;

    fn add(self, o: ErrorCounts) -> ErrorCounts {
        ErrorCounts {
            substitutions: self.substitutions + o.substitutions,
            insertions: self.insertions + o.insertions,
            deletions: self.deletions + o.deletions,
            ref_tokens: self.ref_tokens + o.ref_tokens,
        }
    }
}

impl std::iter::Sum for ErrorCounts {
    fn sum<I: Iterator<Item = ErrorCounts>>(iter: I) -> Self {
        iter.fold(ErrorCounts::default(), |a, b| a + b)
    }
}

/// Minimum-edit alignment of `hyp` against `reference`. Among alignments of
/// equal cost the backtrace takes the diagonal first, so substitutions win
/// over insertion/deletion pairs.
pub fn edit_distance(reference: &TokenSequence, hyp: &TokenSequence) -> ErrorCounts {
    let r = reference.tokens();
    let h = hyp.tokens();
    let (n, m) = (r.len(), h.len());
    let width = m + 1;
    let mut cost = vec![0usize; (n + 1) * width];
    for i in 0..=n {
        cost[i * width] = i;
    }
    for (j, c) in cost[..width].iter_mut().enumerate() {
        *c = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = cost[(i - 1) * width + j - 1] + usize::from(r[i - 1] != h[j - 1]);
            let del = cost[(i - 1) * width + j] + 1;
            let ins = cost[i * width + j - 1] + 1;
            cost[i * width + j] = diag.min(del).min(ins);
        }
    }

    let mut counts = ErrorCounts {
        ref_tokens: n,
        ..ErrorCounts::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = cost[i * width + j];
        if i > 0 && j > 0 {
            let mismatch = usize::from(r[i - 1] != h[j - 1]);
            if cost[(i - 1) * width + j - 1] + mismatch == here {
                counts.substitutions += mismatch;
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[(i - 1) * width + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// Pooled error rate in percent: `100 · Σ edits / Σ reference tokens`.
pub fn corpus_error_rate<'a, I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (&'a TokenSequence, &'a TokenSequence)>,
{
    let total: ErrorCounts = pairs.into_iter().map(|(r, h)| edit_distance(r, h)).sum();
    total
        .rate()
        .map(|rate| 100.0 * rate)
        .ok_or_else(|| Error::InvalidArgument("no reference tokens to score against".into()))
}

/// Fraction (percent) of the base-to-topline error gap recovered by a model.
pub fn wrr(base_wer: f64, model_wer: f64, topline_wer: f64) -> Result<f64> {
    let gap = base_wer - topline_wer;
    if !gap.is_finite() || gap <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "WRR needs base error ({base_wer}) above topline error ({topline_wer})"
        )));
    }
    Ok(100.0 * (base_wer - model_wer) / gap)
}
