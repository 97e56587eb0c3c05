//! Synthetic sequence-transduction corpora with a controllable domain shift.
//!
//! Every token `k` owns a fixed prototype. An utterance is a uniformly sampled
//! token sequence where each token occupies `r ∈ [r_min, r_max]` frames of its
//! prototype plus a shared onset vector that decays geometrically from the
//! first frame of the occurrence (weight `onset_decay^j` on frame `j`). A per-utterance offset and per-frame Gaussian noise
//! are added on top. Onsets make adjacent repeats recoverable, so a noiseless
//! corpus is perfectly decodable frame by frame.
//!
//! Unlabeled utterances and the out-of-domain evaluation splits additionally
//! pass through the configured [`DomainShift`] chain.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::binio::{Reader, Writer};
use crate::ctc::TokenSequence;
use crate::error::{Error, Result};

pub const CORPUS_MAGIC: &[u8; 8] = b"MPLCORP1";
pub const CORPUS_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    None,
    /// Rotation by `magnitude` radians in each of `D/2` random coordinate planes.
    LinearTransform,
    /// Multiplies the noise standard deviation by `magnitude`.
    NoiseScale,
    /// Adds a fixed `N(0, magnitude²)` perturbation to every prototype.
    PrototypeJitter,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainShift {
    pub kind: ShiftKind,
    pub magnitude: f64,
}

impl DomainShift {
    pub fn none() -> Self {
        DomainShift {
            kind: ShiftKind::None,
            magnitude: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.magnitude.is_finite() || self.magnitude < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "shift magnitude {} must be ≥ 0",
                self.magnitude
            )));
        }
        if self.kind == ShiftKind::None && self.magnitude != 0.0 {
            return Err(Error::InvalidSpec("shift kind `none` requires magnitude 0".into()));
        }
        Ok(())
    }
}

/// Everything needed to regenerate a corpus bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub vocab: usize,
    pub dim: usize,
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    /// Validation utterances per domain.
    pub n_valid: usize,
    /// Test utterances per domain.
    pub n_test: usize,
    pub label_len: (usize, usize),
    pub frames_per_token: (usize, usize),
    pub noise_std: f64,
    /// Std of prototype entries.
    pub prototype_scale: f64,
    /// Std of the entries of the shared onset vector.
    pub onset_scale: f64,
    /// Per-frame decay of the onset vector within a token, in `[0, 1)`.
    pub onset_decay: f64,
    /// Std of the per-utterance additive offset.
    pub utterance_offset_std: f64,
    /// Applied in order to unlabeled and out-of-domain data.
    pub shift: Vec<DomainShift>,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            vocab: 8,
            dim: 16,
            n_labeled: 200,
            n_unlabeled: 2000,
            n_valid: 200,
            n_test: 200,
            label_len: (3, 10),
            frames_per_token: (2, 5),
            noise_std: 0.3,
            prototype_scale: 0.35,
            onset_scale: 1.2,
            onset_decay: 0.3,
            utterance_offset_std: 0.3,
            shift: Vec::new(),
            seed: 1,
        }
    }
}

impl CorpusSpec {
    /// The default corpus with unlabeled and out-of-domain data rotated and
    /// made noisier.
    pub fn shifted() -> Self {
        CorpusSpec {
            shift: vec![
                DomainShift {
                    kind: ShiftKind::LinearTransform,
                    magnitude: 0.6,
                },
                DomainShift {
                    kind: ShiftKind::NoiseScale,
                    magnitude: 1.5,
                },
            ],
            ..CorpusSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.vocab == 0 || self.vocab > u16::MAX as usize {
            return bad(format!("vocab {} outside 1..=65535", self.vocab));
        }
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.n_labeled + self.n_unlabeled == 0 {
            return bad("need at least one labeled or unlabeled utterance".into());
        }
        let (lmin, lmax) = self.label_len;
        if lmin > lmax {
            return bad(format!("empty label length range [{lmin}, {lmax}]"));
        }
        let (rmin, rmax) = self.frames_per_token;
        if rmin < 1 || rmin > rmax {
            return bad(format!(
                "frames per token range [{rmin}, {rmax}] must satisfy 1 ≤ r_min ≤ r_max"
            ));
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("prototype_scale", self.prototype_scale),
            ("onset_scale", self.onset_scale),
            ("utterance_offset_std", self.utterance_offset_std),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{name} = {v} must be finite and ≥ 0"));
            }
        }
        if !(0.0..1.0).contains(&self.onset_decay) {
            return bad(format!("onset_decay = {} outside [0, 1)", self.onset_decay));
        }
        if lmax == 0 {
            return bad("label length range must allow at least one token".into());
        }
        for s in &self.shift {
            s.validate()?;
        }
        Ok(())
    }

    pub fn is_shifted(&self) -> bool {
        self.shift.iter().any(|s| s.kind != ShiftKind::None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum Split {
    Labeled = 0,
    Unlabeled = 1,
    ValidIn = 2,
    TestIn = 3,
    ValidOut = 4,
    TestOut = 5,
}

impl Split {
    pub const ALL: [Split; 6] = [
        Split::Labeled,
        Split::Unlabeled,
        Split::ValidIn,
        Split::TestIn,
        Split::ValidOut,
        Split::TestOut,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Labeled => "labeled",
            Split::Unlabeled => "unlabeled",
            Split::ValidIn => "valid_in",
            Split::TestIn => "test_in",
            Split::ValidOut => "valid_out",
            Split::TestOut => "test_out",
        }
    }

    fn from_tag(tag: u8) -> Option<Split> {
        Split::ALL.get(tag as usize).copied()
    }

    fn shifted(self) -> bool {
        matches!(self, Split::Unlabeled | Split::ValidOut | Split::TestOut)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Utterance {
    /// `T × D` features.
    pub features: Array2<f32>,
    pub label: TokenSequence,
}

/// An unlabeled utterance. The generating label is kept for scoring only and
/// is reachable solely through [`UnlabeledUtterance::reveal_label`]; training
/// code receives feature views via [`Corpus::unlabeled_features`].
#[derive(Clone, Debug, PartialEq)]
pub struct UnlabeledUtterance {
    pub features: Array2<f32>,
    hidden_label: TokenSequence,
}

impl UnlabeledUtterance {
    pub fn reveal_label(&self) -> &TokenSequence {
        &self.hidden_label
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub spec: CorpusSpec,
    pub labeled: Vec<Utterance>,
    pub unlabeled: Vec<UnlabeledUtterance>,
    pub valid_in: Vec<Utterance>,
    pub test_in: Vec<Utterance>,
    pub valid_out: Vec<Utterance>,
    pub test_out: Vec<Utterance>,
}

impl Corpus {
    pub fn unlabeled_features(&self) -> Vec<ArrayView2<'_, f32>> {
        self.unlabeled.iter().map(|u| u.features.view()).collect()
    }

    /// Unlabeled utterances with their labels exposed, for topline training
    /// and evaluation.
    pub fn reveal_unlabeled(&self) -> Vec<Utterance> {
        self.unlabeled
            .iter()
            .map(|u| Utterance {
                features: u.features.clone(),
                label: u.hidden_label.clone(),
            })
            .collect()
    }

    pub fn split(&self, split: Split) -> Vec<(ArrayView2<'_, f32>, &TokenSequence)> {
        match split {
            Split::Labeled => labeled_views(&self.labeled),
            Split::Unlabeled => self
                .unlabeled
                .iter()
                .map(|u| (u.features.view(), &u.hidden_label))
                .collect(),
            Split::ValidIn => labeled_views(&self.valid_in),
            Split::TestIn => labeled_views(&self.test_in),
            Split::ValidOut => labeled_views(&self.valid_out),
            Split::TestOut => labeled_views(&self.test_out),
        }
    }

    fn len_of(&self, split: Split) -> usize {
        match split {
            Split::Labeled => self.labeled.len(),
            Split::Unlabeled => self.unlabeled.len(),
            Split::ValidIn => self.valid_in.len(),
            Split::TestIn => self.test_in.len(),
            Split::ValidOut => self.valid_out.len(),
            Split::TestOut => self.test_out.len(),
        }
    }
}

pub fn labeled_views(utts: &[Utterance]) -> Vec<(ArrayView2<'_, f32>, &TokenSequence)> {
    utts.iter().map(|u| (u.features.view(), &u.label)).collect()
}

/// Fixed quantities shared by every utterance of a corpus: prototypes and the
/// domain-shift transforms.
#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    /// `V × D` token prototypes.
    pub prototypes: Array2<f64>,
    /// Shared onset vector, length `D`.
    pub onset: Array1<f64>,
    /// Shifted-domain prototypes (identical when the chain has no jitter).
    pub shifted_prototypes: Array2<f64>,
    /// `D × D` transform applied to shifted-domain frames.
    pub transform: Array2<f64>,
    pub shifted_noise_std: f64,
}

impl SyntheticWorld {
    pub fn from_spec(spec: &CorpusSpec) -> Result<Self> {
        spec.validate()?;
        let (v, d) = (spec.vocab, spec.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let proto = Normal::new(0.0, spec.prototype_scale).expect("validated std");
        let prototypes = Array2::from_shape_fn((v, d), |_| proto.sample(&mut rng));
        let onset = Array1::from_shape_fn(d, |_| spec.onset_scale * rng.sample::<f64, _>(StandardNormal));

        let mut shifted_prototypes = prototypes.clone();
        let mut transform = Array2::eye(d);
        let mut noise = spec.noise_std;
        for shift in &spec.shift {
            match shift.kind {
                ShiftKind::None => {}
                ShiftKind::LinearTransform => {
                    transform = plane_rotation(d, shift.magnitude, &mut rng).dot(&transform);
                }
                ShiftKind::NoiseScale => noise *= shift.magnitude,
                ShiftKind::PrototypeJitter => {
                    let jitter = Normal::new(0.0, shift.magnitude).expect("validated");
                    shifted_prototypes.mapv_inplace(|x| x + jitter.sample(&mut rng));
                }
            }
        }
        Ok(SyntheticWorld {
            prototypes,
            onset,
            shifted_prototypes,
            transform,
            shifted_noise_std: noise,
        })
    }
}

/// Rotation by `angle` within each of `⌊d/2⌋` disjoint, randomly paired
/// coordinate planes.
fn plane_rotation(d: usize, angle: f64, rng: &mut impl Rng) -> Array2<f64> {
    let mut dims: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        dims.swap(i, rng.random_range(0..=i));
    }
    let (sin, cos) = angle.sin_cos();
    let mut rot = Array2::eye(d);
    for pair in dims.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        rot[[i, i]] = cos;
        rot[[j, j]] = cos;
        rot[[i, j]] = -sin;
        rot[[j, i]] = sin;
    }
    rot
}

/// SplitMix64 finalizer; gives each (split, index) pair its own seed so
/// utterances can be generated independently of one another.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn utterance_seed(seed: u64, split: Split, index: usize) -> u64 {
    mix(mix(seed ^ ((split as u64 + 1) << 56)) ^ index as u64)
}

fn generate_utterance(spec: &CorpusSpec, world: &SyntheticWorld, split: Split, index: usize) -> Utterance {
    let mut rng = ChaCha8Rng::seed_from_u64(utterance_seed(spec.seed, split, index));
    let shifted = split.shifted() && spec.is_shifted();
    let (prototypes, noise_std) = if shifted {
        (&world.shifted_prototypes, world.shifted_noise_std)
    } else {
        (&world.prototypes, spec.noise_std)
    };

    let len = rng.random_range(spec.label_len.0..=spec.label_len.1);
    let tokens: Vec<u32> = (0..len).map(|_| rng.random_range(0..spec.vocab as u32)).collect();
    let durations: Vec<usize> = (0..len)
        .map(|_| rng.random_range(spec.frames_per_token.0..=spec.frames_per_token.1))
        .collect();
    let frames: usize = durations.iter().sum();
    let offset = Array1::from_shape_fn(spec.dim, |_| {
        spec.utterance_offset_std * rng.sample::<f64, _>(StandardNormal)
    });

    let mut clean = Array2::<f64>::zeros((frames, spec.dim));
    let mut t = 0;
    for (&tok, &dur) in tokens.iter().zip(&durations) {
        let mut weight = 1.0;
        for _ in 0..dur {
            let mut row = clean.row_mut(t);
            row.assign(&prototypes.row(tok as usize));
            row.scaled_add(weight, &world.onset);
            row += &offset;
            weight *= spec.onset_decay;
            row.mapv_inplace(|x| x + noise_std * rng.sample::<f64, _>(StandardNormal));
            t += 1;
        }
    }
    if shifted {
        clean = clean.dot(&world.transform.t());
    }
    Utterance {
        features: clean.mapv(|x| x as f32),
        label: TokenSequence::new(tokens),
    }
}

fn generate_split(spec: &CorpusSpec, world: &SyntheticWorld, split: Split, n: usize) -> Vec<Utterance> {
    (0..n).map(|i| generate_utterance(spec, world, split, i)).collect()
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Corpus> {
    let world = SyntheticWorld::from_spec(spec)?;
    let unlabeled = generate_split(spec, &world, Split::Unlabeled, spec.n_unlabeled)
        .into_iter()
        .map(|u| UnlabeledUtterance {
            features: u.features,
            hidden_label: u.label,
        })
        .collect();
    Ok(Corpus {
        spec: spec.clone(),
        labeled: generate_split(spec, &world, Split::Labeled, spec.n_labeled),
        unlabeled,
        valid_in: generate_split(spec, &world, Split::ValidIn, spec.n_valid),
        test_in: generate_split(spec, &world, Split::TestIn, spec.n_test),
        valid_out: generate_split(spec, &world, Split::ValidOut, spec.n_valid),
        test_out: generate_split(spec, &world, Split::TestOut, spec.n_test),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CorpusHeader {
    version: u32,
    spec: CorpusSpec,
    counts: SplitCounts,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
struct SplitCounts {
    labeled: usize,
    unlabeled: usize,
    valid_in: usize,
    test_in: usize,
    valid_out: usize,
    test_out: usize,
}

impl SplitCounts {
    fn get(&self, split: Split) -> usize {
        match split {
            Split::Labeled => self.labeled,
            Split::Unlabeled => self.unlabeled,
            Split::ValidIn => self.valid_in,
            Split::TestIn => self.test_in,
            Split::ValidOut => self.valid_out,
            Split::TestOut => self.test_out,
        }
    }
}

/// Serializes to the `MPLCORP1` layout: magic, `u64` header length, JSON
/// header, then per utterance a tag byte (split), `u32 T`, `u32 L`, `T·D`
/// `f32` features row-major and `L` `u16` tokens.
pub fn encode_corpus(corpus: &Corpus) -> Result<Vec<u8>> {
    let counts = SplitCounts {
        labeled: corpus.labeled.len(),
        unlabeled: corpus.unlabeled.len(),
        valid_in: corpus.valid_in.len(),
        test_in: corpus.test_in.len(),
        valid_out: corpus.valid_out.len(),
        test_out: corpus.test_out.len(),
    };
    let header = CorpusHeader {
        version: CORPUS_VERSION,
        spec: corpus.spec.clone(),
        counts,
    };
    let mut w = Writer::new(CORPUS_MAGIC, &header)?;
    for split in Split::ALL {
        for (features, label) in corpus.split(split) {
            if features.ncols() != corpus.spec.dim {
                return Err(Error::Shape(format!(
                    "utterance width {} differs from corpus dim {}",
                    features.ncols(),
                    corpus.spec.dim
                )));
            }
            w.u8(split as u8);
            w.u32(features.nrows() as u32);
            w.u32(label.len() as u32);
            features.iter().for_each(|&x| w.f32(x));
            for &tok in label.tokens() {
                w.u16(u16::try_from(tok).map_err(|_| Error::InvalidArgument(format!("token {tok} exceeds u16")))?);
            }
        }
    }
    Ok(w.buf)
}

pub fn decode_corpus(data: &[u8]) -> Result<Corpus> {
    let (mut r, header): (_, CorpusHeader) = Reader::open("corpus", CORPUS_MAGIC, data)?;
    if header.version != CORPUS_VERSION {
        return Err(Error::Malformed {
            kind: "corpus",
            offset: 8,
            detail: format!("unsupported version {} (expected {CORPUS_VERSION})", header.version),
        });
    }
    let dim = header.spec.dim;
    let vocab = header.spec.vocab;
    let mut corpus = Corpus {
        spec: header.spec.clone(),
        labeled: Vec::with_capacity(header.counts.labeled),
        unlabeled: Vec::with_capacity(header.counts.unlabeled),
        valid_in: Vec::new(),
        test_in: Vec::new(),
        valid_out: Vec::new(),
        test_out: Vec::new(),
    };
    let total: usize = Split::ALL.iter().map(|&s| header.counts.get(s)).sum();
    for _ in 0..total {
        let record_at = r.offset();
        let tag = r.u8()?;
        let split = Split::from_tag(tag).ok_or_else(|| Error::Malformed {
            kind: "corpus",
            offset: record_at,
            detail: format!("unknown split tag {tag}"),
        })?;
        let frames = r.u32()? as usize;
        let len = r.u32()? as usize;
        let mut values = Vec::with_capacity(frames.saturating_mul(dim).min(1 << 24));
        for _ in 0..frames * dim {
            values.push(r.f32()?);
        }
        let mut tokens = Vec::with_capacity(len.min(1 << 16));
        for _ in 0..len {
            let at = r.offset();
            let tok = r.u16()?;
            if tok as usize >= vocab {
                return Err(Error::Malformed {
                    kind: "corpus",
                    offset: at,
                    detail: format!("token {tok} outside vocabulary of {vocab}"),
                });
            }
            tokens.push(tok as u32);
        }
        let features = Array2::from_shape_vec((frames, dim), values).expect("sized above");
        let label = TokenSequence::new(tokens);
        match split {
            Split::Labeled => corpus.labeled.push(Utterance { features, label }),
            Split::Unlabeled => corpus.unlabeled.push(UnlabeledUtterance {
                features,
                hidden_label: label,
            }),
            Split::ValidIn => corpus.valid_in.push(Utterance { features, label }),
            Split::TestIn => corpus.test_in.push(Utterance { features, label }),
            Split::ValidOut => corpus.valid_out.push(Utterance { features, label }),
            Split::TestOut => corpus.test_out.push(Utterance { features, label }),
        }
    }
    r.finish()?;
    for split in Split::ALL {
        if corpus.len_of(split) != header.counts.get(split) {
            return Err(r.malformed(format!(
                "{split:?} has {} records, header declares {}",
                corpus.len_of(split),
                header.counts.get(split)
            )));
        }
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_corpus(corpus)?).map_err(|e| Error::io(path, e))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_corpus(&data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> CorpusSpec {
        CorpusSpec {
            n_labeled: 4,
            n_unlabeled: 3,
            n_valid: 2,
            n_test: 1,
            ..CorpusSpec::shifted()
        }
    }

    #[test]
    fn frame_count_is_sum_of_durations() {
        let spec = small_spec();
        let corpus = generate_corpus(&spec).unwrap();
        for (features, label) in corpus.split(Split::Labeled) {
            let (rmin, rmax) = spec.frames_per_token;
            assert!(features.nrows() >= rmin * label.len());
            assert!(features.nrows() <= rmax * label.len());
            assert!((spec.label_len.0..=spec.label_len.1).contains(&label.len()));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = encode_corpus(&generate_corpus(&small_spec()).unwrap()).unwrap();
        let b = encode_corpus(&generate_corpus(&small_spec()).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = CorpusSpec {
            seed: 99,
            ..small_spec()
        };
        assert_ne!(a, encode_corpus(&generate_corpus(&other).unwrap()).unwrap());
    }

    #[test]
    fn rejects_infeasible_specs() {
        let mut spec = small_spec();
        spec.frames_per_token = (0, 3);
        assert!(matches!(generate_corpus(&spec), Err(Error::InvalidSpec(_))));
        let mut spec = small_spec();
        spec.n_labeled = 0;
        spec.n_unlabeled = 0;
        assert!(generate_corpus(&spec).is_err());
        let mut spec = small_spec();
        spec.shift = vec![DomainShift {
            kind: ShiftKind::None,
            magnitude: 1.0,
        }];
        assert!(generate_corpus(&spec).is_err());
    }

    #[test]
    fn plane_rotation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = plane_rotation(7, 0.8, &mut rng);
        let eye = r.dot(&r.t());
        for ((i, j), v) in eye.indexed_iter() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_small_corpus() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        let bytes = encode_corpus(&corpus).unwrap();
        let back = decode_corpus(&bytes).unwrap();
        assert_eq!(back, corpus);
        assert_eq!(encode_corpus(&back).unwrap(), bytes);
    }

    #[test]
    fn bad_tag_and_token_are_reported_with_offsets() {
        let corpus = generate_corpus(&small_spec()).unwrap();
        let bytes = encode_corpus(&corpus).unwrap();
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let first_record = 16 + hlen;

        let mut bad_tag = bytes.clone();
        bad_tag[first_record] = 42;
        match decode_corpus(&bad_tag) {
            Err(Error::Malformed { offset, .. }) => assert_eq!(offset, first_record as u64),
            other => panic!("{other:?}"),
        }

        let frames = u32::from_le_bytes(bytes[first_record + 1..first_record + 5].try_into().unwrap()) as usize;
        let tok_at = first_record + 9 + frames * corpus.spec.dim * 4;
        let mut bad_tok = bytes.clone();
        bad_tok[tok_at..tok_at + 2].copy_from_slice(&500u16.to_le_bytes());
        match decode_corpus(&bad_tok) {
            Err(Error::Malformed { offset, .. }) => assert_eq!(offset, tok_at as u64),
            other => panic!("{other:?}"),
        }
    }
}
