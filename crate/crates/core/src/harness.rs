//! Experiment driver: JSON configs, training runs and their artifacts.
//!
//! A run reads (or generates) a corpus, trains what its mode asks for, and
//! writes into `out_dir`:
//!
//! - `*.ckpt` checkpoints,
//! - `metrics.csv`, one row per model per epoch,
//! - `summary.json` with final error rates (no timings, so reruns compare
//!   byte for byte),
//! - `manifest.json` echoing the config and hashing every input file,
//! - `sweep_w.csv` for `sweep-w` runs.
//!
//! A failed run leaves `error.json` next to whatever it had written.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::ctc::TokenSequence;
use crate::data::{decode_corpus, generate_corpus, labeled_views, save_corpus, Corpus, CorpusSpec, Split};
use crate::error::{Error, Result};
use crate::metrics::{corpus_error_rate, wrr};
use crate::model::{Architecture, ParamVector};
use crate::mpl::{
    evaluate_ter, ipl_train, mpl_train, mpl_train_unsup_only, pl_train, supervised_train, EpochRecord, LabeledView,
    MplOutcome, NoObserver, OfflineUpdate, RunStats, TrainConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GenData,
    TrainBase,
    TrainMpl,
    TrainMplUnsup,
    TrainPl,
    TrainIpl,
    TrainTopline,
    Evaluate,
    SweepW,
}

impl Mode {
    pub const ALL: [Mode; 9] = [
        Mode::GenData,
        Mode::TrainBase,
        Mode::TrainMpl,
        Mode::TrainMplUnsup,
        Mode::TrainPl,
        Mode::TrainIpl,
        Mode::TrainTopline,
        Mode::Evaluate,
        Mode::SweepW,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::GenData => "gen-data",
            Mode::TrainBase => "train-base",
            Mode::TrainMpl => "train-mpl",
            Mode::TrainMplUnsup => "train-mpl-unsup",
            Mode::TrainPl => "train-pl",
            Mode::TrainIpl => "train-ipl",
            Mode::TrainTopline => "train-topline",
            Mode::Evaluate => "evaluate",
            Mode::SweepW => "sweep-w",
        }
    }

    /// Modes that start from a trained base model.
    pub fn needs_base(self) -> bool {
        matches!(
            self,
            Mode::TrainMpl | Mode::TrainMplUnsup | Mode::TrainPl | Mode::TrainIpl | Mode::SweepW
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown mode {s:?}")))
    }
}

/// Hidden-layer shape. Input and output sizes come from the corpus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelShape {
    pub context: usize,
    pub hidden: usize,
    pub n_hidden: usize,
}

impl Default for ModelShape {
    fn default() -> Self {
        ModelShape {
            context: 2,
            hidden: 64,
            n_hidden: 1,
        }
    }
}

impl ModelShape {
    pub fn resolve(&self, spec: &CorpusSpec) -> Architecture {
        Architecture {
            input_dim: spec.dim,
            context: self.context,
            hidden: self.hidden,
            n_hidden: self.n_hidden,
            vocab: spec.vocab,
        }
    }
}

/// One experiment. Every field has a default, so a config file only needs
/// the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Defaults to `<mode>-s<seed>`.
    pub run_id: Option<String>,
    /// Corpus file to read. `gen-data` writes it instead. Without it the
    /// corpus is generated in memory from `corpus_spec`.
    pub corpus: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub corpus_spec: CorpusSpec,
    pub model: ModelShape,
    /// Recipe for base and topline training.
    pub base_train: TrainConfig,
    /// Recipe for MPL, PL and IPL.
    pub train: TrainConfig,
    pub w: f64,
    pub w_values: Vec<f64>,
    pub ipl_rounds: usize,
    pub ipl_epochs_per_round: usize,
    pub seed: u64,
    pub deterministic: bool,
    /// Starting point for the semi-supervised modes; trained in-run if absent.
    pub base_checkpoint: Option<PathBuf>,
    /// Fully supervised reference for WRR.
    pub topline_checkpoint: Option<PathBuf>,
    /// Model scored by `evaluate`.
    pub checkpoint: Option<PathBuf>,
    /// JSON list of token lists scored by `evaluate` in place of a model.
    pub hypotheses: Option<PathBuf>,
    pub eval_split: Split,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::TrainMpl,
            run_id: None,
            corpus: None,
            out_dir: PathBuf::from("runs"),
            corpus_spec: CorpusSpec::default(),
            model: ModelShape::default(),
            base_train: TrainConfig::base(),
            train: TrainConfig::semi_supervised(),
            w: 0.5,
            w_values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            ipl_rounds: 4,
            ipl_epochs_per_round: 10,
            seed: 0,
            deterministic: true,
            base_checkpoint: None,
            topline_checkpoint: None,
            checkpoint: None,
            hypotheses: None,
            eval_split: Split::TestOut,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-s{}", self.mode, self.seed))
    }

    /// Applies `key=value`, where `key` is a dotted path into the JSON form
    /// of the config (`train.epochs`, `corpus_spec.noise_std`, ...). The value
    /// is parsed as JSON, falling back to a plain string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("override {assignment:?} is not key=value")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut root = serde_json::to_value(&*self)?;
        let mut slot = &mut root;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|obj| obj.get_mut(part))
                .ok_or_else(|| Error::InvalidConfig(format!("unknown config key {key:?}")))?;
        }
        *slot = value;
        *self =
            serde_json::from_value(root).map_err(|e| Error::InvalidConfig(format!("override {assignment:?}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let in_unit = |w: f64| (0.0..=1.0).contains(&w);
        if !in_unit(self.w) {
            return bad(format!("w = {} outside [0, 1]", self.w));
        }
        if let Some(w) = self.w_values.iter().find(|w| !in_unit(**w)) {
            return bad(format!("w_values entry {w} outside [0, 1]"));
        }
        if self.mode == Mode::SweepW && self.w_values.is_empty() {
            return bad("sweep-w needs at least one w value".into());
        }
        if self.mode == Mode::TrainIpl && self.ipl_rounds == 0 {
            return bad("train-ipl needs ipl_rounds >= 1".into());
        }
        if self.mode == Mode::Evaluate && self.checkpoint.is_some() == self.hypotheses.is_some() {
            return bad("evaluate needs exactly one of checkpoint or hypotheses".into());
        }
        if self.mode == Mode::GenData || self.corpus.is_none() {
            self.corpus_spec.validate()?;
        }
        self.model.resolve(&self.corpus_spec).validate()?;
        self.base_train.validate()?;
        self.train.validate()
    }

    /// Copy with the top-level `deterministic` flag pushed into both recipes.
    fn resolved(&self) -> Self {
        let mut config = self.clone();
        config.base_train.deterministic = self.deterministic;
        config.train.deterministic = self.deterministic;
        config
    }
}

/// One row of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub mode: String,
    pub epoch: usize,
    pub split: String,
    pub model: String,
    pub ter_percent: Option<f64>,
    pub loss_sup: f64,
    pub loss_unsup: f64,
    pub empty_pl_fraction: f64,
    pub mean_pl_len: f64,
    pub alpha: Option<f64>,
    pub w: Option<f64>,
    pub lr: f64,
    pub wall_clock_s: f64,
}

/// One point of a w-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: f64,
    pub alpha: f64,
    pub online_dev_ter: f64,
    pub offline_dev_ter: f64,
    pub online_ter: f64,
    pub offline_ter: f64,
    /// Largest per-epoch fraction of empty pseudo-labels.
    pub worst_empty_pl_fraction: f64,
    pub empty_pseudo_labels: usize,
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Summary {
    pub run_id: String,
    pub mode: String,
    pub seed: u64,
    pub eval_split: String,
    pub dev_split: Option<String>,
    /// Final TER (percent) on `eval_split`, by model.
    pub ter: BTreeMap<String, f64>,
    /// Final TER on the development split, by model.
    pub dev_ter: BTreeMap<String, f64>,
    /// WRR (percent) against the base and topline TERs in `ter`.
    pub wrr: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_empty_pl_fraction: Option<f64>,
    /// Eval-split TER after each IPL round.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ipl_round_ter: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stats: Option<RunStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_utterances: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ManifestInput {
    role: String,
    path: PathBuf,
    sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Manifest {
    run_id: String,
    config_sha256: String,
    config: ExperimentConfig,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
}

/// SHA-256 over `blob <len>\0<bytes>`, the framing git uses for objects.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SWEEP_FILE: &str = "sweep_w.csv";
pub const ERROR_FILE: &str = "error.json";
pub const DEFAULT_CORPUS_FILE: &str = "corpus.mplc";

/// Mutable state of a run in progress.
struct Run<'c> {
    config: &'c ExperimentConfig,
    run_id: String,
    rows: Vec<MetricsRow>,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
    summary: Summary,
}

impl<'c> Run<'c> {
    fn new(config: &'c ExperimentConfig) -> Self {
        let run_id = config.run_id();
        Run {
            config,
            summary: Summary {
                run_id: run_id.clone(),
                mode: config.mode.to_string(),
                seed: config.seed,
                eval_split: config.eval_split.as_str().to_string(),
                ..Summary::default()
            },
            run_id,
            rows: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(name)
    }

    fn read_input(&mut self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(ManifestInput {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: content_hash(&bytes),
        });
        Ok(bytes)
    }

    fn load_params(&mut self, role: &str, path: &Path, arch: &Architecture) -> Result<ParamVector> {
        self.read_input(role, path)?;
        let params = load_checkpoint(path)?.params;
        if params.arch() != arch {
            return Err(Error::ArchMismatch(format!(
                "{role} checkpoint {} has {:?}, corpus and config need {arch:?}",
                path.display(),
                params.arch()
            )));
        }
        Ok(params)
    }

    fn save(&mut self, name: &str, params: &ParamVector, step: u64) -> Result<()> {
        save_checkpoint(self.out(name), params, step)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn log(&mut self, run_id: &str, split: Split, history: &[EpochRecord], rename: Option<&str>) {
        for record in history {
            for (role, ter) in &record.valid_ter {
                self.rows.push(MetricsRow {
                    run_id: run_id.to_string(),
                    mode: self.config.mode.to_string(),
                    epoch: record.epoch,
                    split: split.as_str().to_string(),
                    model: rename.unwrap_or(role.as_str()).to_string(),
                    ter_percent: *ter,
                    loss_sup: record.loss_sup,
                    loss_unsup: record.loss_unsup,
                    empty_pl_fraction: record.empty_pl_fraction,
                    mean_pl_len: record.mean_pl_len,
                    alpha: record.alpha,
                    w: record.w,
                    lr: record.lr,
                    wall_clock_s: record.wall_clock_s,
                });
            }
        }
    }

    fn score(
        &mut self,
        name: &str,
        params: &ParamVector,
        dev: Option<&[LabeledView<'_>]>,
        eval: &[LabeledView<'_>],
    ) -> Result<()> {
        self.summary.ter.insert(name.to_string(), evaluate_ter(params, eval)?);
        if let Some(dev) = dev.filter(|d| !d.is_empty()) {
            self.summary
                .dev_ter
                .insert(name.to_string(), evaluate_ter(params, dev)?);
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Summary> {
        let ter = &self.summary.ter;
        if let (Some(&base), Some(&top)) = (ter.get("base"), ter.get("topline")) {
            let wrrs: BTreeMap<String, f64> = ter
                .iter()
                .filter(|(name, _)| !matches!(name.as_str(), "base" | "topline"))
                .filter_map(|(name, &t)| wrr(base, t, top).ok().map(|r| (name.clone(), r)))
                .collect();
            self.summary.wrr = wrrs;
        }
        if !self.rows.is_empty() {
            let path = self.out(METRICS_FILE);
            let mut writer = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
            for row in &self.rows {
                writer.serialize(row)?;
            }
            writer.flush().map_err(|e| Error::io(&path, e))?;
            self.outputs.push(METRICS_FILE.to_string());
        }
        write_json(&self.out(SUMMARY_FILE), &self.summary)?;
        self.outputs.push(SUMMARY_FILE.to_string());
        let config_json = serde_json::to_vec(self.config)?;
        let manifest_path = self.out(MANIFEST_FILE);
        let manifest = Manifest {
            run_id: self.run_id.clone(),
            config_sha256: content_hash(&config_json),
            config: self.config.clone(),
            inputs: self.inputs,
            outputs: self.outputs,
        };
        write_json(&manifest_path, &manifest)?;
        Ok(self.summary)
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Csv(e)
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    run_id: String,
    mode: &'a str,
    error: String,
    detail: String,
    partial_outputs: bool,
}

/// Short machine-readable name of an error variant.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidGrid(_) => "invalid_grid",
        Error::TokenOutOfRange { .. } => "token_out_of_range",
        Error::InfeasibleLabel { .. } => "infeasible_label",
        Error::EnumerationTooLarge { .. } => "enumeration_too_large",
        Error::Shape(_) => "shape",
        Error::ArchMismatch(_) => "arch_mismatch",
        Error::InvalidArch(_) => "invalid_arch",
        Error::NonFinite(_) => "non_finite",
        Error::InvalidArgument(_) => "invalid_argument",
        Error::InvalidSpec(_) => "invalid_spec",
        Error::InvalidConfig(_) => "invalid_config",
        Error::Diverged { .. } => "diverged",
        Error::BadMagic { .. } => "bad_magic",
        Error::Truncated { .. } => "truncated",
        Error::Malformed { .. } => "malformed",
        Error::Io { .. } => "io",
        Error::Json(_) => "json",
        Error::Csv(_) => "csv",
    }
}

/// Runs one experiment and writes its artifacts. On failure `error.json` is
/// written to `out_dir` (when it exists) before the error is returned.
pub fn run(config: &ExperimentConfig) -> Result<Summary> {
    let result = config.validate().and_then(|()| {
        std::fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
        execute(&config.resolved())
    });
    if let Err(e) = &result {
        if config.out_dir.is_dir() {
            let partial = std::fs::read_dir(&config.out_dir)
                .map(|mut d| d.next().is_some())
                .unwrap_or(false);
            let report = ErrorReport {
                run_id: config.run_id(),
                mode: config.mode.as_str(),
                error: error_kind(e).to_string(),
                detail: e.to_string(),
                partial_outputs: partial,
            };
            // best effort: the original error matters more than this one
            let _ = write_json(&config.out_dir.join(ERROR_FILE), &report);
        }
    }
    result
}

fn execute(config: &ExperimentConfig) -> Result<Summary> {
    let mut run = Run::new(config);
    if config.mode == Mode::GenData {
        let corpus = generate_corpus(&config.corpus_spec)?;
        let path = config
            .corpus
            .clone()
            .unwrap_or_else(|| config.out_dir.join(DEFAULT_CORPUS_FILE));
        save_corpus(&corpus, &path)?;
        run.outputs.push(path.display().to_string());
        run.summary.corpus_utterances = Some(Split::ALL.iter().map(|&s| corpus.split(s).len()).sum());
        return run.finish();
    }

    let corpus = match &config.corpus {
        Some(path) => {
            let bytes = run.read_input("corpus", path)?;
            decode_corpus(&bytes)?
        }
        None => generate_corpus(&config.corpus_spec)?,
    };
    let arch = config.model.resolve(&corpus.spec);
    arch.validate()?;
    let eval = corpus.split(config.eval_split);
    let dev_split = match config.mode {
        Mode::TrainBase => Split::ValidIn,
        _ => Split::ValidOut,
    };
    let dev = corpus.split(dev_split);
    if config.mode != Mode::Evaluate {
        run.summary.dev_split = Some(dev_split.as_str().to_string());
    }

    let base = if config.mode.needs_base() || config.mode == Mode::TrainBase {
        Some(obtain_base(&mut run, &corpus, &arch, &eval)?)
    } else {
        None
    };
    if let Some(path) = &config.topline_checkpoint {
        let top = run.load_params("topline", path, &arch)?;
        run.score("topline", &top, Some(&dev), &eval)?;
    }

    let labeled = labeled_views(&corpus.labeled);
    let unlabeled = corpus.unlabeled_features();
    let run_id = run.run_id.clone();
    match config.mode {
        Mode::GenData | Mode::TrainBase => {}
        Mode::TrainTopline => {
            let revealed = corpus.reveal_unlabeled();
            let mut all = labeled.clone();
            all.extend(labeled_views(&revealed));
            let out = supervised_train(arch, &all, &dev, &config.base_train, config.seed, &mut NoObserver)?;
            run.log(&run_id, dev_split, &out.history, None);
            run.save("topline.ckpt", &out.params, out.stats.optimizer_steps)?;
            run.score("topline", &out.params, Some(&dev), &eval)?;
            run.summary.stats = Some(out.stats);
        }
        Mode::TrainMpl | Mode::TrainMplUnsup => {
            let base = base.as_ref().expect("base trained above");
            let update = OfflineUpdate::from_weight(config.w)?;
            let out = if config.mode == Mode::TrainMpl {
                mpl_train(
                    base,
                    &labeled,
                    &unlabeled,
                    &dev,
                    update,
                    &config.train,
                    config.seed,
                    &mut NoObserver,
                )?
            } else {
                mpl_train_unsup_only(
                    base,
                    &unlabeled,
                    &dev,
                    update,
                    &config.train,
                    config.seed,
                    &mut NoObserver,
                )?
            };
            run.log(&run_id, dev_split, &out.history, None);
            run.save("online.ckpt", &out.online, out.state.stats.optimizer_steps)?;
            run.save("offline.ckpt", &out.offline, out.state.step)?;
            run.score("online", &out.online, Some(&dev), &eval)?;
            run.score("offline", &out.offline, Some(&dev), &eval)?;
            run.summary.alpha = Some(out.state.alpha);
            run.summary.worst_empty_pl_fraction = Some(worst_empty(&out));
            run.summary.stats = Some(out.state.stats);
        }
        Mode::TrainPl => {
            let base = base.as_ref().expect("base trained above");
            let out = pl_train(
                base,
                &labeled,
                &unlabeled,
                &dev,
                &config.train,
                config.seed,
                &mut NoObserver,
            )?;
            run.log(&run_id, dev_split, &out.history, None);
            run.save("student.ckpt", &out.params, out.stats.optimizer_steps)?;
            run.score("student", &out.params, Some(&dev), &eval)?;
            run.summary.stats = Some(out.stats);
        }
        Mode::TrainIpl => {
            let base = base.as_ref().expect("base trained above");
            let out = ipl_train(
                base,
                &labeled,
                &unlabeled,
                &dev,
                config.ipl_rounds,
                config.ipl_epochs_per_round,
                &config.train,
                config.seed,
                &mut NoObserver,
            )?;
            run.log(&run_id, dev_split, &out.history, None);
            for round in &out.rounds {
                run.save(&format!("student_round{}.ckpt", round.round), &round.params, 0)?;
                run.summary.ipl_round_ter.push(evaluate_ter(&round.params, &eval)?);
            }
            run.save("student.ckpt", &out.params, out.stats.optimizer_steps)?;
            run.score("student", &out.params, Some(&dev), &eval)?;
            run.summary.stats = Some(out.stats);
        }
        Mode::Evaluate => {
            if let Some(path) = &config.checkpoint {
                let params = run.load_params("checkpoint", path, &arch)?;
                run.score("model", &params, None, &eval)?;
            } else if let Some(path) = &config.hypotheses {
                let bytes = run.read_input("hypotheses", path)?;
                let hyps: Vec<TokenSequence> = serde_json::from_slice(&bytes)?;
                if hyps.len() != eval.len() {
                    return Err(Error::InvalidArgument(format!(
                        "{} hypotheses for {} reference utterances",
                        hyps.len(),
                        eval.len()
                    )));
                }
                let ter = corpus_error_rate(eval.iter().map(|(_, r)| *r).zip(&hyps))?;
                run.summary.ter.insert("hypotheses".into(), ter);
            }
        }
        Mode::SweepW => {
            let base = base.as_ref().expect("base trained above");
            let rows = sweep_points(&mut run, base, &labeled, &unlabeled, &dev, &eval, dev_split)?;
            let path = run.out(SWEEP_FILE);
            let mut writer = csv::Writer::from_path(&path).map_err(|e| csv_io(&path, e))?;
            for row in &rows {
                writer.serialize(row)?;
            }
            writer.flush().map_err(|e| Error::io(&path, e))?;
            run.outputs.push(SWEEP_FILE.to_string());
            run.summary.sweep = rows;
        }
    }
    run.finish()
}

fn obtain_base(
    run: &mut Run<'_>,
    corpus: &Corpus,
    arch: &Architecture,
    eval: &[LabeledView<'_>],
) -> Result<ParamVector> {
    let config = run.config;
    let dev = corpus.split(Split::ValidIn);
    let base = match &config.base_checkpoint {
        Some(path) => run.load_params("base", path, arch)?,
        None => {
            let labeled = labeled_views(&corpus.labeled);
            let out = supervised_train(*arch, &labeled, &dev, &config.base_train, config.seed, &mut NoObserver)?;
            let run_id = run.run_id.clone();
            run.log(&run_id, Split::ValidIn, &out.history, None);
            run.save("base.ckpt", &out.params, out.stats.optimizer_steps)?;
            if config.mode == Mode::TrainBase {
                run.summary.stats = Some(out.stats);
            }
            out.params
        }
    };
    let semi_dev = corpus.split(Split::ValidOut);
    let dev_for_summary = if config.mode == Mode::TrainBase {
        &dev
    } else {
        &semi_dev
    };
    run.score("base", &base, Some(dev_for_summary), eval)?;
    Ok(base)
}

fn worst_empty(out: &MplOutcome) -> f64 {
    out.history.iter().map(|r| r.empty_pl_fraction).fold(0.0, f64::max)
}

fn sweep_points(
    run: &mut Run<'_>,
    base: &ParamVector,
    labeled: &[LabeledView<'_>],
    unlabeled: &[ArrayView2<'_, f32>],
    dev: &[LabeledView<'_>],
    eval: &[LabeledView<'_>],
    dev_split: Split,
) -> Result<Vec<SweepRow>> {
    let config = run.config;
    let mut rows = Vec::with_capacity(config.w_values.len());
    for &w in &config.w_values {
        let update = OfflineUpdate::from_weight(w)?;
        let out = mpl_train(
            base,
            labeled,
            unlabeled,
            dev,
            update,
            &config.train,
            config.seed,
            &mut NoObserver,
        )?;
        let point_id = format!("{}-w{w}", run.run_id);
        run.log(&point_id, dev_split, &out.history, None);
        rows.push(SweepRow {
            w,
            alpha: out.state.alpha,
            online_dev_ter: evaluate_ter(&out.online, dev)?,
            offline_dev_ter: evaluate_ter(&out.offline, dev)?,
            online_ter: evaluate_ter(&out.online, eval)?,
            offline_ter: evaluate_ter(&out.offline, eval)?,
            worst_empty_pl_fraction: worst_empty(&out),
            empty_pseudo_labels: out.state.stats.empty_pseudo_labels,
        });
    }
    Ok(rows)
}
