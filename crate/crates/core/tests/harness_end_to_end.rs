use std::collections::BTreeMap;
use std::path::Path;

use mpl_core::harness::{content_hash, MetricsRow, SweepRow, MANIFEST_FILE, METRICS_FILE, SUMMARY_FILE, SWEEP_FILE};
use mpl_core::{generate_corpus, run, CorpusSpec, ExperimentConfig, Mode, Split, Summary};

fn small(mode: Mode, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        mode,
        out_dir: out.to_path_buf(),
        corpus_spec: CorpusSpec {
            n_labeled: 16,
            n_unlabeled: 24,
            n_valid: 8,
            n_test: 8,
            ..CorpusSpec::shifted()
        },
        w_values: vec![0.0, 0.5, 1.0],
        ipl_rounds: 2,
        ipl_epochs_per_round: 1,
        ..ExperimentConfig::default()
    };
    c.model.hidden = 8;
    c.base_train.epochs = 2;
    c.train.epochs = 2;
    c
}

fn read_summary(dir: &Path) -> Summary {
    serde_json::from_str(&std::fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap()
}

fn read_metrics(dir: &Path) -> Vec<MetricsRow> {
    csv::Reader::from_path(dir.join(METRICS_FILE))
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

fn assert_epochs_increase(rows: &[MetricsRow]) {
    let mut last: BTreeMap<(String, String), usize> = BTreeMap::new();
    for row in rows {
        let key = (row.run_id.clone(), row.model.clone());
        if let Some(&prev) = last.get(&key) {
            assert!(row.epoch > prev, "{key:?}: epoch {} after {prev}", row.epoch);
        }
        last.insert(key, row.epoch);
    }
}

#[test]
fn gen_data_then_train_base_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let gen = run(&small(Mode::GenData, &data)).unwrap();
    let corpus_path = data.join("corpus.mplc");
    assert!(corpus_path.is_file());
    assert_eq!(gen.corpus_utterances, Some(16 + 24 + 4 * 8));

    let base_dir = dir.path().join("base");
    let mut cfg = small(Mode::TrainBase, &base_dir);
    cfg.corpus = Some(corpus_path.clone());
    let summary = run(&cfg).unwrap();
    assert_eq!(summary.dev_split.as_deref(), Some("valid_in"));
    assert!(summary.ter.contains_key("base"));
    let ckpt = base_dir.join("base.ckpt");
    assert!(ckpt.is_file());
    let rows = read_metrics(&base_dir);
    assert_eq!(rows.len(), 2);
    assert_epochs_increase(&rows);

    // the manifest hashes what was actually read
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(base_dir.join(MANIFEST_FILE)).unwrap()).unwrap();
    let input = &manifest["inputs"][0];
    assert_eq!(input["role"], "corpus");
    assert_eq!(
        input["sha256"],
        content_hash(&std::fs::read(&corpus_path).unwrap()).as_str()
    );
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(outputs.contains(&"base.ckpt") && outputs.contains(&SUMMARY_FILE));

    let eval_dir = dir.path().join("eval");
    let mut eval = small(Mode::Evaluate, &eval_dir);
    eval.corpus = Some(corpus_path);
    eval.checkpoint = Some(ckpt);
    let scored = run(&eval).unwrap();
    assert_eq!(scored.ter["model"], summary.ter["base"]);
}

#[test]
fn reference_hypotheses_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::Evaluate, dir.path());
    let corpus = generate_corpus(&cfg.corpus_spec).unwrap();
    let refs: Vec<Vec<u32>> = corpus
        .split(Split::TestOut)
        .iter()
        .map(|(_, l)| l.tokens().to_vec())
        .collect();
    let hyp_path = dir.path().join("hyps.json");
    std::fs::write(&hyp_path, serde_json::to_string(&refs).unwrap()).unwrap();
    cfg.hypotheses = Some(hyp_path.clone());
    assert_eq!(run(&cfg).unwrap().ter["hypotheses"], 0.0);

    let mut wrong = refs.clone();
    wrong.pop();
    std::fs::write(&hyp_path, serde_json::to_string(&wrong).unwrap()).unwrap();
    assert!(run(&cfg).is_err());
}

#[test]
fn summaries_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&small(Mode::TrainMpl, &a)).unwrap();
    run(&small(Mode::TrainMpl, &b)).unwrap();
    assert_eq!(
        std::fs::read(a.join(SUMMARY_FILE)).unwrap(),
        std::fs::read(b.join(SUMMARY_FILE)).unwrap()
    );
    for name in ["online.ckpt", "offline.ckpt", "base.ckpt"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let summary = read_summary(&a);
    assert_eq!(summary.dev_split.as_deref(), Some("valid_out"));
    assert!(summary.alpha.is_some());
    assert_epochs_increase(&read_metrics(&a));
}

#[test]
fn sweep_writes_one_row_per_weight() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Mode::SweepW, dir.path());
    let summary = run(&cfg).unwrap();
    let rows: Vec<SweepRow> = csv::Reader::from_path(dir.path().join(SWEEP_FILE))
        .unwrap()
        .deserialize()
        .map(|r| r.unwrap())
        .collect();
    let ws: Vec<f64> = rows.iter().map(|r| r.w).collect();
    assert_eq!(ws, cfg.w_values);
    assert_eq!(rows[0].alpha, 0.0);
    assert_eq!(rows[2].alpha, 1.0);
    assert_eq!(summary.sweep, rows);
    assert_epochs_increase(&read_metrics(dir.path()));
}

#[test]
fn ipl_reports_each_round() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run(&small(Mode::TrainIpl, dir.path())).unwrap();
    assert_eq!(summary.ipl_round_ter.len(), 2);
    assert!(dir.path().join("student_round1.ckpt").is_file());
    assert!(dir.path().join("student_round2.ckpt").is_file());
    assert_epochs_increase(&read_metrics(dir.path()));
}

#[test]
fn failures_leave_an_error_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(Mode::TrainMpl, dir.path());
    cfg.corpus = Some(dir.path().join("missing.mplc"));
    assert!(run(&cfg).is_err());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("error.json")).unwrap()).unwrap();
    assert_eq!(report["error"], "io");
    assert_eq!(report["mode"], "train-mpl");
}
