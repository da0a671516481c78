use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use sha2::{Digest, Sha256};
use vqtts_kit::pipeline::{self, toy, Config, DecodeMode, DecodeOptions, FeatureStore, Task};
use vqtts_kit::Error;

fn toy_config(dir: &Path) -> Config {
    let path = toy::write_toy_corpus(dir, &toy::ToySpec::default()).unwrap();
    Config::load(&path).unwrap()
}

fn run_all(cfg: &Config) {
    pipeline::cmd_extract(cfg).unwrap();
    pipeline::cmd_train_vq(cfg, None).unwrap();
    pipeline::cmd_label_prosody(cfg, None).unwrap();
    pipeline::cmd_train_lm(cfg).unwrap();
    pipeline::cmd_decode(cfg, DecodeOptions::from_config(cfg, None, None)).unwrap();
    pipeline::cmd_evaluate(cfg).unwrap();
    pipeline::cmd_export_pitch(cfg, None, None).unwrap();
}

fn digest_tree(root: &Path) -> BTreeMap<PathBuf, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let hash = Sha256::digest(std::fs::read(&path).unwrap());
                let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), hex);
            }
        }
    }
    out
}

#[test]
fn end_to_end_on_toy_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    run_all(&cfg);

    let store = FeatureStore::load(&cfg.store_path()).unwrap();
    assert_eq!(store.records.len(), 11);
    for r in &store.records {
        let lab = vqtts_kit::prosody::Alignment::load(&dir.path().join(format!("lab/{}.lab", r.id))).unwrap();
        assert_eq!(r.n_frames(), lab.n_frames);
        assert_eq!(r.tokens.len(), r.n_frames());
        assert_eq!(r.pl_labels.len(), r.segments.len());
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(cfg.output_path().join(pipeline::REPORT_FILE)).unwrap()).unwrap();
    for key in ["gpe", "token_accuracy", "pl_label_accuracy"] {
        let v = report[key].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{key} = {v}");
    }
}

#[test]
fn two_utterance_manifest_gives_two_records() {
    let dir = tempfile::tempdir().unwrap();
    let spec = toy::ToySpec { n_train: 2, n_valid: 0, n_test: 0, ..Default::default() };
    let cfg = Config::load(&toy::write_toy_corpus(dir.path(), &spec).unwrap()).unwrap();
    let summary = pipeline::cmd_extract(&cfg).unwrap();
    assert_eq!(summary.records, 2);
}

#[test]
fn empty_manifest_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("manifest.tsv"), "# nothing\n").unwrap();
    let cfg = Config { base_dir: dir.path().to_path_buf(), ..Config::default() };
    let err = pipeline::cmd_extract(&cfg).unwrap_err();
    assert!(matches!(err, Error::EmptyManifest));
    assert_eq!(err.to_string(), "empty manifest");
}

#[test]
fn unreadable_utterance_is_recorded_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    std::fs::remove_file(dir.path().join("wav/toy003.wav")).unwrap();
    let err = pipeline::cmd_extract(&cfg).unwrap_err();
    assert!(matches!(err, Error::UtteranceFailures { failed: 1, total: 11 }));
    let errors = std::fs::read_to_string(cfg.store_path().join(pipeline::ERRORS_FILE)).unwrap();
    assert_eq!(errors.lines().count(), 1);
    assert!(errors.contains("toy003"));
    assert_eq!(FeatureStore::load(&cfg.store_path()).unwrap().records.len(), 10);
}

#[test]
fn byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = toy_config(a.path());
    let cb = toy_config(b.path());
    pipeline::with_threads(Some(1), || run_all(&ca)).unwrap();
    pipeline::with_threads(Some(4), || run_all(&cb)).unwrap();
    let (da, db) = (digest_tree(a.path()), digest_tree(b.path()));
    assert!(da.len() > 20);
    assert_eq!(da, db);

    // Re-running extraction overwrites deterministically.
    pipeline::cmd_extract(&ca).unwrap();
    pipeline::cmd_extract(&cb).unwrap();
    let store = |d: &Path| digest_tree(&d.join("store"));
    assert_eq!(store(a.path()), store(b.path()));
}

#[test]
fn fixed_seed_gives_identical_models() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    pipeline::cmd_extract(&cfg).unwrap();
    pipeline::cmd_train_vq(&cfg, Some(3)).unwrap();
    pipeline::cmd_label_prosody(&cfg, Some(3)).unwrap();
    let first = digest_tree(&cfg.model_path());
    pipeline::cmd_train_vq(&cfg, Some(3)).unwrap();
    pipeline::cmd_label_prosody(&cfg, Some(3)).unwrap();
    assert_eq!(first, digest_tree(&cfg.model_path()));
    let meta: serde_json::Value =
        serde_json::from_slice(&std::fs::read(cfg.model_path().join("vq.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 3);
}

#[test]
fn beam_one_matches_greedy_and_wider_beams_dominate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    pipeline::cmd_extract(&cfg).unwrap();
    pipeline::cmd_train_vq(&cfg, None).unwrap();
    pipeline::cmd_label_prosody(&cfg, None).unwrap();
    pipeline::cmd_train_lm(&cfg).unwrap();
    let hyp_path = cfg.output_path().join(pipeline::HYPOTHESES_FILE);

    let decode = |mode, beam| {
        let opts = DecodeOptions::from_config(&cfg, Some(mode), beam);
        let recs = pipeline::cmd_decode(&cfg, opts).unwrap();
        (recs, std::fs::read(&hyp_path).unwrap())
    };
    let (_, greedy) = decode(DecodeMode::Greedy, None);
    let (_, beam1) = decode(DecodeMode::Beam, Some(1));
    assert_eq!(greedy, beam1);

    let top = |recs: &[pipeline::HypothesisRecord]| {
        recs.iter().filter(|r| r.rank == 0).map(|r| ((r.utt.clone(), r.task), r.log_prob)).collect::<BTreeMap<_, _>>()
    };
    let (r5, _) = decode(DecodeMode::Beam, Some(5));
    let (r10, _) = decode(DecodeMode::Beam, Some(10));
    let (t5, t10) = (top(&r5), top(&r10));
    assert_eq!(t5.len(), t10.len());
    for (k, lp5) in &t5 {
        assert!(t10[k] >= lp5 - 1e-9, "{k:?}: {} < {lp5}", t10[k]);
    }
    assert!(t5.keys().any(|(_, t)| *t == Task::Pl));
}

#[test]
fn reference_hypotheses_score_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    run_all(&cfg);
    let store = FeatureStore::load(&cfg.store_path()).unwrap();
    let mut recs = Vec::new();
    for r in store.split("test") {
        for (task, tokens) in [(Task::Pl, &r.pl_labels), (Task::Vq, &r.tokens)] {
            recs.push(pipeline::HypothesisRecord { utt: r.id.clone(), task, rank: 0, log_prob: 0.0, tokens: tokens.clone() });
        }
    }
    pipeline::write_hypotheses(&cfg.output_path().join(pipeline::HYPOTHESES_FILE), &recs).unwrap();
    let report = pipeline::cmd_evaluate(&cfg).unwrap();
    assert_eq!(report.token_accuracy, 1.0);
    assert_eq!(report.pl_label_accuracy, 1.0);
    assert_eq!(report.gpe, 0.0);
}

#[test]
fn hypotheses_for_unknown_utterance_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    run_all(&cfg);
    let recs = vec![pipeline::HypothesisRecord { utt: "ghost".into(), task: Task::Vq, rank: 0, log_prob: 0.0, tokens: vec![0] }];
    pipeline::write_hypotheses(&cfg.output_path().join(pipeline::HYPOTHESES_FILE), &recs).unwrap();
    assert!(matches!(pipeline::cmd_evaluate(&cfg), Err(Error::MissingReference(_))));
}

#[test]
fn vocabulary_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    run_all(&cfg);
    let vocab = cfg.model_path().join(pipeline::VOCAB_FILE);
    std::fs::write(&vocab, "[0, 1, 2]").unwrap();
    let opts = DecodeOptions::from_config(&cfg, None, None);
    assert!(matches!(pipeline::cmd_decode(&cfg, opts), Err(Error::VocabMismatch(_))));
}

#[test]
fn export_writes_long_format_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = toy_config(dir.path());
    run_all(&cfg);
    let out = dir.path().join("pitch.csv");
    let export = pipeline::cmd_export_pitch(&cfg, Some("toy009"), Some(&out)).unwrap();
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame_index,hypothesis_id,log_pitch,voiced"));
    let n_frames = export.tracks[0].len();
    assert_eq!(lines.count(), n_frames * export.tracks.len());
    assert_eq!(export.tracks.len(), cfg.decode.beam_pl);
}

fn cli(cfg_path: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_vqtts-kit"))
        .args(args)
        .arg("--config")
        .arg(cfg_path)
        .env("VQTTS_KIT_THREADS", "2")
        .output()
        .unwrap()
}

#[test]
fn cli_runs_every_command_and_reports_errors_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = toy::write_toy_corpus(dir.path(), &toy::ToySpec::default()).unwrap();
    let out = cli(&cfg_path, &["decode"]);
    assert!(!out.status.success());
    let record: serde_json::Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert!(!record["error"].as_str().unwrap().is_empty());
    assert!(record["message"].is_string());

    for cmd in ["extract", "train-vq", "label-prosody", "train-lm", "decode", "evaluate", "export-pitch"] {
        let out = cli(&cfg_path, &[cmd]);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let out = cli(&cfg_path, &["decode", "--mode", "greedy", "--seed", "1"]);
    assert!(out.status.success());
}
