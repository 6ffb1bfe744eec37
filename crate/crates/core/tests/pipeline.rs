mod common;

use std::fs;
use std::path::Path;

use common::{echo_config, synthetic_corpus, write_corpus};
use twp::cli::pipeline::{DONE_MARKER, KEPT_FILE, MANIFEST_FILE, MIXED_FILE, PACKED_FILE, REJECTED_FILE};
use twp::cli::{run_pipeline, PipelineError, PipelineOptions, Stage, StopPoint, FAILED_MARKER, SNAPSHOT_FILE};
use twp::corpus::jsonl::read_all;
use twp::pack::PackReader;
use twp::translate::{EchoBackend, RunMode};
use twp::{Document, Lang};

fn opts(mode: RunMode, stop: Option<StopPoint>) -> PipelineOptions {
    PipelineOptions { mode, stop }
}

fn ids(path: &Path) -> Vec<String> {
    read_all(path, true).unwrap().0.into_iter().map(|d| d.id).collect()
}

#[test]
fn thousand_docs_with_echo_backend() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(1000, 1));
    let out = tmp.path().join("run");
    let cfg = echo_config("");
    let report = run_pipeline(&cfg, &EchoBackend, &input, &out, &opts(RunMode::Fresh, None)).unwrap();

    for s in Stage::ALL {
        let d = out.join(s.dir_name());
        assert!(d.join(SNAPSHOT_FILE).is_file(), "{s:?}");
        assert!(d.join(DONE_MARKER).is_file(), "{s:?}");
        assert!(d.join(MANIFEST_FILE).is_file(), "{s:?}");
    }
    assert!(out.join(SNAPSHOT_FILE).is_file());
    assert!(report.pack.identity_holds());
    assert!(report.pack.sequence_count > 0);
    let r = PackReader::open(&out.join("05-pack").join(PACKED_FILE)).unwrap();
    assert_eq!(r.header().sequence_count, report.pack.sequence_count);

    // every document lands in exactly one place per stage
    let f = &report.filter;
    assert_eq!(f.documents_in, 1000);
    assert_eq!(f.kept + f.rejected, f.documents_in);
    let kept = ids(&out.join("01-filter").join(KEPT_FILE));
    let rejected = ids(&out.join("01-filter").join(REJECTED_FILE));
    assert_eq!(kept.len() + rejected.len(), 1000);
    assert!(rejected.len() > 10, "junk documents are rejected");

    let d = &report.dedup;
    assert_eq!(d.documents_in, f.kept);
    assert_eq!(d.kept + d.removed, d.documents_in);
    assert!(d.removed > 0, "planted copies are removed");

    let t = report.translate.as_ref().unwrap();
    assert_eq!(t.documents_in, d.kept);
    for lang in [Lang::Fr, Lang::De, Lang::Es] {
        let c = &t.targets[&lang];
        assert_eq!(c.ok + c.failed + c.same_language, d.kept);
        assert_eq!(c.failed, 0);
    }

    // balanced default mixture: one source per language with equal budgets
    assert_eq!(report.mix.sources.len(), 4);
    let budgets: Vec<u64> = report.mix.sources.iter().map(|s| s.budget).collect();
    assert!(budgets.windows(2).all(|w| w[0] == w[1]));
    let mixed: Vec<Document> = read_all(out.join("04-mix").join(MIXED_FILE), true).unwrap().0;
    assert_eq!(mixed.len() as u64, report.mix.total_documents);
    assert_eq!(report.pack.documents + report.pack.skipped_empty_docs, mixed.len() as u64);
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(200, 2));
    let cfg = echo_config("[pack]\nseq_len = 256\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        run_pipeline(&cfg, &EchoBackend, &input, out, &opts(RunMode::Fresh, None)).unwrap();
    }
    let files = [
        "05-pack/packed.bin",
        "05-pack/manifest.json",
        "04-mix/manifest.json",
        "04-mix/mixed.jsonl",
        "03-translate/manifest.json",
        "02-dedup/manifest.jsonl",
        "01-filter/manifest.json",
        "pipeline.json",
        SNAPSHOT_FILE,
    ];
    for f in files {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn resume_after_interruption_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(150, 3));
    let cfg = echo_config("[pack]\nseq_len = 128\n");
    let reference = tmp.path().join("ref");
    run_pipeline(&cfg, &EchoBackend, &input, &reference, &opts(RunMode::Fresh, None)).unwrap();
    let want = fs::read(reference.join("05-pack").join(PACKED_FILE)).unwrap();

    let stops = [
        StopPoint::AfterStage(Stage::Filter),
        StopPoint::AfterStage(Stage::Dedup),
        StopPoint::TranslatePairs(1),
        StopPoint::TranslatePairs(170),
        StopPoint::AfterStage(Stage::Translate),
        StopPoint::AfterStage(Stage::Mix),
    ];
    for (i, stop) in stops.into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let err = run_pipeline(&cfg, &EchoBackend, &input, &out, &opts(RunMode::Fresh, Some(stop))).unwrap_err();
        assert!(matches!(err, PipelineError::Interrupted(_)), "{err}");
        let report = run_pipeline(&cfg, &EchoBackend, &input, &out, &opts(RunMode::Resume, None)).unwrap();
        assert!(!report.skipped.is_empty(), "{stop:?} reused finished stages");
        let got = fs::read(out.join("05-pack").join(PACKED_FILE)).unwrap();
        assert!(got == want, "{stop:?}: packed output differs");
    }
}

#[test]
fn existing_run_needs_resume_or_restart() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(30, 4));
    let out = tmp.path().join("run");
    let cfg = echo_config("[pack]\nseq_len = 64\n");
    run_pipeline(&cfg, &EchoBackend, &input, &out, &opts(RunMode::Fresh, None)).unwrap();

    let err = run_pipeline(&cfg, &EchoBackend, &input, &out, &opts(RunMode::Fresh, None)).unwrap_err();
    assert!(matches!(err, PipelineError::ExistingRun(_)));
    assert_eq!(err.exit_code(), 2);

    let mut changed = cfg.clone();
    changed.seed = 99;
    let err = run_pipeline(&changed, &EchoBackend, &input, &out, &opts(RunMode::Resume, None)).unwrap_err();
    assert!(matches!(err, PipelineError::ConfigChanged(_)));

    let report = run_pipeline(&changed, &EchoBackend, &input, &out, &opts(RunMode::Restart, None)).unwrap();
    assert!(report.skipped.is_empty());
    let report = run_pipeline(&changed, &EchoBackend, &input, &out, &opts(RunMode::Resume, None)).unwrap();
    assert_eq!(report.skipped, Stage::ALL);
}

#[test]
fn stage_failure_leaves_failed_marker() {
    let tmp = tempfile::tempdir().unwrap();
    let mut docs = synthetic_corpus(20, 5);
    // no stop-word list for `other`: a configuration error inside the filter stage
    docs.push(Document::new("x", Lang::Other, "Texte sans langue connue."));
    let input = write_corpus(tmp.path(), "in.jsonl", &docs);
    let out = tmp.path().join("run");
    let err = run_pipeline(&echo_config(""), &EchoBackend, &input, &out, &opts(RunMode::Fresh, None)).unwrap_err();
    assert!(matches!(err, PipelineError::Stage { stage: Stage::Filter, .. }), "{err}");
    assert_eq!(err.exit_code(), 1);
    assert!(out.join("01-filter").join(FAILED_MARKER).is_file());
    assert!(!out.join("01-filter").join(DONE_MARKER).exists());
    assert!(!out.join("02-dedup").exists());
}

#[test]
fn translation_stage_is_optional() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(50, 6));
    let out = tmp.path().join("run");
    let mut cfg = echo_config("[pack]\nseq_len = 64\n");
    cfg.translate.enabled = false;
    let report = run_pipeline(&cfg, &EchoBackend, &input, &out, &opts(RunMode::Fresh, None)).unwrap();
    assert!(report.translate.is_none());
    assert!(!out.join("03-translate").exists());
    assert_eq!(report.mix.sources.len(), 1);
    assert_eq!(report.mix.total_documents, report.dedup.kept);
}
