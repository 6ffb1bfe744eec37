mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use common::{synthetic_corpus, write_corpus};
use rand::{Rng, SeedableRng};
use serde_json::Value;
use twp::{Document, Lang};

const ECHO_CONFIG: &str = "\
[backend]
kind = \"echo\"
[backend.retry]
initial_backoff_ms = 0
[translate]
enabled = true
[pack]
seq_len = 256
";

fn twp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_twp"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}\nstderr: {}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
    })
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("twp.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn stats_on_three_documents() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(
        tmp.path(),
        "in.jsonl",
        &[
            Document::new("a", Lang::En, "The cat sat."),
            Document::new("b", Lang::En, "A dog ran far away."),
            Document::new("c", Lang::De, "Guten Morgen."),
        ],
    );
    let cfg = write_config(tmp.path(), "[tokenizer]\nkind = \"whitespace\"\n");
    let o = twp(&["stats", input.to_str().unwrap(), "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(0));
    let v = stdout_json(&o);
    // by hand: en 3 + 5 words over 2 docs, de 2 words in 1 doc
    assert_eq!(v["languages"]["en"]["token_total"], 8);
    assert_eq!(v["languages"]["en"]["doc_count"], 2);
    assert_eq!(v["languages"]["en"]["avg_doc_length"], 4.0);
    assert_eq!(v["languages"]["de"]["token_total"], 2);
    assert_eq!(v["languages"]["de"]["doc_count"], 1);
    assert_eq!(v["languages"]["de"]["avg_doc_length"], 2.0);
    assert_eq!(v["total"]["token_total"], 10);
    assert_eq!(v["total"]["doc_count"], 3);
    assert!((v["total"]["avg_doc_length"].as_f64().unwrap() - 10.0 / 3.0).abs() < 1e-12);
    assert!(v["languages"].get("fr").is_none());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = twp(&["frobnicate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(twp(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn invalid_config_reports_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), "in.jsonl", &[]);
    let cfg = write_config(tmp.path(), "[dedup]\nbands = 10\n[pack]\nseq_len = 1\n");
    let o = twp(&["stats", input.to_str().unwrap(), "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dedup:") && err.contains("pack.seq_len:"), "{err}");

    let o = twp(&["stats", input.to_str().unwrap()], &[("TWP_CHUNKING__LIMIT", "lots")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("chunking.limit"));
}

#[test]
fn env_overrides_reach_the_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(5, 1));
    let out = tmp.path().join("stats");
    let o = twp(
        &["stats", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "17"],
        &[("TWP_CHUNKING__LIMIT", "123")],
    );
    assert_eq!(o.status.code(), Some(0));
    let snap: toml::Table = fs::read_to_string(out.join("config.resolved.toml")).unwrap().parse().unwrap();
    assert_eq!(snap["chunking"]["limit"].as_integer(), Some(123));
    assert_eq!(snap["seed"].as_integer(), Some(17));
    assert!(snap["dedup"]["seed"].as_integer().is_some());
    assert!(out.join("stats.json").is_file());
}

#[test]
fn single_stage_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let cfg = write_config(tmp.path(), ECHO_CONFIG);
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(40, 2));

    let seg = tmp.path().join("seg");
    let o = twp(&["segment", &p(&input), "--out", &p(&seg), "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first: Value =
        serde_json::from_str(fs::read_to_string(seg.join("chunks.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(first["doc_id"], "doc-00000");
    assert!(first["token_count"].as_u64().unwrap() <= 300);

    let filt = tmp.path().join("filter");
    let o = twp(&["filter", &p(&input), "--out", &p(&filt), "--config", &cfg], &[]);
    let v = stdout_json(&o);
    assert_eq!(v["kept"].as_u64().unwrap() + v["rejected"].as_u64().unwrap(), 40);

    let dd = tmp.path().join("dedup");
    let o = twp(&["dedup", &p(&filt.join("kept.jsonl")), "--out", &p(&dd), "--exact", "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(0));
    let header: Value =
        serde_json::from_str(fs::read_to_string(dd.join("manifest.jsonl")).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["exact"], true);

    let tr = tmp.path().join("translate");
    let args = ["translate", &p(&dd.join("kept.jsonl")), "--out", &p(&tr), "--targets", "fr,de", "--config", &cfg];
    let o = twp(&args, &[]);
    let v = stdout_json(&o);
    assert!(v["targets"].get("fr").is_some() && v["targets"].get("es").is_none());
    // a second fresh run refuses to clobber the journal
    assert_eq!(twp(&args, &[]).status.code(), Some(2));
    let mut resume = args.to_vec();
    resume.push("--resume");
    assert_eq!(twp(&resume, &[]).status.code(), Some(0));

    let pk = tmp.path().join("pack");
    let o = twp(&["pack", &p(&tr.join("fr.jsonl")), "--out", &p(&pk), "--seq-len", "64", "--config", &cfg], &[]);
    let v = stdout_json(&o);
    assert_eq!(v["seq_len"], 64);
    let bin = p(&pk.join("packed.bin"));
    let o = twp(&["inspect", &bin, "-n", "2", "--seq-len", "64"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    let last: Vec<u32> = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last.len(), 64);
    assert_eq!(twp(&["inspect", &bin, "--seq-len", "128"], &[]).status.code(), Some(1));

    let pr = tmp.path().join("probe");
    let model = tmp.path().join("langid.json");
    let o = twp(&["probe", "--out", &p(&pr), "--samples", "8", "--save-model", &p(&model), "--config", &cfg], &[]);
    let v = stdout_json(&o);
    assert_eq!(v["requested"], 8);
    assert_eq!(v["percentages"]["other"], 100.0);
    assert_eq!(fs::read_to_string(pr.join("samples.jsonl")).unwrap().lines().count(), 8);
    assert!(model.is_file());
}

#[test]
fn mix_command_uses_configured_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let mut paths = Vec::new();
    for lang in [Lang::En, Lang::Fr] {
        let docs: Vec<Document> =
            (0..30).map(|i| Document::new(format!("{lang}-{i}"), lang, common::prose(&mut rng, lang))).collect();
        paths.push(write_corpus(tmp.path(), &format!("{lang}.jsonl"), &docs));
    }
    let cfg = write_config(
        tmp.path(),
        &format!(
            "[[mix.stages]]\nstage = \"main\"\ntotal_tokens = 4000\n\
             [[mix.stages.sources]]\nname = \"en\"\npath = {:?}\nweight = 0.5\n\
             [[mix.stages.sources]]\nname = \"fr\"\npath = {:?}\nweight = 0.5\n",
            paths[0], paths[1]
        ),
    );
    let out = tmp.path().join("mix");
    let o = twp(&["mix", "--stage", "main", "--out", out.to_str().unwrap(), "--config", &cfg], &[]);
    let v = stdout_json(&o);
    for s in v["sources"].as_array().unwrap() {
        assert!(s["realized_tokens"].as_u64().unwrap() >= 2000);
    }
    let o = twp(&["mix", "--stage", "nope", "--out", out.to_str().unwrap(), "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.join("FAILED").is_file());
}

#[test]
fn pipeline_on_thousand_documents() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ECHO_CONFIG);
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(1000, 3));
    let out = tmp.path().join("run");
    let o = twp(&["pipeline", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--config", &cfg], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let pack = stdout_json(&o);
    let n = |k: &str| pack[k].as_u64().unwrap();
    assert_eq!(n("total_doc_tokens") + n("eos_count"), n("sequence_count") * 256 + n("dropped_remainder"));
    assert!(n("dropped_remainder") < 256);
    for d in ["01-filter", "02-dedup", "03-translate", "04-mix", "05-pack"] {
        assert!(out.join(d).join("config.resolved.toml").is_file(), "{d}");
        assert!(out.join(d).join("manifest.json").is_file(), "{d}");
    }
    assert!(out.join("02-dedup/manifest.jsonl").is_file());
    assert!(out.join("03-translate/journal.jsonl").is_file());
    assert!(out.join("pipeline.json").is_file());
}

#[test]
fn killed_pipeline_resumes_to_identical_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), ECHO_CONFIG);
    let input = write_corpus(tmp.path(), "in.jsonl", &synthetic_corpus(600, 4));
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec!["pipeline", input.to_str().unwrap(), "--out", out.to_str().unwrap(), "--config", &cfg];
        args.extend_from_slice(extra);
        args.into_iter().map(String::from).collect::<Vec<_>>()
    };

    let reference = tmp.path().join("ref");
    let started = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_twp")).args(run(&reference, &[])).output().unwrap();
    assert!(o.status.success());
    let full = started.elapsed();
    let want = fs::read(reference.join("05-pack/packed.bin")).unwrap();

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for i in 0..3 {
        let out = tmp.path().join(format!("run{i}"));
        let mut child = Command::new(env!("CARGO_BIN_EXE_twp"))
            .args(run(&out, &[]))
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        std::thread::sleep(Duration::from_secs_f64(full.as_secs_f64() * rng.random_range(0.05..0.9)));
        let _ = child.kill();
        child.wait().unwrap();
        let o = Command::new(env!("CARGO_BIN_EXE_twp")).args(run(&out, &["--resume"])).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(fs::read(out.join("05-pack/packed.bin")).unwrap() == want, "run {i} differs");
    }
}
