use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--set", "synthetic.n_users=120",
    "--set", "synthetic.n_items_per_type=40,20",
    "--set", "graph.min_co_users=2",
    "--set", "hgnn.epochs=1",
    "--set", "hgnn.hidden_dim=16",
    "--set", "hgnn.out_dim=16",
    "--set", "two_tower.epochs=1",
    "--set", "two_tower.hidden=32",
    "--set", "two_tower.d_final=16",
];

fn gfm(workdir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gfm"))
        .args(["--threads", "1", "--workdir"])
        .arg(workdir)
        .args(SMALL)
        .args(args)
        .output()
        .unwrap()
}

fn ok(workdir: &Path, args: &[&str]) -> String {
    let out = gfm(workdir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn staged_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();
    ok(w, &["gen-data"]);
    let catalog = fs::read(w.join("catalog.tsv")).unwrap();
    let events = fs::read(w.join("interactions.tsv")).unwrap();
    ok(w, &["build-graph"]);
    ok(w, &["train-hgnn"]);
    ok(w, &["train-2t"]);
    let table = ok(w, &["evaluate"]);
    assert!(table.starts_with("Unified 2T |"), "{table}");
    let report = fs::read_to_string(w.join("report.tsv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    assert!(report.lines().all(|l| l.starts_with("Unified 2T\t") && l.split('\t').count() == 5));

    let recs = ok(w, &["recommend", "--user", "3", "--k", "4"]);
    assert_eq!(recs.lines().count(), 8);
    assert!(w.join("recommendations-3.tsv").exists());

    for cmd in ["gen-data", "build-graph", "train-hgnn", "train-2t", "evaluate", "recommend"] {
        let manifest = fs::read_to_string(w.join(format!("manifest-{cmd}.txt"))).unwrap();
        assert!(manifest.contains(&format!("command = {cmd}\n")));
        assert!(manifest.contains("seed = 42\n"));
        assert!(manifest.contains("config_hash = "));
        assert!(manifest.contains("threads = 1\n"));
    }
    // downstream commands leave their inputs untouched
    assert_eq!(fs::read(w.join("catalog.tsv")).unwrap(), catalog);
    assert_eq!(fs::read(w.join("interactions.tsv")).unwrap(), events);
}

#[test]
fn train_2t_without_store_names_the_missing_artifact() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-data"]);
    let out = gfm(dir.path(), &["train-2t"]);
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(msg.contains("missing embedding store") && msg.contains("embeddings.tsv") && msg.contains("train-hgnn"), "{msg}");

    ok(dir.path(), &["train-2t", "--set", "two_tower.use_gnn_features=false"]);
    assert!(dir.path().join("two_tower.ckpt").exists());
}

#[test]
fn diagnostics_are_distinct() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path();

    let out = gfm(w, &["build-graph"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("missing catalog"), "{}", stderr(&out));

    let out = gfm(w, &["--config", "/nonexistent/run.conf", "gen-data"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("cannot read config"), "{}", stderr(&out));

    let out = gfm(w, &["--set", "bogus.key=1", "gen-data"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("unknown key `bogus.key`"), "{}", stderr(&out));

    let out = gfm(w, &["frobnicate"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("frobnicate"), "{}", stderr(&out));

    ok(w, &["gen-data"]);
    fs::write(w.join("graph.snapshot"), "garbage\n").unwrap();
    let out = gfm(w, &["train-hgnn"]);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("cannot read graph snapshot"), "{}", stderr(&out));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# small run\nseed = 9\nsynthetic.n_users = 50\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gfm"))
        .args(["--config"])
        .arg(&conf)
        .args(["--seed", "11", "--workdir"])
        .arg(dir.path().join("w"))
        .arg("gen-data")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(dir.path().join("w/manifest-gen-data.txt")).unwrap();
    assert!(manifest.contains("seed = 11\n"));
    assert!(manifest.contains("config.synthetic.n_users = 50\n"));
    assert!(manifest.contains("config.hgnn.seed = 11\n"));
}
