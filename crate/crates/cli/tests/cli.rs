use std::path::Path;
use std::process::{Command, Output};

fn diglab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diglab")).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn train_writes_trajectory_snapshots_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = diglab(&["train", "--preset", "paper-toy-vanilla", "--seed", "7", "--iterations", "500", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trajectory.csv", "gen.params", "disc.params", "manifest.json"] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 7);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn misspelled_flag_suggests_the_real_one() {
    let o = diglab(&["train", "--lamda", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--lambda"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_is_rejected_with_a_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "# toy\nlearnig_rate = 0.1\n").unwrap();
    let o = diglab(&["train", "--config", path(&cfg), "--out", path(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("learning_rate") && e.contains("line 2"), "{e}");
}

#[test]
fn flags_override_the_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = diglab(&[
        "train", "--preset", "paper-toy-dig", "--lambda", "1", "--alpha", "1", "--iterations", "50", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let config = m["config"].as_str().unwrap();
    for line in [
        "regularizer = dig",
        "lambda = 1\n",
        "alpha = 1\n",
        "learning_rate = 0.01\n",
        "momentum = 0.9\n",
        "iterations = 50\n",
    ] {
        assert!(config.contains(line), "missing `{}` in\n{config}", line.trim());
    }
}

#[test]
fn preset_defaults_match_the_toy_setup() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("dig.cfg");
    // a config file that only adds a comment keeps the preset untouched
    std::fs::write(&cfg, "# nothing\n").unwrap();
    let out = tmp.path().join("o");
    let o = diglab(&["train", "--preset", "paper-toy-dig", "--config", path(&cfg), "--iterations", "10", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let config = m["config"].as_str().unwrap();
    for line in ["data = 0;4", "gen_hidden = 5,5,5", "disc_hidden = 10,10,10", "regularizer = dig", "lambda = 1\n"] {
        assert!(config.contains(line), "missing `{}` in\n{config}", line.trim());
    }
}

#[test]
fn experiment_all_writes_a_row_per_run() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("e");
    let o = diglab(&[
        "experiment", "all", "--seeds", "2", "--iterations", "1500", "--optimality-max-steps", "2000", "--out", path(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&out.join("summary.csv"));
    let exp = column(&h, "experiment");
    let run = column(&h, "run");
    let cov = column(&h, "covered_modes");
    for kind in ["stuck", "avoid"] {
        assert_eq!(rows.iter().filter(|r| r[exp] == kind).count(), 2, "{kind}");
    }
    let mut tags: Vec<&str> = rows.iter().filter(|r| r[exp] == "perturb").map(|r| r[run].as_str()).collect();
    tags.sort();
    tags.dedup();
    assert_eq!(tags, ["var0.1", "var1", "var10", "var5"]);
    for r in &rows {
        let c: usize = r[cov].parse().unwrap();
        assert!(c <= 2);
    }
    for s in 0..2 {
        for kind in ["stuck", "perturb", "avoid", "escape"] {
            assert!(out.join(format!("seed_{s}/{kind}/bundle.json")).is_file(), "seed {s} {kind}");
        }
    }
}

#[test]
fn escape_without_stuck_snapshots_points_at_the_missing_step() {
    let tmp = tempfile::tempdir().unwrap();
    let o = diglab(&["experiment", "escape", "--iterations", "100", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("diglab experiment stuck"), "{}", stderr(&o));
}

#[test]
fn escape_after_stuck_in_the_same_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let out = path(tmp.path());
    let o = diglab(&["experiment", "stuck", "--seed", "3", "--iterations", "800", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = diglab(&[
        "experiment", "escape", "--seed", "3", "--iterations", "800", "--optimality-max-steps", "500", "--out", out,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("manifest-stuck.json").is_file());
    assert!(tmp.path().join("manifest-escape.json").is_file());
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("manifest-escape.json")).unwrap()).unwrap();
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn compare_drops_duplicates_and_labels_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = diglab(&["compare", "--regularizers", "dig,none,dig", "--seeds", "2", "--iterations", "300", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("more than once"), "{}", stderr(&o));
    let (h, rows) = read_csv(&out.join("compare.csv"));
    assert_eq!(rows.len(), 4);
    let seed = column(&h, "seed");
    let reg = column(&h, "regularizer");
    let lambda = column(&h, "lambda");
    for r in &rows {
        assert!(r[seed] == "0" || r[seed] == "1");
        let want = if r[reg] == "dig" { "1" } else { "0" };
        assert_eq!(r[lambda], want, "{r:?}");
    }
}

#[test]
fn compare_rejects_unknown_regularizer() {
    let tmp = tempfile::tempdir().unwrap();
    let o = diglab(&["compare", "--regularizers", "none,dgi", "--out", path(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn regularized_coverage_is_at_least_vanilla_over_twenty_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("c");
    let o = diglab(&["compare", "--regularizers", "none,dig", "--seeds", "20", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (h, rows) = read_csv(&out.join("compare.csv"));
    let reg = column(&h, "regularizer");
    let all = column(&h, "all_modes_covered");
    let rate = |name: &str| rows.iter().filter(|r| r[reg] == name && r[all] == "true").count();
    assert_eq!(rows.len(), 40);
    assert!(rate("dig") >= rate("none"), "dig {} vs none {}", rate("dig"), rate("none"));
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    let o = diglab(&["train", "--preset", "paper-toy-dig", "--iterations", "400", "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = out.join("manifest.json");
    let o = diglab(&["replay", path(&manifest)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(out.join("trajectory.csv")).unwrap(),
        std::fs::read(out.join("replay/trajectory.csv")).unwrap()
    );

    let mut m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    m["outputs"][0]["sha256"] = serde_json::Value::String("0".repeat(64));
    std::fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let o = diglab(&["replay", path(&manifest), "--out", path(&tmp.path().join("again"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mismatch"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_with_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    let o = diglab(&["train", "--learning-rate", "1e7", "--iterations", "50", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(out.join("trajectory.csv").is_file());
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let o = diglab(&["train", "--iterations", "10", "--out", path(&file.join("sub"))]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn presets_are_listed() {
    let o = diglab(&["presets"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for p in ["paper-toy-vanilla", "paper-toy-dig", "limited-data-10pct"] {
        assert!(text.contains(p));
    }
}
