use std::path::Path;
use std::process::{Command, Output};

use thn_core::io::save_dataset;
use thn_core::{HeteroSnapshot, NodeType, Relation, RunReport, TemporalHeteroGraph};

fn thn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_thn"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A ring graph on `n` nodes of one type with `rels` relations and `t`
/// snapshots; edges rotate so every snapshot differs.
fn ring(n: usize, rels: usize, t: usize) -> TemporalHeteroGraph {
    let types = vec![NodeType {
        id: 0,
        name: "node".into(),
        feature_dim: 0,
    }];
    let relations = (0..rels)
        .map(|r| Relation {
            id: r,
            name: format!("r{r}"),
            src_type: 0,
            dst_type: 0,
            directed: true,
        })
        .collect();
    let snaps = (1..=t)
        .map(|s| HeteroSnapshot {
            index: s,
            node_counts: vec![n],
            edges: (0..rels)
                .map(|r| {
                    (0..n)
                        .map(|u| (u, (u + 1 + s + r) % n))
                        .filter(|e| e.0 != e.1)
                        .collect()
                })
                .collect(),
        })
        .collect();
    TemporalHeteroGraph::new(types, relations, snaps, vec![None], "step").unwrap()
}

fn synth_spec(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("spec.txt");
    std::fs::write(&path, body).unwrap();
    path
}

const SMALL_SPEC: &str = "\
nodetype user 30
nodetype item 20
relation click user item 0
relation buy user item 0
relation view user item 1
relation like user user 0
snapshots 5
rule click buy 1
noise 0
activity 2
features 4
seed 3
";

#[test]
fn stats_passes_a_generated_set() {
    let dir = tempfile::tempdir().unwrap();
    let spec = synth_spec(dir.path(), SMALL_SPEC);
    let data = dir.path().join("d");
    assert!(thn(&["synth", "--config", p(&spec), "--out", p(&data)])
        .status
        .success());
    let o = thn(&["stats", "--data", p(&data)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("heterogeneity           4"));
    assert!(out.contains("temporality             5"));
    assert!(out.contains("verdict                 PASS"));
}

#[test]
fn stats_fails_three_snapshots_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ring(6, 2, 3), dir.path()).unwrap();
    let o = thn(&["stats", "--data", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL (temporality < 4)"));
}

#[test]
fn stats_missing_schema_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = thn(&["stats", "--data", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema.txt"));
}

#[test]
fn synth_perfect_rule_gives_oracle_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = synth_spec(dir.path(), SMALL_SPEC);
    let o = thn(&["synth", "--config", p(&spec), "--out", p(&dir.path().join("d"))]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("oracle mean auprc 1.000000"), "{}", stdout(&o));
}

#[test]
fn synth_is_byte_identical_for_one_seed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = synth_spec(dir.path(), SMALL_SPEC);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(thn(&["synth", "--config", p(&spec), "--out", p(&a), "--seed", "11"])
        .status
        .success());
    assert!(thn(&["synth", "--config", p(&spec), "--out", p(&b), "--seed", "11"])
        .status
        .success());
    for f in ["schema.txt", "edges.tsv", "features/user.csv", "features/item.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn synth_rejects_three_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let spec = synth_spec(dir.path(), &SMALL_SPEC.replace("snapshots 5", "snapshots 3"));
    let o = thn(&["synth", "--config", p(&spec), "--out", p(&dir.path().join("d"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at least 4"));
}

fn train_cfg(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

const TINY: &str = "dims = 4\ninput_dim = 4\nattention_dim = 2\ndecoder_hidden = 4\nmax_epochs = 4\n";

#[test]
fn train_schemes_agree_on_one_relation() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    save_dataset(&ring(8, 1, 4), &data).unwrap();
    let cfg = train_cfg(dir.path(), TINY);
    let mut lines = Vec::new();
    for scheme in ["uta", "atu"] {
        let out = dir.path().join(scheme);
        let o = thn(&[
            "train",
            "--config",
            p(&cfg),
            "--data",
            p(&data),
            "--out",
            p(&out),
            "--scheme",
            scheme,
            "--seed",
            "5",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        lines.push(stdout(&o).lines().last().unwrap().to_string());
    }
    assert!(lines[0].starts_with("mean auprc "));
    assert_eq!(lines[0], lines[1]);
}

#[test]
fn train_writes_json_and_csv_reports() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    save_dataset(&ring(8, 2, 4), &data).unwrap();
    let cfg = train_cfg(dir.path(), &format!("{TINY}task = mono\ntarget_relation = r1\n"));
    let out = dir.path().join("report");
    let o = thn(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&out),
        "--update",
        "avg",
        "--alpha",
        "0.3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = RunReport::from_json(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(report.snapshots.len(), 3);
    assert_eq!(
        report.config.model.update,
        thn_core::UpdateKind::WeightedAverage { alpha: 0.3 }
    );
    let csv = std::fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("snapshot,auprc,mrr,epochs,seconds"));
    assert_eq!(csv.lines().count(), 4);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().contains(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn train_mono_without_target_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    save_dataset(&ring(6, 2, 4), &data).unwrap();
    let cfg = train_cfg(dir.path(), "task = mono\n");
    let o = thn(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("target_relation"), "{}", stderr(&o));
}

#[test]
fn train_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    save_dataset(&ring(6, 2, 4), &data).unwrap();
    let cfg = train_cfg(dir.path(), "epochs = 3\n");
    let o = thn(&[
        "train",
        "--config",
        p(&cfg),
        "--data",
        p(&data),
        "--out",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("run.cfg:1: epochs: unknown key"), "{}", stderr(&o));
}

#[test]
fn gradcheck_lists_every_component_and_passes() {
    let o = thn(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for c in thn_core::checks::registry() {
        assert!(out.contains(&format!("{:<26} max_rel_error", c.0)), "{} missing", c.0);
    }
    assert!(!out.contains("FAIL"));
}

#[test]
fn unknown_flags_exit_1_and_help_lists_flags() {
    assert_eq!(thn(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(thn(&[]).status.code(), Some(1));
    let o = thn(&["train", "--help"]);
    assert_eq!(o.status.code(), Some(0));
    let help = stdout(&o);
    for flag in [
        "--config",
        "--data",
        "--out",
        "--seed",
        "--threads",
        "--scheme",
        "--update",
        "--alpha",
        "--task",
        "--relation",
    ] {
        assert!(help.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn threads_flag_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    save_dataset(&ring(6, 2, 4), dir.path()).unwrap();
    let o = thn(&["--threads", "1", "stats", "--data", p(dir.path())]);
    assert_eq!(o.status.code(), Some(0));
}
