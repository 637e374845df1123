use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mbtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbtree"))
        .args(args)
        .env_remove("MBTREE_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("mbtree-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const MB: &[&str] = &["mb", "sample", "--family", "ford:alpha=0.5", "--n", "1000", "--reps", "100", "--seed", "7"];

#[test]
fn mb_sample_is_reproducible_across_threads() {
    let a = stdout(&mbtree(MB));
    let b = stdout(&mbtree(MB));
    let mut with_threads = MB.to_vec();
    with_threads.extend(["--threads", "3"]);
    let c = stdout(&mbtree(&with_threads));
    assert_eq!(a, b);
    assert_eq!(a, c);
    let mut lines = a.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# config_digest="), "{header}");
    assert!(header.ends_with(" seed=7"));
    assert_eq!(header.split(' ').nth(1).unwrap().len(), "config_digest=".len() + 64);
    assert_eq!(lines.next(), Some("replica,height"));
    assert_eq!(lines.count(), 100);
    let other = stdout(&mbtree(&[&MB[..MB.len() - 1], &["8"]].concat()));
    assert_ne!(a, other);
}

#[test]
fn seed_falls_back_to_environment() {
    let base = &MB[..MB.len() - 2];
    let via_env = Command::new(env!("CARGO_BIN_EXE_mbtree"))
        .args(base)
        .env("MBTREE_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&via_env), stdout(&mbtree(MB)));
}

#[test]
fn config_file_merges_under_flags() {
    let dir = scratch("config");
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"family": "ford:alpha=0.5", "n": 50, "reps": 100, "seed": 7}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    let from_file = stdout(&mbtree(&["mb", "sample", "--config", cfg, "--n", "1000"]));
    assert_eq!(from_file, stdout(&mbtree(MB)));
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"famly": "remy"}"#).unwrap();
    let o = mbtree(&["mb", "sample", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| mbtree(args).status.code();
    assert_eq!(code(&["mb", "sample", "--family", "ford:alpha=7", "--n", "5"]), Some(1));
    assert_eq!(code(&["mb", "sample", "--family", "fjord", "--n", "5"]), Some(2));
    assert_eq!(code(&["mb", "sample", "--family", "remy", "--index", "vertices", "--n", "5"]), Some(2));
    assert_eq!(
        code(&["gw", "sample", "--offspring", "binary", "--condition", "vertices=4"]),
        Some(3)
    );
    assert_eq!(
        code(&["mb", "sample", "--family", "gw-vertices:offspring=poisson1", "--n", "20000000"]),
        Some(4)
    );
    assert_eq!(
        code(&["mb", "sample", "--family", "remy", "--n", "5", "--out", "/nonexistent/dir/x.csv"]),
        Some(5)
    );
    assert_eq!(code(&["mb", "sample", "--n", "5"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
}

#[test]
fn chain_summary_reports_the_limit_mean() {
    let dir = scratch("chain");
    let summary = dir.join("s.json");
    let csv = dir.join("a.csv");
    let o = mbtree(&[
        "chain", "absorb", "--family", "basic:alpha=1", "--n", "16384", "--reps", "2000",
        "--compare-moments", "3", "--seed", "1",
        "--out", csv.to_str().unwrap(), "--summary", summary.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    let mean = s["mean"].as_f64().unwrap();
    assert!((mean - 2.0).abs() < 0.1, "{mean}");
    assert!(s["ks"].as_f64().unwrap() < 0.1);
    assert_eq!(s["moment_errors"].as_array().unwrap().len(), 3);
    assert_eq!(s["seed"], 1);
    let rows = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(rows.lines().nth(1), Some("replica,A_n"));
    assert_eq!(rows.lines().count(), 2002);
    std::fs::remove_dir_all(dir).unwrap();
}

fn write_tree(dir: &Path, name: &str, parents: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, format!(r#"{{"parents":{parents}}}"#)).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn metric_gh_between_files() {
    let dir = scratch("metric");
    let cherry = write_tree(&dir, "cherry.json", "[-1,0,0]");
    let path = write_tree(&dir, "path.json", "[-1,0,1]");
    let v: serde_json::Value =
        serde_json::from_str(&stdout(&mbtree(&["metric", "gh", "--a", &cherry, "--b", &path]))).unwrap();
    assert_eq!(v["gh_rooted"], 0.5);
    assert!(v["ghp_upper"].as_f64().unwrap() >= 0.5);
    let v: serde_json::Value = serde_json::from_str(&stdout(&mbtree(&[
        "metric", "gh", "--a", &cherry, "--b", &path, "--scale-a", "2", "--scale-b", "2",
    ])))
    .unwrap();
    assert_eq!(v["gh_rooted"], 1.0);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn other_subcommands_emit_artifacts() {
    let count = stdout(&mbtree(&["ensembles", "count", "--family", "polya", "--n", "10"]));
    let v: serde_json::Value = serde_json::from_str(&count).unwrap();
    assert_eq!(v["count"], "719");
    let trees = stdout(&mbtree(&["gw", "sample", "--offspring", "geo2", "--condition", "vertices=50", "--reps", "3"]));
    let lines: Vec<&str> = trees.lines().skip(1).collect();
    assert_eq!(lines.len(), 3);
    for l in lines {
        let t: mbtree_core::RootedTree = serde_json::from_str(l).unwrap();
        assert_eq!(t.len(), 50);
    }
    let grow = stdout(&mbtree(&["grow", "--model", "ford:alpha=0.3", "--steps", "100", "--emit-every", "25"]));
    let last = grow.lines().last().unwrap();
    assert!(last.starts_with("0,100,100,"), "{last}");
    let cut = stdout(&mbtree(&["cut", "--base", "cayley", "--n", "12", "--reps", "5", "--emit", "first-split"]));
    assert!(cut.lines().skip(2).all(|l| l.split(',').nth(1).unwrap().contains('+')));
}
