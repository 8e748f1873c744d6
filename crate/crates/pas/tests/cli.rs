use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pas")).args(args).output().expect("run pas")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../pas-core/tests/data")
}

fn null_matrix(dir: &Path, rows: &str, cols: &str) -> String {
    let p = dir.join("null.tsv");
    let o = pas(&["--seed", "11", "simulate", "null", "--rows", rows, "--cols", cols, "--with-dv", "-o", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    p.to_str().unwrap().to_string()
}

#[test]
fn prob_m_table_counts() {
    let o = pas(&["--seed", "0", "verify", "prob-m", "--L", "7", "--S", "2", "--n", "3"]);
    let s = stdout(&o);
    assert!(s.contains("\n0\t576\t"));
    assert!(s.contains("\n7\t384\t0.00522193\n"));
    assert!(s.ends_with("total\t73536\t1\n"));
    let o = pas(&["--seed", "0", "verify", "prob-m", "--L", "5"]);
    assert!(stdout(&o).contains("\n5\t0\t0\n"));
}

#[test]
fn expr10_reference_values() {
    let o = pas(&["--seed", "0", "verify", "expr10", "--L", "40", "--p", "0.2"]);
    assert_eq!(stdout(&o).lines().nth(1).unwrap(), "40\t0.2\t27.2\t8.704\t27.2\t8.704");
}

#[test]
fn formula_diff_against_golden_files() {
    let g = golden_dir();
    let o = pas(&["--seed", "0", "verify", "formulas", "--rl", "3x3", "--diff", g.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 7);
    let o = pas(&["--seed", "0", "verify", "formulas", "--rl", "3x3", "--arity", "3", "--diff", g.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4 differs"));
}

#[test]
fn single_column_scan_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let m = null_matrix(dir.path(), "60", "5");
    let o = pas(&["--seed", "3", "scan", &m, "--score", "chix-ij", "--columns", "0", "--perms", "20"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("c0\tchix-ij\t"));
}

#[test]
fn commands_are_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let m = null_matrix(dir.path(), "80", "8");
    let cases: Vec<Vec<&str>> = vec![
        vec!["scan", &m, "--dv", "c0", "--score", "mom1iz,chix-ij,lkx,ks-i", "--perms", "30", "--sidak", "0.1", "--combine", "fisher"],
        vec!["dvscan", &m, "--dv", "c0", "--score", "dvmom1ik,dvchix-ijkl,dvks-i", "--perms", "30"],
        vec!["dvscan", &m, "--dv", "c0", "--staged", "3", "--perms", "20"],
        vec!["erase", &m, "--dv", "c0", "--threshold", "0.3"],
        vec!["tune", &m, "--dv", "c0", "--perms", "10", "--trials", "3", "--grid", "0.1,0.01,1e-9"],
        vec!["simulate", "null", "--rows", "30", "--cols", "4", "--arity", "trinary-hw"],
        vec!["simulate", "pure-dv", "--n", "3", "--mode", "vs-randoms"],
        vec!["simulate", "blocks", "--synthetic", "20,10", "--blocks", "2", "--rows", "30"],
        vec!["encounter", "--kind", "dv-marginal", "--rows", "40", "--cols", "2", "--perms", "20"],
        vec!["verify", "fig3", "--dv-perms", "200", "--iv-outer", "10", "--iv-inner", "10"],
        vec!["experiment", "type1", "--rows", "40", "--cols", "6", "--with-dv", "--replicates", "6", "--score", "mom1iz,dvmom1ik", "--perms", "10"],
        vec!["experiment", "power", "--model", "pure-nway", "--n", "2", "--score", "mom1", "--replicates", "6", "--perms", "10", "--min-rows", "8"],
    ];
    for case in cases {
        let run = |threads: &str| {
            let mut a = vec!["--seed", "42", "--threads", threads];
            a.extend(case.iter().copied());
            let o = pas(&a);
            assert!(o.status.success(), "{case:?}: {}", String::from_utf8_lossy(&o.stderr));
            o.stdout
        };
        let one = run("1");
        assert!(!one.is_empty(), "{case:?}");
        assert_eq!(one, run("8"), "{case:?} differs across thread counts");
        assert_eq!(one, run("1"), "{case:?} differs across runs");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pas(&["scan", "--no-such-flag"]).status.code(), Some(1));
    let bad = dir.path().join("bad.tsv");
    std::fs::write(&bad, "0\t1\n1\tx\n").unwrap();
    assert_eq!(pas(&["--seed", "1", "scan", bad.to_str().unwrap(), "--score", "mom1"]).status.code(), Some(2));
    let mono = dir.path().join("mono.tsv");
    std::fs::write(&mono, "0\t1\n0\t0\n0\t1\n").unwrap();
    assert_eq!(pas(&["--seed", "1", "dvscan", mono.to_str().unwrap(), "--dv", "0", "--score", "dvmom1"]).status.code(), Some(2));
    let o = pas(&["--seed", "1", "encounter", "--rows", "20", "--cols", "3", "--cutoff", "1e-6", "--perms", "10", "--max-attempts", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(pas(&["--seed", "1", "verify", "prob-m", "--L", "200", "--S", "3"]).status.code(), Some(3));
}

#[test]
fn missing_seed_is_reported_on_stderr() {
    let o = pas(&["verify", "expr10", "--L", "5", "--p", "0.5"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("seed: "));
    assert!(!stdout(&o).contains("seed"));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let m = null_matrix(dir.path(), "40", "4");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# scan defaults\nseed=5\nperms=15\nscore=mom1\n").unwrap();
    let a = pas(&["scan", &m, "--config", cfg.to_str().unwrap()]);
    let b = pas(&["--seed", "5", "scan", &m, "--perms", "15", "--score", "mom1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = pas(&["scan", &m, "--config", cfg.to_str().unwrap(), "--perms", "16"]);
    assert!(stdout(&c).contains("\t16\t"));
}

#[test]
fn model_files_round_trip_through_expand_and_embed() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.tsv");
    let o = pas(&["--seed", "2", "simulate", "pure-dv", "--n", "3", "-o", model.to_str().unwrap()]);
    assert!(o.status.success());
    let meta = std::fs::read_to_string(dir.path().join("model.tsv.meta")).unwrap();
    assert!(meta.contains("kind=pure-dv") && meta.contains("dv=0"));
    let big = dir.path().join("big.tsv");
    let o = pas(&["--seed", "2", "simulate", "expand", "--model", model.to_str().unwrap(), "--rows", "100", "--per-category", "-o", big.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = pas(&["--seed", "2", "simulate", "embed", "--model", big.to_str().unwrap(), "--random-cols", "3"]);
    let s = stdout(&o);
    assert_eq!(s.lines().count(), 101);
    assert_eq!(s.lines().next().unwrap().split('\t').count(), 7);
}
