//! End-to-end runs of the `live` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use live_core::index::{build_index, IndexConfig};
use live_core::matcher::match_query;
use live_core::persist::{load_graph, load_graph_set, load_model, parse_match_lines};

fn live(args: &[&str], dir: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_live"))
        .args(args)
        .current_dir(dir)
        .env_remove("LIVE_THREADS")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = live(args, dir);
    assert!(
        out.status.success(),
        "live {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn pipeline(dir: &Path) {
    ok(&["gen", "--n", "3000", "--avg-deg", "5", "--labels", "8", "--seed", "7", "-o", "g.txt"], dir);
    ok(&["gen", "--graph", "g.txt", "--queries", "6", "--query-size", "6", "--seed", "8", "-o", "q.txt"], dir);
    ok(&["train", "--graph", "g.txt", "--epochs", "100", "--seed", "9", "-o", "m.txt"], dir);
    ok(&["index", "--graph", "g.txt", "--model", "m.txt", "-o", "i.bin"], dir);
}

#[test]
fn query_through_cli_equals_library() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pipeline(d);
    let text = ok(
        &["query", "--graph", "g.txt", "--model", "m.txt", "--index", "i.bin", "--query", "q.txt"],
        d,
    );
    assert_eq!(text.lines().filter(|l| l.starts_with("s ")).count(), 6);

    let g = load_graph(&d.join("g.txt")).unwrap();
    let table = load_model(&d.join("m.txt")).unwrap();
    let index = build_index(&g, &table, IndexConfig::default()).unwrap();
    let mut want = Vec::new();
    for q in load_graph_set(&d.join("q.txt")).unwrap() {
        want.extend(match_query(&index, &g, &table, &q).unwrap().mappings);
    }
    assert!(!want.is_empty());
    assert_eq!(parse_match_lines(&text).unwrap(), want);

    let rebuilt = ok(
        &["query", "--graph", "g.txt", "--model", "m.txt", "--rebuild", "--query", "q.txt", "--no-timings"],
        d,
    );
    let oracle = ok(&["oracle", "--graph", "g.txt", "--query", "q.txt", "--no-timings"], d);
    let sorted = |t: &str| {
        let mut m = parse_match_lines(t).unwrap();
        m.sort();
        m
    };
    assert_eq!(sorted(&rebuilt), sorted(&oracle));
    assert_eq!(parse_match_lines(&rebuilt).unwrap(), want);
}

#[test]
fn artifacts_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    for f in ["g.txt", "q.txt", "m.txt", "i.bin"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let bench = |d: &Path, workers: &str| {
        ok(
            &["bench", "--n", "2000", "--labels", "6", "--epochs", "50", "--queries", "10", "--query-size", "6",
              "--workers", workers, "--no-timings", "--seed", "3"],
            d,
        )
    };
    let r1 = bench(a.path(), "1");
    let r2 = bench(b.path(), "3");
    assert_eq!(r1, r2);
    assert_eq!(r1.lines().count(), 12);
    assert!(r1.starts_with("schema,row,query"));
}

#[test]
fn usage_and_validation_errors_fail() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // seed is mandatory
    assert!(!live(&["gen", "--n", "100", "-o", "g.txt"], d).status.success());
    assert!(!live(&["frobnicate"], d).status.success());
    let out = live(&["train", "--graph", "missing.txt", "--seed", "1", "-o", "m.txt"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.txt"));

    pipeline(d);
    let mut bytes = fs::read(d.join("i.bin")).unwrap();
    bytes[0] ^= 0x20;
    fs::write(d.join("bad.bin"), bytes).unwrap();
    let out = live(
        &["query", "--graph", "g.txt", "--model", "m.txt", "--index", "bad.bin", "--query", "q.txt"],
        d,
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a valid index file"));
}
