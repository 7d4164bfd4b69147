use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_isla-forge");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("ISLA_FORGE_SEED").output().unwrap()
}

fn files(dir: &Path) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn solve_to_directory_is_deterministic_and_padded() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&["solve", "--spec", "csv", "-n", "12", "--seed", "5", "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        assert!(String::from_utf8_lossy(&out.stderr).contains("wrote 12 inputs"));
    }
    let fa = files(&a);
    assert_eq!(fa, files(&b));
    assert_eq!(fa.len(), 12);
    assert_eq!(fa[0].0, "01.txt");
    assert_eq!(fa[11].0, "12.txt");
    for (name, _) in &fa {
        let path = a.join(name);
        let out = run(&["check", "--spec", "csv", path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{name}");
    }
}

#[test]
fn zero_outputs_is_a_usage_error() {
    assert_eq!(run(&["solve", "--spec", "csv", "-n", "0"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--spec", "no-such-spec"]).status.code(), Some(2));
}

#[test]
fn rest_titles_have_full_underlines() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["solve", "--spec", "rest", "-n", "60", "--seed", "3", "--out", tmp.path().to_str().unwrap()]);
    assert!(out.status.success());
    let mut titles = 0;
    for (_, text) in files(tmp.path()) {
        let lines: Vec<&str> = text.split('\n').collect();
        for w in lines.windows(2) {
            let under = w[1];
            if !under.is_empty() && under.chars().all(|c| c == '=' || c == '-') && !w[0].is_empty() {
                titles += 1;
                assert!(under.chars().count() >= w[0].chars().count(), "{text:?}");
            }
        }
    }
    assert!(titles > 0);
}

#[test]
fn check_reports_validity_and_explains() {
    let tmp = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = tmp.path().join(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    };
    let good = write("good.csv", "a;b;c\nx;1;2\n");
    let ragged = write("ragged.csv", "a;b;c\nx;1\n");
    let garbage = write("garbage.csv", "a,b\n");
    assert_eq!(run(&["check", "--spec", "csv", &good]).status.code(), Some(0));
    let bad = run(&["check", "--spec", "csv", "--explain", &ragged]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("count("));
    assert_eq!(run(&["check", "--spec", "csv", &garbage]).status.code(), Some(2));
}

#[test]
fn fuzz_with_own_checker_accepts_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("inputs");
    let report = tmp.path().join("report.tsv");
    let target = format!("{BIN} check --spec xml");
    let out = run(&[
        "fuzz",
        "--spec",
        "xml",
        "-n",
        "8",
        "--target",
        &target,
        "--out",
        out_dir.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<String> = fs::read_to_string(&report).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 8);
    for r in rows {
        let cols: Vec<&str> = r.split('\t').collect();
        assert_eq!(cols[1..], ["0", "accepted"], "{r}");
        assert!(Path::new(cols[0]).is_file());
    }
}

#[test]
fn fuzz_records_crashes_and_missing_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let script = tmp.path().join("crash.sh");
    fs::write(&script, "#!/bin/sh\ngrep -q x \"$1\" && kill -SEGV $$\nexit 0\n").unwrap();
    let report = tmp.path().join("r.tsv");
    let target = format!("sh {}", script.display());
    let out = run(&[
        "fuzz",
        "--spec",
        "racket",
        "-n",
        "20",
        "--target",
        &target,
        "--out",
        tmp.path().join("in").to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut seen = std::collections::BTreeSet::new();
    for r in fs::read_to_string(&report).unwrap().lines() {
        let cols: Vec<&str> = r.split('\t').collect();
        let has_x = fs::read_to_string(cols[0]).unwrap().contains('x');
        assert_eq!(cols[2], if has_x { "crashed" } else { "accepted" }, "{r}");
        seen.insert(cols[2].to_string());
    }
    assert_eq!(seen.len(), 2, "{seen:?}");
    let missing = run(&["fuzz", "--spec", "xml", "-n", "1", "--target", "no-such-program-here"]);
    assert_eq!(missing.status.code(), Some(2));
}
