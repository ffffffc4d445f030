use std::path::Path;
use std::process::{Command, Output};

fn anticooc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anticooc"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path) {
    let out = anticooc(&[
        "simulate",
        "--group-sizes",
        "120,80",
        "--rows",
        "12",
        "--min-coverage",
        "8",
        "--max-coverage",
        "30",
        "--plant",
        "3",
        "--plant-coverage",
        "20",
        "--seed",
        "5",
        "--out",
        s(dir),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_run_and_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data);
    let matrix = data.join("matrix.tsv");
    let groups = data.join("groups.tsv");
    let mut outputs = Vec::new();
    for (name, workers) in [("a", "1"), ("b", "3")] {
        let out_dir = tmp.path().join(name);
        let out = anticooc(&[
            "run",
            "--matrix",
            s(&matrix),
            "--groups",
            s(&groups),
            "--kmax",
            "4",
            "--max-iter",
            "60",
            "--seed",
            "7",
            "--out",
            s(&out_dir),
            "--workers",
            workers,
            "--dump-pool",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        assert!(String::from_utf8_lossy(&out.stderr).contains("report written"));
        let files: Vec<Vec<u8>> = [
            "significant_sets.tsv",
            "union_graph.graphml",
            "metadata.json",
            "candidate_pool.tsv",
        ]
        .iter()
        .map(|f| std::fs::read(out_dir.join(f)).unwrap())
        .collect();
        outputs.push(files);
    }
    let tsv = String::from_utf8(outputs[0][0].clone()).unwrap();
    assert_eq!(outputs[0], outputs[1]);
    let first = tsv.lines().nth(1).expect("planted set reported");
    assert!(first.ends_with("P1, P2, P3"), "{tsv}");
}

#[test]
fn pairwise_baseline_and_bh() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    simulate(&data);
    let (m, g) = (data.join("matrix.tsv"), data.join("groups.tsv"));
    for extra in [&["--pairwise-baseline"][..], &["--correction", "bh"][..]] {
        let out_dir = tmp.path().join("out");
        let mut args = vec![
            "run",
            "--matrix",
            s(&m),
            "--groups",
            s(&g),
            "--max-iter",
            "40",
            "--kmax",
            "3",
            "--out",
            s(&out_dir),
        ];
        args.extend_from_slice(extra);
        let out = anticooc(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let tsv = std::fs::read_to_string(out_dir.join("significant_sets.tsv")).unwrap();
        assert!(tsv.lines().count() > 1);
    }
}

#[test]
fn test_one_prints_groups_and_combined() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path());
    let (m, g) = (tmp.path().join("matrix.tsv"), tmp.path().join("groups.tsv"));
    for mode in ["mid", "randomized"] {
        let out = anticooc(&[
            "test-one",
            "--matrix",
            s(&m),
            "--groups",
            s(&g),
            "--set",
            "P1,P2,P3",
            "--mode",
            mode,
        ]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4, "{text}");
        assert!(lines[1].starts_with("G1\t120\t20,20,20\t60\t"));
        assert!(lines[3].starts_with("combined\t"));
    }
    let out = anticooc(&["test-one", "--matrix", s(&m), "--groups", s(&g), "--set", "P1,NOPE"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    simulate(tmp.path());
    let (m, g) = (tmp.path().join("matrix.tsv"), tmp.path().join("groups.tsv"));
    let out_dir = tmp.path().join("o");
    assert_eq!(anticooc(&["run", "--bogus"]).status.code(), Some(1));
    assert_eq!(anticooc(&[]).status.code(), Some(1));
    assert_eq!(anticooc(&["--help"]).status.code(), Some(0));
    let bad_level = anticooc(&[
        "run",
        "--matrix",
        s(&m),
        "--groups",
        s(&g),
        "--level",
        "1.5",
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(bad_level.status.code(), Some(1));
    let missing = anticooc(&[
        "run",
        "--matrix",
        "/nonexistent.tsv",
        "--groups",
        s(&g),
        "--out",
        s(&out_dir),
    ]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent.tsv"));
}

#[test]
fn empty_result_is_success() {
    let tmp = tempfile::tempdir().unwrap();
    let out = anticooc(&[
        "simulate",
        "--group-sizes",
        "60",
        "--rows",
        "6",
        "--seed",
        "1",
        "--out",
        s(tmp.path()),
    ]);
    assert!(out.status.success());
    let (m, g) = (tmp.path().join("matrix.tsv"), tmp.path().join("groups.tsv"));
    let out_dir = tmp.path().join("o");
    let out = anticooc(&[
        "run",
        "--matrix",
        s(&m),
        "--groups",
        s(&g),
        "--max-iter",
        "20",
        "--kmax",
        "3",
        "--out",
        s(&out_dir),
        "--seed",
        "2",
    ]);
    assert!(out.status.success());
    let tsv = std::fs::read_to_string(out_dir.join("significant_sets.tsv")).unwrap();
    assert_eq!(tsv, "rank\tcoverage_fraction\tp_raw\tp_adjusted\tmembers\n");
    let graph = std::fs::read_to_string(out_dir.join("union_graph.graphml")).unwrap();
    assert!(!graph.contains("<node"));
}
