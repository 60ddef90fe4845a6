use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

fn scma(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scma"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn small_design(dir: &Path, out: &str, seed: &str) {
    ok(&scma(
        dir,
        &[
            "design",
            "--population",
            "6",
            "--generations",
            "2",
            "--seed",
            seed,
            "--out",
            out,
        ],
    ));
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(csv_path: &Path) -> Vec<(String, String)> {
    std::fs::read_to_string(csv_path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let mut f = l.split(',');
            (f.next().unwrap().to_string(), f.next().unwrap().to_string())
        })
        .collect()
}

fn parse_labels(text: &str) -> Vec<Vec<u8>> {
    text.lines()
        .take_while(|l| l.contains('q') || l.trim_start().starts_with('0'))
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.trim_start_matches('q').parse().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn assign_prints_valid_4x6_signature() {
    let dir = tempfile::tempdir().unwrap();
    let out = scma(dir.path(), &["assign", "-K", "4", "-J", "6", "-N", "2"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    let labels = parse_labels(&text);
    assert_eq!(labels.len(), 4);
    for row in &labels {
        let mut nz: Vec<u8> = row.iter().copied().filter(|&x| x != 0).collect();
        nz.sort();
        assert_eq!(nz, vec![1, 2, 3]);
    }
    let supports: BTreeSet<Vec<bool>> = (0..6)
        .map(|c| labels.iter().map(|r| r[c] != 0).collect())
        .collect();
    assert_eq!(supports.len(), 6);
    assert!(text.contains("power balanced: true"));
    assert!(text.contains("power sorted: true"));
}

#[test]
fn assign_rejects_fractional_degree() {
    let dir = tempfile::tempdir().unwrap();
    let out = scma(dir.path(), &["assign", "-K", "4", "-J", "5", "-N", "2"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&out.stderr).lines().count(), 1);
}

#[test]
fn design_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    small_design(dir.path(), "a", "9");
    small_design(dir.path(), "b", "9");
    let a = std::fs::read(dir.path().join("a/codebook.txt")).unwrap();
    let b = std::fs::read(dir.path().join("b/codebook.txt")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        std::fs::read(dir.path().join("a/history.csv")).unwrap(),
        std::fs::read(dir.path().join("b/history.csv")).unwrap()
    );
    let m = manifest(&dir.path().join("a/manifest.json"));
    assert_eq!(m["command"], "design");
    assert_eq!(m["seed"], 9);
}

#[test]
fn analyze_and_simulate_share_keys() {
    let dir = tempfile::tempdir().unwrap();
    small_design(dir.path(), "d", "1");
    let grid = ["--snr-grid", "0:5:15"];
    ok(&scma(
        dir.path(),
        &[
            "analyze",
            "--codebook",
            "d/codebook.txt",
            grid[0],
            grid[1],
            "--out",
            "a",
        ],
    ));
    ok(&scma(
        dir.path(),
        &[
            "simulate",
            "--codebook",
            "d/codebook.txt",
            grid[0],
            grid[1],
            "--max-symbols",
            "500",
            "--out",
            "s",
        ],
    ));
    let a = keys(&dir.path().join("a/analysis.csv"));
    let s = keys(&dir.path().join("s/ber.csv"));
    assert_eq!(a.len(), 24);
    assert_eq!(a, s);
    let header = std::fs::read_to_string(dir.path().join("s/ber.csv")).unwrap();
    assert!(header.starts_with("snr_db,user_rank,bits,errors,ber,ber_avg,ber_worst\n"));
}

#[test]
fn manifest_config_replays_simulation() {
    let dir = tempfile::tempdir().unwrap();
    small_design(dir.path(), "d", "1");
    ok(&scma(
        dir.path(),
        &[
            "simulate",
            "--codebook",
            "d/codebook.txt",
            "--snr-grid",
            "4,8",
            "--max-symbols",
            "800",
            "--seed",
            "3",
            "--out",
            "r1",
        ],
    ));
    ok(&scma(
        dir.path(),
        &[
            "simulate",
            "--codebook",
            "d/codebook.txt",
            "--config",
            "r1/config.toml",
            "--out",
            "r2",
        ],
    ));
    assert_eq!(
        std::fs::read(dir.path().join("r1/ber.csv")).unwrap(),
        std::fs::read(dir.path().join("r2/ber.csv")).unwrap()
    );
    let m = manifest(&dir.path().join("r1/manifest.json"));
    assert_eq!(m["inputs"][0]["path"], "d/codebook.txt");
    assert_eq!(m["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    small_design(dir.path(), "d", "1");
    std::fs::write(
        dir.path().join("run.toml"),
        "[channel]\nkappa = 5.0\nalpha = 2.5\n[analysis]\nsnr_grid = [0.0, 10.0]\n",
    )
    .unwrap();
    ok(&scma(
        dir.path(),
        &[
            "analyze",
            "--config",
            "run.toml",
            "--kappa",
            "7",
            "--codebook",
            "d/codebook.txt",
            "--out",
            "o",
        ],
    ));
    let m = manifest(&dir.path().join("o/manifest.json"));
    assert_eq!(m["config"]["channel"]["kappa"], 7.0);
    assert_eq!(m["config"]["channel"]["alpha"], 2.5);
    assert_eq!(
        m["config"]["analysis"]["snr_grid"],
        serde_json::json!([0.0, 10.0])
    );
}

#[test]
fn compare_reports_gains() {
    let dir = tempfile::tempdir().unwrap();
    small_design(dir.path(), "x", "1");
    small_design(dir.path(), "y", "2");
    let out = scma(
        dir.path(),
        &[
            "compare",
            "--codebook",
            "x/codebook.txt",
            "--codebook",
            "y/codebook.txt",
            "--snr-grid",
            "10:5:40",
            "--out",
            "c",
        ],
    );
    ok(&out);
    let gains = std::fs::read_to_string(dir.path().join("c/gains.csv")).unwrap();
    assert!(gains.starts_with("codebook,source,target,snr_at_target_db,gain_db\n"));
    assert_eq!(gains.lines().count(), 3);
    let self_gain: f64 = gains
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(self_gain, 0.0);
}

#[test]
fn error_classes_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(scma(d, &["frobnicate"]).status.code(), Some(2));

    std::fs::write(d.join("bad.toml"), "[system]\nbogus = 1\n").unwrap();
    let bad_cfg = scma(d, &["assign", "--config", "bad.toml"]);
    assert_eq!(bad_cfg.status.code(), Some(3));
    let missing_cfg = scma(d, &["assign", "--config", "absent.toml"]);
    assert_eq!(missing_cfg.status.code(), Some(3));
    let bad_grid = scma(d, &["analyze", "--snr-grid", "5:0:1", "--codebook", "x"]);
    assert_eq!(bad_grid.status.code(), Some(3));

    let missing = scma(d, &["analyze", "--codebook", "absent.txt"]);
    assert_eq!(missing.status.code(), Some(4));
    std::fs::write(d.join("junk.txt"), "not a codebook\n").unwrap();
    let junk = scma(d, &["simulate", "--codebook", "junk.txt"]);
    assert_eq!(junk.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&junk.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    small_design(dir.path(), "d", "1");
    for (threads, out) in [("1", "t1"), ("2", "t2")] {
        ok(&scma(
            dir.path(),
            &[
                "simulate",
                "--codebook",
                "d/codebook.txt",
                "--snr-grid",
                "6",
                "--max-symbols",
                "1200",
                "--threads",
                threads,
                "--out",
                out,
            ],
        ));
    }
    assert_eq!(
        std::fs::read(dir.path().join("t1/ber.csv")).unwrap(),
        std::fs::read(dir.path().join("t2/ber.csv")).unwrap()
    );
}
