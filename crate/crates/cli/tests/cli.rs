use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use blockqkd::attacks::format_matrix_file;
use blockqkd::quantum::UnitarySpec;

fn blockqkd(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockqkd")).args(args).current_dir(cwd).output().unwrap()
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn minimal_config_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("min.ini"), "[protocol]\nblock_size = 4\nnum_blocks = 100\n\n[attack]\nkind = none\n").unwrap();
    let out = blockqkd(&["run", "min.ini", "--output", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&dir.path().join("out/results.csv")), 1);
    assert!(dir.path().join("out/session_0000.json").exists());
}

#[test]
fn sweep_of_six_sizes_and_five_reps() {
    let dir = tempfile::tempdir().unwrap();
    let ini = "[protocol]\nnum_blocks = 64\n[sweep]\nblock_sizes = 2, 4, 8, 16, 32, 64\nrepetitions = 5\n[postprocess]\nenabled = false\n";
    fs::write(dir.path().join("sweep.ini"), ini).unwrap();
    let out = blockqkd(&["run", "sweep.ini", "--output", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&dir.path().join("out/results.csv")), 30);
}

#[test]
fn bad_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(blockqkd(&["run", "missing.ini"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.ini"), "[protocol]\nmode = diagonal\n").unwrap();
    assert_eq!(blockqkd(&["run", "bad.ini"], dir.path()).status.code(), Some(2));
    assert_eq!(blockqkd(&["run", "--block-size", "0"], dir.path()).status.code(), Some(2));
    assert_eq!(blockqkd(&["report", "nothing.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_1() {
    // too few sifted bits to draw the QBER sample
    let dir = tempfile::tempdir().unwrap();
    let out = blockqkd(&["run", "--num-blocks", "1", "--block-size", "1", "--output", "out"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |o: &'static str| {
        vec!["run", "--num-blocks", "300", "--attack", "intercept_resend", "--fractions", "0,0.3", "--block-sizes", "2,6", "--channel-flip-prob", "0.02", "--output", o]
    };
    assert!(blockqkd(&args("a"), dir.path()).status.success());
    assert!(blockqkd(&args("b"), dir.path()).status.success());
    for name in ["results.csv", "session_0000.json", "session_0003.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(name)).unwrap(), fs::read(dir.path().join("b").join(name)).unwrap(), "{name}");
    }
}

#[test]
fn unitary_block_attack_from_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let u = UnitarySpec::cnot().embed(&[0, 2], 3).unwrap();
    fs::write(dir.path().join("u.txt"), format_matrix_file(&u)).unwrap();
    let ini = "[protocol]\nblock_size = 4\nnum_blocks = 200\n[attack]\nkind = unitary_block\nmatrix = u.txt\nn = 2\nm = 1\n";
    fs::write(dir.path().join("u.ini"), ini).unwrap();
    let out = blockqkd(&["run", "u.ini", "--output", "out"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json = fs::read_to_string(dir.path().join("out/session_0000.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["results"]["info_bits_per_unit"], 2);
    assert!(v["ledger"]["by_stage"]["attack"].as_u64().unwrap() > 0);
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = blockqkd(&["verify"], dir.path());
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().filter(|l| l.ends_with("PASS")).count(), 24);

    assert_eq!(blockqkd(&["verify", "--n", "5"], dir.path()).status.code(), Some(2));

    fs::write(dir.path().join("bad.txt"), "dim 4\n1,0 1,0 0,0 0,0\n0,0 1,0 0,0 0,0\n0,0 0,0 1,0 0,0\n0,0 0,0 0,0 1,0\n").unwrap();
    let bad = blockqkd(&["verify", "--matrix", "bad.txt"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("not unitary"));

    fs::write(dir.path().join("good.txt"), format_matrix_file(&UnitarySpec::random(4, 8))).unwrap();
    assert_eq!(blockqkd(&["verify", "--matrix", "good.txt", "--n", "3"], dir.path()).status.code(), Some(0));
}

#[test]
fn report_pretty_prints_sections_in_schema_order() {
    let dir = tempfile::tempdir().unwrap();
    assert!(blockqkd(&["run", "--num-blocks", "100", "--output", "out"], dir.path()).status.success());
    let out = blockqkd(&["report", "out/session_0000.json"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let pos: Vec<usize> = ["[config]", "[results]", "[ledger]", "[versions]"].iter().map(|s| text.find(s).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]));
    assert!(text.contains("qber_true"));
}
