use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qsync::formats;

fn qsync(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qsync")).current_dir(dir).args(args).output().expect("spawn qsync")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = qsync(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn generate_simulate_and_sync() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "3", "gen-string", "--L", "100000", "--N1", "10", "--out", "alice.txt"]);
    ok(d, &["--seed", "1", "simulate", "--string", "alice.txt", "--eta", "1e-2", "--qber", "0.05", "--background_rate", "200", "--fractional_offset", "3e-4", "--out", "ts.csv"]);
    assert!(d.join("ts.truth.csv").exists());

    let stdout = ok(d, &["sync", "--alice", "alice.txt", "--in", "ts.csv", "--truth", "ts.truth.csv", "--Tacq", "1e-3", "--eta_hint", "1e-2", "--out", "align.csv", "--windows", "win.csv"]);
    assert!(stdout.contains("synchronized,true"), "{stdout}");
    assert!(stdout.contains("alignment_accuracy,1\n"), "{stdout}");

    let truth = formats::truth_from_csv(&fs::read_to_string(d.join("ts.truth.csv")).unwrap()).unwrap();
    let align = fs::read_to_string(d.join("align.csv")).unwrap();
    let mut matched = 0;
    for (line, t) in align.lines().skip(1).zip(&truth) {
        let index = line.split(',').nth(1).unwrap();
        if let Some(n) = t.emitted_index.filter(|_| !t.is_background) {
            assert_eq!(index, n.to_string());
            matched += 1;
        }
    }
    assert!(matched > 500);
    assert!(fs::read_to_string(d.join("win.csv")).unwrap().starts_with(formats::PERIOD_HEADER));
}

#[test]
fn sync_failure_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-string", "--L", "100000", "--N1", "10", "--out", "alice.txt"]);
    ok(d, &["simulate", "--string", "alice.txt", "--eta", "1e-3", "--out", "ts.csv"]);
    let out = qsync(d, &["sync", "--alice", "alice.txt", "--in", "ts.csv", "--Tacq", "1e-4"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("synchronized,false"));
}

#[test]
fn xcorr_recovers_a_known_shift() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "8", "gen-string", "--L", "20000", "--N1", "10", "--binary", "--out", "alice.bin"]);
    let s = formats::string_from_bytes(&fs::read(d.join("alice.bin")).unwrap()).unwrap();
    let bob = qsync_core::channel::erase_and_flip(s.symbols(), 4321, 0.05, 0.05, 2);
    fs::write(d.join("bob.csv"), formats::ternary_to_csv(&bob)).unwrap();
    let stdout = ok(d, &["xcorr", "--alice", "alice.bin", "--bob", "bob.csv"]);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some(formats::OFFSET_HEADER));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "4321");
    assert_eq!(row[5], "true");
}

#[test]
fn period_reports_each_window() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("run.cfg"), "L=50000\nN1=10\neta=0.05\nfractional_offset=1e-4\nTacq=2e-4\n").unwrap();
    ok(d, &["simulate", "--config", "run.cfg", "--out", "ts.csv"]);
    let stdout = ok(d, &["period", "--config", "run.cfg", "--in", "ts.csv"]);
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert!(rows.len() >= 4, "{stdout}");
    for row in rows {
        let tau_b: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!((tau_b / 20e-9 - (1.0 + 1e-4)).abs() < 1e-6, "{row}");
    }
}

#[test]
fn bench_and_sweep_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bench = ok(d, &["bench", "--L", "4096,8192", "--N1", "log2"]);
    assert!(bench.starts_with("L,N1,stage1_ops,stage2_ops,baseline_ops,wall_ns\n"));
    assert_eq!(bench.lines().count(), 3);

    ok(d, &["--seed", "1", "sweep", "--qber", "0.05", "--bits", "1000", "--reps", "2", "--L", "100000", "--out", "map.csv"]);
    let map = fs::read_to_string(d.join("map.csv")).unwrap();
    assert_eq!(map, "qber,bits,success_fraction\n0.05,1000,1\n");
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.cfg"), "colour=red\n").unwrap();
    let out = qsync(d, &["simulate", "--config", "bad.cfg", "--out", "ts.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
    let out = qsync(d, &["bench", "--L", "4096", "--N1", "many"]);
    assert_eq!(out.status.code(), Some(1));
}
