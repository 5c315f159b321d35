use std::process::{Command, Output};

fn edgeho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeho")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sweep_writes_csv_with_header() {
    let o = edgeho(&["sweep-rate", "--trials", "3", "--values", "2,8"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sweep,sweep_value,strategy,mean_worst_delay_s,std_s,trials,base_seed");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("rate,2,ctHO,"));
}

#[test]
fn out_flag_and_threads_give_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, threads) in [(&a, "1"), (&b, "4")] {
        let o = edgeho(&[
            "sweep-users",
            "--trials",
            "5",
            "--seed",
            "9",
            "--threads",
            threads,
            "--values",
            "1,3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn config_file_and_key_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# test\nc_max = 2048\ntrials=7\n").unwrap();
    let o = edgeho(&["single", "--config", path.to_str().unwrap(), "--g-tokens", "512", "--emit-config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("c_max=2048\n"));
    assert!(text.contains("trials=7\n"));
    assert!(text.contains("g_tokens=512\n"));
    assert!(text.contains("charge_prefill_overhead_at_zero=false\n"));

    let o = edgeho(&["single", "--config", path.to_str().unwrap(), "--charge-prefill-overhead-at-zero", "--emit-config"]);
    assert!(stdout(&o).contains("charge_prefill_overhead_at_zero=true\n"));
}

#[test]
fn emitted_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emitted.cfg");
    let first = edgeho(&["sweep-dbs", "--trials", "4", "--freeze-snr-at-handover", "--emit-config"]);
    std::fs::write(&path, &first.stdout).unwrap();
    let second = edgeho(&["sweep-dbs", "--config", path.to_str().unwrap(), "--emit-config"]);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_errors_exit_nonzero() {
    for args in [
        &["sweep-rate", "--trials", "0"][..],
        &["sweep-rate", "--c-max", "abc"],
        &["sweep-cache", "--values", "100.5"],
        &["single", "--config", "/nonexistent/edgeho.cfg"],
        &["sweep-rate", "--r-bh"],
    ] {
        let o = edgeho(args);
        assert!(!o.status.success(), "{args:?} should fail");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn single_report_is_reproducible() {
    let a = edgeho(&["single", "--seed", "5"]);
    let b = edgeho(&["single", "--seed", "5"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("[plans]"));
    assert!(text.contains("[schedule ctHO]"));
}

#[test]
fn verify_passes_on_small_run() {
    let o = edgeho(&["verify", "--trials", "30"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).trim_end().ends_with("all checks passed"));
}
