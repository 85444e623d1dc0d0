//! End-to-end checks of the command-line interface: exit codes, CSV
//! round-tripping, determinism, and the config override machinery.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cfqkd"))
}

fn write_default_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("default.cfg");
    fs::write(
        &path,
        "\
mean_photon_number = 0.1
reflectivity = 0.5
channel_transmission = 0.1
eve_channel_transmission = 0.12
eta_d0 = 0.1
eta_d1 = 0.1
eta_d2 = 0.1
eta_eve = 0.1
discrimination = none
",
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn baseline_csv_round_trips_library_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "baseline",
        "--config",
        cfg_path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "p_d0,p_d1,p_d2,p_d0_opp");
    let values: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();

    let cfg = cfqkd::ConfigInput::default().validate().unwrap();
    let stats = cfqkd::baseline_stats(&cfg);
    assert_eq!(
        values,
        vec![stats.p_d0, stats.p_d1, stats.p_d2, stats.p_d0_opp]
    );
}

#[test]
fn vacuum_override_prints_zeros_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "baseline",
        "--config",
        cfg_path.to_str().unwrap(),
        "--set",
        "mean_photon_number=0",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    assert_eq!(row, "0,0,0,0");
}

#[test]
fn invalid_config_values_name_the_field_and_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "baseline",
        "--config",
        cfg_path.to_str().unwrap(),
        "--set",
        "reflectivity=1.3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("reflectivity"));
}

#[test]
fn unknown_keys_are_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    fs::write(&cfg_path, "coupling = 0.3\n").unwrap();
    let out = run(&["baseline", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("coupling"));

    let good = write_default_config(dir.path());
    let out = run(&[
        "baseline",
        "--config",
        good.to_str().unwrap(),
        "--set",
        "sigma=0.2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("sigma"));
}

#[test]
fn missing_config_file_exits_1() {
    let out = run(&["baseline", "--config", "/nonexistent/nowhere.cfg"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sigma_prime_below_sigma_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "baseline",
        "--config",
        cfg_path.to_str().unwrap(),
        "--set",
        "eve_channel_transmission=0.05",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("eve_channel_transmission"));
}

#[test]
fn degenerate_baseline_ratio_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "attack",
        "--config",
        cfg_path.to_str().unwrap(),
        "--set",
        "mean_photon_number=0",
        "--scenario",
        "combined-nodisc",
        "--x",
        "0.042",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("zero"));
}

#[test]
fn scenario_discrimination_mismatch_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "attack",
        "--config",
        cfg_path.to_str().unwrap(),
        "--set",
        "discrimination=all",
        "--scenario",
        "combined-nodisc",
        "--x",
        "0.042",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn attack_csv_matches_published_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "attack",
        "--config",
        cfg_path.to_str().unwrap(),
        "--scenario",
        "combined-nodisc",
        "--x",
        "0.042",
        "--z",
        "0.668",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "p_d0,p_d1,p_d2,p_d0_opp,r_d0,r_d1,r_d2,r_d0_opp,x,y,z,z0,max_deviation"
    );
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    // r_d0 and the solved y.
    assert!((row[4] - 1.01383).abs() < 5e-5);
    assert_eq!(row[9], 1.0);
}

#[test]
fn simulate_is_byte_deterministic_and_exports_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let records = dir.path().join("records.csv");
    let args = [
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--scenario",
        "combined-nodisc",
        "--pulses",
        "20000",
        "--seed",
        "7",
        "--x",
        "0.042",
        "--z",
        "0.668",
        "--records",
        records.to_str().unwrap(),
    ];
    let first = run(&args);
    assert!(first.status.success());
    let first_records = fs::read_to_string(&records).unwrap();
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(first_records, fs::read_to_string(&records).unwrap());

    let mut lines = first_records.lines();
    assert_eq!(lines.next().unwrap(), cfqkd::PulseRecord::CSV_HEADER);
    assert_eq!(first_records.lines().count(), 20_001);
    // Every regular line has the full field count.
    let field_count = cfqkd::PulseRecord::CSV_HEADER.split(',').count();
    for line in lines {
        assert_eq!(line.split(',').count(), field_count);
    }
}

#[test]
fn simulate_rejects_single_photon_combined_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--scenario",
        "combined-nodisc",
        "--source",
        "single-photon",
        "--pulses",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tables_csv_lists_all_cells() {
    let out = run(&["tables", "I", "--grid-step", "0.05", "--format", "csv"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "table,discrimination,column,r_d0,r_d1,r_d2,r_d0_opp,x,y,z,z0,max_deviation"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.starts_with("I,")));
    assert_eq!(rows.iter().filter(|r| r.contains(",d0d2,")).count(), 3);

    let out2 = run(&["tables", "I", "--grid-step", "0.05", "--format", "csv"]);
    assert_eq!(out.stdout, out2.stdout);
}

#[test]
fn tables_markdown_has_one_subtable_per_discrimination() {
    let out = run(&["tables", "II", "--grid-step", "0.05"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for label in [
        "discrimination: none",
        "discrimination: all",
        "discrimination: d1d2",
        "discrimination: d0d2",
    ] {
        assert!(text.contains(label), "missing {label}");
    }
    // z only in the no-discrimination sub-table, z0 only in d0d2.
    assert_eq!(text.matches("| z |").count(), 1);
    assert_eq!(text.matches("| z0 |").count(), 1);
}

#[test]
fn loss_equiv_reports_the_equivalent_fluctuation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "loss-equiv",
        "--config",
        cfg_path.to_str().unwrap(),
        "--deviation",
        "0.015",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "deviation,fluctuation_db");
    let db: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!((db - 0.069).abs() < 0.005, "got {db}");

    let out = run(&[
        "loss-equiv",
        "--config",
        cfg_path.to_str().unwrap(),
        "--deviation",
        "0.9",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn attack_rejects_scenarios_without_closed_forms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    for scenario in ["baseline", "blind-reduce"] {
        let out = run(&[
            "attack",
            "--config",
            cfg_path.to_str().unwrap(),
            "--scenario",
            scenario,
            "--x",
            "0.0",
        ]);
        assert_eq!(out.status.code(), Some(1), "scenario {scenario}");
        assert!(stderr(&out).contains("closed-form"));
    }
}

#[test]
fn simulate_csv_has_stable_header_and_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let args = [
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--scenario",
        "baseline",
        "--source",
        "single-photon",
        "--pulses",
        "10000",
        "--seed",
        "3",
        "--format",
        "csv",
    ];
    let out = run(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(
        text.lines().next().unwrap(),
        "pulses,seed,p_d0,p_d1,p_d2,p_d0_opp,sifted_key_length,qber,eve_key_recovery,z_d0,z_d1,z_d2,z_d0_opp"
    );
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "10000");
    assert_eq!(row[1], "3");
    assert_eq!(run(&args).stdout, out.stdout);
}

#[test]
fn optimize_csv_parses_and_matches_expected_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write_default_config(dir.path());
    let out = run(&[
        "optimize",
        "--config",
        cfg_path.to_str().unwrap(),
        "--scenario",
        "combined-nodisc",
        "--grid-step",
        "0.01",
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let max_deviation = row[12];
    assert!(max_deviation > 0.0 && max_deviation < 0.05);
}
