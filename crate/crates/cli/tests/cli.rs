use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rwrs(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rwrs"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn oracle_reports_exact_mean_range() {
    let dir = tempfile::tempdir().unwrap();
    let out = rwrs(&["oracle", "--set", "oracle_n=2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("exact.csv")).unwrap();
    assert!(table.contains("mean_range,2,2.5,0.0,0,exact"), "{table}");
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"identity_holds\": true"));
    assert!(dir.path().join("resolved.toml").exists());
    assert!(dir.path().join("plot.csv").exists());
}

#[test]
fn zero_replicas_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rwrs(&["survival", "--replicas", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replicas"));
}

#[test]
fn config_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "seed = 3\n\n[grid\nlo = 4\n").unwrap();
    let out = rwrs(&["range", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    fs::write(&cfg, "seed = 3\ncolour = 1\n").unwrap();
    let out = rwrs(&["range", "--config", cfg.to_str().unwrap()], &dir.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 5\nreplicas = 3000\n\n[model]\nkind = \"mdm\"\np = 0.4\n\n[grid]\nlo = 4\nhi = 10\n",
    )
    .unwrap();
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = rwrs(&["survival", "--config", cfg, "--threads", threads], out);
        assert!(o.status.code() != Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let strip = |v: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        v.into_iter().filter(|(name, _)| name != "resolved.toml").collect()
    };
    assert_eq!(strip(files(&a)), strip(files(&b)));

    let c = dir.path().join("c");
    rwrs(&["survival", "--config", cfg, "--threads", "1"], &c);
    let resolved = |d: &Path| fs::read_to_string(d.join("resolved.toml")).unwrap().replace(d.to_str().unwrap(), "");
    assert_eq!(resolved(&a), resolved(&c));
    assert_eq!(strip(files(&a)), strip(files(&c)));
}

#[test]
fn ks_writes_extrapolated_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = rwrs(
        &["ks", "--replicas", "400", "--set", "model.kind=ks", "--set", "model.m=[64, 256, 1024]"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(dir.path().join("ks.csv")).unwrap();
    assert!(table.starts_with("estimator_id,m,replicas,sup_mean,sup_stderr,supminf_mean,supminf_stderr\n"));
    assert_eq!(table.lines().count(), 4 + table.contains("/extrapolated") as usize);
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"kappa\""));
}

#[test]
fn simulate_both_modes_writes_exact_and_replica_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = rwrs(
        &[
            "simulate", "--replicas", "200", "--set", "grid.hi=9", "--set", "mode=both", "--set", "per_replica=true",
            "--set", "oracle_n=6",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let replicas = fs::read_to_string(dir.path().join("replicas.csv")).unwrap();
    assert_eq!(replicas.lines().count(), 201);
    assert!(fs::read_to_string(dir.path().join("exact.csv")).unwrap().contains(",exact"));
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let out = rwrs(&["verify", "-c", "7", "--threads", "2"], dir.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS [7]"), "{stdout}");
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("verify.json").exists());
    let out = rwrs(&["verify", "-c", "12"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}
