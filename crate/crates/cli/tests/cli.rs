use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn safezone(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_safezone"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn point_report_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = safezone(&["point", "0.05"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let v = json(&out);
    for key in [
        "z_link_m",
        "r_th_m",
        "theta_th_urad",
        "beam_radius_m",
        "a0",
        "a_safe",
        "accept_prob",
        "i_bar_bits",
        "k_bar_bits",
        "k_bar_floored_bits",
        "err_est_bits",
        "key_rate_mode",
    ] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let k = v["k_bar_bits"].as_f64().unwrap();
    assert_eq!(v["k_bar_floored_bits"].as_f64().unwrap(), k.max(0.0));
    let closed = 1.0 - (-0.05f64 * 0.05 / (2.0 * 500.0 * 500.0 * 50e-6 * 50e-6)).exp();
    assert!((v["accept_prob"].as_f64().unwrap() - closed).abs() <= 1e-9);
}

#[test]
fn theta_units_convert_through_link_length() {
    let dir = tempfile::tempdir().unwrap();
    let m = json(&safezone(&["point", "0.05"], dir.path()));
    let t = json(&safezone(&["point", "100", "--theta-units"], dir.path()));
    let a = m["k_bar_bits"].as_f64().unwrap();
    let b = t["k_bar_bits"].as_f64().unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs());
}

#[test]
fn clamped_mode_is_selectable() {
    let dir = tempfile::tempdir().unwrap();
    let signed = json(&safezone(&["point", "0.3"], dir.path()));
    let clamped = json(&safezone(&["point", "0.3", "--clamped-k"], dir.path()));
    assert_eq!(clamped["key_rate_mode"], "clamped");
    assert!(clamped["k_bar_bits"].as_f64() >= signed["k_bar_bits"].as_f64());
}

#[test]
fn sweep_csv_rows_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--r-th-points", "12", "--out", "a.csv"];
    assert!(safezone(&args, dir.path()).status.success());
    let args = ["sweep", "--r-th-points", "12", "--out", "b.csv"];
    assert!(safezone(&args, dir.path()).status.success());
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "r_th_m,i_bar_bits,k_bar_bits,k_bar_floored_bits,accept_prob,err_est"
    );
    assert_eq!(lines.count(), 12);
}

#[test]
fn sweep_explicit_grid_with_mc_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = safezone(
        &[
            "sweep",
            "--r-th",
            "0.02,0.05",
            "--mc-samples",
            "100000",
            "--seed",
            "3",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.ends_with("mc_i_bar_bits,mc_k_bar_bits,mc_stderr_i_bits,mc_stderr_k_bits"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn surface_summary_matches_csv_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let out = safezone(
        &[
            "surface",
            "--w-points",
            "4",
            "--w-min",
            "0.03",
            "--w-max",
            "0.12",
            "--r-th-points",
            "6",
            "--r-th-min",
            "0.005",
            "--r-th-max",
            "0.3",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("s.json")).unwrap()).unwrap();
    let mut rdr = csv::Reader::from_path(dir.path().join("s.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers[0], "w_m");
    assert_eq!(&headers[7], "error");
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 24);
    let best = rows
        .iter()
        .max_by(|a, b| {
            let ka: f64 = a[3].parse().unwrap();
            let kb: f64 = b[3].parse().unwrap();
            ka.total_cmp(&kb)
        })
        .unwrap();
    let opt = &summary["optimum"];
    assert_eq!(
        best[0].parse::<f64>().unwrap(),
        opt["w_m"].as_f64().unwrap()
    );
    assert_eq!(
        best[1].parse::<f64>().unwrap(),
        opt["r_th_m"].as_f64().unwrap()
    );
    assert_eq!(
        best[3].parse::<f64>().unwrap(),
        opt["k_bar_bits"].as_f64().unwrap()
    );
    let frac = summary["secure_region_fraction"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&frac));
}

#[test]
fn failed_surface_cells_set_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[quad]\nrel_tol = 1e-12\nabs_tol = 0.0\nmax_subdivisions = 10\n",
    )
    .unwrap();
    let out = safezone(
        &[
            "surface",
            "--config",
            "c.toml",
            "--w-points",
            "2",
            "--r-th",
            "0.01,0.05",
            "--out",
            "s.csv",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(5));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn validate_passes_at_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = safezone(&["validate"], dir.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success(), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 15);
    assert!(!text.contains("FAIL"));
}

#[test]
fn validate_rejects_bad_config_before_checks() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "[protocol]\nexcess_noise = -1.0\n",
    )
    .unwrap();
    let out = safezone(&["validate", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("excess_noise"));
}

#[test]
fn validate_rejects_small_samples() {
    let dir = tempfile::tempdir().unwrap();
    let out = safezone(&["validate", "--mc-samples", "5000"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
}

#[test]
fn exit_codes_by_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), "[geometry]\nz_lnik = 3.0\n").unwrap();
    let out = safezone(&["point", "0.05", "--config", "typo.toml"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("z_lnik"));

    std::fs::write(
        dir.path().join("ring.toml"),
        "[geometry]\nsafe_radius = 0.01\n",
    )
    .unwrap();
    let out = safezone(&["point", "0.05", "--config", "ring.toml"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("guard ring"));

    assert_eq!(safezone(&["point"], dir.path()).status.code(), Some(2));
    assert_eq!(safezone(&["frobnicate"], dir.path()).status.code(), Some(2));

    let out = safezone(&["point", "0.05", "--config", "missing.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = safezone(
        &["sweep", "--r-th", "0.01", "--out", "no/such/dir/x.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    let out = safezone(&["sweep", "--r-th", "0.05,0.01"], dir.path());
    assert_eq!(out.status.code(), Some(4));
}
