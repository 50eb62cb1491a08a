use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn modesim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modesim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("MODESIM_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &TempDir, name: &str, json: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, json).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Data rows of a rates CSV as columns of numbers; empty fields become NaN.
fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|f| f.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn perfect_csit_zf_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "zf.json",
        r#"{"n_tx": 4, "n_users": 4, "snr_db": 6.02, "doppler_ts": 0}"#,
    );
    let out = modesim(&["rates", s(&cfg), "--mode", "zf", "--method", "closed"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("snr_db,rate_bps_hz,std_error,per_user_1,per_user_2,per_user_3,per_user_4"));
    assert!(text.lines().any(|l| l.starts_with("# config_digest: sha256:")));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    assert!(rows[0][2].is_nan(), "closed forms carry no standard error");
    for u in 0..4 {
        assert!((rows[0][3 + u] - 0.8604).abs() < 1e-3, "{:?}", rows[0]);
    }
}

#[test]
fn quantized_bf_closed_form_matches_simulation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "bf.json",
        r#"{"n_tx": 4, "n_users": 1, "snr_db": 0, "feedback_bits": 10}"#,
    );
    let closed = modesim(&["rates", s(&cfg), "--mode", "bf", "--snr-db", "0:10:20"]);
    let mc = modesim(&[
        "rates",
        s(&cfg),
        "--mode",
        "bf",
        "--method",
        "mc",
        "--snr-db",
        "0:10:20",
        "--trials",
        "5000",
    ]);
    assert!(closed.status.success() && mc.status.success());
    let (closed, mc) = (csv_rows(&stdout(&closed)), csv_rows(&stdout(&mc)));
    assert_eq!(closed.len(), 3);
    for (c, m) in closed.iter().zip(&mc) {
        assert_eq!(c[0], m[0]);
        assert!(
            (c[1] - m[1]).abs() <= 3.0 * m[2],
            "closed {} vs mc {} ± {}",
            c[1],
            m[1],
            m[2]
        );
    }
}

#[test]
fn fixed_seed_reproduces_output_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "qd.json",
        r#"{"n_tx": 4, "n_users": 4, "snr_db": 10, "doppler_ts": 0.03, "feedback_bits": 8}"#,
    );
    let run = |name: &str, threads: Option<&str>| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_modesim"));
        cmd.args([
            "rates",
            s(&cfg),
            "--mode",
            "zf",
            "--method",
            "mc",
            "--snr-db",
            "0:10:20",
        ])
        .args(["--trials", "2000", "--seed", "42", "--out", s(&out)])
        .env("RUST_LOG", "warn");
        match threads {
            Some(n) => cmd.env("MODESIM_THREADS", n),
            None => cmd.env_remove("MODESIM_THREADS"),
        };
        assert!(cmd.status().unwrap().success());
        fs::read(out).unwrap()
    };
    let first = run("a.csv", None);
    assert_eq!(first, run("b.csv", None));
    assert_eq!(first, run("c.csv", Some("1")));
    assert_eq!(first, run("d.csv", Some("3")));
}

#[test]
fn key_order_and_whitespace_do_not_change_output() {
    let dir = TempDir::new().unwrap();
    let a = write_config(&dir, "a.json", r#"{"n_tx":4,"n_users":4,"snr_db":0,"doppler_ts":0.04}"#);
    let b = write_config(
        &dir,
        "b.json",
        "{\n  \"doppler_ts\": 0.04,\n  \"snr_db\": 0.0,\n  \"n_users\": 4,\n  \"n_tx\": 4\n}\n",
    );
    let ra = modesim(&["rates", s(&a), "--mode", "zf", "--snr-db", "0:5:20"]);
    let rb = modesim(&["rates", s(&b), "--mode", "zf", "--snr-db", "0:5:20"]);
    assert!(ra.status.success());
    assert_eq!(ra.stdout, rb.stdout);
}

#[test]
fn switching_point_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "d.json",
        r#"{"n_tx": 4, "n_users": 4, "snr_db": 0, "doppler_ts": 0.04}"#,
    );
    let out = modesim(&["switch", s(&cfg)]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let crossings = doc["report"]["crossings_db"].as_array().unwrap();
    let upper = crossings.last().unwrap().as_f64().unwrap();
    assert!((upper - 32.9).abs() <= 0.3, "{upper}");
    assert!(doc["manifest"]["config_digest"]
        .as_str()
        .unwrap()
        .starts_with("sha256:"));
}

#[test]
fn bits_region_at_pedestrian_speed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "walk.json",
        r#"{"n_tx": 4, "n_users": 4, "snr_db": 0, "velocity_kmh": 10, "carrier_hz": 2e9, "symbol_period_s": 1e-3}"#,
    );
    let out = modesim(&[
        "region",
        s(&cfg),
        "--axis",
        "bits",
        "--grid",
        "8:1:16",
        "--snr-db",
        "-10:0.25:60",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert!(lines.next().unwrap().starts_with("feedback_bits\\snr_db,-10,"));
    let first_mu = lines
        .find(|l| l.split(',').skip(1).any(|c| c == "MU"))
        .map(|l| l.split(',').next().unwrap().parse::<u32>().unwrap());
    assert!(matches!(first_mu, Some(12 | 13)), "{first_mu:?}");
}

#[test]
fn scenario_without_mu_region() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "fast.json",
        r#"{"n_tx": 4, "n_users": 4, "snr_db": 0, "doppler_ts": 0.2, "feedback_bits": 4}"#,
    );
    let out = modesim(&["switch", s(&cfg)]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["report"]["crossings_db"].as_array().unwrap().len(), 0);

    let out = modesim(&["region", s(&cfg), "--axis", "doppler", "--grid", "0.05:0.05:0.2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let cells: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .flat_map(|l| l.split(',').skip(1))
        .collect();
    assert_eq!(cells.len(), 4 * 71);
    assert!(cells.iter().all(|&c| c == "SU"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write_config(
        &dir,
        "bad.json",
        r#"{"n_tx": 4, "n_users": 4, "snr_db": 0, "dopler_ts": 0.1}"#,
    );
    let out = modesim(&["rates", s(&bad), "--mode", "zf"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dopler_ts"));

    let typed = write_config(&dir, "typed.json", r#"{"n_tx": 4, "n_users": 4, "snr_db": "high"}"#);
    let out = modesim(&["rates", s(&typed), "--mode", "zf"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("snr_db"));

    let ok = write_config(
        &dir,
        "ok.json",
        r#"{"n_tx": 4, "n_users": 4, "snr_db": 0, "feedback_bits": 30}"#,
    );
    assert_eq!(
        modesim(&["rates", s(&ok), "--mode", "mmse", "--method", "closed"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        modesim(&["rates", "/no/such/file.json", "--mode", "zf"]).status.code(),
        Some(2)
    );
    assert_eq!(
        modesim(&["rates", s(&ok), "--mode", "zf", "--snr-db", "5:0:1"])
            .status
            .code(),
        Some(2)
    );

    let out = modesim(&[
        "rates",
        s(&ok),
        "--mode",
        "zf",
        "--method",
        "mc",
        "--trials",
        "10",
        "--cell-approx",
        "off",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("\"feedback_bits\":30"));
}

#[test]
fn numerics_suite_passes() {
    let out = modesim(&["validate", "--suite", "numerics"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 4);
}
