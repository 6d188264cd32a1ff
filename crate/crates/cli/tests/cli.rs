use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn rdopt(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rdopt"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_seed_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{ "oracle": { "kind": "toy" } }"#);
    let out = rdopt(&["toy-eval"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{ "seed": 1, "sed": 2 }"#);
    assert_eq!(rdopt(&["toy-eval"], &cfg, &tmp.path().join("out")).status.code(), Some(2));
}

#[test]
fn seed_flag_supplies_the_seed_and_is_stamped() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{ "oracle": { "kind": "toy" } }"#);
    let dir = tmp.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_rdopt"))
        .args(["toy-eval", "--seed", "42", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("toy_eval.csv")).unwrap();
    let first = csv.lines().next().unwrap();
    assert!(first.starts_with("# config_sha256=") && first.ends_with(" seed=42"), "{first}");
}

#[test]
fn mean_outside_training_box_exits_with_extrapolation() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
          "seed": 3,
          "training": { "count": 64 },
          "analysis": { "samples": 500,
            "mean": { "R": 301, "W": 114, "P": 318, "t_CBG": 261, "t_SiO2": 136, "t_HSQ": 702, "t_ITO": 50 } }
        }"#,
    );
    let out = rdopt(&["robustness"], &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains('R'));
}

/// Rows spread over the default training box around the NIR I geometry.
fn constant_table(path: &Path) {
    let center = [201.0, 114.0, 318.0, 261.0, 136.0, 702.0, 50.0];
    let sigma = [10.0, 10.0, 1.0, 5.0, 10.0, 10.0, 5.0];
    let mut text = String::from("# constant device\nR,W,P,t_CBG,t_SiO2,t_HSQ,t_ITO,lambda_c,fp,eta_smf\n");
    for k in 0..40u32 {
        let row: Vec<String> = (0..7)
            .map(|i| {
                let step = [2f64, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0][i].sqrt();
                let phase = 2.0 * (k as f64 * step).fract() - 1.0;
                format!("{}", center[i] + 4.0 * sigma[i] * phase)
            })
            .collect();
        text.push_str(&format!("{},930,20,0.6\n", row.join(",")));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn constant_table_gives_degenerate_report_with_echoed_tolerances() {
    let tmp = tempfile::tempdir().unwrap();
    constant_table(&tmp.path().join("table.csv"));
    let cfg = write_config(
        tmp.path(),
        r#"{
          "seed": 4,
          "oracle": { "kind": "table", "path": "table.csv" },
          "tolerances": { "R": 8, "W": 9, "P": 1, "t_CBG": 4, "t_SiO2": 7, "t_HSQ": 6, "t_ITO": 3 },
          "training": { "scales": { "R": 6, "W": 6, "P": 8, "t_CBG": 6, "t_SiO2": 6, "t_HSQ": 6, "t_ITO": 6 } },
          "analysis": { "samples": 2000 }
        }"#,
    );
    let dir = tmp.path().join("out");
    let out = rdopt(&["robustness"], &cfg, &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("robustness_report.json"));
    assert_eq!(report["tolerances"]["W"], 9.0);
    assert_eq!(report["tolerances"]["t_ITO"], 3.0);
    for (key, value) in [("lambda_c", 930.0), ("fp", 20.0), ("eta_smf", 0.6)] {
        let q = &report[key];
        let median = q["median"].as_f64().unwrap();
        assert!((median - value).abs() < 1e-6 * value, "{key}: {median}");
        assert!(q["sigma_plus"].as_f64().unwrap() < 1e-6, "{key}");
        assert!(q["sigma_minus"].as_f64().unwrap() < 1e-6, "{key}");
    }
    assert!(dir.join("surrogate.bin").exists());
}

#[test]
fn bias_sweep_brackets_the_target_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        r#"{
          "seed": 1,
          "capacitor": { "grid": { "h_grating": 10, "h_z": 10, "radius": 3000, "rings": 4 } }
        }"#,
    );
    let dir = tmp.path().join("out");
    let out = rdopt(&["capacitor"], &cfg, &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = std::fs::read_to_string(dir.join("bias_sweep.csv")).unwrap();
    let fields: Vec<f64> = sweep
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('U'))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(fields.first().unwrap() < &100.0 && fields.last().unwrap() > &100.0);
    let summary = read_json(&dir.join("capacitor.json"));
    let u = summary["voltage_for_100_kv_cm"].as_f64().unwrap();
    assert!((15.0..30.0).contains(&u), "{u}");
    let map = std::fs::read_to_string(dir.join("field_map.csv")).unwrap();
    assert!(map.lines().any(|l| l == "r_nm,z_nm,phi_V,E_r_kV_cm,E_z_kV_cm"));
}

#[test]
fn corrupt_surrogate_file_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("model.bin"), b"RDOPTSRG not really").unwrap();
    let cfg = write_config(tmp.path(), r#"{ "seed": 1, "training": { "surrogate": "model.bin" } }"#);
    assert_eq!(rdopt(&["robustness"], &cfg, &tmp.path().join("out")).status.code(), Some(2));
}

#[test]
fn shipped_configs_load() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["nir_optimize.json", "nir_robustness.json", "nir_capacitor.json"] {
        let out = rdopt(&["toy-eval"], &dir.join(name), &tmp.path().join(name));
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
