use std::path::Path;
use std::process::Command;

use wisense::io::{read_json, read_spectrogram_csv};
use wisense::monitor::ActivitySummary;

fn wisense(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wisense"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SENSING: &str = r#"{"sample_rate_hz": 2000, "bandwidth_hz": 2000, "burst_duration_s": 0.08}"#;

#[test]
fn receding_scatterer_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let cfg = write(dir, "sensing.json", SENSING);
    let tx = wisense(dir, &["--config", &cfg, "synth", "--duration", "4"]);
    assert!(tx.status.success(), "{}", String::from_utf8_lossy(&tx.stderr));

    // moves straight away from a co-located transmitter and receiver at 1 m/s
    let scene = write(
        dir,
        "scene.json",
        r#"{
            "tx_pos": [0, 0, 1],
            "ref_rx_pos": [0, 0.5, 1],
            "surv_rx_pos": [[0, 0, 1]],
            "scatterers": [{"keyframes": [[0, 3, 0, 1], [4, 7, 0, 1]], "reflectivity": 1.0}],
            "wall_attenuation_db": 0,
            "direct_leakage_db": 30
        }"#,
    );
    let tx_path = dir.join("tx.iq");
    let sim = wisense(dir, &["simulate", "--scene", &scene, "--tx", tx_path.to_str().unwrap()]);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(dir.join("reference.iq").is_file() && dir.join("surveillance0.iq").is_file());

    let caf = wisense(
        dir,
        &[
            "caf",
            "--reference",
            dir.join("reference.iq").to_str().unwrap(),
            "--surveillance",
            dir.join("surveillance0.iq").to_str().unwrap(),
            "--pgm",
        ],
    );
    assert!(caf.status.success(), "{}", String::from_utf8_lossy(&caf.stderr));
    assert!(dir.join("spectrogram.pgm").is_file());
    let spec = read_spectrogram_csv(&dir.join("spectrogram.csv")).unwrap();
    let wavelength = wisense::SPEED_OF_LIGHT / 2.4e9;
    let want = -2.0 / wavelength;
    for row in &spec.magnitudes {
        let (f, _) = spec
            .doppler_axis_hz
            .iter()
            .zip(row)
            .filter(|(f, _)| f.abs() > 3.0)
            .fold((0.0, f64::MIN), |b, (f, p)| if *p > b.1 { (*f, *p) } else { b });
        assert!((f - want).abs() <= spec.resolution_hz, "peak {f} Hz, want {want} Hz");
    }

    let monitor = wisense(dir, &["monitor", "--spec", dir.join("spectrogram.csv").to_str().unwrap(), "--epoch", "1"]);
    assert!(monitor.status.success(), "{}", String::from_utf8_lossy(&monitor.stderr));
    let summary: ActivitySummary = read_json(&dir.join("summary.json")).unwrap();
    assert!(summary.total_min > 0.0);
    assert!((summary.sedentary_min + summary.moderate_min + summary.vigorous_min - summary.total_min).abs() < 1e-9);
}

#[test]
fn mismatched_sample_rates_fail_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let a = write(dir, "a.json", SENSING);
    let b = write(dir, "b.json", r#"{"sample_rate_hz": 4000, "bandwidth_hz": 4000, "burst_duration_s": 0.04}"#);
    assert!(wisense(dir, &["--config", &a, "synth", "--name", "a.iq"]).status.success());
    assert!(wisense(dir, &["--config", &b, "synth", "--name", "b.iq"]).status.success());
    let out = wisense(
        dir,
        &[
            "caf",
            "--reference",
            dir.join("a.iq").to_str().unwrap(),
            "--surveillance",
            dir.join("b.iq").to_str().unwrap(),
            "--pgm",
        ],
    );
    assert!(!out.status.success());
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert!(!dir.join("spectrogram.csv").exists());
    assert!(!dir.join("spectrogram.pgm").exists());
}

#[test]
fn missing_input_and_bad_usage_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let missing = wisense(dir, &["caf", "--reference", "nope.iq", "--surveillance", "nope.iq"]);
    assert_eq!(missing.status.code(), Some(2));
    let usage = wisense(dir, &["demo", "4"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(std::fs::read_dir(dir).unwrap().count(), 0);
}

#[test]
fn monitoring_demo_accounts_for_every_minute() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = wisense(dir, &["--seed", "3", "demo", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = read_json(&dir.join("manifest.json")).unwrap();
    let minutes = manifest["results"]["session_minutes"].as_f64().unwrap();
    let summary: ActivitySummary = read_json(&dir.join("summary.json")).unwrap();
    assert!((summary.total_min - minutes).abs() < 1e-9);
    assert!((summary.total_min - 20.0).abs() < 1e-9);
    let listed: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["file"].as_str().unwrap())
        .collect();
    for name in ["truth.jsonl", "intensity.csv", "summary.json", "model.json", "detections.jsonl", "labels.jsonl"] {
        assert!(listed.iter().any(|p| p.ends_with(name)), "{name} missing from manifest");
    }
}
