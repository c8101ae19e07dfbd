use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dps_core::dps::s_parameters;
use dps_core::geometry::MutPermittivity;
use dps_core::io::touchstone;
use dps_core::rfcore::FrequencyGrid;
use dps_core::sensitivity::SensorModel;
use serde_json::Value;
use tempfile::TempDir;

fn example_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/example.cfg")
}

fn geometry_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/reference_design.cfg")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dps-sense"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Config with the bundled geometry followed by `extra` lines.
fn config_with(dir: &Path, extra: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    fs::write(
        &p,
        format!("geometry_file = {}\n{extra}\n", geometry_config().display()),
    )
    .unwrap();
    p
}

#[test]
fn extract_reports_circuit_and_comparison() {
    let dir = TempDir::new().unwrap();
    let o = run(&["extract"], &example_config(), dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&dir.path().join("extract.json"));
    assert_eq!(v["tabulated_comparison"].as_array().unwrap().len(), 6);
    let ci = v["extraction"]["circuit"]["c_i"][0].as_f64().unwrap();
    assert!((ci - 1.1817e-12).abs() < 1e-15);
    assert!(dir.path().join("run.log").exists());
}

#[test]
fn missing_config_is_an_io_failure() {
    let dir = TempDir::new().unwrap();
    let o = run(&["extract"], &dir.path().join("nope.cfg"), dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_unit_names_the_field() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(geometry_config())
        .unwrap()
        .replace("h_u = 0.6mm", "h_u = 0.6mq");
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, text).unwrap();
    let o = run(&["extract"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("h_u") && err.contains("line 5"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = config_with(dir.path(), "sweep_pionts = 10");
    let o = run(&["sweep"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep_pionts"));
}

#[test]
fn model_failures_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let cfg = config_with(dir.path(), "sweep_vwc = 45\nsweep_points = 11");
    let o = run(&["sweep"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(dir.path().join("out/run.log")).unwrap();
    assert!(log.contains("exit 1"));
}

#[test]
fn sweeps_cover_each_vwc_and_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = config_with(dir.path(), "sweep_points = 201");
    let out = dir.path().join("out");
    assert!(run(&["sweep", "--cells", "2"], &cfg, &out).status.success());
    for v in [0, 10, 20, 30] {
        let text = fs::read_to_string(out.join(format!("sweep_vwc{v}.s2p"))).unwrap();
        let back = touchstone::read(&text).unwrap();
        assert_eq!(back.points.len(), 201);
        assert!(out.join(format!("sweep_vwc{v}.csv")).exists());
    }
    // the 0% knot is ε = 2.5 − j0.05
    let model = SensorModel::reference_design();
    let direct = s_parameters(
        &model.circuit(MutPermittivity::new(2.5, 0.05).unwrap()).unwrap(),
        &FrequencyGrid::linear(50e6, 1.5e9, 201).unwrap(),
        50.0,
        2,
    )
    .unwrap();
    let written = touchstone::read(&fs::read_to_string(out.join("sweep_vwc0.s2p")).unwrap()).unwrap();
    for (a, b) in direct.points.iter().zip(&written.points) {
        assert_eq!(a.frequency, b.frequency);
        assert_eq!(a.sparams.unwrap().s21, b.sparams.unwrap().s21);
    }
}

#[test]
fn band_report_has_both_methods() {
    let dir = TempDir::new().unwrap();
    assert!(run(&["band"], &example_config(), dir.path()).status.success());
    let v = json(&dir.path().join("band.json"));
    let fz2 = v["tabulated"]["closed_form"]["f_z2"].as_f64().unwrap();
    assert!((fz2 - 197.383e6).abs() < 1e4);
    assert!(v["tabulated"]["numeric"]["bands"].as_array().unwrap().len() >= 1);
    assert_eq!(v["tabulated"]["discrepancies"].as_array().unwrap().len(), 3);
}

#[test]
fn sense_picks_the_low_edge_and_refers_to_vwc() {
    let dir = TempDir::new().unwrap();
    assert!(run(&["sense"], &example_config(), dir.path()).status.success());
    let v = json(&dir.path().join("sense.json"));
    assert!(v["optimal_band_fraction"].as_f64().unwrap() < 0.25);
    let r = &v["vwc_referred"];
    let s = r["s_dps_deg_per_eps"].as_f64().unwrap();
    assert_eq!(r["d_eps_d_vwc"].as_f64().unwrap(), 0.5);
    assert!((r["deg_per_vwc"].as_f64().unwrap() - 0.5 * s).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("sensitivity_map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 902);
}

#[test]
fn quantized_synthetic_inversion() {
    let dir = TempDir::new().unwrap();
    assert!(run(&["invert", "--quantize"], &example_config(), dir.path())
        .status
        .success());
    let rows: Vec<Value> = fs::read_to_string(dir.path().join("inversion.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 7);
    for r in &rows {
        let nominal = r["nominal_vwc"].as_f64().unwrap();
        let err = r["vwc_error"].as_f64().unwrap().abs();
        let limit = if nominal == 0.0 { 0.3 } else { 1.2 };
        assert!(err <= limit, "{r}");
    }
    let s = json(&dir.path().join("inversion_summary.json"));
    assert_eq!(s["failed"], 0);
    assert!(s["report"].as_str().unwrap().ends_with('%'));
}

#[test]
fn bad_rows_do_not_stop_the_batch() {
    let dir = TempDir::new().unwrap();
    let synth = dir.path().join("synth");
    assert!(run(&["invert", "--fexc", "398e6"], &example_config(), &synth)
        .status
        .success());
    let mut text = fs::read_to_string(synth.join("synthetic_readings.csv")).unwrap();
    text.push_str("2.5,0.9,\nabc,0.9,\n");
    let readings = dir.path().join("readings.csv");
    fs::write(&readings, text).unwrap();
    let out = dir.path().join("out");
    let o = run(
        &[
            "invert",
            "--fexc",
            "398e6",
            "--readings",
            readings.to_str().unwrap(),
        ],
        &example_config(),
        &out,
    );
    assert!(o.status.success());
    let s = json(&out.join("inversion_summary.json"));
    assert_eq!(s["rows"], 9);
    assert_eq!(s["succeeded"], 7);
    assert_eq!(s["failed"], 2);
    let last: Vec<Value> = fs::read_to_string(out.join("inversion.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(last[7]["error"].as_str().unwrap().contains("v_p"));
    assert!(last[8]["error"].as_str().unwrap().contains("abc"));
}

#[test]
fn pulse_writes_waveforms_and_matrix() {
    let dir = TempDir::new().unwrap();
    assert!(run(&["pulse"], &example_config(), dir.path()).status.success());
    let waveforms = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("waveform_")
        })
        .count();
    assert_eq!(waveforms, 12);
    let m = fs::read_to_string(dir.path().join("distortion_matrix.csv")).unwrap();
    assert_eq!(m.lines().count(), 5);
    let purity: Vec<f64> = m
        .lines()
        .last()
        .unwrap()
        .split(',')
        .skip(1)
        .map(|x| x.parse().unwrap())
        .collect();
    assert!(purity.iter().all(|&p| p > 60.0));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = config_with(dir.path(), "sweep_points = 101\nmap_points = 181");
    for cmd in ["extract", "sweep", "band", "sense", "invert"] {
        let (a, b) = (
            dir.path().join(format!("{cmd}-a")),
            dir.path().join(format!("{cmd}-b")),
        );
        assert!(run(&[cmd], &cfg, &a).status.success());
        assert!(run(&[cmd], &cfg, &b).status.success());
        for entry in fs::read_dir(&a).unwrap() {
            let name = entry.unwrap().file_name();
            if name == "run.log" {
                continue;
            }
            assert_eq!(
                fs::read(a.join(&name)).unwrap(),
                fs::read(b.join(&name)).unwrap(),
                "{cmd} {name:?}"
            );
        }
    }
}
