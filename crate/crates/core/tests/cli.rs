//! The `molecool` binary: exit codes, configuration errors and reruns.

mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{preset, preset_path};

fn molecool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molecool"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn scratch_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("molecool-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn morse_lists_the_four_molecules() {
    let out = molecool(&["morse"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["K2", "HCl", "HI", "NO"] {
        assert!(text.contains(name), "{name} absent");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&molecool(&["cool", "--no-such-flag"])), 1);
    assert_eq!(code(&molecool(&["frobnicate"])), 1);
    assert_eq!(code(&molecool(&["--help"])), 0);
}

#[test]
fn empty_config_lists_missing_keys() {
    let dir = scratch_dir("empty");
    let cfg = dir.join("empty.cfg");
    std::fs::write(&cfg, "# nothing here\n").unwrap();
    let out = molecool(&["steady", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    for key in [
        "omega_m",
        "mass_m",
        "q_factor",
        "drive_power",
        "temperature",
        "omega_0 or delta_f",
    ] {
        assert!(msg.contains(key), "{key} not listed in: {msg}");
    }
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn duplicate_key_names_its_lines() {
    let dir = scratch_dir("dup");
    let cfg = dir.join("dup.cfg");
    let text = std::fs::read_to_string(preset_path("fig4")).unwrap() + "temperature = 0.3\n";
    let last = text.lines().count();
    std::fs::write(&cfg, &text).unwrap();
    let out = molecool(&["steady", "--config", path_str(&cfg)]);
    assert_eq!(code(&out), 1);
    let msg = stderr(&out);
    assert!(msg.contains("temperature"), "{msg}");
    assert!(
        msg.contains(&last.to_string()),
        "line {last} not named in: {msg}"
    );
    let _ = std::fs::remove_dir_all(&dir);
}

#[test]
fn unknown_molecule_is_a_config_error() {
    let out = molecool(&["morse", "--molecule", "Xe2"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Xe2"));
}

#[test]
fn fig4_preset_carries_the_device_constants() {
    let p = preset("fig4").resolve().unwrap().params;
    let tau = std::f64::consts::TAU;
    assert!((p.omega_m / (tau * 10e6) - 1.0).abs() < 1e-15);
    assert!((p.mass_m / 10e-12 - 1.0).abs() < 1e-15);
    assert_eq!(p.q_factor, 5e5);
    assert!((p.d / 100e-9 - 1.0).abs() < 1e-15);
    assert_eq!(p.temperature, 0.2);
}

#[test]
fn validate_at_an_unstable_point_exits_with_two() {
    let out = molecool(&[
        "validate",
        "--config",
        path_str(&preset_path("fig4")),
        "--trajectories",
        "4",
    ]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains(",fail,"));
}

#[test]
fn rerun_check_reproduces_and_detects_edits() {
    let dir = scratch_dir("rerun");
    let out_file = dir.join("cool.csv");
    let run = molecool(&[
        "cool",
        "--config",
        path_str(&preset_path("fig4")),
        "--sweep",
        "delta_f_norm=0.5:1.5:5",
        "--set",
        "drive_power=1e-7",
        "--out",
        path_str(&out_file),
    ]);
    assert_eq!(code(&run), 0, "{}", stderr(&run));
    let manifest = molecool::run::manifest_path(&out_file);
    assert!(manifest.exists());

    let check = molecool(&["rerun", path_str(&manifest), "--check"]);
    assert_eq!(code(&check), 0, "{}", stderr(&check));

    let again = dir.join("again.csv");
    let rerun = molecool(&["rerun", path_str(&manifest), "--out", path_str(&again)]);
    assert_eq!(code(&rerun), 0, "{}", stderr(&rerun));
    assert_eq!(
        std::fs::read(&out_file).unwrap(),
        std::fs::read(&again).unwrap()
    );

    let mut edited = std::fs::read_to_string(&out_file).unwrap();
    edited.push('\n');
    std::fs::write(&out_file, edited).unwrap();
    let check = molecool(&["rerun", path_str(&manifest), "--check"]);
    assert_eq!(code(&check), 2);
    let _ = std::fs::remove_dir_all(&dir);
}
