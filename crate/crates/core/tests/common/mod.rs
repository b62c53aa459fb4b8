#![allow(dead_code)]

pub mod transcription;

use std::io::Write;
use std::path::PathBuf;

use molecool::config::RawConfig;
use molecool::params::{Detuning, NormalizedParams};

pub fn preset_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(format!("{name}.cfg"))
}

pub fn preset(name: &str) -> RawConfig {
    RawConfig::load(&preset_path(name)).expect("shipped preset parses")
}

/// Print one verdict line past the test harness's capture, then fail the
/// test on a negative outcome.
pub fn report(id: u32, title: &str, outcome: Result<String, String>) {
    let line = match &outcome {
        Ok(detail) => format!("PASS criterion {id} ({title}): {detail}\n"),
        Err(detail) => format!("FAIL criterion {id} ({title}): {detail}\n"),
    };
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    if let Err(detail) = outcome {
        panic!("criterion {id} failed: {detail}");
    }
}

/// Informational line, printed the same way.
pub fn note(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(format!("NOTE {text}\n").as_bytes());
    let _ = out.flush();
}

/// Moderate point with the molecule coupled and `delta_p = 0`, i.e. the
/// effective molecular detuning equal to `2 omega_p zeta0_s`. There the
/// molecular correlators vanish, so the diffusion matrix is positive
/// semidefinite, and the frozen-inversion system is stable.
pub fn molecular_point() -> NormalizedParams {
    let omega_p = 1.0;
    let zeta0_s = -0.5;
    NormalizedParams {
        omega_m_si: std::f64::consts::TAU * 1e7,
        mass_m_si: 1e-11,
        omega_f: 1000.0,
        omega_0: None,
        gamma_m: 0.1,
        gamma_f: 0.5,
        gamma_p: 0.6,
        g: 0.3,
        g0: 1e-3,
        epsilon0: 100.0,
        n_bar: 0.5,
        n_m: 5.0,
        zeta0_s,
        omega_p,
        cavity: Detuning::Effective(1.0),
        molecular: Detuning::Effective(2.0 * omega_p * zeta0_s),
    }
}

pub fn inf_norm(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
