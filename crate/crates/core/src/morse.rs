//! Morse oscillator: potential curve, bound vibrational ladder and the
//! effective molecular frequency `omega_p = hbar a^2 / (2 mu)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{MoleculeSpec, HBAR};

/// One bound vibrational level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorseLevel {
    pub nu: u32,
    /// Energy above the well minimum, J.
    pub energy: f64,
}

/// Range parameter `a = omega_e sqrt(mu / (2 D_e))`, 1/m.
pub fn range_parameter(spec: &MoleculeSpec) -> f64 {
    spec.omega_e * (spec.mu / (2.0 * spec.d_e)).sqrt()
}

/// `V(r) = D_e (1 - exp(-a (r - r_e)))^2`, J.
pub fn potential(r: f64, spec: &MoleculeSpec) -> f64 {
    let x = (-range_parameter(spec) * (r - spec.r_e)).exp();
    spec.d_e * (1.0 - x) * (1.0 - x)
}

/// Potential shifted to vanish at dissociation: `V(r) - D_e`.
pub fn shifted_potential(r: f64, spec: &MoleculeSpec) -> f64 {
    let x = (-range_parameter(spec) * (r - spec.r_e)).exp();
    spec.d_e * (x * x - 2.0 * x)
}

/// `2 D_e / (hbar omega_e)`; the bound-level count is close to this number.
pub fn level_count_parameter(spec: &MoleculeSpec) -> f64 {
    2.0 * spec.d_e / (HBAR * spec.omega_e)
}

/// Largest bound index for a well of depth `depth` (in units of `hbar omega_e`).
///
/// `E(nu) - E(nu - 1) = hbar omega_e (1 - nu / (2 depth))`, so the ladder rises
/// exactly up to the largest integer below `2 depth`, which is also the
/// integer argmax of `E(nu)` (the lower one on a tie).
pub fn nu_max_for_depth(depth: f64) -> u32 {
    ((2.0 * depth).ceil() - 1.0).max(0.0) as u32
}

pub fn nu_max(spec: &MoleculeSpec) -> u32 {
    nu_max_for_depth(spec.d_e / (HBAR * spec.omega_e))
}

/// Level energy in units of `hbar omega_e` for a well of depth `depth`
/// (also in units of `hbar omega_e`). No range check.
pub fn reduced_energy(nu: u32, depth: f64) -> f64 {
    let x = nu as f64 + 0.5;
    x - x * x / (4.0 * depth)
}

/// Level energy in units of `hbar omega_e`.
pub fn vibrational_energy_normalized(nu: u32, depth: f64) -> Result<f64> {
    let nu_max = nu_max_for_depth(depth);
    if nu > nu_max {
        return Err(Error::LevelOutOfRange { nu, nu_max });
    }
    Ok(reduced_energy(nu, depth))
}

/// `E_nu = hbar omega_e (nu + 1/2) - (hbar omega_e)^2 / (4 D_e) (nu + 1/2)^2`, J.
pub fn vibrational_energy(nu: u32, spec: &MoleculeSpec) -> Result<f64> {
    let quantum = HBAR * spec.omega_e;
    vibrational_energy_normalized(nu, spec.d_e / quantum).map(|e| e * quantum)
}

/// The full bound ladder `0..=nu_max`.
pub fn levels(spec: &MoleculeSpec) -> Vec<MorseLevel> {
    let quantum = HBAR * spec.omega_e;
    let depth = spec.d_e / quantum;
    (0..=nu_max(spec))
        .map(|nu| MorseLevel {
            nu,
            energy: reduced_energy(nu, depth) * quantum,
        })
        .collect()
}

/// `omega_p = hbar omega_e^2 / (4 D_e)`, rad/s.
pub fn morse_frequency(spec: &MoleculeSpec) -> f64 {
    HBAR * spec.omega_e * spec.omega_e / (4.0 * spec.d_e)
}

/// `omega_p = hbar a^2 / (2 mu)`, through the range parameter.
pub fn morse_frequency_from_range(spec: &MoleculeSpec) -> f64 {
    let a = range_parameter(spec);
    HBAR * a * a / (2.0 * spec.mu)
}

/// `omega_p` from the well-shape ratio `omega_e / sqrt(2 D_e)` (rad s^-1 J^-1/2).
pub fn morse_frequency_from_ratio(ratio: f64) -> f64 {
    0.5 * HBAR * ratio * ratio
}
