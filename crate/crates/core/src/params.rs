//! Physical inputs, derived constants and the dimensionless parameter set.
//!
//! Every rate and frequency inside the solver is measured in units of the
//! mechanical frequency `omega_m`. Conversions between SI and normalized units
//! happen only here.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morse;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Vibrational constants of a diatomic molecule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeSpec {
    /// Fundamental vibrational frequency, rad/s.
    pub omega_e: f64,
    /// Well depth, J.
    pub d_e: f64,
    /// Reduced mass, kg.
    pub mu: f64,
    /// Equilibrium bond length, m.
    pub r_e: f64,
}

impl MoleculeSpec {
    pub fn validate(&self) -> Result<()> {
        positive("molecule.omega_e", self.omega_e)?;
        positive("molecule.d_e", self.d_e)?;
        positive("molecule.mu", self.mu)?;
        positive("molecule.r_e", self.r_e)?;
        if morse::level_count_parameter(self) < 1.0 {
            return Err(Error::invalid(
                "molecule",
                "2 D_e / (hbar omega_e) < 1: the well holds no bound level",
            ));
        }
        Ok(())
    }
}

/// All SI inputs of one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Mechanical angular frequency, rad/s.
    pub omega_m: f64,
    /// Effective mechanical mass, kg.
    pub mass_m: f64,
    pub q_factor: f64,
    /// Mechanical amplitude decay rate override, rad/s. When absent,
    /// `omega_m / (2 Q)` is used.
    pub gamma_m: Option<f64>,
    /// Capacitor gap, m.
    pub d: f64,
    /// Cavity resonance, rad/s.
    pub omega_f: f64,
    /// Cavity amplitude decay rate, rad/s.
    pub gamma_f: f64,
    /// Drive frequency, rad/s.
    pub omega_0: Option<f64>,
    /// Effective cavity detuning, rad/s. Takes precedence over `omega_0` for
    /// the cavity: the steady state is solved at fixed effective detuning.
    pub delta_f: Option<f64>,
    /// Microwave drive power, W.
    pub drive_power: f64,
    /// Bath temperature, K.
    pub temperature: f64,
    /// Molecule-field coupling, rad/s.
    pub g_coupling: f64,
    /// Molecular damping, rad/s.
    pub gamma_p: f64,
    /// Steady molecular inversion.
    pub zeta0_s: f64,
    /// Explicit molecular frequency, rad/s. Takes precedence over `molecule`.
    pub omega_p: Option<f64>,
    pub molecule: Option<MoleculeSpec>,
    /// Effective molecular detuning, rad/s. When absent it follows from the
    /// drive frequency as `omega_p + omega_0 + 2 omega_p zeta0_s`.
    pub delta_p: Option<f64>,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        positive("omega_m", self.omega_m)?;
        positive("mass_m", self.mass_m)?;
        positive("q_factor", self.q_factor)?;
        positive("d", self.d)?;
        positive("omega_f", self.omega_f)?;
        positive("gamma_f", self.gamma_f)?;
        nonnegative("drive_power", self.drive_power)?;
        nonnegative("temperature", self.temperature)?;
        nonnegative("gamma_p", self.gamma_p)?;
        finite("g", self.g_coupling)?;
        finite("zeta0_s", self.zeta0_s)?;
        if let Some(gm) = self.gamma_m {
            positive("gamma_m", gm)?;
        }
        if let Some(w0) = self.omega_0 {
            finite("omega_0", w0)?;
        }
        if let Some(df) = self.delta_f {
            finite("delta_f", df)?;
        }
        if let Some(dp) = self.delta_p {
            finite("delta_p", dp)?;
        }
        if let Some(wp) = self.omega_p {
            nonnegative("omega_p", wp)?;
        }
        if let Some(m) = &self.molecule {
            m.validate()?;
        }
        if self.omega_0.is_none() && self.delta_f.is_none() {
            return Err(Error::invalid(
                "omega_0",
                "either the drive frequency or the effective cavity detuning is required",
            ));
        }
        Ok(())
    }

    /// Mechanical amplitude decay rate in rad/s.
    pub fn gamma_m_si(&self) -> f64 {
        self.gamma_m.unwrap_or(self.omega_m / (2.0 * self.q_factor))
    }

    /// Molecular frequency in rad/s, if it can be determined.
    pub fn omega_p_si(&self) -> Option<f64> {
        self.omega_p
            .or_else(|| self.molecule.as_ref().map(morse::morse_frequency))
    }
}

/// Single-photon optomechanical coupling `omega_f / (2 d) * sqrt(hbar / (m omega_m))`, rad/s.
pub fn single_photon_coupling(p: &PhysicalParams) -> Result<f64> {
    positive("omega_f", p.omega_f)?;
    positive("d", p.d)?;
    positive("mass_m", p.mass_m)?;
    positive("omega_m", p.omega_m)?;
    Ok(p.omega_f / (2.0 * p.d) * (HBAR / (p.mass_m * p.omega_m)).sqrt())
}

/// Cavity drive strength `sqrt(2 gamma_f P / (hbar omega_f))`, rad/s.
pub fn drive_strength(p: &PhysicalParams) -> Result<f64> {
    nonnegative("drive_power", p.drive_power)?;
    positive("gamma_f", p.gamma_f)?;
    positive("omega_f", p.omega_f)?;
    Ok((2.0 * p.gamma_f * p.drive_power / (HBAR * p.omega_f)).sqrt())
}

/// Bose-Einstein occupancy of a mode at angular frequency `omega` (rad/s).
pub fn thermal_occupancy(omega: f64, temperature: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (K_B * temperature)).exp_m1()
}

/// Temperature at which a mode of angular frequency `omega` holds `n` quanta.
pub fn occupancy_temperature(omega: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    HBAR * omega / (K_B * (1.0 / n).ln_1p())
}

/// Dipole coupling `|p12| sqrt(hbar / (2 omega_f L)) / (hbar d C0)` in rad/s,
/// from the transition dipole (C m), cavity capacitance (F) and inductance (H).
pub fn dipole_coupling(
    dipole: f64,
    omega_f: f64,
    capacitance: f64,
    inductance: f64,
    d: f64,
) -> f64 {
    let charge_zpf = (HBAR / (2.0 * omega_f * inductance)).sqrt();
    dipole * charge_zpf / (HBAR * d * capacitance)
}

/// How a detuning enters the steady-state problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Detuning {
    /// Bare detuning; the effective one is found self-consistently.
    Bare(f64),
    /// Effective (steady-state shifted) detuning, held fixed.
    Effective(f64),
}

/// Dimensionless parameter set; rates and frequencies in units of `omega_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    /// Mechanical frequency in rad/s, kept for restoring units.
    pub omega_m_si: f64,
    /// Mechanical mass in kg, kept for restoring the gap from `g0`.
    pub mass_m_si: f64,
    pub omega_f: f64,
    pub omega_0: Option<f64>,
    pub gamma_m: f64,
    pub gamma_f: f64,
    pub gamma_p: f64,
    pub g: f64,
    pub g0: f64,
    pub epsilon0: f64,
    /// Cavity thermal occupancy.
    pub n_bar: f64,
    /// Mechanical thermal occupancy.
    pub n_m: f64,
    pub zeta0_s: f64,
    pub omega_p: f64,
    /// Cavity detuning; `Bare` holds `omega_f - omega_0`.
    pub cavity: Detuning,
    /// Molecular detuning; `Bare` holds `omega_p + omega_0`, `Effective` holds
    /// the effective detuning `delta_p + 2 omega_p zeta0_s`.
    pub molecular: Detuning,
}

impl NormalizedParams {
    /// Bare cavity detuning, when it is an input.
    pub fn delta_0f(&self) -> Option<f64> {
        match self.cavity {
            Detuning::Bare(d) => Some(d),
            Detuning::Effective(_) => None,
        }
    }

    /// Bare molecular detuning `omega_p - omega_0`.
    pub fn delta_0p(&self) -> Option<f64> {
        self.omega_0.map(|w0| self.omega_p - w0)
    }

    /// The combination `omega_p + omega_0` appearing in the molecular equation.
    pub fn delta_p_bare(&self) -> f64 {
        match self.molecular {
            Detuning::Bare(d) => d,
            Detuning::Effective(eff) => eff - 2.0 * self.omega_p * self.zeta0_s,
        }
    }

    /// Effective molecular detuning.
    pub fn delta_p_eff(&self) -> f64 {
        match self.molecular {
            Detuning::Bare(d) => d + 2.0 * self.omega_p * self.zeta0_s,
            Detuning::Effective(eff) => eff,
        }
    }

    /// Copy with the molecule removed: `g = gamma_p = omega_p = Delta_p = 0`.
    pub fn without_molecule(&self) -> Self {
        Self {
            g: 0.0,
            gamma_p: 0.0,
            omega_p: 0.0,
            molecular: Detuning::Effective(0.0),
            ..self.clone()
        }
    }

    /// Low-excitation validity ratio `g^2 / (Delta_p^2 + gamma_p^2)`.
    pub fn validity_ratio(&self) -> f64 {
        let dp = self.delta_p_eff();
        let den = dp * dp + self.gamma_p * self.gamma_p;
        if self.g == 0.0 {
            0.0
        } else if den == 0.0 {
            f64::INFINITY
        } else {
            self.g * self.g / den
        }
    }

    /// Restore SI units. The capacitor gap is recovered from `g0` and the
    /// quality factor from `gamma_m`.
    pub fn denormalize(&self) -> PhysicalParams {
        let wm = self.omega_m_si;
        let omega_f = self.omega_f * wm;
        let g0 = self.g0 * wm;
        let gamma_f = self.gamma_f * wm;
        let eps = self.epsilon0 * wm;
        let (delta_f, omega_0) = match self.cavity {
            Detuning::Bare(d0f) => (None, Some(omega_f - d0f * wm)),
            Detuning::Effective(df) => (Some(df * wm), self.omega_0.map(|w| w * wm)),
        };
        let delta_p = match self.molecular {
            Detuning::Effective(dp) => Some(dp * wm),
            Detuning::Bare(_) => None,
        };
        PhysicalParams {
            omega_m: wm,
            mass_m: self.mass_m_si,
            q_factor: 1.0 / (2.0 * self.gamma_m),
            gamma_m: None,
            d: omega_f / (2.0 * g0) * (HBAR / (self.mass_m_si * wm)).sqrt(),
            omega_f,
            gamma_f,
            omega_0,
            delta_f,
            drive_power: eps * eps * HBAR * omega_f / (2.0 * gamma_f),
            temperature: occupancy_temperature(wm, self.n_m),
            g_coupling: self.g * wm,
            gamma_p: self.gamma_p * wm,
            zeta0_s: self.zeta0_s,
            omega_p: Some(self.omega_p * wm),
            molecule: None,
            delta_p,
        }
    }
}

/// Convert SI inputs to the dimensionless set.
pub fn normalize(p: &PhysicalParams) -> Result<NormalizedParams> {
    p.validate()?;
    let wm = p.omega_m;
    let omega_p_si =
        match p.omega_p_si() {
            Some(w) => w,
            None if p.g_coupling == 0.0 => 0.0,
            None => return Err(Error::invalid(
                "omega_p",
                "the molecular frequency is undetermined: give omega_p or a molecule while g != 0",
            )),
        };
    let omega_0 = p.omega_0.map(|w| w / wm);
    let omega_p = omega_p_si / wm;
    let cavity = match p.delta_f {
        Some(df) => Detuning::Effective(df / wm),
        None => Detuning::Bare((p.omega_f - p.omega_0.unwrap_or(p.omega_f)) / wm),
    };
    let molecular = match (p.delta_p, omega_0) {
        (Some(dp), _) => Detuning::Effective(dp / wm),
        (None, Some(w0)) => Detuning::Bare(omega_p + w0),
        (None, None) if p.g_coupling == 0.0 => Detuning::Effective(0.0),
        (None, None) => {
            return Err(Error::invalid(
                "delta_p",
                "the molecular detuning is undetermined: give delta_p or the drive frequency",
            ))
        }
    };
    let np = NormalizedParams {
        omega_m_si: wm,
        mass_m_si: p.mass_m,
        omega_f: p.omega_f / wm,
        omega_0,
        gamma_m: p.gamma_m_si() / wm,
        gamma_f: p.gamma_f / wm,
        gamma_p: p.gamma_p / wm,
        g: p.g_coupling / wm,
        g0: single_photon_coupling(p)? / wm,
        epsilon0: drive_strength(p)? / wm,
        n_bar: thermal_occupancy(p.omega_f, p.temperature),
        n_m: thermal_occupancy(p.omega_m, p.temperature),
        zeta0_s: p.zeta0_s,
        omega_p,
        cavity,
        molecular,
    };
    Ok(np)
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn nonnegative(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be nonnegative and finite, got {v}"),
        ))
    }
}

fn finite(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be finite, got {v}")))
    }
}
