//! `key = value` configuration files.
//!
//! Frequency-like keys accept three spellings: the bare key in rad/s,
//! `<key>_over_2pi` in Hz, and `<key>_norm` in units of `omega_m`. Lines may
//! carry `#` comments. Unknown and repeated keys are errors.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::NoiseConvention;
use crate::morse::morse_frequency_from_ratio;
use crate::params::{normalize, MoleculeSpec, NormalizedParams, PhysicalParams};

const AMU: f64 = 1.660_539_066_60e-27;
const EV: f64 = 1.602_176_634e-19;
/// Speed of light in cm/s, for wavenumbers.
const C_CM: f64 = 2.997_924_58e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    /// Rate or frequency: bare, `_over_2pi` and `_norm` spellings.
    Rate,
    /// Rate that may not be given relative to itself.
    Base,
    Number,
    Text,
    Flag,
}

/// Every accepted key with its kind.
const KEYS: &[(&str, Kind)] = &[
    ("omega_m", Kind::Base),
    ("mass_m", Kind::Number),
    ("q_factor", Kind::Number),
    ("gamma_m", Kind::Rate),
    ("d", Kind::Number),
    ("omega_f", Kind::Rate),
    ("gamma_f", Kind::Rate),
    ("omega_0", Kind::Rate),
    ("delta_f", Kind::Rate),
    ("drive_power", Kind::Number),
    ("temperature", Kind::Number),
    ("g_coupling", Kind::Rate),
    ("gamma_p", Kind::Rate),
    ("zeta0_s", Kind::Number),
    ("omega_p", Kind::Rate),
    ("delta_p", Kind::Rate),
    ("delta_p_per_abs_zeta0", Kind::Rate),
    ("molecule", Kind::Text),
    ("molecule_ratio", Kind::Number),
    ("molecule_omega_e", Kind::Rate),
    ("molecule_d_e", Kind::Number),
    ("molecule_mu", Kind::Number),
    ("molecule_r_e", Kind::Number),
    ("noise_convention", Kind::Text),
    ("low_excitation", Kind::Flag),
    ("no_molecule", Kind::Flag),
];

const REQUIRED: &[&str] = &[
    "omega_m",
    "mass_m",
    "q_factor",
    "d",
    "omega_f",
    "gamma_f",
    "drive_power",
    "temperature",
    "g_coupling",
    "gamma_p",
];

/// How a numeric value was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Si,
    OverTwoPi,
    Norm,
}

impl Unit {
    fn suffix(self) -> &'static str {
        match self {
            Unit::Si => "",
            Unit::OverTwoPi => "_over_2pi",
            Unit::Norm => "_norm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub unit: Unit,
    pub value: String,
    /// Source line, 0 for overrides.
    pub line: usize,
}

/// Parsed but unresolved configuration, keyed by base name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawConfig {
    pub entries: BTreeMap<String, Entry>,
}

fn lookup(key: &str) -> Option<(&'static str, Kind, Unit)> {
    for &(base, kind) in KEYS {
        if key == base {
            return Some((base, kind, Unit::Si));
        }
        if matches!(kind, Kind::Rate | Kind::Base) {
            if key.strip_suffix("_over_2pi") == Some(base) {
                return Some((base, kind, Unit::OverTwoPi));
            }
            if kind == Kind::Rate && key.strip_suffix("_norm") == Some(base) {
                return Some((base, kind, Unit::Norm));
            }
        }
    }
    None
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RawConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line}: expected `key = value`")))?;
            cfg.insert(k.trim(), v.trim(), line, false)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn insert(&mut self, key: &str, value: &str, line: usize, replace: bool) -> Result<()> {
        let at = |l: usize| {
            if l == 0 {
                "override".to_string()
            } else {
                format!("line {l}")
            }
        };
        let (base, kind, unit) = lookup(key)
            .ok_or_else(|| Error::Config(format!("{}: unknown key `{key}`", at(line))))?;
        if value.is_empty() {
            return Err(Error::Config(format!("{}: `{key}` has no value", at(line))));
        }
        match kind {
            Kind::Rate | Kind::Base | Kind::Number => {
                parse_number(key, value, line)?;
            }
            Kind::Flag => {
                parse_flag(key, value)?;
            }
            Kind::Text => {}
        }
        if !replace {
            if let Some(prev) = self.entries.get(base) {
                return Err(Error::Config(format!(
                    "duplicate key `{base}` on lines {} and {line}",
                    prev.line
                )));
            }
        }
        self.entries.insert(
            base.to_string(),
            Entry {
                unit,
                value: value.to_string(),
                line,
            },
        );
        Ok(())
    }

    /// Apply a `key=value` override, replacing any spelling of the same key.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not `key=value`")))?;
        self.insert(k.trim(), v.trim(), 0, true)
    }

    /// Set a numeric key, written with its spelling (`delta_f_norm`, ...).
    pub fn set_number(&mut self, key: &str, value: f64) -> Result<()> {
        match lookup(key) {
            Some((_, Kind::Rate | Kind::Base | Kind::Number, _)) => {}
            Some(_) => return Err(Error::Config(format!("`{key}` is not numeric"))),
            None => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        self.insert(key, &format!("{value:e}"), 0, true)
    }

    /// Render back to the file format, one key per line in sorted order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, e) in &self.entries {
            out.push_str(&format!("{k}{} = {}\n", e.unit.suffix(), e.value));
        }
        out
    }

    fn number(&self, key: &str) -> Result<Option<(f64, Unit)>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => Ok(Some((parse_number(key, &e.value, e.line)?, e.unit))),
        }
    }

    fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.entries.get(key) {
            None => Ok(false),
            Some(e) => parse_flag(key, &e.value),
        }
    }

    pub fn resolve(&self) -> Result<Config> {
        let missing: Vec<&str> = REQUIRED
            .iter()
            .copied()
            .filter(|k| !self.entries.contains_key(*k))
            .collect();
        let mut missing: Vec<String> = missing.iter().map(|s| s.to_string()).collect();
        if !self.entries.contains_key("omega_0") && !self.entries.contains_key("delta_f") {
            missing.push("omega_0 or delta_f".into());
        }
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "missing required keys: {}",
                missing.join(", ")
            )));
        }
        let (wm_raw, wm_unit) = self.number("omega_m")?.expect("required");
        let omega_m = if wm_unit == Unit::OverTwoPi {
            TAU * wm_raw
        } else {
            wm_raw
        };
        let rate = |key: &str| -> Result<Option<f64>> {
            Ok(self.number(key)?.map(|(v, u)| match u {
                Unit::Si => v,
                Unit::OverTwoPi => TAU * v,
                Unit::Norm => v * omega_m,
            }))
        };
        let num = |key: &str| -> Result<Option<f64>> { Ok(self.number(key)?.map(|(v, _)| v)) };
        let req = |v: Option<f64>| v.expect("required");

        let zeta0_s = num("zeta0_s")?.unwrap_or(-1.0);
        let delta_p = match (rate("delta_p")?, rate("delta_p_per_abs_zeta0")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give at most one of `delta_p` and `delta_p_per_abs_zeta0`".into(),
                ))
            }
            (Some(dp), None) => Some(dp),
            (None, Some(r)) => Some(r * zeta0_s.abs()),
            (None, None) => None,
        };

        let mut molecule = None;
        let mut omega_p = rate("omega_p")?;
        let mut molecule_name = None;
        if let Some(name) = self.text("molecule") {
            let preset = molecule_preset(name)?;
            molecule_name = Some(preset.name.to_string());
            molecule = preset.spec;
            if molecule.is_none() && omega_p.is_none() {
                omega_p = Some(morse_frequency_from_ratio(preset.ratio));
            }
        }
        let custom = [
            rate("molecule_omega_e")?,
            num("molecule_d_e")?,
            num("molecule_mu")?,
            num("molecule_r_e")?,
        ];
        if custom.iter().any(Option::is_some) {
            if molecule_name.is_some() {
                return Err(Error::Config(
                    "give either `molecule` or `molecule_*` keys, not both".into(),
                ));
            }
            match custom {
                [Some(omega_e), Some(d_e), Some(mu), Some(r_e)] => {
                    molecule = Some(MoleculeSpec { omega_e, d_e, mu, r_e });
                }
                _ => {
                    return Err(Error::Config(
                        "a custom molecule needs molecule_omega_e, molecule_d_e, molecule_mu and molecule_r_e"
                            .into(),
                    ))
                }
            }
        }
        if let Some(ratio) = num("molecule_ratio")? {
            if omega_p.is_some() && self.entries.contains_key("omega_p") {
                return Err(Error::Config(
                    "give either `omega_p` or `molecule_ratio`, not both".into(),
                ));
            }
            omega_p = Some(morse_frequency_from_ratio(ratio));
        }

        let noise_convention = match self.text("noise_convention") {
            None => NoiseConvention::Paper,
            Some(s) => NoiseConvention::parse(s).ok_or_else(|| {
                Error::Config(format!("noise_convention `{s}` is not `paper` or `half`"))
            })?,
        };

        let params = PhysicalParams {
            omega_m,
            mass_m: req(num("mass_m")?),
            q_factor: req(num("q_factor")?),
            gamma_m: rate("gamma_m")?,
            d: req(num("d")?),
            omega_f: req(rate("omega_f")?),
            gamma_f: req(rate("gamma_f")?),
            omega_0: rate("omega_0")?,
            delta_f: rate("delta_f")?,
            drive_power: req(num("drive_power")?),
            temperature: req(num("temperature")?),
            g_coupling: req(rate("g_coupling")?),
            gamma_p: req(rate("gamma_p")?),
            zeta0_s,
            omega_p,
            molecule,
            delta_p,
        };
        params.validate()?;
        Ok(Config {
            params,
            molecule_name,
            flags: RunFlags {
                no_molecule: self.flag("no_molecule")?,
                low_excitation: self.flag("low_excitation")?,
                noise_convention,
            },
        })
    }
}

fn parse_number(key: &str, value: &str, line: usize) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| {
        let at = if line == 0 {
            "override".to_string()
        } else {
            format!("line {line}")
        };
        Error::Config(format!("{at}: `{key}` expects a number, got `{value}`"))
    })?;
    if !v.is_finite() {
        return Err(Error::Config(format!(
            "`{key}` must be finite, got `{value}`"
        )));
    }
    Ok(v)
}

fn parse_flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!(
            "`{key}` expects true or false, got `{value}`"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunFlags {
    pub no_molecule: bool,
    pub low_excitation: bool,
    pub noise_convention: NoiseConvention,
}

impl Default for RunFlags {
    fn default() -> Self {
        Self {
            no_molecule: false,
            low_excitation: false,
            noise_convention: NoiseConvention::Paper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub params: PhysicalParams,
    pub molecule_name: Option<String>,
    pub flags: RunFlags,
}

impl Config {
    /// Normalized parameters with the molecule removed when flagged.
    pub fn normalized(&self) -> Result<NormalizedParams> {
        let np = normalize(&self.params)?;
        Ok(if self.flags.no_molecule {
            np.without_molecule()
        } else {
            np
        })
    }
}

/// A named molecule: the quoted well-shape ratio and, where known, the full
/// vibrational constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoleculePreset {
    pub name: &'static str,
    /// `omega_e / sqrt(2 D_e)` in rad s^-1 J^-1/2.
    pub ratio: f64,
    /// Constants used by the cooling presets; `None` when only the ratio is
    /// quoted.
    pub spec: Option<MoleculeSpec>,
}

fn wavenumber(cm: f64) -> f64 {
    TAU * C_CM * cm
}

/// Spectroscopic constants from standard diatomic tables.
pub fn literature_molecule(name: &str) -> Result<MoleculeSpec> {
    let (omega_e, d_e, mu, r_e) = match name {
        "K2" => (17e12, 8.1e-20, 19.48 * AMU, 3.905e-10),
        "HCl" => (
            wavenumber(2990.946),
            4.618 * EV,
            0.979_593 * AMU,
            1.274_55e-10,
        ),
        "HI" => (
            wavenumber(2309.014),
            3.194 * EV,
            0.999_884 * AMU,
            1.609_16e-10,
        ),
        "NO" => (
            wavenumber(1904.204),
            6.614 * EV,
            7.466_410 * AMU,
            1.150_77e-10,
        ),
        other => return Err(Error::UnknownMolecule(other.to_string())),
    };
    Ok(MoleculeSpec {
        omega_e,
        d_e,
        mu,
        r_e,
    })
}

pub fn molecule_preset(name: &str) -> Result<MoleculePreset> {
    Ok(match name {
        "HCl" => MoleculePreset {
            name: "HCl",
            ratio: 4.7e23,
            spec: None,
        },
        "HI" => MoleculePreset {
            name: "HI",
            ratio: 4.41e23,
            spec: None,
        },
        "NO" => MoleculePreset {
            name: "NO",
            ratio: 2.5e23,
            spec: None,
        },
        "K2" => {
            let spec = literature_molecule("K2")?;
            MoleculePreset {
                name: "K2",
                ratio: spec.omega_e / (2.0 * spec.d_e).sqrt(),
                spec: Some(spec),
            }
        }
        other => return Err(Error::UnknownMolecule(other.to_string())),
    })
}

impl fmt::Display for RawConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
