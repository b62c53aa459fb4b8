//! Parameter grids over configuration keys and the per-point pipelines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, RawConfig, RunFlags};
use crate::covariance::{cool, CoolingOptions, CoolingResult};
use crate::error::{Error, Result};
use crate::linear::{LinearSystem, NoiseConvention};
use crate::params::NormalizedParams;
use crate::response::{spectrum, ResponseInputs, SpectrumPoint};
use crate::steadystate::{solve_steady, SteadyState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

/// One sweep axis over a configuration key, spelled with its unit suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub key: String,
    pub start: f64,
    pub stop: f64,
    pub n: usize,
    pub spacing: Spacing,
}

impl Axis {
    /// Parse `key=start:stop:N[:log]`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::Config(format!("sweep `{s}`: {why}"));
        let (key, range) = s
            .split_once('=')
            .ok_or_else(|| bad("expected key=start:stop:N[:log]"))?;
        let parts: Vec<&str> = range.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            return Err(bad("expected key=start:stop:N[:log]"));
        }
        let num = |t: &str| -> Result<f64> {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(&format!("`{t}` is not a finite number")))
        };
        let start = num(parts[0])?;
        let stop = num(parts[1])?;
        let n: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| bad(&format!("`{}` is not a point count", parts[2])))?;
        let spacing = match parts.get(3).map(|t| t.trim()) {
            None | Some("lin") | Some("linear") => Spacing::Linear,
            Some("log") => Spacing::Log,
            Some(other) => return Err(bad(&format!("unknown spacing `{other}`"))),
        };
        let axis = Axis {
            key: key.trim().to_string(),
            start,
            stop,
            n,
            spacing,
        };
        axis.validate()?;
        Ok(axis)
    }

    fn validate(&self) -> Result<()> {
        let bad = |why: &str| Error::Config(format!("sweep over `{}`: {why}", self.key));
        if self.n < 2 {
            return Err(bad("needs at least 2 points"));
        }
        if self.start == self.stop {
            return Err(bad("start and stop coincide"));
        }
        if self.spacing == Spacing::Log && !(self.start * self.stop > 0.0) {
            return Err(bad(
                "log spacing needs start and stop of one sign, both nonzero",
            ));
        }
        // the key must be numeric and known
        RawConfig::default().set_number(&self.key, self.start)?;
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let last = self.n - 1;
        (0..self.n)
            .map(|i| {
                if i == last {
                    return self.stop;
                }
                let t = i as f64 / last as f64;
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * t,
                    Spacing::Log => {
                        let sign = self.start.signum();
                        let (a, b) = (self.start.abs().ln(), self.stop.abs().ln());
                        sign * (a + (b - a) * t).exp()
                    }
                }
            })
            .collect()
    }
}

/// Command-line flags layered over those in the configuration file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FlagOverrides {
    pub no_molecule: bool,
    pub low_excitation: bool,
    pub noise_convention: Option<NoiseConvention>,
}

impl FlagOverrides {
    pub fn apply(&self, flags: &mut RunFlags) {
        flags.no_molecule |= self.no_molecule;
        flags.low_excitation |= self.low_excitation;
        if let Some(c) = self.noise_convention {
            flags.noise_convention = c;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    /// `key=value` overrides applied before the axes.
    pub overrides: Vec<String>,
    pub flags: FlagOverrides,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > 2 {
            return Err(Error::Config("at most two sweep axes".into()));
        }
        if self.axes.len() == 2 && base_key(&self.axes[0].key) == base_key(&self.axes[1].key) {
            return Err(Error::Config("both sweep axes name the same key".into()));
        }
        for a in &self.axes {
            a.validate()?;
        }
        Ok(())
    }

    /// Grid points, first axis outermost. A sweep without axes has one point.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            let vals = axis.values();
            points = points
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }

    pub fn axis_keys(&self) -> Vec<String> {
        self.axes.iter().map(|a| a.key.clone()).collect()
    }

    /// Configuration at one grid point.
    pub fn config_at(&self, base: &RawConfig, point: &[f64]) -> Result<Config> {
        let mut raw = base.clone();
        for o in &self.overrides {
            raw.set(o)?;
        }
        for (axis, &v) in self.axes.iter().zip(point) {
            raw.set_number(&axis.key, v)?;
        }
        let mut cfg = raw.resolve()?;
        self.flags.apply(&mut cfg.flags);
        Ok(cfg)
    }
}

fn base_key(key: &str) -> &str {
    key.strip_suffix("_over_2pi")
        .or_else(|| key.strip_suffix("_norm"))
        .unwrap_or(key)
}

/// Outcome at one grid point; failures are kept as data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult<T> {
    pub point: Vec<f64>,
    pub outcome: std::result::Result<T, String>,
}

fn evaluate<T: Send>(
    spec: &SweepSpec,
    base: &RawConfig,
    f: impl Fn(&Config, &NormalizedParams) -> Result<T> + Sync,
) -> Result<Vec<PointResult<T>>> {
    spec.validate()?;
    // configuration errors at the first point abort the whole run
    let grid = spec.grid();
    spec.config_at(base, &grid[0])?;
    Ok(grid
        .into_par_iter()
        .map(|point| {
            let outcome = spec
                .config_at(base, &point)
                .and_then(|cfg| {
                    let np = cfg.normalized()?;
                    f(&cfg, &np)
                })
                .map_err(|e| e.to_string());
            PointResult { point, outcome }
        })
        .collect())
}

pub fn run_cooling_sweep(
    spec: &SweepSpec,
    base: &RawConfig,
) -> Result<Vec<PointResult<CoolingResult>>> {
    evaluate(spec, base, |cfg, np| {
        cool(
            np,
            &CoolingOptions {
                low_excitation: cfg.flags.low_excitation,
                convention: cfg.flags.noise_convention,
            },
        )
    })
}

pub fn run_steady_sweep(
    spec: &SweepSpec,
    base: &RawConfig,
) -> Result<Vec<PointResult<(NormalizedParams, SteadyState)>>> {
    evaluate(spec, base, |_, np| Ok((np.clone(), solve_steady(np)?)))
}

/// Spectrum of the full linear system at one configuration.
pub fn run_spectrum(cfg: &Config, grid: &[f64]) -> Result<Vec<SpectrumPoint>> {
    let np = cfg.normalized()?;
    let s = solve_steady(&np)?;
    ResponseInputs::new(&np, &s)?;
    let sys = LinearSystem::new(&np, &s, cfg.flags.noise_convention)?;
    spectrum(&np, &s, &sys, grid)
}
