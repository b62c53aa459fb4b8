//! Run requests, their tabular results, and manifests that replay them.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{literature_molecule, molecule_preset, Config, RawConfig, RunFlags};
use crate::covariance::{linear_system, solve_lyapunov, CoolingOptions, LYAPUNOV_TOL};
use crate::error::{Error, Result};
use crate::morse;
use crate::params::{MoleculeSpec, NormalizedParams, PhysicalParams, HBAR, K_B};
use crate::quadrature::covariance_quadrature;
use crate::response::{log_grid, spectrum};
use crate::sde::{
    integrate_semiclassical, simulate_linear_sde, Amplitudes, OdeOptions, SdeRunSpec, Semiclassical,
};
use crate::stability::is_stable;
use crate::steadystate::{solve_steady, SteadyState};
use crate::sweep::{run_cooling_sweep, run_spectrum, run_steady_sweep, SweepSpec};
use crate::table::{Cell, Table};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Command {
    Morse {
        molecule: Option<String>,
    },
    Steady,
    Spectrum {
        omega_min: f64,
        omega_max: f64,
        points: usize,
    },
    Cool,
    Tempmap,
    Validate {
        trajectories: usize,
        /// Target of `dt ||A||_inf` for the stochastic estimate.
        bias: f64,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Morse { .. } => "morse",
            Command::Steady => "steady",
            Command::Spectrum { .. } => "spectrum",
            Command::Cool => "cool",
            Command::Tempmap => "tempmap",
            Command::Validate { .. } => "validate",
        }
    }
}

/// Everything that determines a run's output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub command: Command,
    /// Verbatim configuration text.
    pub config_text: Option<String>,
    pub sweep: SweepSpec,
    pub seed: u64,
    pub dump_matrices: bool,
    pub json: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    /// Per-point matrices when requested.
    pub matrices: Option<Value>,
    /// False when a validation check failed.
    pub passed: bool,
}

impl RunOutput {
    pub fn render(&self, json: bool) -> String {
        if json {
            self.table.to_json()
        } else {
            self.table.to_csv()
        }
    }
}

fn base_config(req: &RunRequest) -> Result<RawConfig> {
    match &req.config_text {
        Some(t) => RawConfig::parse(t),
        None => Err(Error::Config(format!(
            "`{}` needs --config",
            req.command.name()
        ))),
    }
}

fn common_meta(t: &mut Table, req: &RunRequest) {
    t.meta("command", req.command.name());
    t.meta("version", VERSION);
    t.meta("hbar_J_s", format!("{HBAR:e}"));
    t.meta("k_B_J_per_K", format!("{K_B:e}"));
    t.meta(
        "units",
        "rates and frequencies in units of omega_m; *_over_2pi keys are Hz times 2 pi",
    );
    t.meta("gamma_m", "omega_m / (2 Q) unless gamma_m is given");
    let flags = effective_flags(req);
    t.meta("noise_convention", flags.noise_convention.as_str());
    t.meta("no_molecule", flags.no_molecule);
    t.meta("low_excitation", flags.low_excitation);
    if !req.sweep.overrides.is_empty() {
        t.meta("set", req.sweep.overrides.join(" "));
    }
    for a in &req.sweep.axes {
        let spacing = match a.spacing {
            crate::sweep::Spacing::Linear => "",
            crate::sweep::Spacing::Log => ":log",
        };
        t.meta(
            "sweep",
            format!("{}={:e}:{:e}:{}{spacing}", a.key, a.start, a.stop, a.n),
        );
    }
    t.meta("seed", req.seed);
}

/// Flags at the base point: the file's, then the command line's.
fn effective_flags(req: &RunRequest) -> RunFlags {
    let mut flags = req
        .config_text
        .as_deref()
        .and_then(|t| RawConfig::parse(t).ok())
        .and_then(|raw| raw.resolve().ok())
        .map(|c| c.flags)
        .unwrap_or_default();
    req.sweep.flags.apply(&mut flags);
    flags
}

fn with_axes(keys: &[String], rest: &[&str]) -> Table {
    let mut cols: Vec<&str> = keys.iter().map(String::as_str).collect();
    cols.extend_from_slice(rest);
    Table::new(&cols)
}

fn axis_cells(point: &[f64]) -> Vec<Cell> {
    point.iter().map(|&v| Cell::Num(v)).collect()
}

fn matrix_json(m: &DMatrix<f64>) -> Value {
    json!(m
        .row_iter()
        .map(|r| r.iter().copied().collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

pub fn execute(req: &RunRequest) -> Result<RunOutput> {
    req.sweep.validate()?;
    match &req.command {
        Command::Morse { molecule } => morse_table(req, molecule.as_deref()),
        Command::Steady => steady_table(req),
        Command::Spectrum {
            omega_min,
            omega_max,
            points,
        } => spectrum_table(req, *omega_min, *omega_max, *points),
        Command::Cool => cooling_table(req, false),
        Command::Tempmap => cooling_table(req, true),
        Command::Validate { trajectories, bias } => validate_table(req, *trajectories, *bias),
    }
}

fn morse_table(req: &RunRequest, name: Option<&str>) -> Result<RunOutput> {
    let mut specs: Vec<(String, MoleculeSpec)> = Vec::new();
    if let Some(n) = name {
        specs.push((n.to_string(), literature_molecule(n)?));
    } else if req.config_text.is_some() {
        let cfg = base_config(req)?.resolve()?;
        let spec = cfg.params.molecule.ok_or_else(|| {
            Error::Config("the configuration names no molecule with full constants".into())
        })?;
        specs.push((cfg.molecule_name.unwrap_or_else(|| "custom".into()), spec));
    } else {
        for n in ["K2", "HCl", "HI", "NO"] {
            specs.push((n.to_string(), literature_molecule(n)?));
        }
    }
    let mut t = Table::new(&[
        "molecule",
        "nu",
        "energy_j",
        "energy_over_hbar_omega_e",
        "spacing_j",
    ]);
    common_meta(&mut t, req);
    for (n, spec) in &specs {
        spec.validate()?;
        t.meta(
            &format!("omega_p[{n}]"),
            format!("{:.16e}", morse::morse_frequency(spec)),
        );
        t.meta(
            &format!("omega_p_from_range[{n}]"),
            format!("{:.16e}", morse::morse_frequency_from_range(spec)),
        );
        if let Ok(p) = molecule_preset(n) {
            t.meta(
                &format!("omega_p_from_quoted_ratio[{n}]"),
                format!("{:.16e}", morse::morse_frequency_from_ratio(p.ratio)),
            );
        }
        t.meta(&format!("nu_max[{n}]"), morse::nu_max(spec));
        let levels = morse::levels(spec);
        for (i, l) in levels.iter().enumerate() {
            let spacing = levels.get(i + 1).map(|u| u.energy - l.energy);
            t.push(vec![
                n.as_str().into(),
                Cell::Int(l.nu as i64),
                l.energy.into(),
                (l.energy / (HBAR * spec.omega_e)).into(),
                Cell::opt(spacing),
            ]);
        }
    }
    Ok(RunOutput {
        table: t,
        matrices: None,
        passed: true,
    })
}

fn steady_table(req: &RunRequest) -> Result<RunOutput> {
    let raw = base_config(req)?;
    let rows = run_steady_sweep(&req.sweep, &raw)?;
    let mut t = with_axes(
        &req.sweep.axis_keys(),
        &[
            "alpha_re",
            "alpha_im",
            "beta_re",
            "beta_im",
            "zeta_re",
            "zeta_im",
            "zeta0_s",
            "delta_f",
            "delta_0f",
            "delta_p_eff",
            "theta",
            "residual",
            "zeta0_defect",
            "method",
            "error",
        ],
    );
    common_meta(&mut t, req);
    let mut mats = Vec::new();
    for r in &rows {
        let mut row = axis_cells(&r.point);
        match &r.outcome {
            Ok((np, s)) => {
                row.extend([
                    s.alpha_s.re.into(),
                    s.alpha_s.im.into(),
                    s.beta_s.re.into(),
                    s.beta_s.im.into(),
                    s.zeta_s.re.into(),
                    s.zeta_s.im.into(),
                    s.zeta0_s.into(),
                    s.delta_f.into(),
                    s.delta_0f.into(),
                    s.delta_p_eff.into(),
                    s.theta.into(),
                    s.residual.into(),
                    s.zeta0_defect.into(),
                    serde_json::to_value(s.method)?
                        .as_str()
                        .unwrap_or("")
                        .into(),
                    Cell::Empty,
                ]);
                if req.dump_matrices {
                    mats.push(point_matrices(&effective_flags(req), &r.point, np, s)?);
                }
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(Cell::Empty, 14));
                row.push(e.clone().into());
            }
        }
        t.push(row);
    }
    Ok(RunOutput {
        table: t,
        matrices: req.dump_matrices.then(|| Value::Array(mats)),
        passed: true,
    })
}

fn point_matrices(
    flags: &RunFlags,
    point: &[f64],
    np: &NormalizedParams,
    s: &SteadyState,
) -> Result<Value> {
    let opts = CoolingOptions {
        low_excitation: flags.low_excitation,
        convention: flags.noise_convention,
    };
    let sys = linear_system(np, s, &opts)?;
    let sub = sys.restrict(&sys.mechanical_component());
    let v = is_stable(&sub.a_matrix)?
        .stable
        .then(|| solve_lyapunov(&sub.a_matrix, &sub.d_matrix).map(|(v, _)| matrix_json(&v)))
        .transpose()?;
    Ok(json!({
        "point": point,
        "basis": sys.basis,
        "a_matrix": matrix_json(&sys.a_matrix),
        "d_matrix": matrix_json(&sys.d_matrix),
        "mechanical_basis": sub.basis,
        "v_matrix": v,
    }))
}

fn spectrum_table(req: &RunRequest, lo: f64, hi: f64, n: usize) -> Result<RunOutput> {
    if !req.sweep.axes.is_empty() {
        return Err(Error::Config(
            "`spectrum` takes no --sweep; its axis is the response frequency".into(),
        ));
    }
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(Error::Config(
            "response grid needs 0 < omega_min <= omega_max and at least one point".into(),
        ));
    }
    let raw = base_config(req)?;
    let cfg = req.sweep.config_at(&raw, &[])?;
    let grid = log_grid(lo, hi, n);
    let points = run_spectrum(&cfg, &grid)?;
    let mut t = Table::new(&[
        "omega",
        "chi_re",
        "chi_im",
        "omega_eff",
        "gamma_eff",
        "chi_oracle_re",
        "chi_oracle_im",
        "closed_form_gap",
        "near_pole",
    ]);
    common_meta(&mut t, req);
    let np = cfg.normalized()?;
    let s = solve_steady(&np)?;
    t.meta("delta_f", format!("{:.16e}", s.delta_f));
    t.meta("alpha_s", format!("{:.16e}", s.alpha_s.re));
    for p in points {
        t.push(vec![
            p.omega.into(),
            p.chi.re.into(),
            p.chi.im.into(),
            Cell::opt(p.omega_eff),
            p.gamma_eff.into(),
            p.chi_oracle.re.into(),
            p.chi_oracle.im.into(),
            p.closed_form_gap.into(),
            p.near_pole.into(),
        ]);
    }
    let matrices = if req.dump_matrices {
        Some(Value::Array(vec![point_matrices(
            &effective_flags(req),
            &[],
            &np,
            &s,
        )?]))
    } else {
        None
    };
    Ok(RunOutput {
        table: t,
        matrices,
        passed: true,
    })
}

fn cooling_table(req: &RunRequest, tempmap: bool) -> Result<RunOutput> {
    if tempmap && req.sweep.axes.len() != 2 {
        return Err(Error::Config(
            "`tempmap` needs exactly two --sweep axes".into(),
        ));
    }
    let raw = base_config(req)?;
    let rows = run_cooling_sweep(&req.sweep, &raw)?;
    let rest: &[&str] = if tempmap {
        &["stable", "t_eff", "n_eff", "error"]
    } else {
        &[
            "stable",
            "n_eff",
            "t_eff",
            "u_energy",
            "max_re_eig",
            "dim",
            "hurwitz_agrees",
            "lyapunov_residual",
            "low_excitation_ratio",
            "warnings",
            "error",
        ]
    };
    let mut t = with_axes(&req.sweep.axis_keys(), rest);
    common_meta(&mut t, req);
    let mut mats = Vec::new();
    for r in &rows {
        let mut row = axis_cells(&r.point);
        match &r.outcome {
            Ok(c) => {
                if tempmap {
                    row.extend([
                        c.stable.into(),
                        Cell::opt(c.t_eff),
                        Cell::opt(c.n_eff),
                        Cell::Empty,
                    ]);
                } else {
                    row.extend([
                        c.stable.into(),
                        Cell::opt(c.n_eff),
                        Cell::opt(c.t_eff),
                        Cell::opt(c.u_energy),
                        c.max_re_eig.into(),
                        Cell::Int(c.basis.len() as i64),
                        c.hurwitz_agrees.into(),
                        Cell::opt(c.lyapunov_residual),
                        c.low_excitation_ratio.into(),
                        if c.warnings.is_empty() {
                            Cell::Empty
                        } else {
                            c.warnings.join("; ").into()
                        },
                        Cell::Empty,
                    ]);
                }
                if req.dump_matrices {
                    let cfg = req.sweep.config_at(&raw, &r.point)?;
                    let np = cfg.normalized()?;
                    let s = solve_steady(&np)?;
                    mats.push(point_matrices(&effective_flags(req), &r.point, &np, &s)?);
                }
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(Cell::Empty, rest.len() - 1));
                row.push(e.clone().into());
            }
        }
        t.push(row);
    }
    Ok(RunOutput {
        table: t,
        matrices: req.dump_matrices.then(|| Value::Array(mats)),
        passed: true,
    })
}

/// Most Euler-Maruyama steps the validation report will take in total.
const SDE_STEP_BUDGET: f64 = 4e9;
/// Longest deterministic integration, in units of `1 / omega_m`.
const ODE_HORIZON: f64 = 1e6;

struct Report {
    table: Table,
    passed: bool,
}

impl Report {
    fn check(&mut self, name: &str, value: f64, tol: f64, ok: bool, note: impl Into<String>) {
        self.passed &= ok;
        self.table.push(vec![
            name.into(),
            value.into(),
            tol.into(),
            (if ok { "pass" } else { "fail" }).into(),
            Cell::Text(note.into()),
        ]);
    }

    fn info(&mut self, name: &str, value: f64, note: impl Into<String>) {
        self.table.push(vec![
            name.into(),
            value.into(),
            Cell::Empty,
            "info".into(),
            Cell::Text(note.into()),
        ]);
    }

    fn skip(&mut self, name: &str, note: impl Into<String>) {
        self.table.push(vec![
            name.into(),
            Cell::Empty,
            Cell::Empty,
            "skipped".into(),
            Cell::Text(note.into()),
        ]);
    }
}

fn validate_table(req: &RunRequest, trajectories: usize, bias: f64) -> Result<RunOutput> {
    if !req.sweep.axes.is_empty() {
        return Err(Error::Config(
            "`validate` checks a single point; drop --sweep".into(),
        ));
    }
    let raw = base_config(req)?;
    let cfg = req.sweep.config_at(&raw, &[])?;
    let mut table = Table::new(&["check", "value", "tolerance", "status", "note"]);
    common_meta(&mut table, req);
    let mut rep = Report {
        table,
        passed: true,
    };
    validate_point(&cfg, req.seed, trajectories, bias, &mut rep)?;
    Ok(RunOutput {
        table: rep.table,
        matrices: None,
        passed: rep.passed,
    })
}

fn validate_point(
    cfg: &Config,
    seed: u64,
    trajectories: usize,
    bias: f64,
    rep: &mut Report,
) -> Result<()> {
    let np = cfg.normalized()?;
    let s = solve_steady(&np)?;
    rep.check(
        "steady_residual",
        s.residual,
        1e-12,
        s.residual < 1e-12,
        format!("{:?}", s.method),
    );
    let opts = CoolingOptions {
        low_excitation: cfg.flags.low_excitation,
        convention: cfg.flags.noise_convention,
    };
    let full = linear_system(&np, &s, &opts)?;
    let sys = full.restrict(&full.mechanical_component());
    let verdict = is_stable(&sys.a_matrix)?;
    rep.check(
        "stability_methods_agree",
        verdict.max_re_eig,
        verdict.threshold,
        verdict.agree,
        format!("stable = {}, dim = {}", verdict.stable, sys.dim()),
    );
    if np.g == 0.0 {
        let pts = spectrum(&np, &s, &full, &crate::response::default_grid())?;
        let gap = pts.iter().map(|p| p.closed_form_gap).fold(0.0, f64::max);
        rep.check(
            "susceptibility_closed_form_vs_inverse",
            gap,
            1e-8,
            gap < 1e-8,
            "2000 frequencies",
        );
    } else {
        let pts = spectrum(&np, &s, &full, &crate::response::default_grid())?;
        let gap = pts.iter().map(|p| p.closed_form_gap).fold(0.0, f64::max);
        rep.info(
            "susceptibility_closed_form_vs_inverse",
            gap,
            "with the molecule, for reference",
        );
    }
    if !verdict.stable {
        rep.check(
            "stable",
            verdict.max_re_eig,
            -verdict.threshold,
            false,
            "covariance checks need a stable point",
        );
        return Ok(());
    }
    let (v, residual) = solve_lyapunov(&sys.a_matrix, &sys.d_matrix)?;
    rep.check(
        "lyapunov_residual",
        residual,
        LYAPUNOV_TOL,
        residual <= LYAPUNOV_TOL,
        "relative to ||D||_inf",
    );
    let vn = inf(&v).max(f64::MIN_POSITIVE);

    let quad = covariance_quadrature(&sys.a_matrix, &sys.d_matrix, 40.0)?;
    let gap = inf(&(&quad.v_matrix - &v)) / vn;
    rep.check(
        "lyapunov_vs_quadrature",
        gap,
        1e-8,
        gap < 1e-8,
        format!("T = {:.3e}, panel gap {:.1e}", quad.t_total, quad.panel_gap),
    );

    let mut spec = SdeRunSpec::for_system(&sys, seed, bias)?;
    spec.n_trajectories = trajectories.max(1);
    let steps = spec.t_total / spec.dt * spec.n_trajectories as f64;
    if steps > SDE_STEP_BUDGET {
        rep.skip(
            "lyapunov_vs_sde",
            format!("{steps:.2e} Euler-Maruyama steps exceed the budget of {SDE_STEP_BUDGET:.0e}"),
        );
    } else {
        let est = simulate_linear_sde(&sys, &spec)?;
        let mut worst: f64 = 0.0;
        for i in 0..sys.dim() {
            for j in 0..sys.dim() {
                let d = (est.covariance[(i, j)] - v[(i, j)]).abs();
                let se = est.std_errors[(i, j)];
                let z = if d == 0.0 { 0.0 } else { d / se };
                worst = worst.max(z);
            }
        }
        rep.check(
            "lyapunov_vs_sde",
            worst,
            3.0,
            worst <= 3.0,
            format!(
                "largest entrywise gap in standard errors; {} trajectories, dt = {:.3e}, T = {:.3e}",
                spec.n_trajectories, spec.dt, spec.t_total
            ),
        );
    }

    let t_ode = 50.0 / verdict.max_re_eig.abs();
    if t_ode > ODE_HORIZON {
        rep.skip(
            "ode_converges",
            format!("horizon {t_ode:.2e} exceeds {ODE_HORIZON:.0e}"),
        );
    } else {
        let mut model = Semiclassical::new(&np, &s);
        model.freeze_zeta0 = cfg.flags.low_excitation;
        let target = Amplitudes::from_steady(&s);
        let start = perturbed(&target);
        let traj = integrate_semiclassical(&model, start, &target, t_ode, &OdeOptions::default())?;
        rep.check(
            "ode_converges",
            traj.terminal_distance,
            1e-8,
            traj.terminal_distance < 1e-8,
            format!("t = {t_ode:.3e}, {} steps", traj.steps),
        );
    }
    Ok(())
}

/// Start point for convergence checks: each amplitude displaced by 1e-3 of
/// its size (or absolutely, when it vanishes).
pub fn perturbed(x: &Amplitudes) -> Amplitudes {
    let kick = |z: Complex64| z + Complex64::new(1e-3, -0.7e-3) * (1e-3 + z.norm());
    Amplitudes {
        alpha: kick(x.alpha),
        beta: kick(x.beta),
        zeta: if x.zeta == Complex64::new(0.0, 0.0) {
            x.zeta
        } else {
            kick(x.zeta)
        },
        zeta0: x.zeta0,
    }
}

fn inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Record of one run: the request plus the context needed to audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub request: RunRequest,
    pub hbar: f64,
    pub k_b: f64,
    /// Resolved parameters at the base point, when a configuration was given.
    pub physical: Option<PhysicalParams>,
    pub normalized: Option<NormalizedParams>,
    pub output: Option<PathBuf>,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(request: &RunRequest, output: Option<&Path>) -> Self {
        let resolved = request
            .config_text
            .as_ref()
            .and_then(|_| base_config(request).ok())
            .and_then(|raw| request.sweep.config_at(&raw, &[]).ok());
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            version: VERSION.to_string(),
            request: request.clone(),
            hbar: HBAR,
            k_b: K_B,
            normalized: resolved.as_ref().and_then(|c| c.normalized().ok()),
            physical: resolved.map(|c| c.params),
            output: output.map(Path::to_path_buf),
            timestamp_unix,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }

    /// Re-execute and render exactly as the original run did.
    pub fn rerun(&self) -> Result<(RunOutput, String)> {
        if self.version != VERSION {
            return Err(Error::Config(format!(
                "manifest was written by version {}, this is {VERSION}",
                self.version
            )));
        }
        let out = execute(&self.request)?;
        let text = out.render(self.request.json);
        Ok((out, text))
    }
}

/// Path of the manifest written next to an output file.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Path of the matrix dump written next to an output file.
pub fn matrices_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".matrices.json");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::Axis;

    const BASE: &str = "\
omega_m_over_2pi = 10e6
mass_m = 10e-12
q_factor = 5e5
d = 100e-9
omega_f_over_2pi = 10e9
gamma_f_norm = 0.1
delta_f_norm = 1
drive_power = 1e-6
temperature = 0.2
g_coupling_over_2pi = 10e3
gamma_p_norm = 0.8
omega_p_over_2pi = 90e9
delta_p_per_abs_zeta0_norm = -1
";

    fn request(command: Command) -> RunRequest {
        RunRequest {
            command,
            config_text: Some(BASE.into()),
            sweep: SweepSpec::default(),
            seed: 1,
            dump_matrices: false,
            json: false,
        }
    }

    #[test]
    fn cooling_sweep_table() {
        let mut req = request(Command::Cool);
        req.sweep
            .axes
            .push(Axis::parse("delta_f_norm=0.5:1.5:5").unwrap());
        req.sweep.flags.no_molecule = true;
        let out = execute(&req).unwrap();
        assert_eq!(out.table.rows.len(), 5);
        assert_eq!(out.table.columns[0], "delta_f_norm");
        let csv = out.render(false);
        assert!(csv.starts_with("# command: cool\n"));
        assert!(!csv.contains("timestamp"));
    }

    #[test]
    fn manifest_rerun_is_bit_identical() {
        let mut req = request(Command::Steady);
        req.sweep
            .axes
            .push(Axis::parse("drive_power=1e-7:1e-6:4:log").unwrap());
        let first = execute(&req).unwrap().render(false);
        let m = RunManifest::new(&req, None);
        let text = serde_json::to_string(&m).unwrap();
        let back: RunManifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back.request, req);
        let (_, again) = back.rerun().unwrap();
        assert_eq!(first, again);
    }

    #[test]
    fn tempmap_needs_two_axes() {
        let req = request(Command::Tempmap);
        assert!(matches!(execute(&req), Err(Error::Config(_))));
    }

    #[test]
    fn spectrum_rejects_sweeps() {
        let mut req = request(Command::Spectrum {
            omega_min: 0.2,
            omega_max: 2.0,
            points: 3,
        });
        assert_eq!(execute(&req).unwrap().table.rows.len(), 3);
        req.sweep
            .axes
            .push(Axis::parse("delta_f_norm=0.5:1.5:5").unwrap());
        assert!(execute(&req).is_err());
    }

    #[test]
    fn single_frequency_spectrum() {
        let req = request(Command::Spectrum {
            omega_min: 1.0,
            omega_max: 1.0,
            points: 1,
        });
        assert_eq!(execute(&req).unwrap().table.rows.len(), 1);
    }

    #[test]
    fn morse_tables() {
        let mut req = request(Command::Morse { molecule: None });
        req.config_text = None;
        let out = execute(&req).unwrap();
        for name in ["K2", "HCl", "HI", "NO"] {
            assert!(out
                .table
                .meta
                .iter()
                .any(|(k, _)| k == &format!("nu_max[{name}]")));
        }
        let req = request(Command::Morse {
            molecule: Some("Xe2".into()),
        });
        assert!(matches!(execute(&req), Err(Error::UnknownMolecule(_))));
    }

    #[test]
    fn dumped_matrices_follow_points() {
        let mut req = request(Command::Cool);
        req.dump_matrices = true;
        req.sweep.flags.no_molecule = true;
        let out = execute(&req).unwrap();
        let m = out.matrices.unwrap();
        assert_eq!(m.as_array().unwrap().len(), 1);
        assert_eq!(m[0]["a_matrix"].as_array().unwrap().len(), 7);
    }
}
