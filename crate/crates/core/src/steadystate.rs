//! Semiclassical fixed point of the driven cavity, mechanics and molecule.
//!
//! Unknowns are the complex amplitudes `alpha`, `beta`, `zeta` and the
//! effective cavity detuning. The molecular inversion `zeta0_s` is an input.
//! After solving, the global cavity phase is rotated so that `alpha_s` is real
//! and positive; the drive then carries the phase `exp(-i theta)`.

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{Detuning, NormalizedParams};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    /// Effective detuning given: the equations are linear in the amplitudes.
    ClosedForm,
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub alpha_s: Complex64,
    pub beta_s: Complex64,
    pub zeta_s: Complex64,
    pub zeta0_s: f64,
    /// Effective cavity detuning.
    pub delta_f: f64,
    /// Bare cavity detuning consistent with `delta_f`.
    pub delta_0f: f64,
    pub delta_p_eff: f64,
    /// Cavity phase removed by the rotation.
    pub theta: f64,
    pub residual: f64,
    /// Steady defect of the inversion equation; zero at an exact fixed point.
    pub zeta0_defect: f64,
    pub iterations: usize,
    pub method: SteadyMethod,
}

impl SteadyState {
    /// Drive amplitude in the rotated frame.
    pub fn drive(&self, np: &NormalizedParams) -> Complex64 {
        np.epsilon0 * Complex64::from_polar(1.0, -self.theta)
    }

    /// `delta_p = omega_p + omega_0` in the form that enters the `zeta` equation.
    pub fn delta_p_bare(&self, np: &NormalizedParams) -> f64 {
        self.delta_p_eff - 2.0 * np.omega_p * self.zeta0_s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SteadyOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 10_000,
        }
    }
}

pub fn solve_steady(np: &NormalizedParams) -> Result<SteadyState> {
    solve_steady_with(np, &SteadyOptions::default())
}

pub fn solve_steady_with(np: &NormalizedParams, opts: &SteadyOptions) -> Result<SteadyState> {
    if !(np.gamma_f > 0.0) {
        return Err(Error::invalid("gamma_f", "must be positive"));
    }
    if np.g != 0.0 && np.zeta0_s == 0.0 {
        return Err(Error::invalid("zeta0_s", "must be nonzero while g != 0"));
    }
    let c = molecular_denominator(np)?;
    let (alpha, zeta, beta, delta_f, iterations, method) = match np.cavity {
        Detuning::Effective(df) => {
            let (a, z, b) = amplitudes_at(np, c, df);
            (a, z, b, df, 0, SteadyMethod::ClosedForm)
        }
        Detuning::Bare(d0f) => solve_bare(np, c, d0f, opts)?,
    };
    let mut s = finish(np, alpha, zeta, beta, delta_f, iterations, method);
    s.residual = steady_residual(&s, np);
    if !(s.residual < opts.tol.max(1e-12)) {
        return Err(Error::NonConvergence {
            iterations,
            defect: s.residual,
        });
    }
    Ok(s)
}

/// `i Delta_p / (2 zeta0_s) + gamma_p`, or `None` when the molecule is absent.
fn molecular_denominator(np: &NormalizedParams) -> Result<Option<Complex64>> {
    if np.g == 0.0 {
        return Ok(None);
    }
    let c = Complex64::new(np.gamma_p, np.delta_p_eff() / (2.0 * np.zeta0_s));
    if c == Complex64::new(0.0, 0.0) {
        return Err(Error::ZeroDivision("molecular steady-state denominator"));
    }
    Ok(Some(c))
}

/// Amplitudes for a given effective detuning, real drive.
fn amplitudes_at(
    np: &NormalizedParams,
    c: Option<Complex64>,
    delta_f: f64,
) -> (Complex64, Complex64, Complex64) {
    let mut den = Complex64::new(np.gamma_f, delta_f);
    if let Some(c) = c {
        den += np.g * np.g / c;
    }
    let alpha = np.epsilon0 / den;
    let zeta = match c {
        Some(c) => -I * np.g * alpha / c,
        None => Complex64::new(0.0, 0.0),
    };
    let beta = mech_amplitude(np, alpha);
    (alpha, zeta, beta)
}

fn mech_amplitude(np: &NormalizedParams, alpha: Complex64) -> Complex64 {
    I * np.g0 * alpha.norm_sqr() / Complex64::new(np.gamma_m, 1.0)
}

type Solution = (Complex64, Complex64, Complex64, f64, usize, SteadyMethod);

fn solve_bare(
    np: &NormalizedParams,
    c: Option<Complex64>,
    d0f: f64,
    opts: &SteadyOptions,
) -> Result<Solution> {
    let shift =
        |alpha: Complex64| 2.0 * np.g0 * np.g0 * alpha.norm_sqr() / (1.0 + np.gamma_m * np.gamma_m);

    // damped iteration on the effective detuning
    let mut df = d0f;
    let mut lambda = 1.0;
    let mut last = f64::INFINITY;
    let fp_budget = opts.max_iter / 2;
    for it in 0..fp_budget {
        let (alpha, _, _) = amplitudes_at(np, c, df);
        let step = d0f - shift(alpha) - df;
        let err = step.abs() / (1.0 + df.abs());
        if err < 0.1 * opts.tol {
            let (a, z, b) = amplitudes_at(np, c, df);
            if continuation_branch_ok(np, c, d0f, df) {
                return Ok((a, z, b, df, it + 1, SteadyMethod::FixedPoint));
            }
            break;
        }
        if err > last {
            lambda *= 0.5;
            if lambda < 1e-8 {
                break;
            }
        }
        last = err;
        df += lambda * step;
    }

    newton_continuation(np, c, d0f, opts, fp_budget)
}

/// The fixed-point iteration may land on a branch that is not reachable from
/// zero drive. Accept only if the scalar defect has no other root between the
/// zero-drive detuning and `df` with a sign change of the opposite kind.
fn continuation_branch_ok(np: &NormalizedParams, c: Option<Complex64>, d0f: f64, df: f64) -> bool {
    // h(x) = x - d0f + shift(x); h(d0f) >= 0. Walking from d0f towards df the
    // first root met is the continuation branch.
    let h = |x: f64| {
        let (a, _, _) = amplitudes_at(np, c, x);
        x - d0f + 2.0 * np.g0 * np.g0 * a.norm_sqr() / (1.0 + np.gamma_m * np.gamma_m)
    };
    let n = 2000;
    let scale = 1e-9 * (1.0 + df.abs());
    let mut prev = h(d0f);
    if prev.abs() <= scale {
        return (df - d0f).abs() <= scale;
    }
    for k in 1..=n {
        let x = d0f + (df - d0f) * k as f64 / n as f64;
        let v = h(x);
        if k < n && (v == 0.0 || v.signum() != prev.signum()) {
            // a root strictly before df: only acceptable if it is df itself
            let tol = (df - d0f).abs() / n as f64 * 1.5;
            return (x - df).abs() <= tol;
        }
        prev = v;
    }
    true
}

/// Newton on the six real unknowns with homotopy in the drive amplitude.
fn newton_continuation(
    np: &NormalizedParams,
    c: Option<Complex64>,
    d0f: f64,
    opts: &SteadyOptions,
    used: usize,
) -> Result<Solution> {
    let target = np.epsilon0;
    let mut x = Vector6::zeros();
    let mut eps = 0.0;
    let mut step = target / 16.0;
    let mut iterations = used;
    let mut last_defect = f64::INFINITY;
    while eps < target {
        let next = (eps + step).min(target);
        match newton(np, c, d0f, next, x, opts.tol, 50) {
            Ok((sol, its)) => {
                iterations += its;
                x = sol;
                eps = next;
                step *= 1.5;
            }
            Err((defect, its)) => {
                iterations += its;
                last_defect = defect;
                step *= 0.25;
                if step < 1e-12 * target.max(1.0) {
                    return Err(Error::NonConvergence { iterations, defect });
                }
            }
        }
        if iterations > opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                defect: last_defect,
            });
        }
    }
    let alpha = Complex64::new(x[0], x[1]);
    let zeta = Complex64::new(x[2], x[3]);
    let beta = Complex64::new(x[4], x[5]);
    let df = d0f - 2.0 * np.g0 * beta.re;
    Ok((alpha, zeta, beta, df, iterations, SteadyMethod::Newton))
}

/// Real residual `F(x)` and Jacobian for x = (Re a, Im a, Re z, Im z, Re b, Im b).
fn system(
    np: &NormalizedParams,
    c: Option<Complex64>,
    d0f: f64,
    eps: f64,
    x: &Vector6<f64>,
) -> (Vector6<f64>, Matrix6<f64>) {
    let (a1, a2, z1, z2, b1, b2) = (x[0], x[1], x[2], x[3], x[4], x[5]);
    let (g, gf, gm, g0) = (np.g, np.gamma_f, np.gamma_m, np.g0);
    let delta = d0f - 2.0 * g0 * b1;
    let mut f = Vector6::zeros();
    let mut j = Matrix6::zeros();

    f[0] = -gf * a1 + delta * a2 + g * z2 + eps;
    f[1] = -delta * a1 - gf * a2 - g * z1;
    j[(0, 0)] = -gf;
    j[(0, 1)] = delta;
    j[(0, 3)] = g;
    j[(0, 4)] = -2.0 * g0 * a2;
    j[(1, 0)] = -delta;
    j[(1, 1)] = -gf;
    j[(1, 2)] = -g;
    j[(1, 4)] = 2.0 * g0 * a1;

    match c {
        Some(c) => {
            f[2] = c.re * z1 - c.im * z2 - g * a2;
            f[3] = c.im * z1 + c.re * z2 + g * a1;
            j[(2, 2)] = c.re;
            j[(2, 3)] = -c.im;
            j[(2, 1)] = -g;
            j[(3, 2)] = c.im;
            j[(3, 3)] = c.re;
            j[(3, 0)] = g;
        }
        None => {
            f[2] = z1;
            f[3] = z2;
            j[(2, 2)] = 1.0;
            j[(3, 3)] = 1.0;
        }
    }

    f[4] = -gm * b1 + b2;
    f[5] = -b1 - gm * b2 + g0 * (a1 * a1 + a2 * a2);
    j[(4, 4)] = -gm;
    j[(4, 5)] = 1.0;
    j[(5, 4)] = -1.0;
    j[(5, 5)] = -gm;
    j[(5, 0)] = 2.0 * g0 * a1;
    j[(5, 1)] = 2.0 * g0 * a2;
    (f, j)
}

fn newton(
    np: &NormalizedParams,
    c: Option<Complex64>,
    d0f: f64,
    eps: f64,
    mut x: Vector6<f64>,
    tol: f64,
    max_iter: usize,
) -> std::result::Result<(Vector6<f64>, usize), (f64, usize)> {
    let scale = |x: &Vector6<f64>| 1.0 + x.amax() + eps;
    let mut defect = f64::INFINITY;
    for it in 1..=max_iter {
        let (f, j) = system(np, c, d0f, eps, &x);
        defect = f.amax() / scale(&x);
        let Some(dx) = j.lu().solve(&(-f)) else {
            return Err((defect, it));
        };
        // backtracking on the residual norm
        let mut t = 1.0;
        let base = f.norm();
        let mut accepted = false;
        while t > 1e-4 {
            let trial = x + dx * t;
            let (ft, _) = system(np, c, d0f, eps, &trial);
            if ft.norm() < base || base == 0.0 {
                x = trial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err((defect, it));
        }
        if dx.amax() * t <= 1e-15 * scale(&x) {
            let (f, _) = system(np, c, d0f, eps, &x);
            let d = f.amax() / scale(&x);
            return if d < tol { Ok((x, it)) } else { Err((d, it)) };
        }
    }
    let (f, _) = system(np, c, d0f, eps, &x);
    let d = f.amax() / scale(&x);
    if d < tol {
        Ok((x, max_iter))
    } else {
        Err((defect.min(d), max_iter))
    }
}

fn finish(
    np: &NormalizedParams,
    alpha: Complex64,
    zeta: Complex64,
    beta: Complex64,
    delta_f: f64,
    iterations: usize,
    method: SteadyMethod,
) -> SteadyState {
    let theta = if alpha.norm() > 0.0 { alpha.arg() } else { 0.0 };
    let rot = Complex64::from_polar(1.0, -theta);
    let alpha_s = Complex64::new(alpha.norm(), 0.0);
    let zeta_s = zeta * rot;
    let delta_0f = match np.cavity {
        Detuning::Bare(d0f) => d0f,
        Detuning::Effective(_) => delta_f + 2.0 * np.g0 * beta.re,
    };
    let mut s = SteadyState {
        alpha_s,
        beta_s: beta,
        zeta_s,
        zeta0_s: np.zeta0_s,
        delta_f,
        delta_0f,
        delta_p_eff: np.delta_p_eff(),
        theta,
        residual: 0.0,
        zeta0_defect: 0.0,
        iterations,
        method,
    };
    s.zeta0_defect = zeta0_rate(np, s.alpha_s, s.zeta_s).abs()
        / (1.0 + s.alpha_s.norm() * s.zeta_s.norm() * np.g.abs());
    s
}

/// Right-hand side of the inversion equation without noise.
pub fn zeta0_rate(np: &NormalizedParams, alpha: Complex64, zeta: Complex64) -> f64 {
    let v = -I * np.g * alpha * zeta.conj() + I * np.g * alpha.conj() * zeta;
    v.re - 2.0 * np.gamma_p * zeta.norm_sqr()
}

/// Largest scaled defect of the steady-state equations and of the
/// effective-detuning definition, each as `|lhs - rhs| / (1 + |rhs|)`.
pub fn steady_residual(s: &SteadyState, np: &NormalizedParams) -> f64 {
    let scaled = |lhs: Complex64, rhs: Complex64| (lhs - rhs).norm() / (1.0 + rhs.norm());
    let eps = s.drive(np);
    let alpha_rhs = (eps - I * np.g * s.zeta_s) / Complex64::new(np.gamma_f, s.delta_f);
    let zeta_rhs = if np.g == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        let c = Complex64::new(np.gamma_p, s.delta_p_eff / (2.0 * s.zeta0_s));
        -I * np.g * s.alpha_s / c
    };
    let beta_rhs = mech_amplitude(np, s.alpha_s);
    let df_rhs = s.delta_0f - 2.0 * np.g0 * s.beta_s.re;
    let df = (s.delta_f - df_rhs).abs() / (1.0 + df_rhs.abs());
    scaled(s.alpha_s, alpha_rhs)
        .max(scaled(s.zeta_s, zeta_rhs))
        .max(scaled(s.beta_s, beta_rhs))
        .max(df)
}
