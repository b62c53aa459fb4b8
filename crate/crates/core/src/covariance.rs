//! Stationary covariance and cooling figures of merit.
//!
//! For `du/dt = -A u + xi` with `<xi xi^T> = D delta`, the stationary
//! covariance solves `A V + V A^T = D`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{low_excitation_ratio, reduce_low_excitation, LinearSystem, NoiseConvention};
use crate::params::{NormalizedParams, HBAR, K_B};
use crate::stability::{is_stable, StabilityVerdict};
use crate::steadystate::{solve_steady_with, SteadyOptions, SteadyState};

/// Bound on the Lyapunov residual relative to `||D||_inf`.
pub const LYAPUNOV_TOL: f64 = 1e-12;

/// `a * b` as an unevaluated sum `(p, e)`.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Accurate sum of products, compensated.
fn dot2(terms: impl Iterator<Item = (f64, f64)>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for (a, b) in terms {
        let (p, e) = two_prod(a, b);
        let t = s + p;
        let z = t - s;
        c += (s - (t - z)) + (p - z) + e;
        s = t;
    }
    s + c
}

/// `D - (A V + V A^T)`, evaluated in compensated arithmetic.
pub fn lyapunov_defect(a: &DMatrix<f64>, v: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let terms = (0..n)
            .map(|k| (a[(i, k)], v[(k, j)]))
            .chain((0..n).map(|l| (v[(i, l)], a[(j, l)])))
            .chain(std::iter::once((-1.0, d[(i, j)])));
        -dot2(terms)
    })
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solve `A V + V A^T = D` through the vectorized Kronecker system, with
/// iterative refinement. Returns `V` and the residual relative to `||D||_inf`.
pub fn solve_lyapunov(a: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = a.nrows();
    if !a.is_square() || d.shape() != a.shape() {
        return Err(Error::invalid("lyapunov", "matrix shapes do not match"));
    }
    let nn = n * n;
    // vec is column-major: index i + n j holds V_ij
    let k = DMatrix::from_fn(nn, nn, |r, c| {
        let (i, j) = (r % n, r / n);
        let (p, l) = (c % n, c / n);
        let mut v = 0.0;
        if j == l {
            v += a[(i, p)];
        }
        if i == p {
            v += a[(j, l)];
        }
        v
    });
    let lu = k.lu();
    let solve = |rhs: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let x = lu
            .solve(&b)
            .ok_or_else(|| Error::Marginal("Lyapunov operator is singular".into()))?;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Marginal("Lyapunov operator is singular".into()));
        }
        Ok(DMatrix::from_column_slice(n, n, x.as_slice()))
    };
    let mut v = solve(d)?;
    v = (&v + v.transpose()) * 0.5;
    for _ in 0..3 {
        let r = lyapunov_defect(a, &v, d);
        if r.amax() == 0.0 {
            break;
        }
        let dv = solve(&r)?;
        v += (&dv + dv.transpose()) * 0.5;
    }
    let dn = inf_norm(d);
    let rn = inf_norm(&lyapunov_defect(a, &v, d));
    let residual = if dn > 0.0 { rn / dn } else { rn };
    Ok((v, residual))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    pub v_matrix: DMatrix<f64>,
    pub residual: f64,
    pub verdict: StabilityVerdict,
}

/// Stationary covariance of a stable system.
pub fn stationary_covariance(sys: &LinearSystem) -> Result<Covariance> {
    let verdict = is_stable(&sys.a_matrix)?;
    if !verdict.stable {
        return Err(if verdict.max_re_eig.abs() <= verdict.threshold {
            Error::Marginal(format!("max Re lambda = {:.3e}", verdict.max_re_eig))
        } else {
            Error::Unstable {
                max_re_eig: verdict.max_re_eig,
            }
        });
    }
    let (v_matrix, residual) = solve_lyapunov(&sys.a_matrix, &sys.d_matrix)?;
    Ok(Covariance {
        v_matrix,
        residual,
        verdict,
    })
}

/// `(V_11 + V_22) / 2 - 1/2`.
pub fn effective_occupancy(v: &DMatrix<f64>) -> f64 {
    0.5 * (v[(0, 0)] + v[(1, 1)]) - 0.5
}

/// Mean mechanical energy `hbar omega_m (V_11 + V_22) / 2`, J.
pub fn mean_energy(v: &DMatrix<f64>, omega_m: f64) -> f64 {
    0.5 * HBAR * omega_m * (v[(0, 0)] + v[(1, 1)])
}

/// `hbar omega_m / (k_B ln(1 + 1/n_eff))` in K. Non-positive occupancies map
/// to zero and set the flag.
pub fn effective_temperature(n_eff: f64, omega_m: f64) -> (f64, bool) {
    if n_eff > 0.0 {
        (HBAR * omega_m / (K_B * (1.0 / n_eff).ln_1p()), false)
    } else {
        (0.0, true)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct CoolingOptions {
    pub low_excitation: bool,
    pub convention: NoiseConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolingResult {
    /// Basis of the subsystem actually analysed: the variables coupled to the
    /// mechanical mode.
    pub basis: Vec<String>,
    pub v_matrix: Option<DMatrix<f64>>,
    pub n_eff: Option<f64>,
    pub u_energy: Option<f64>,
    pub t_eff: Option<f64>,
    pub stable: bool,
    pub max_re_eig: f64,
    pub hurwitz_agrees: bool,
    pub lyapunov_residual: Option<f64>,
    pub low_excitation_ratio: f64,
    pub warnings: Vec<String>,
}

/// Linear system for a parameter point, before restriction.
pub fn linear_system(
    np: &NormalizedParams,
    s: &SteadyState,
    opts: &CoolingOptions,
) -> Result<LinearSystem> {
    let sys = LinearSystem::new(np, s, opts.convention)?;
    Ok(if opts.low_excitation {
        reduce_low_excitation(&sys)
    } else {
        sys
    })
}

/// Figures of merit of a linear system, restricted to the variables coupled
/// to the mechanical mode.
pub fn cooling_from_system(sys: &LinearSystem, omega_m_si: f64) -> Result<CoolingResult> {
    let sub = sys.restrict(&sys.mechanical_component());
    let verdict = is_stable(&sub.a_matrix)?;
    let mut warnings = Vec::new();
    if !verdict.agree {
        warnings.push(format!(
            "eigenvalue and Hurwitz verdicts differ (max Re lambda = {:.3e})",
            verdict.max_re_eig
        ));
    }
    let mut out = CoolingResult {
        basis: sub.basis.clone(),
        v_matrix: None,
        n_eff: None,
        u_energy: None,
        t_eff: None,
        stable: verdict.stable,
        max_re_eig: verdict.max_re_eig,
        hurwitz_agrees: verdict.agree,
        lyapunov_residual: None,
        low_excitation_ratio: f64::NAN,
        warnings,
    };
    if !verdict.stable {
        return Ok(out);
    }
    let (v, residual) = solve_lyapunov(&sub.a_matrix, &sub.d_matrix)?;
    if residual > LYAPUNOV_TOL {
        out.warnings.push(format!(
            "Lyapunov residual {residual:.3e} exceeds {LYAPUNOV_TOL:.0e} relative to ||D||"
        ));
    }
    let n_eff = effective_occupancy(&v);
    let (t_eff, flagged) = effective_temperature(n_eff, omega_m_si);
    if flagged {
        out.warnings.push(format!(
            "non-positive n_eff = {n_eff:.6e}; T_eff reported as 0"
        ));
    }
    out.n_eff = Some(n_eff);
    out.u_energy = Some(mean_energy(&v, omega_m_si));
    out.t_eff = Some(t_eff);
    out.lyapunov_residual = Some(residual);
    out.v_matrix = Some(v);
    Ok(out)
}

/// Full pipeline for one parameter point: steady state, linearization,
/// optional reduction, stability and covariance.
pub fn cool(np: &NormalizedParams, opts: &CoolingOptions) -> Result<CoolingResult> {
    let s = solve_steady_with(np, &SteadyOptions::default())?;
    let sys = linear_system(np, &s, opts)?;
    let mut out = cooling_from_system(&sys, np.omega_m_si)?;
    out.low_excitation_ratio = low_excitation_ratio(np);
    if opts.low_excitation && out.low_excitation_ratio >= 0.01 {
        out.warnings.push(format!(
            "low-excitation reduction outside its range: g^2/(Delta_p^2+gamma_p^2) = {:.3e}",
            out.low_excitation_ratio
        ));
    }
    Ok(out)
}
