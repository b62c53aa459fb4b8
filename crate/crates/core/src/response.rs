//! Mechanical susceptibility, effective frequency and effective damping.
//!
//! The closed form uses the twelve coefficients below with `Delta` read as the
//! effective cavity detuning and `Omega_p` as the effective molecular
//! detuning. `Lambda` and `Lambda'` are taken as the real and imaginary parts
//! of `N conj(Dn)` with
//!
//! ```text
//! N  = (Omega_T + i Gamma_T) (Omega_Y' + i Gamma_Y')
//! Dn = (Omega_X + i Gamma_X) (Omega_Y + i Gamma_Y) - (Omega_X' + i Gamma_X') (Omega_Y' + i Gamma_Y')
//! ```
//!
//! so that `omega_eff^2 - omega^2 - i omega gamma_eff = omega_m / chi`.
//! The matrix-inversion oracle evaluates the same response directly from the
//! drift matrix.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{AuxiliaryQuantities, LinearSystem};
use crate::params::NormalizedParams;
use crate::steadystate::SteadyState;

const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseCoefficients {
    pub omega_t: f64,
    pub gamma_t: f64,
    pub omega_x: f64,
    pub gamma_x: f64,
    pub omega_y: f64,
    pub gamma_y: f64,
    pub omega_xp: f64,
    pub gamma_xp: f64,
    pub omega_yp: f64,
    pub gamma_yp: f64,
    pub lambda: f64,
    pub lambda_p: f64,
}

impl ResponseCoefficients {
    pub fn numerator(&self) -> Complex64 {
        Complex64::new(self.omega_t, self.gamma_t) * Complex64::new(self.omega_yp, self.gamma_yp)
    }

    pub fn denominator(&self) -> Complex64 {
        Complex64::new(self.omega_x, self.gamma_x) * Complex64::new(self.omega_y, self.gamma_y)
            - Complex64::new(self.omega_xp, self.gamma_xp)
                * Complex64::new(self.omega_yp, self.gamma_yp)
    }

    /// `|Dn|^2`, the common denominator of the effective frequency and damping.
    pub fn denominator_sq(&self) -> f64 {
        let re = self.omega_x * self.omega_y
            - self.gamma_x * self.gamma_y
            - self.omega_xp * self.omega_yp
            + self.gamma_xp * self.gamma_yp;
        let im = self.omega_x * self.gamma_y + self.omega_y * self.gamma_x
            - self.omega_xp * self.gamma_yp
            - self.omega_yp * self.gamma_xp;
        re * re + im * im
    }
}

/// Inputs of the closed form, gathered once per parameter point.
#[derive(Debug, Clone, Copy)]
pub struct ResponseInputs {
    pub gamma_m: f64,
    pub gamma_f: f64,
    pub g: f64,
    pub delta_f: f64,
    pub delta_p: f64,
    /// `2 G_0 alpha_s`.
    pub gx: f64,
    pub aux: AuxiliaryQuantities,
}

impl ResponseInputs {
    pub fn new(np: &NormalizedParams, s: &SteadyState) -> Result<Self> {
        Ok(Self {
            gamma_m: np.gamma_m,
            gamma_f: np.gamma_f,
            g: np.g,
            delta_f: s.delta_f,
            delta_p: s.delta_p_eff,
            gx: 2.0 * np.g0 * s.alpha_s.re,
            aux: AuxiliaryQuantities::new(np, s)?,
        })
    }
}

pub fn coefficients(inp: &ResponseInputs, omega: f64) -> Result<ResponseCoefficients> {
    if omega == 0.0 || !omega.is_finite() {
        return Err(Error::ZeroFrequency);
    }
    let w = omega;
    let g = inp.g;
    let gf = inp.gamma_f;
    let delta = inp.delta_f;
    let op = inp.delta_p;
    let x = &inp.aux;
    let (k1, k2) = (x.k_1, x.k_2);
    let (gr, gi) = (x.g_r, x.g_i);
    let (gpr, gpi) = (x.gamma_p_r, x.gamma_p_i);
    let g0s = x.g_0s;
    let gam0 = x.gamma_0;

    // recurring ratios
    let k1_gpr = k1 * gpr / w;
    let k1_gpi = k1 * gpi / w;
    let k2_gpr = k2 * gpr / w;
    let k2_gpi = k2 * gpi / w;
    let k1_gi = k1 * gi / w;
    let k2_gi = k2 * gi / w;
    let k1_gr = k1 * gr / w;
    let k2_gr = k2 * gr / w;

    let omega_t = op * op + gam0 * gam0 - (k2_gpi - w) * (k1_gpr - w) + k2_gpr * k1_gpi;
    let gamma_t = k1_gpi * op - k2_gpr * op - gam0 * (k1_gpr - w) - gam0 * (k2_gpi - w);

    let omega_x =
        gf * omega_t + w * gamma_t - g * g0s * gam0 + g * k2_gpr * k1_gi + g * k2_gi * (k1_gpr - w);
    let gamma_x =
        gf * gamma_t - w * omega_t + g * op * k1_gi - g * g0s * (k1_gpr - w) + g * gam0 * k2_gi;
    let omega_y =
        gf * omega_t + w * gamma_t - g * g0s * gam0 + g * k1_gpi * k2_gr + g * k1_gr * (k2_gpi - w);
    let gamma_y =
        gf * gamma_t - w * omega_t + g * op * k2_gr - g * g0s * (k2_gpi - w) + g * gam0 * k1_gr;

    let omega_xp = -delta * omega_t + g * op * g0s + g * k1_gpi * k2_gi - g * k1_gi * (k2_gpi - w);
    let gamma_xp = -delta * gamma_t - g * op * k2_gi + g * g0s * k1_gpi - g * gam0 * k1_gi;
    let omega_yp = delta * omega_t - g * op * g0s + g * k2_gr * (k1_gpr - w) - g * k1_gr * k2_gpr;
    let gamma_yp = delta * gamma_t + g * op * k1_gr + g * g0s * k2_gpr - g * gam0 * k2_gr;

    // Lambda + i Lambda' = N conj(Dn)
    let n_re = omega_t * omega_yp - gamma_t * gamma_yp;
    let n_im = omega_t * gamma_yp + gamma_t * omega_yp;
    let d_re = omega_x * omega_y - gamma_x * gamma_y - omega_xp * omega_yp + gamma_xp * gamma_yp;
    let d_im = omega_x * gamma_y + omega_y * gamma_x - omega_xp * gamma_yp - omega_yp * gamma_xp;
    let lambda = n_re * d_re + n_im * d_im;
    let lambda_p = n_im * d_re - n_re * d_im;

    Ok(ResponseCoefficients {
        omega_t,
        gamma_t,
        omega_x,
        gamma_x,
        omega_y,
        gamma_y,
        omega_xp,
        gamma_xp,
        omega_yp,
        gamma_yp,
        lambda,
        lambda_p,
    })
}

pub fn response_coefficients(
    np: &NormalizedParams,
    s: &SteadyState,
    omega: f64,
) -> Result<ResponseCoefficients> {
    coefficients(&ResponseInputs::new(np, s)?, omega)
}

/// Closed-form susceptibility and whether the denominator is near a pole.
pub fn susceptibility_from(
    inp: &ResponseInputs,
    c: &ResponseCoefficients,
    omega: f64,
) -> (Complex64, bool) {
    let bare = Complex64::new(inp.gamma_m, -omega).powi(2) + 1.0;
    let dn = c.denominator();
    let inv = if dn == Complex64::new(0.0, 0.0) {
        bare
    } else {
        bare - inp.gx * inp.gx * c.numerator() / dn
    };
    let near_pole = inv.norm() < POLE_TOL || (inp.gx != 0.0 && dn.norm() < POLE_TOL);
    (1.0 / inv, near_pole)
}

pub fn susceptibility(np: &NormalizedParams, s: &SteadyState, omega: f64) -> Result<Complex64> {
    let inp = ResponseInputs::new(np, s)?;
    let c = coefficients(&inp, omega)?;
    Ok(susceptibility_from(&inp, &c, omega).0)
}

/// Effective frequency from the coefficients; errors on a negative radicand.
pub fn effective_frequency_from(inp: &ResponseInputs, c: &ResponseCoefficients) -> Result<f64> {
    let dsq = c.denominator_sq();
    let shift = if inp.gx == 0.0 || dsq == 0.0 {
        0.0
    } else {
        inp.gx * inp.gx * c.lambda / dsq
    };
    let radicand = inp.gamma_m * inp.gamma_m + 1.0 - shift;
    if radicand < 0.0 {
        return Err(Error::NegativeRadicand(radicand));
    }
    Ok(radicand.sqrt())
}

pub fn effective_damping_from(inp: &ResponseInputs, c: &ResponseCoefficients, omega: f64) -> f64 {
    let dsq = c.denominator_sq();
    let shift = if inp.gx == 0.0 || dsq == 0.0 {
        0.0
    } else {
        inp.gx * inp.gx * c.lambda_p / (omega * dsq)
    };
    2.0 * inp.gamma_m + shift
}

pub fn effective_frequency(np: &NormalizedParams, s: &SteadyState, omega: f64) -> Result<f64> {
    let inp = ResponseInputs::new(np, s)?;
    effective_frequency_from(&inp, &coefficients(&inp, omega)?)
}

pub fn effective_damping(np: &NormalizedParams, s: &SteadyState, omega: f64) -> Result<f64> {
    let inp = ResponseInputs::new(np, s)?;
    Ok(effective_damping_from(
        &inp,
        &coefficients(&inp, omega)?,
        omega,
    ))
}

/// Element `(response_row, drive_row)` of `(A - i omega I)^{-1}` for
/// `du/dt = -A u + f`, i.e. the response of `u[response_row]` to a unit force
/// in the equation of `u[drive_row]`.
pub fn transfer_function_oracle(
    sys: &LinearSystem,
    omega: f64,
    drive_row: usize,
    response_row: usize,
) -> Result<Complex64> {
    let n = sys.dim();
    if drive_row >= n || response_row >= n {
        return Err(Error::invalid(
            "transfer_function",
            "row index out of range",
        ));
    }
    let m = DMatrix::from_fn(n, n, |i, j| {
        let mut v = Complex64::new(sys.a_matrix[(i, j)], 0.0);
        if i == j {
            v -= Complex64::new(0.0, omega);
        }
        v
    });
    let mut rhs = DVector::zeros(n);
    rhs[drive_row] = Complex64::new(1.0, 0.0);
    let x = m
        .lu()
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.re.is_finite() && v.im.is_finite()))
        .ok_or_else(|| Error::Singular(format!("A - i omega I at omega = {omega}")))?;
    Ok(x[response_row])
}

/// Mechanical susceptibility from the drift matrix: displacement response to
/// a force in the momentum equation, weighted by `omega_m = 1`.
pub fn susceptibility_oracle(sys: &LinearSystem, omega: f64) -> Result<Complex64> {
    transfer_function_oracle(sys, omega, 1, 0)
}

/// `(omega_eff^2, gamma_eff)` implied by a susceptibility at `omega`.
pub fn effective_from_chi(chi: Complex64, omega: f64) -> (f64, f64) {
    let inv = 1.0 / chi;
    (inv.re + omega * omega, -inv.im / omega)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub omega: f64,
    pub chi: Complex64,
    /// `None` where the radicand is negative.
    pub omega_eff: Option<f64>,
    pub gamma_eff: f64,
    pub chi_oracle: Complex64,
    pub closed_form_gap: f64,
    pub near_pole: bool,
}

pub fn spectrum_point(
    inp: &ResponseInputs,
    sys: &LinearSystem,
    omega: f64,
) -> Result<SpectrumPoint> {
    let c = coefficients(inp, omega)?;
    let (chi, near_pole) = susceptibility_from(inp, &c, omega);
    let chi_oracle = susceptibility_oracle(sys, omega)?;
    Ok(SpectrumPoint {
        omega,
        chi,
        omega_eff: effective_frequency_from(inp, &c).ok(),
        gamma_eff: effective_damping_from(inp, &c, omega),
        chi_oracle,
        closed_form_gap: (chi - chi_oracle).norm() / (1.0 + chi_oracle.norm()),
        near_pole,
    })
}

/// Spectrum over a frequency grid; points are evaluated in parallel and
/// returned in grid order.
pub fn spectrum(
    np: &NormalizedParams,
    s: &SteadyState,
    sys: &LinearSystem,
    grid: &[f64],
) -> Result<Vec<SpectrumPoint>> {
    let inp = ResponseInputs::new(np, s)?;
    grid.par_iter()
        .map(|&w| spectrum_point(&inp, sys, w))
        .collect()
}

/// `n` log-spaced points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| {
                    if k == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * k as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// The default response grid: 2000 log-spaced points over `[0.2, 2]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(0.2, 2.0, 2000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::NoiseConvention;
    use crate::params::{normalize, tests::reference_params};
    use crate::steadystate::solve_steady;

    fn point(molecule: bool) -> (NormalizedParams, SteadyState, LinearSystem) {
        let mut np = normalize(&reference_params()).unwrap();
        if !molecule {
            np = np.without_molecule();
        }
        let s = solve_steady(&np).unwrap();
        let sys = LinearSystem::new(&np, &s, NoiseConvention::Paper).unwrap();
        (np, s, sys)
    }

    #[test]
    fn zero_frequency_rejected() {
        let (np, s, _) = point(true);
        assert!(matches!(
            response_coefficients(&np, &s, 0.0),
            Err(Error::ZeroFrequency)
        ));
    }

    #[test]
    fn omega_x_without_molecule() {
        let (np, s, _) = point(false);
        let c = response_coefficients(&np, &s, 0.8).unwrap();
        assert_eq!(c.omega_x, np.gamma_f * c.omega_t + 0.8 * c.gamma_t);
    }

    #[test]
    fn omega_t_with_zeroed_auxiliaries() {
        let (np, s, _) = point(false);
        let mut inp = ResponseInputs::new(&np, &s).unwrap();
        inp.delta_p = 0.7;
        let w = 1.3;
        let c = coefficients(&inp, w).unwrap();
        // K1 = K2 = Gamma_0 = 0: Omega_T = Omega_p^2 - w^2, Gamma_T = 0
        assert_eq!(c.omega_t, 0.49 - w * w);
        assert_eq!(c.gamma_t, 0.0);
    }

    #[test]
    fn uncoupled_oscillator() {
        let (mut np, _, _) = point(false);
        np.epsilon0 = 0.0;
        let s = solve_steady(&np).unwrap();
        for w in [0.3, 1.0, 1.9] {
            let chi = susceptibility(&np, &s, w).unwrap();
            let bare = 1.0 / (Complex64::new(np.gamma_m, -w).powi(2) + 1.0);
            assert!((chi - bare).norm() <= 1e-15 * bare.norm());
            let we = effective_frequency(&np, &s, w).unwrap();
            assert_eq!(we, (np.gamma_m * np.gamma_m + 1.0).sqrt());
            assert_eq!(effective_damping(&np, &s, w).unwrap(), 2.0 * np.gamma_m);
        }
    }

    #[test]
    fn bare_oracle() {
        let (mut np, _, _) = point(false);
        np.epsilon0 = 0.0;
        np.gamma_m = 0.05;
        let s = solve_steady(&np).unwrap();
        let sys = LinearSystem::new(&np, &s, NoiseConvention::Paper).unwrap();
        let sub = sys.restrict(&[0, 1]);
        for w in [0.2, 0.9, 1.0, 1.7] {
            let got = susceptibility_oracle(&sub, w).unwrap();
            let want = 1.0 / (Complex64::new(0.05, -w).powi(2) + 1.0);
            assert!((got - want).norm() < 1e-12 * want.norm());
        }
    }

    #[test]
    fn reality_of_oracle() {
        let (_, _, sys) = point(true);
        for w in [0.25, 0.8, 1.6] {
            let a = susceptibility_oracle(&sys, w).unwrap();
            let b = susceptibility_oracle(&sys, -w).unwrap();
            assert!((a - b.conj()).norm() < 1e-12 * a.norm());
        }
    }

    #[test]
    fn closed_form_matches_oracle_without_molecule() {
        let (np, s, sys) = point(false);
        let sub = sys.restrict(&sys.mechanical_component());
        let inp = ResponseInputs::new(&np, &s).unwrap();
        for w in log_grid(0.2, 2.0, 57) {
            let p = spectrum_point(&inp, &sub, w).unwrap();
            let rel = (p.chi - p.chi_oracle).norm() / p.chi_oracle.norm();
            assert!(rel < 1e-8, "w = {w}: {rel}");
        }
    }

    #[test]
    fn lambda_definitions_consistent() {
        let (np, s, _) = point(true);
        let inp = ResponseInputs::new(&np, &s).unwrap();
        let c = coefficients(&inp, 1.1).unwrap();
        let z = c.numerator() * c.denominator().conj();
        assert!((z.re - c.lambda).abs() <= 1e-12 * z.norm());
        assert!((z.im - c.lambda_p).abs() <= 1e-12 * z.norm());
        assert!(
            (c.denominator().norm_sqr() - c.denominator_sq()).abs() <= 1e-12 * c.denominator_sq()
        );
    }

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 2000);
        assert_eq!(g[0], 0.2);
        assert_eq!(g[1999], 2.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(log_grid(0.5, 3.0, 1), vec![0.5]);
    }
}
