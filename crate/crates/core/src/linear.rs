//! Linearized fluctuation dynamics `du/dt = -A u + xi`, `<xi xi^T> = D delta`.
//!
//! Basis: `(dq, dp, dX_f, dY_f, dx_m, dy_m, dzeta0)`. The matrix stored in
//! [`LinearSystem::a_matrix`] is `A`; [`LinearSystem::generator`] returns `-A`,
//! the coefficient matrix of `du/dt` itself.

use std::collections::VecDeque;
use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::NormalizedParams;
use crate::steadystate::SteadyState;

pub const FULL_BASIS: [&str; 7] = ["dq", "dp", "dX_f", "dY_f", "dx_m", "dy_m", "dzeta0"];

const PHASE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseConvention {
    /// Correlations used as given.
    #[default]
    Paper,
    /// Every diffusion entry halved.
    Half,
}

impl NoiseConvention {
    pub fn factor(self) -> f64 {
        match self {
            NoiseConvention::Paper => 1.0,
            NoiseConvention::Half => 0.5,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper" => Some(Self::Paper),
            "half" => Some(Self::Half),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Paper => "paper",
            Self::Half => "half",
        }
    }
}

/// Auxiliary coefficients of the drift and diffusion matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryQuantities {
    pub g_0s: f64,
    pub gamma_0: f64,
    pub g_r: f64,
    pub g_i: f64,
    pub gamma_p_r: f64,
    pub gamma_p_i: f64,
    pub k_1: f64,
    pub k_2: f64,
    pub p_diff: f64,
    pub m_diff: f64,
    pub q_diff: f64,
}

impl AuxiliaryQuantities {
    pub fn new(np: &NormalizedParams, s: &SteadyState) -> Result<Self> {
        let (g, gp, wp) = (np.g, np.gamma_p, np.omega_p);
        let z0 = s.zeta0_s;
        let z = s.zeta_s;
        let a = s.alpha_s;
        let drive = 2.0 * wp * z + 2.0 * g * a;

        // <Gamma_zeta Gamma_zeta>; its starred partner is the conjugate
        let gzz = 2.0 * (Complex64::i() * wp * z * z + Complex64::i() * g * a * z + gp * z * z);
        let gzz_star = gzz.conj();
        let p = gzz + gzz_star;
        let m = -Complex64::i() * (gzz - gzz_star);
        let q = -Complex64::i() * g * (a * z.conj() - a.conj() * z) - 2.0 * gp * z.norm_sqr();
        for (name, v) in [("P", p), ("M", m), ("Q", q)] {
            if v.im.abs() > 1e-12 * (1.0 + v.re.abs()) {
                return Err(Error::invalid(
                    "diffusion",
                    format!("{name} has imaginary part {:.3e}", v.im),
                ));
            }
        }

        Ok(Self {
            g_0s: 2.0 * g * z0,
            gamma_0: 2.0 * gp * z0,
            g_r: SQRT_2 * g * z.re,
            g_i: SQRT_2 * g * z.im,
            gamma_p_r: 2.0 * SQRT_2 * gp * z.re,
            gamma_p_i: 2.0 * SQRT_2 * gp * z.im + SQRT_2 * g * a.re,
            k_1: SQRT_2 * (2.0 * gp * z.re - drive.im),
            k_2: SQRT_2 * (2.0 * gp * z.im + drive.re),
            p_diff: p.re,
            m_diff: m.re,
            q_diff: q.re,
        })
    }
}

fn check_phase(s: &SteadyState) -> Result<()> {
    if s.alpha_s.im.abs() > PHASE_TOL {
        return Err(Error::PhaseConvention(s.alpha_s.im));
    }
    Ok(())
}

/// Coefficient matrix of `du/dt` (the generator, `-A`).
fn generator_matrix(
    np: &NormalizedParams,
    s: &SteadyState,
    x: &AuxiliaryQuantities,
) -> DMatrix<f64> {
    let gm = np.gamma_m;
    let gf = np.gamma_f;
    let g = np.g;
    let df = s.delta_f;
    let dp = s.delta_p_eff;
    let gx = 2.0 * np.g0 * s.alpha_s.re;
    #[rustfmt::skip]
    let rows = [
        [-gm,  1.0, 0.0,       0.0,     0.0,          0.0,          0.0],
        [-1.0, -gm, gx,        0.0,     0.0,          0.0,          0.0],
        [0.0,  0.0, -gf,       df,      0.0,          g,            0.0],
        [gx,   0.0, -df,       -gf,     -g,           0.0,          0.0],
        [0.0,  0.0, 0.0,       -x.g_0s, x.gamma_0,    -dp,          x.k_1],
        [0.0,  0.0, x.g_0s,    0.0,     dp,           x.gamma_0,    x.k_2],
        [0.0,  0.0, -x.g_i,    x.g_r,   -x.gamma_p_r, -x.gamma_p_i, 0.0],
    ];
    DMatrix::from_fn(7, 7, |i, j| rows[i][j])
}

/// Drift matrix `A` of `du/dt = -A u + xi`.
pub fn build_drift(np: &NormalizedParams, s: &SteadyState) -> Result<DMatrix<f64>> {
    check_phase(s)?;
    let x = AuxiliaryQuantities::new(np, s)?;
    Ok(-generator_matrix(np, s, &x))
}

/// Diffusion matrix under the given convention, symmetrized. Also returns the
/// asymmetry norm before symmetrization.
pub fn build_diffusion_with(
    np: &NormalizedParams,
    s: &SteadyState,
    convention: NoiseConvention,
) -> Result<(DMatrix<f64>, f64)> {
    check_phase(s)?;
    let x = AuxiliaryQuantities::new(np, s)?;
    let mech = 4.0 * np.gamma_m * np.n_m;
    let cav = 4.0 * np.gamma_f * np.n_bar;
    let gx = 2.0 * np.g0 * s.alpha_s.re;
    #[rustfmt::skip]
    let rows = [
        [mech, 0.0,  0.0, gx,  0.0,      0.0,       0.0],
        [0.0,  mech, gx,  0.0, 0.0,      0.0,       0.0],
        [0.0,  gx,   cav, 0.0, 0.0,      0.0,       0.0],
        [gx,   0.0,  0.0, cav, 0.0,      0.0,       0.0],
        [0.0,  0.0,  0.0, 0.0, x.p_diff, x.m_diff,  0.0],
        [0.0,  0.0,  0.0, 0.0, x.m_diff, -x.p_diff, 0.0],
        [0.0,  0.0,  0.0, 0.0, 0.0,      0.0,       x.q_diff],
    ];
    let f = convention.factor();
    let raw = DMatrix::from_fn(7, 7, |i, j| f * rows[i][j]);
    let asym = (&raw - raw.transpose()).amax();
    let sym = (&raw + raw.transpose()) * 0.5;
    Ok((sym, asym))
}

pub fn build_diffusion(np: &NormalizedParams, s: &SteadyState) -> Result<DMatrix<f64>> {
    build_diffusion_with(np, s, NoiseConvention::Paper).map(|(d, _)| d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    pub a_matrix: DMatrix<f64>,
    pub d_matrix: DMatrix<f64>,
    pub basis: Vec<String>,
    pub aux: AuxiliaryQuantities,
    pub reduced: bool,
    pub convention: NoiseConvention,
    /// Largest `|D_ij - D_ji|` before symmetrization.
    pub d_asymmetry: f64,
}

impl LinearSystem {
    pub fn new(
        np: &NormalizedParams,
        s: &SteadyState,
        convention: NoiseConvention,
    ) -> Result<Self> {
        let aux = AuxiliaryQuantities::new(np, s)?;
        let a_matrix = build_drift(np, s)?;
        let (d_matrix, d_asymmetry) = build_diffusion_with(np, s, convention)?;
        Ok(Self {
            a_matrix,
            d_matrix,
            basis: FULL_BASIS.iter().map(|s| s.to_string()).collect(),
            aux,
            reduced: false,
            convention,
            d_asymmetry,
        })
    }

    pub fn dim(&self) -> usize {
        self.a_matrix.nrows()
    }

    /// `du/dt = generator * u + xi`.
    pub fn generator(&self) -> DMatrix<f64> {
        -&self.a_matrix
    }

    /// Keep only the listed basis indices, in the given order.
    pub fn restrict(&self, idx: &[usize]) -> Self {
        let n = idx.len();
        Self {
            a_matrix: DMatrix::from_fn(n, n, |i, j| self.a_matrix[(idx[i], idx[j])]),
            d_matrix: DMatrix::from_fn(n, n, |i, j| self.d_matrix[(idx[i], idx[j])]),
            basis: idx.iter().map(|&i| self.basis[i].clone()).collect(),
            ..self.clone()
        }
    }

    /// Indices coupled to `dq`, `dp` through any nonzero entry of `A` or `D`.
    /// Variables outside this set cannot influence the mechanical statistics.
    pub fn mechanical_component(&self) -> Vec<usize> {
        let n = self.dim();
        let mut seen = vec![false; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        for start in 0..n.min(2) {
            seen[start] = true;
            queue.push_back(start);
        }
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let linked = self.a_matrix[(i, j)] != 0.0
                    || self.a_matrix[(j, i)] != 0.0
                    || self.d_matrix[(i, j)] != 0.0
                    || self.d_matrix[(j, i)] != 0.0;
                if linked && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        (0..n).filter(|&i| seen[i]).collect()
    }

    /// Position of a basis label, if present.
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.basis.iter().position(|b| b == label)
    }
}

/// Freeze the inversion fluctuation: drop the `dzeta0` row and column.
/// Idempotent.
pub fn reduce_low_excitation(sys: &LinearSystem) -> LinearSystem {
    let keep: Vec<usize> = (0..sys.dim())
        .filter(|&i| sys.basis[i] != "dzeta0")
        .collect();
    LinearSystem {
        reduced: true,
        ..sys.restrict(&keep)
    }
}

/// `g^2 / (Delta_p^2 + gamma_p^2)`; the reduction is trusted below 0.01.
pub fn low_excitation_ratio(np: &NormalizedParams) -> f64 {
    np.validity_ratio()
}

pub fn low_excitation_valid(np: &NormalizedParams) -> bool {
    low_excitation_ratio(np) < 0.01
}
