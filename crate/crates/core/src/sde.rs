//! Time-domain checks: Euler-Maruyama for the linear fluctuation SDE and an
//! adaptive Dormand-Prince integrator for the noiseless nonlinear equations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::LinearSystem;
use crate::params::NormalizedParams;
use crate::stability::is_stable;
use crate::steadystate::SteadyState;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest fraction of `sum |lambda(D)|` that may be discarded by clamping.
pub const MAX_CLAMPED_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeRunSpec {
    pub dt: f64,
    pub t_total: f64,
    pub n_trajectories: usize,
    pub seed: u64,
    pub burn_in_fraction: f64,
}

impl SdeRunSpec {
    /// Defaults for a stable system: `t_total = 200 / |max Re lambda|`, 20 %
    /// burn-in, 64 trajectories, and `dt ||A||_inf = bias`, capped at 0.1.
    pub fn for_system(sys: &LinearSystem, seed: u64, bias: f64) -> Result<Self> {
        let v = is_stable(&sys.a_matrix)?;
        if !v.stable {
            return Err(Error::Unstable {
                max_re_eig: v.max_re_eig,
            });
        }
        let norm = inf_norm(&sys.a_matrix).max(f64::MIN_POSITIVE);
        Ok(Self {
            dt: bias.min(0.1) / norm,
            t_total: 200.0 / v.max_re_eig.abs(),
            n_trajectories: 64,
            seed,
            burn_in_fraction: 0.2,
        })
    }

    fn validate(&self, sys: &LinearSystem) -> Result<()> {
        if !(self.dt > 0.0) || !(self.t_total > self.dt) {
            return Err(Error::invalid("sde", "need 0 < dt < t_total"));
        }
        if self.dt * inf_norm(&sys.a_matrix) >= 0.1 {
            return Err(Error::invalid("sde.dt", "dt ||A||_inf must stay below 0.1"));
        }
        if self.n_trajectories < 1 {
            return Err(Error::invalid(
                "sde.n_trajectories",
                "at least one trajectory",
            ));
        }
        if !(self.burn_in_fraction > 0.0 && self.burn_in_fraction < 1.0) {
            return Err(Error::invalid("sde.burn_in_fraction", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Noise factor `B` with `B B^T = D_+`, the positive part of `D`, and the
/// clamped fraction `sum |lambda_-| / sum |lambda|`.
pub fn noise_factor(d: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n = d.nrows();
    if d.amax() == 0.0 {
        return (DMatrix::zeros(n, n), 0.0);
    }
    let eig = SymmetricEigen::new(d.clone());
    let total: f64 = eig.eigenvalues.iter().map(|l| l.abs()).sum();
    let negative: f64 = eig
        .eigenvalues
        .iter()
        .filter(|&&l| l < 0.0)
        .map(|l| -l)
        .sum();
    let mut b = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        b.column_mut(j).scale_mut(s);
    }
    (b, if total > 0.0 { negative / total } else { 0.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeEstimate {
    pub covariance: DMatrix<f64>,
    /// Jackknife standard errors over trajectories.
    pub std_errors: DMatrix<f64>,
    pub clamped_fraction: f64,
    pub samples_per_trajectory: usize,
}

/// Time- and ensemble-averaged second moments of `du = -A u dt + B dW`.
pub fn simulate_linear_sde(sys: &LinearSystem, spec: &SdeRunSpec) -> Result<SdeEstimate> {
    spec.validate(sys)?;
    let n = sys.dim();
    let (b, clamped_fraction) = noise_factor(&sys.d_matrix);
    if clamped_fraction > MAX_CLAMPED_FRACTION {
        return Err(Error::Sde(format!(
            "diffusion matrix is indefinite: clamping discards {:.1}% of its spectrum",
            100.0 * clamped_fraction
        )));
    }
    let steps = (spec.t_total / spec.dt).round() as usize;
    let burn = (spec.burn_in_fraction * steps as f64).round() as usize;
    let samples = steps - burn;
    if samples == 0 {
        return Err(Error::invalid("sde", "no samples after burn-in"));
    }
    // one-step propagator I - dt A and noise scale sqrt(dt) B
    let prop = DMatrix::identity(n, n) - &sys.a_matrix * spec.dt;
    let noise = &b * spec.dt.sqrt();
    let blowup = 1e150;

    let per_traj: Vec<Result<DMatrix<f64>>> = (0..spec.n_trajectories)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(k as u64);
            let mut u = DVector::<f64>::zeros(n);
            let mut next = DVector::<f64>::zeros(n);
            let mut xi = DVector::<f64>::zeros(n);
            let mut acc = DMatrix::<f64>::zeros(n, n);
            for step in 0..steps {
                for v in xi.iter_mut() {
                    *v = StandardNormal.sample(&mut rng);
                }
                prop.mul_to(&u, &mut next);
                next.gemv(1.0, &noise, &xi, 1.0);
                std::mem::swap(&mut u, &mut next);
                if step >= burn {
                    acc.ger(1.0, &u, &u, 1.0);
                }
                if step % 1024 == 0 && !(u.amax() < blowup) {
                    return Err(Error::Sde(format!(
                        "trajectory {k} diverged at step {step}"
                    )));
                }
            }
            Ok(acc / samples as f64)
        })
        .collect();
    let per_traj: Vec<DMatrix<f64>> = per_traj.into_iter().collect::<Result<_>>()?;

    let m = per_traj.len();
    let sum = per_traj.iter().fold(DMatrix::zeros(n, n), |a, x| a + x);
    let covariance = &sum / m as f64;
    let std_errors = if m < 2 {
        DMatrix::from_element(n, n, f64::INFINITY)
    } else {
        let mut var = DMatrix::<f64>::zeros(n, n);
        for x in &per_traj {
            let loo = (&sum - x) / (m - 1) as f64;
            let d = loo - &covariance;
            var += d.component_mul(&d);
        }
        (var * ((m - 1) as f64 / m as f64)).map(f64::sqrt)
    };
    Ok(SdeEstimate {
        covariance,
        std_errors,
        clamped_fraction,
        samples_per_trajectory: samples,
    })
}

/// Semiclassical amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amplitudes {
    pub alpha: Complex64,
    pub beta: Complex64,
    pub zeta: Complex64,
    pub zeta0: f64,
}

impl Amplitudes {
    pub fn from_steady(s: &SteadyState) -> Self {
        Self {
            alpha: s.alpha_s,
            beta: s.beta_s,
            zeta: s.zeta_s,
            zeta0: s.zeta0_s,
        }
    }

    fn to_vec(self) -> [f64; 7] {
        [
            self.alpha.re,
            self.alpha.im,
            self.beta.re,
            self.beta.im,
            self.zeta.re,
            self.zeta.im,
            self.zeta0,
        ]
    }

    fn from_vec(y: &[f64; 7]) -> Self {
        Self {
            alpha: Complex64::new(y[0], y[1]),
            beta: Complex64::new(y[2], y[3]),
            zeta: Complex64::new(y[4], y[5]),
            zeta0: y[6],
        }
    }

    /// Largest componentwise distance, each scaled by `1 + |reference|`.
    pub fn distance(&self, reference: &Amplitudes) -> f64 {
        let a = self.to_vec();
        let b = reference.to_vec();
        let pairs = [
            (
                (self.alpha - reference.alpha).norm(),
                reference.alpha.norm(),
            ),
            ((self.beta - reference.beta).norm(), reference.beta.norm()),
            ((self.zeta - reference.zeta).norm(), reference.zeta.norm()),
            ((a[6] - b[6]).abs(), b[6].abs()),
        ];
        pairs.iter().map(|(d, r)| d / (1.0 + r)).fold(0.0, f64::max)
    }
}

/// Coefficients of the noiseless nonlinear equations in the rotated frame.
#[derive(Debug, Clone, Copy)]
pub struct Semiclassical {
    pub delta_0f: f64,
    pub gamma_f: f64,
    pub gamma_m: f64,
    pub gamma_p: f64,
    pub g: f64,
    pub g0: f64,
    pub omega_p: f64,
    /// `delta_p = omega_p + omega_0`.
    pub delta_p: f64,
    pub drive: Complex64,
    pub freeze_zeta0: bool,
}

impl Semiclassical {
    pub fn new(np: &NormalizedParams, s: &SteadyState) -> Self {
        Self {
            delta_0f: s.delta_0f,
            gamma_f: np.gamma_f,
            gamma_m: np.gamma_m,
            gamma_p: np.gamma_p,
            g: np.g,
            g0: np.g0,
            omega_p: np.omega_p,
            delta_p: s.delta_p_bare(np),
            drive: s.drive(np),
            freeze_zeta0: false,
        }
    }

    pub fn rates(&self, x: &Amplitudes) -> Amplitudes {
        let Amplitudes {
            alpha,
            beta,
            zeta,
            zeta0,
        } = *x;
        let dalpha = -Complex64::new(self.gamma_f, self.delta_0f) * alpha - I * self.g * zeta
            + I * self.g0 * alpha * (2.0 * beta.re)
            + self.drive;
        let dbeta = -Complex64::new(self.gamma_m, 1.0) * beta + I * self.g0 * alpha.norm_sqr();
        let dzeta = I * self.delta_p * zeta
            + 2.0 * Complex64::new(self.gamma_p, self.omega_p) * zeta * zeta0
            + 2.0 * I * self.g * alpha * zeta0;
        let dzeta0 = if self.freeze_zeta0 {
            0.0
        } else {
            (-I * self.g * alpha * zeta.conj() + I * self.g * alpha.conj() * zeta).re
                - 2.0 * self.gamma_p * zeta.norm_sqr()
        };
        Amplitudes {
            alpha: dalpha,
            beta: dbeta,
            zeta: dzeta,
            zeta0: dzeta0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Number of evenly spaced output samples, endpoints included.
    pub samples: usize,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            samples: 101,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Amplitudes>,
    pub steps: usize,
    pub rejected: usize,
    /// Distance of the final state to the reference fixed point.
    pub terminal_distance: f64,
}

// Dormand-Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive Dormand-Prince 5(4) on a real vector field. `scale` sets the
/// per-component magnitude used by the absolute tolerance.
pub fn dopri5<const N: usize>(
    f: impl Fn(f64, &[f64; N]) -> [f64; N],
    y0: [f64; N],
    t_end: f64,
    scale: [f64; N],
    opts: &OdeOptions,
    mut observe: impl FnMut(f64, &[f64; N]),
) -> Result<([f64; N], usize, usize)> {
    let mut t = 0.0;
    let mut y = y0;
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, &y);
    let n_out = opts.samples.max(2);
    let out_time = |i: usize| t_end * i as f64 / (n_out - 1) as f64;
    let mut h = (out_time(1) * 1e-3).max(1e-12);
    let (mut steps, mut rejected) = (0usize, 0usize);
    observe(0.0, &y);
    let mut next_out = 1usize;
    while next_out < n_out {
        if steps + rejected > opts.max_steps {
            return Err(Error::StepUnderflow { t });
        }
        // steps land exactly on output times
        let target = out_time(next_out);
        let mut h_try = h;
        let mut hits = false;
        if t + h_try >= target {
            h_try = target - t;
            hits = true;
        }
        if h_try < 1e-14 * t_end.max(1.0) && !hits {
            return Err(Error::StepUnderflow { t });
        }
        let mut stage = [0.0; N];
        for s in 1..7 {
            for i in 0..N {
                let mut acc = y[i];
                for j in 0..s {
                    acc += h_try * A[s][j] * k[j][i];
                }
                stage[i] = acc;
            }
            k[s] = f(t + C[s] * h_try, &stage);
        }
        let mut y5 = [0.0; N];
        let mut err = 0.0f64;
        for i in 0..N {
            let mut a5 = y[i];
            let mut a4 = y[i];
            for j in 0..7 {
                a5 += h_try * B5[j] * k[j][i];
                a4 += h_try * B4[j] * k[j][i];
            }
            y5[i] = a5;
            let sc = opts.atol * scale[i] + opts.rtol * y[i].abs().max(a5.abs());
            err = err.max(((a5 - a4) / sc).abs());
        }
        if err <= 1.0 {
            t = if hits { target } else { t + h_try };
            y = y5;
            // first-same-as-last: the seventh stage is f(t + h, y5)
            k[0] = k[6];
            steps += 1;
            if hits {
                observe(t, &y);
                next_out += 1;
            }
            let fac = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            // a step shortened to hit an output does not shrink the controller
            h = if hits {
                h.max(h_try * fac)
            } else {
                h_try * fac
            };
        } else {
            rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 0.9)
            } else {
                0.1
            };
            h = h_try * fac;
            if h < 1e-14 * t_end.max(1.0) {
                return Err(Error::StepUnderflow { t });
            }
        }
    }
    Ok((y, steps, rejected))
}

/// Integrate the noiseless nonlinear equations from `initial` for `t_total`
/// (units of `1 / omega_m`) and report the distance to `reference`.
pub fn integrate_semiclassical(
    model: &Semiclassical,
    initial: Amplitudes,
    reference: &Amplitudes,
    t_total: f64,
    opts: &OdeOptions,
) -> Result<Trajectory> {
    let scale = {
        let r = reference.to_vec();
        let i = initial.to_vec();
        let mut s = [0.0; 7];
        for k in 0..7 {
            s[k] = 1.0 + r[k].abs().max(i[k].abs());
        }
        // complex pairs share a scale
        for pair in [(0, 1), (2, 3), (4, 5)] {
            let m = s[pair.0].max(s[pair.1]);
            s[pair.0] = m;
            s[pair.1] = m;
        }
        s
    };
    let mut times = Vec::with_capacity(opts.samples);
    let mut states = Vec::with_capacity(opts.samples);
    let (y, steps, rejected) = dopri5(
        |_, y| model.rates(&Amplitudes::from_vec(y)).to_vec(),
        initial.to_vec(),
        t_total,
        scale,
        opts,
        |t, y| {
            times.push(t);
            states.push(Amplitudes::from_vec(y));
        },
    )?;
    let last = Amplitudes::from_vec(&y);
    Ok(Trajectory {
        times,
        states,
        steps,
        rejected,
        terminal_distance: last.distance(reference),
    })
}
