//! Stationary covariance as the time integral
//! `V = int_0^inf exp(-A s) D exp(-A^T s) ds`, evaluated by Gauss-Legendre
//! quadrature on one short panel and extended by exact doubling.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stability::eigenvalues;

/// Largest panel length in units of `1 / ||A||_inf`.
const PANEL: f64 = 0.5;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * p - pm) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `exp(m)` by Taylor series; intended for `||m|| <= 1`.
pub fn expm_taylor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..40 {
        term = &term * m / k as f64;
        sum += &term;
        if term.amax() <= f64::EPSILON * 1e-3 * sum.amax() {
            break;
        }
    }
    sum
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone)]
pub struct QuadratureResult {
    pub v_matrix: DMatrix<f64>,
    /// Horizon actually integrated to.
    pub t_total: f64,
    /// `||exp(-A T)||_inf` at the horizon.
    pub tail: f64,
    /// Relative change between the 12- and 24-node panel rules.
    pub panel_gap: f64,
}

fn panel_integral(a: &DMatrix<f64>, d: &DMatrix<f64>, h: f64, nodes: usize) -> DMatrix<f64> {
    let (x, w) = gauss_legendre(nodes);
    let n = a.nrows();
    let mut acc = DMatrix::zeros(n, n);
    for (xi, wi) in x.iter().zip(&w) {
        let s = 0.5 * h * (xi + 1.0);
        let e = expm_taylor(&(a * -s));
        acc += (&e * d * e.transpose()) * (0.5 * h * wi);
    }
    acc
}

/// Covariance integral over `[0, T]` with `T >= horizon / |max Re lambda|`.
pub fn covariance_quadrature(
    a: &DMatrix<f64>,
    d: &DMatrix<f64>,
    horizon: f64,
) -> Result<QuadratureResult> {
    if !a.is_square() || d.shape() != a.shape() {
        return Err(Error::invalid("quadrature", "matrix shapes do not match"));
    }
    let decay = eigenvalues(&-a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(decay < 0.0) {
        return Err(Error::Unstable { max_re_eig: decay });
    }
    let norm = inf_norm(a);
    let h = if norm > 0.0 { PANEL / norm } else { 1.0 };
    let coarse = panel_integral(a, d, h, 12);
    let mut v = panel_integral(a, d, h, 24);
    let scale = v.amax().max(f64::MIN_POSITIVE);
    let panel_gap = (&coarse - &v).amax() / scale;
    let mut m = expm_taylor(&(a * -h));
    let mut t = h;
    let target = horizon / decay.abs();
    let mut doublings = 0;
    while t < target || inf_norm(&m) > 1e-17 {
        // int_0^{2t} = int_0^t + M(t) [int_0^t] M(t)^T
        v = &v + &m * &v * m.transpose();
        m = &m * &m;
        t *= 2.0;
        doublings += 1;
        if doublings > 200 || !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Singular(
                "covariance integral does not converge".into(),
            ));
        }
    }
    Ok(QuadratureResult {
        v_matrix: (&v + v.transpose()) * 0.5,
        t_total: t,
        tail: inf_norm(&m),
        panel_gap,
    })
}
