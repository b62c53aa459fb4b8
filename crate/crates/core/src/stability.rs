//! Asymptotic stability of `du/dt = -A u`, decided twice: from the spectrum of
//! `-A` and from the Hurwitz determinants of its characteristic polynomial.
//!
//! Both routes answer the same question, whether every eigenvalue of `-A`
//! has real part below `-threshold`. The Hurwitz route works on the shifted
//! matrix `-A + threshold I` in exact integer arithmetic, since every double
//! is a dyadic rational.

use nalgebra::linalg::{Hessenberg, Schur};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Margin below which a real part counts as zero, in units of `omega_m`.
pub const MARGINAL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    /// Largest real part among the eigenvalues of `-A`.
    pub max_re_eig: f64,
    /// Threshold actually applied: `MARGINAL`, raised to the round-off floor
    /// of the eigenvalue computation for large matrices.
    pub threshold: f64,
    pub hurwitz_stable: bool,
    pub agree: bool,
    pub eigenvalues: Vec<Complex64>,
}

/// Diagonal similarity by powers of two that equalizes row and column norms.
/// Exact, so the spectrum is unchanged.
pub fn balance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut b = m.clone();
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 100 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += b[(j, i)].abs();
                    r += b[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let total = c + r;
            let mut f = 1.0;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if (c + r) < 0.95 * total {
                converged = false;
                for j in 0..n {
                    b[(i, j)] /= f;
                    b[(j, i)] *= f;
                }
            }
        }
    }
    b
}

/// Eigenvalues of a real square matrix, computed after removing the mean
/// diagonal and balancing.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::EigenSolver);
    }
    let sigma = m.trace() / n as f64;
    let b = balance(&(m - DMatrix::identity(n, n) * sigma));
    let schur = Schur::try_new(b.clone(), f64::EPSILON, 10_000)
        .or_else(|| Schur::try_new(b, 0.0, 100_000))
        .ok_or(Error::EigenSolver)?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re + sigma, c.im))
        .collect())
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Stability threshold for a dynamics matrix: `MARGINAL`, or the round-off
/// floor of its eigenvalues when that is larger.
pub fn threshold_for(dynamics: &DMatrix<f64>) -> f64 {
    MARGINAL.max(1e3 * f64::EPSILON * inf_norm(&balance(dynamics)))
}

pub fn is_stable(a_matrix: &DMatrix<f64>) -> Result<StabilityVerdict> {
    if !a_matrix.is_square() {
        return Err(Error::invalid("a_matrix", "must be square"));
    }
    let dynamics = -a_matrix;
    let eigenvalues = eigenvalues(&dynamics)?;
    let max_re_eig = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = threshold_for(&dynamics);
    let stable = max_re_eig < -threshold;
    let shifted = &dynamics + DMatrix::identity(dynamics.nrows(), dynamics.nrows()) * threshold;
    let hurwitz_stable = hurwitz_stable(&shifted);
    Ok(StabilityVerdict {
        stable,
        max_re_eig,
        threshold,
        hurwitz_stable,
        agree: stable == hurwitz_stable,
        eigenvalues,
    })
}

/// Monic characteristic polynomial `det(x I - m)` as `[1, c_1, ..., c_n]`
/// (descending powers), via Hessenberg reduction and La Budde's recurrence.
pub fn characteristic_polynomial(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    if n == 0 {
        return vec![1.0];
    }
    let h = Hessenberg::new(m.clone()).h();
    // p[i] holds the characteristic polynomial of the leading i x i block,
    // ascending powers.
    let mut p: Vec<Vec<f64>> = vec![vec![1.0]];
    for i in 0..n {
        // (x - h_ii) p_i
        let prev = &p[i];
        let mut next = vec![0.0; i + 2];
        for (k, &c) in prev.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= h[(i, i)] * c;
        }
        let mut beta = 1.0;
        for m_ in 1..=i {
            beta *= h[(i + 1 - m_, i - m_)];
            let coef = h[(i - m_, i)] * beta;
            if coef != 0.0 {
                for (k, &c) in p[i - m_].iter().enumerate() {
                    next[k] -= coef * c;
                }
            }
        }
        p.push(next);
    }
    let mut desc = p.pop().unwrap();
    desc.reverse();
    desc
}

/// Leading principal minors of the Hurwitz matrix of `[a_0, ..., a_n]`.
pub fn hurwitz_determinants(coeffs: &[f64]) -> Vec<(f64, f64)> {
    let n = coeffs.len() - 1;
    let a = |k: isize| -> f64 {
        if k < 0 || k as usize > n {
            0.0
        } else {
            coeffs[k as usize]
        }
    };
    let h = DMatrix::from_fn(n, n, |i, j| a(2 * (j as isize + 1) - (i as isize + 1)));
    (1..=n)
        .map(|k| {
            let sub = h.view((0, 0), (k, k)).clone_owned();
            let bound: f64 = sub
                .row_iter()
                .map(|r| r.norm().max(f64::MIN_POSITIVE))
                .product();
            (sub.determinant(), bound)
        })
        .collect()
}

/// Integer matrix `m * 2^k` for the smallest `k` making every entry integral.
fn to_integer_matrix(m: &DMatrix<f64>) -> Option<Vec<Vec<BigInt>>> {
    let n = m.nrows();
    let mut parts = Vec::with_capacity(n * n);
    let mut emin = i32::MAX;
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() {
                return None;
            }
            let (mant, exp) = decompose(v);
            if mant != 0 {
                emin = emin.min(exp);
            }
            parts.push((mant, exp));
        }
    }
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (mant, exp) = parts[i * n + j];
                    if mant == 0 {
                        BigInt::zero()
                    } else {
                        BigInt::from(mant) << ((exp - emin) as usize)
                    }
                })
                .collect()
        })
        .collect();
    Some(rows)
}

/// `v = mant * 2^exp` with an odd or zero mantissa.
fn decompose(v: f64) -> (i64, i32) {
    if v == 0.0 {
        return (0, 0);
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 0 { 1 } else { -1 };
    let biased = ((bits >> 52) & 0x7ff) as i32;
    let frac = (bits & ((1u64 << 52) - 1)) as i64;
    let (mut mant, mut exp) = if biased == 0 {
        (frac, -1074)
    } else {
        (frac | (1i64 << 52), biased - 1075)
    };
    let tz = mant.trailing_zeros() as i32;
    mant >>= tz;
    exp += tz;
    (sign * mant, exp)
}

/// Exact characteristic polynomial `det(x I - m)`, descending powers,
/// by Berkowitz's division-free recurrence.
fn berkowitz(m: &[Vec<BigInt>]) -> Vec<BigInt> {
    let n = m.len();
    let mut poly = vec![BigInt::one()];
    for r in 0..n {
        // first column of the Toeplitz factor: 1, -a_rr, -R C, -R M C, ...
        let mut col = Vec::with_capacity(r + 2);
        col.push(BigInt::one());
        col.push(-m[r][r].clone());
        let mut v: Vec<BigInt> = (0..r).map(|i| m[i][r].clone()).collect();
        for _ in 0..r {
            let rc: BigInt = (0..r).map(|j| &m[r][j] * &v[j]).sum();
            col.push(-rc);
            v = (0..r)
                .map(|i| (0..r).map(|j| &m[i][j] * &v[j]).sum())
                .collect();
        }
        poly = (0..r + 2)
            .map(|i| {
                (0..poly.len())
                    .filter(|&k| k <= i)
                    .map(|k| &col[i - k] * &poly[k])
                    .sum()
            })
            .collect();
    }
    poly
}

/// Whether every Hurwitz leading minor of `[a_0, ..., a_n]` is positive,
/// by fraction-free elimination without pivoting (its pivots are the minors).
fn hurwitz_minors_positive(coeffs: &[BigInt]) -> bool {
    let n = coeffs.len() - 1;
    let a = |k: isize| -> BigInt {
        if k < 0 || k as usize > n {
            BigInt::zero()
        } else {
            coeffs[k as usize].clone()
        }
    };
    let mut h: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| a(2 * (j as isize + 1) - (i as isize + 1)))
                .collect()
        })
        .collect();
    let mut prev = BigInt::one();
    for k in 0..n {
        let pivot = h[k][k].clone();
        if !pivot.is_positive() {
            return false;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = (&h[i][j] * &pivot - &h[i][k] * &h[k][j]) / &prev;
                h[i][j] = v;
            }
        }
        prev = pivot;
    }
    true
}

/// All roots of `det(x I - m)` in the open left half-plane, by the Hurwitz
/// criterion evaluated exactly.
pub fn hurwitz_stable(m: &DMatrix<f64>) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    let Some(int) = to_integer_matrix(m) else {
        return false;
    };
    let coeffs = berkowitz(&int);
    if coeffs.iter().skip(1).any(|c| !c.is_positive()) {
        return false;
    }
    hurwitz_minors_positive(&coeffs)
}
