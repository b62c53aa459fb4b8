//! Second, independent transcription of the drift and diffusion matrices,
//! their auxiliary quantities and the response coefficients.
//!
//! Every number is carried with a running magnitude (the value the expression
//! would take with all signs made positive), so agreement is judged against
//! the rounding scale of the expression rather than its possibly cancelled
//! result.

use std::ops::{Add, Div, Mul, Neg, Sub};

use molecool::linear::{LinearSystem, NoiseConvention};
use molecool::params::{Detuning, NormalizedParams};
use molecool::response::{
    effective_damping, effective_frequency, response_coefficients as library_coefficients,
    susceptibility,
};
use molecool::steadystate::{solve_steady, SteadyState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOL: f64 = 1e-13;
pub const POINTS: usize = 100;

/// Parameters, steady state and a response frequency.
pub type Point = (NormalizedParams, SteadyState, f64);

#[derive(Clone, Copy, Debug)]
struct T {
    v: f64,
    m: f64,
}

fn t(v: f64) -> T {
    T { v, m: v.abs() }
}

impl Add for T {
    type Output = T;
    fn add(self, o: T) -> T {
        T {
            v: self.v + o.v,
            m: self.m + o.m,
        }
    }
}

impl Sub for T {
    type Output = T;
    fn sub(self, o: T) -> T {
        T {
            v: self.v - o.v,
            m: self.m + o.m,
        }
    }
}

impl Mul for T {
    type Output = T;
    fn mul(self, o: T) -> T {
        T {
            v: self.v * o.v,
            m: self.m * o.m,
        }
    }
}

impl Div for T {
    type Output = T;
    fn div(self, o: T) -> T {
        T {
            v: self.v / o.v,
            m: self.m / o.v.abs(),
        }
    }
}

impl Neg for T {
    type Output = T;
    fn neg(self) -> T {
        T {
            v: -self.v,
            m: self.m,
        }
    }
}

/// Comparisons made so far: count, worst scaled error, and the failures.
#[derive(Debug, Default)]
pub struct Tally {
    pub checked: usize,
    pub worst: f64,
    pub failures: Vec<String>,
}

impl Tally {
    fn close(&mut self, what: &str, got: f64, want: T) {
        let scale = want.m.max(want.v.abs()).max(f64::MIN_POSITIVE);
        let err = (got - want.v).abs() / scale;
        self.checked += 1;
        self.worst = self.worst.max(err);
        if !(err <= TOL) {
            self.failures.push(format!(
                "{what}: library {got:e} vs oracle {:e} (scale {scale:e})",
                want.v
            ));
        }
    }

    pub fn assert_clean(&self) {
        assert!(self.failures.is_empty(), "{}", self.failures.join("\n"));
    }
}

fn random_point(rng: &mut ChaCha8Rng) -> NormalizedParams {
    NormalizedParams {
        omega_m_si: 2.0 * std::f64::consts::PI * 1e7,
        mass_m_si: 1e-14,
        omega_f: rng.random_range(500.0..2000.0),
        omega_0: None,
        gamma_m: rng.random_range(1e-6..0.2),
        gamma_f: rng.random_range(0.02..2.0),
        gamma_p: rng.random_range(0.0..2.0),
        g: rng.random_range(0.0..1.5),
        g0: rng.random_range(1e-6..1e-3),
        epsilon0: rng.random_range(0.0..300.0),
        n_bar: rng.random_range(0.0..2.0),
        n_m: rng.random_range(0.0..500.0),
        zeta0_s: -rng.random_range(0.05..1.0),
        omega_p: rng.random_range(0.0..5.0),
        cavity: Detuning::Effective(rng.random_range(-2.0..2.0)),
        molecular: Detuning::Effective(rng.random_range(-3.0..3.0)),
    }
}

/// Auxiliary quantities with `zeta = x + i y` and real `alpha`, expanded by hand.
struct Aux {
    g0s: T,
    gam0: T,
    gr: T,
    gi: T,
    gpr: T,
    gpi: T,
    k1: T,
    k2: T,
    p: T,
    m: T,
    q: T,
}

fn aux(np: &NormalizedParams, s: &SteadyState) -> Aux {
    let r2 = t(std::f64::consts::SQRT_2);
    let two = t(2.0);
    let (g, gp, wp) = (t(np.g), t(np.gamma_p), t(np.omega_p));
    let a = t(s.alpha_s.re);
    let (x, y) = (t(s.zeta_s.re), t(s.zeta_s.im));
    let z0 = t(s.zeta0_s);
    // Re and Im of 2 omega_p zeta + 2 g alpha
    let drive_re = two * wp * x + two * g * a;
    let drive_im = two * wp * y;
    // <Gamma_zeta Gamma_zeta> = 2 [i wp zeta^2 + i g alpha zeta + gp zeta^2]
    let sq_re = x * x - y * y;
    let sq_im = two * x * y;
    let c_re = two * (gp * sq_re - wp * sq_im - g * a * y);
    let c_im = two * (wp * sq_re + g * a * x + gp * sq_im);
    Aux {
        g0s: two * g * z0,
        gam0: two * gp * z0,
        gr: r2 * g * x,
        gi: r2 * g * y,
        gpr: two * r2 * gp * x,
        gpi: two * r2 * gp * y + r2 * g * a,
        k1: r2 * (two * gp * x - drive_im),
        k2: r2 * (two * gp * y + drive_re),
        p: two * c_re,
        m: two * c_im,
        q: -(two * g * a * y) - two * gp * (x * x + y * y),
    }
}

fn printed_drift(np: &NormalizedParams, s: &SteadyState, x: &Aux) -> Vec<Vec<T>> {
    let z = t(0.0);
    let one = t(1.0);
    let gm = t(np.gamma_m);
    let gf = t(np.gamma_f);
    let g = t(np.g);
    let df = t(s.delta_f);
    let dp = t(s.delta_p_eff);
    let gx = t(2.0) * t(np.g0) * t(s.alpha_s.re);
    vec![
        vec![-gm, one, z, z, z, z, z],
        vec![-one, -gm, gx, z, z, z, z],
        vec![z, z, -gf, df, z, g, z],
        vec![gx, z, -df, -gf, -g, z, z],
        vec![z, z, z, -x.g0s, x.gam0, -dp, x.k1],
        vec![z, z, x.g0s, z, dp, x.gam0, x.k2],
        vec![z, z, -x.gi, x.gr, -x.gpr, -x.gpi, z],
    ]
}

fn printed_diffusion(np: &NormalizedParams, s: &SteadyState, x: &Aux) -> Vec<Vec<T>> {
    let z = t(0.0);
    let four = t(4.0);
    let mech = four * t(np.gamma_m) * t(np.n_m);
    let cav = four * t(np.gamma_f) * t(np.n_bar);
    let gx = t(2.0) * t(np.g0) * t(s.alpha_s.re);
    vec![
        vec![mech, z, z, gx, z, z, z],
        vec![z, mech, gx, z, z, z, z],
        vec![z, gx, cav, z, z, z, z],
        vec![gx, z, z, cav, z, z, z],
        vec![z, z, z, z, x.p, x.m, z],
        vec![z, z, z, z, x.m, -x.p, z],
        vec![z, z, z, z, z, z, x.q],
    ]
}

struct Coeffs {
    ot: T,
    gt: T,
    ox: T,
    gx: T,
    oy: T,
    gy: T,
    oxp: T,
    gxp: T,
    oyp: T,
    gyp: T,
    re_dn: T,
    im_dn: T,
    lambda: T,
    lambda_p: T,
}

fn coefficients(np: &NormalizedParams, s: &SteadyState, x: &Aux, omega: f64) -> Coeffs {
    let w = t(omega);
    let g = t(np.g);
    let gf = t(np.gamma_f);
    let d = t(s.delta_f);
    let op = t(s.delta_p_eff);
    let (k1, k2) = (x.k1, x.k2);
    let (gr, gi, gpr, gpi) = (x.gr, x.gi, x.gpr, x.gpi);
    let (g0s, gam0) = (x.g0s, x.gam0);

    let ot = op * op + gam0 * gam0 - (k2 * gpi / w - w) * (k1 * gpr / w - w)
        + (k2 * gpr / w) * (k1 * gpi / w);
    let gt = k1 * gpi * op / w
        - k2 * gpr * op / w
        - gam0 * (k1 * gpr / w - w)
        - gam0 * (k2 * gpi / w - w);
    let ox = gf * ot + w * gt - g * g0s * gam0
        + g * (k2 * gpr / w) * (k1 * gi / w)
        + g * (k2 * gi / w) * (k1 * gpr / w - w);
    let gx = gf * gt - w * ot + g * op * (k1 * gi / w) - g * g0s * (k1 * gpr / w - w)
        + g * gam0 * (k2 * gi / w);
    let oy = gf * ot + w * gt - g * g0s * gam0
        + g * (k1 * gpi / w) * (k2 * gr / w)
        + g * (k1 * gr / w) * (k2 * gpi / w - w);
    let gy = gf * gt - w * ot + g * op * (k2 * gr / w) - g * g0s * (k2 * gpi / w - w)
        + g * gam0 * (k1 * gr / w);
    let oxp = -(d * ot) + g * op * g0s + g * (k1 * gpi / w) * (k2 * gi / w)
        - g * (k1 * gi / w) * (k2 * gpi / w - w);
    let gxp =
        -(d * gt) - g * op * (k2 * gi / w) + g * g0s * (k1 * gpi / w) - g * gam0 * (k1 * gi / w);
    let oyp = d * ot - g * op * g0s + g * (k2 * gr / w) * (k1 * gpr / w - w)
        - g * (k1 * gr / w) * (k2 * gpr / w);
    let gyp = d * gt + g * op * (k1 * gr / w) + g * g0s * (k2 * gpr / w) - g * gam0 * (k2 * gr / w);

    let re_dn = ox * oy - gx * gy - oxp * oyp + gxp * gyp;
    let im_dn = ox * gy + oy * gx - oxp * gyp - oyp * gxp;
    let re_n = ot * oyp - gt * gyp;
    let im_n = ot * gyp + gt * oyp;
    Coeffs {
        ot,
        gt,
        ox,
        gx,
        oy,
        gy,
        oxp,
        gxp,
        oyp,
        gyp,
        re_dn,
        im_dn,
        lambda: re_n * re_dn + im_n * im_dn,
        lambda_p: im_n * re_dn - re_n * im_dn,
    }
}

pub fn points() -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7a11);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < POINTS {
        attempts += 1;
        assert!(attempts < 20 * POINTS, "too few solvable points");
        let np = random_point(&mut rng);
        let omega = rng.random_range(0.2..2.0);
        if let Ok(s) = solve_steady(&np) {
            out.push((np, s, omega));
        }
    }
    out
}

pub fn drift_and_diffusion(pts: &[Point], tally: &mut Tally) {
    for (k, (np, s, _)) in pts.iter().enumerate() {
        let sys = LinearSystem::new(np, s, NoiseConvention::Paper).unwrap();
        let x = aux(np, s);
        let a = printed_drift(np, s, &x);
        let d = printed_diffusion(np, s, &x);
        let gen = sys.generator();
        for i in 0..7 {
            for j in 0..7 {
                tally.close(&format!("point {k} A[{i}][{j}]"), gen[(i, j)], a[i][j]);
                tally.close(
                    &format!("point {k} D[{i}][{j}]"),
                    sys.d_matrix[(i, j)],
                    d[i][j],
                );
            }
        }
    }
}

pub fn auxiliary_quantities(pts: &[Point], tally: &mut Tally) {
    for (k, (np, s, _)) in pts.iter().enumerate() {
        let lib = LinearSystem::new(np, s, NoiseConvention::Paper)
            .unwrap()
            .aux;
        let x = aux(np, s);
        for (name, got, want) in [
            ("G0s", lib.g_0s, x.g0s),
            ("Gamma0", lib.gamma_0, x.gam0),
            ("gR", lib.g_r, x.gr),
            ("gI", lib.g_i, x.gi),
            ("gammapR", lib.gamma_p_r, x.gpr),
            ("gammapI", lib.gamma_p_i, x.gpi),
            ("K1", lib.k_1, x.k1),
            ("K2", lib.k_2, x.k2),
            ("P", lib.p_diff, x.p),
            ("M", lib.m_diff, x.m),
            ("Q", lib.q_diff, x.q),
        ] {
            tally.close(&format!("point {k} {name}"), got, want);
        }
    }
}

pub fn response_coefficients(pts: &[Point], tally: &mut Tally) {
    for (k, (np, s, omega)) in pts.iter().enumerate() {
        let lib = library_coefficients(np, s, *omega).unwrap();
        let c = coefficients(np, s, &aux(np, s), *omega);
        for (name, got, want) in [
            ("Omega_T", lib.omega_t, c.ot),
            ("Gamma_T", lib.gamma_t, c.gt),
            ("Omega_X", lib.omega_x, c.ox),
            ("Gamma_X", lib.gamma_x, c.gx),
            ("Omega_Y", lib.omega_y, c.oy),
            ("Gamma_Y", lib.gamma_y, c.gy),
            ("Omega_X'", lib.omega_xp, c.oxp),
            ("Gamma_X'", lib.gamma_xp, c.gxp),
            ("Omega_Y'", lib.omega_yp, c.oyp),
            ("Gamma_Y'", lib.gamma_yp, c.gyp),
            ("Lambda", lib.lambda, c.lambda),
            ("Lambda'", lib.lambda_p, c.lambda_p),
        ] {
            tally.close(&format!("point {k} {name}"), got, want);
        }
    }
}

pub fn susceptibility_and_effective(pts: &[Point], tally: &mut Tally) {
    for (k, (np, s, omega)) in pts.iter().enumerate() {
        let c = coefficients(np, s, &aux(np, s), *omega);
        let gx = t(2.0) * t(np.g0) * t(s.alpha_s.re);
        let gm = t(np.gamma_m);
        let w = t(*omega);
        let dsq = c.re_dn * c.re_dn + c.im_dn * c.im_dn;

        // chi^-1 = (gm - i w)^2 + 1 - gx^2 N / Dn, with N / Dn = N conj(Dn) / |Dn|^2
        let inv_re = gm * gm - w * w + t(1.0) - gx * gx * c.lambda / dsq;
        let inv_im = -(t(2.0) * gm * w) - gx * gx * c.lambda_p / dsq;
        let chi = susceptibility(np, s, *omega).unwrap();
        let inv = 1.0 / chi;
        tally.close(&format!("point {k} Re 1/chi"), inv.re, inv_re);
        tally.close(&format!("point {k} Im 1/chi"), inv.im, inv_im);

        let radicand = gm * gm + t(1.0) - gx * gx * c.lambda / dsq;
        if radicand.v >= 0.0 {
            let wf = effective_frequency(np, s, *omega).unwrap();
            tally.close(&format!("point {k} omega_eff^2"), wf * wf, radicand);
        }
        let geff = t(2.0) * gm + gx * gx * c.lambda_p / (w * dsq);
        tally.close(
            &format!("point {k} gamma_eff"),
            effective_damping(np, s, *omega).unwrap(),
            geff,
        );
    }
}

/// All four comparisons over the shared random points.
pub fn run_all() -> Tally {
    let pts = points();
    let mut tally = Tally::default();
    drift_and_diffusion(&pts, &mut tally);
    auxiliary_quantities(&pts, &mut tally);
    response_coefficients(&pts, &mut tally);
    susceptibility_and_effective(&pts, &mut tally);
    tally
}
