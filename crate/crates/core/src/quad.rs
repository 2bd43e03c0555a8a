//! One-dimensional quadrature used by the tails, the Mittag-Leffler evaluator
//! and the test oracles.
//!
//! Two families are provided: globally adaptive Gauss-Kronrod (15 points) for
//! integrands with interior structure, and double-exponential rules
//! (tanh-sinh on finite intervals, exp-sinh on half lines) for integrands with
//! algebraic or logarithmic endpoint singularities.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerance and budget for an adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-14,
            rel: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl Tolerance {
    pub fn rel(rel: f64) -> Self {
        Self {
            rel,
            ..Self::default()
        }
    }
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Globally adaptive Gauss-Kronrod integration of `f` over the finite interval `[a, b]`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = kronrod15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        if !total.is_finite() {
            return Err(Error::Quadrature(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if err <= tol.abs.max(tol.rel * total.abs()) {
            return Ok(total);
        }
        if parts.len() >= tol.max_intervals {
            // Accept when the residual error is dominated by rounding.
            if err <= 1e3 * f64::EPSILON * parts.iter().map(|p| p.2.abs()).sum::<f64>() {
                return Ok(total);
            }
            return Err(Error::Quadrature(format!(
                "interval budget exhausted on [{a}, {b}] (estimate {total:e}, error {err:e})"
            )));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, pv, pe) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(&f, lo, mid);
        let (v2, e2) = kronrod15(&f, mid, hi);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
        if parts.len() % 64 == 0 {
            // Re-sum to keep cancellation from drifting the running totals.
            total = parts.iter().map(|p| p.2).sum();
            err = parts.iter().map(|p| p.3).sum();
        }
    }
}

/// Adaptive Gauss-Kronrod on `[a, inf)` through the map `x = a + u / (1 - u)`.
pub fn gauss_kronrod_inf<F: Fn(f64) -> f64>(f: F, a: f64, tol: Tolerance) -> Result<f64> {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - u;
        let x = a + u / d;
        let v = f(x) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    gauss_kronrod(g, 0.0, 1.0, tol)
}

const DE_MAX_LEVEL: usize = 12;
const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

/// Tanh-sinh quadrature on `[a, b]`.
///
/// The integrand is evaluated only strictly inside the interval, so integrable
/// endpoint singularities are allowed. Abscissae close to an endpoint are
/// formed from the endpoint distance to avoid cancellation.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let half = 0.5 * (b - a);
    let eval = |t: f64| -> f64 {
        let s = HALF_PI * t.sinh();
        let c = HALF_PI * t.cosh();
        // distance from the nearer endpoint, in units of `half`
        let e = (-2.0 * s.abs()).exp();
        let dist = 2.0 * e / (1.0 + e);
        let w = c * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if dist * half == 0.0 || w == 0.0 {
            return 0.0;
        }
        let x = if s < 0.0 { a + half * dist } else { b - half * dist };
        if x <= a || x >= b {
            return 0.0;
        }
        let v = f(x);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    double_exponential_sum(eval, -6.5, 6.5, rel_tol, half)
        .ok_or_else(|| {
            Error::Quadrature(format!(
                "tanh-sinh did not reach relative tolerance {rel_tol:e} on [{a}, {b}]"
            ))
        })
}

/// Trapezoidal sums of a transformed integrand with level doubling.
///
/// The summation range is trimmed on the first level to where the terms are
/// still significant, then kept for the finer levels.
fn double_exponential_sum<G: Fn(f64) -> f64>(
    term: G,
    t_lo: f64,
    t_hi: f64,
    rel_tol: f64,
    scale: f64,
) -> Option<f64> {
    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut hi = 0.0;
    let mut lo = 0.0;
    let mut quiet = 0;
    let mut k = 1;
    while k as f64 * h <= t_hi {
        let v = term(k as f64 * h);
        sum += v;
        hi = k as f64 * h;
        quiet = if v.abs() <= 1e-20 * sum.abs() { quiet + 1 } else { 0 };
        if quiet >= 3 {
            break;
        }
        k += 1;
    }
    quiet = 0;
    k = 1;
    while -(k as f64) * h >= t_lo {
        let v = term(-(k as f64) * h);
        sum += v;
        lo = -(k as f64) * h;
        quiet = if v.abs() <= 1e-20 * sum.abs() { quiet + 1 } else { 0 };
        if quiet >= 3 {
            break;
        }
        k += 1;
    }
    let mut estimate = sum * h * scale;
    for _ in 0..DE_MAX_LEVEL {
        h *= 0.5;
        let mut t = h;
        while t <= hi {
            sum += term(t);
            t += 2.0 * h;
        }
        let mut t = -h;
        while t >= lo {
            sum += term(t);
            t -= 2.0 * h;
        }
        let next = sum * h * scale;
        if !next.is_finite() {
            return None;
        }
        let diff = (next - estimate).abs();
        estimate = next;
        if diff <= rel_tol * estimate.abs() || diff < 1e-300 {
            return Some(estimate);
        }
    }
    None
}

/// Exp-sinh quadrature on `[a, inf)`; tolerates an integrable singularity at `a`
/// and requires decay at infinity.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, a: f64, rel_tol: f64) -> Result<f64> {
    let eval = |t: f64| -> f64 {
        let s = HALF_PI * t.sinh();
        if s > 700.0 {
            return 0.0;
        }
        let x = s.exp();
        if x == 0.0 {
            return 0.0;
        }
        let w = HALF_PI * t.cosh() * x;
        let v = f(a + x);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    double_exponential_sum(eval, -6.5, 6.5, rel_tol, 1.0).ok_or_else(|| {
        Error::Quadrature(format!(
            "exp-sinh did not reach relative tolerance {rel_tol:e} on [{a}, inf)"
        ))
    })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes in decreasing order.
///
/// Newton iteration on the three-term recurrence, seeded with Tricomi's
/// asymptotic approximation of the roots.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let theta = std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5);
        let mut z = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d.is_finite() {
            dp = d;
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
