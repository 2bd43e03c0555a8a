//! Random variates for subordinator increments and first-passage times.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Open01, Poisson};

use crate::error::{domain, Error, Result};
use crate::special::{laplace_invert, LaplaceTransformFn};
use crate::symbols::{BernsteinSymbol, SymbolKind};

/// Standard positive stable variate, `E[exp(-λS)] = exp(-λ^α)` (Kanter's representation).
pub fn positive_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let beta = 1.0 - alpha;
    loop {
        let u = PI * rng.sample::<f64, _>(Open01);
        let w: f64 = rng.sample(Exp1);
        let ln_s = (alpha * u).sin().ln() - u.sin().ln() / alpha
            + beta / alpha * ((beta * u).sin().ln() - w.ln());
        let s = ln_s.exp();
        if s.is_finite() && s > 0.0 {
            return s;
        }
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`, usable for shapes far below one.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0);
    if shape < 1.0 {
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
        let u: f64 = rng.sample(Open01);
        g.ln() + u.ln() / shape
    } else {
        Gamma::new(shape, 1.0).expect("positive shape").sample(rng).ln()
    }
}

/// Jumps above `eps` as a compound Poisson process, jumps below replaced by their mean drift.
#[derive(Clone, Debug)]
pub struct CompoundPoisson {
    symbol: BernsteinSymbol,
    pub eps: f64,
    pub rate: f64,
    pub drift: f64,
}

const CP_COMPENSATION: f64 = 1e-4;
const CP_MAX_EVENTS: u64 = 50_000_000;

impl CompoundPoisson {
    /// Truncation level chosen so that `∫_0^ε z Π(dz) < 1e-4 · horizon`.
    pub fn new(symbol: &BernsteinSymbol, horizon: f64) -> Result<Self> {
        if !symbol.has_tail() {
            return Err(Error::UnsupportedSymbol(format!(
                "{} has no Lévy tail to build a sampling recipe from",
                symbol.label()
            )));
        }
        let small_mean = |eps: f64| -> Result<f64> {
            let (m0, _) = symbol.tail_moments(eps)?;
            Ok((m0 - eps * symbol.levy_tail(eps)?).max(0.0))
        };
        let target = CP_COMPENSATION * horizon;
        let mut eps = 1.0;
        let mut compensation = small_mean(eps)?;
        let mut halvings = 0;
        while compensation >= target {
            eps *= 0.5;
            compensation = small_mean(eps)?;
            halvings += 1;
            if halvings > 200 {
                return domain("no small-jump truncation level meets the compensation target");
            }
        }
        let rate = symbol.levy_tail(eps)?;
        Ok(Self {
            symbol: symbol.clone(),
            eps,
            rate,
            drift: symbol.drift() + compensation,
        })
    }

    fn tail(&self, z: f64) -> f64 {
        self.symbol.levy_tail(z).unwrap_or(0.0)
    }

    /// Jump size with survival `Π̄(z)/Π̄(ε)` on `[ε, ∞)`.
    pub fn jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = rng.sample::<f64, _>(Open01) * self.rate;
        let mut lo = self.eps;
        let mut hi = 2.0 * self.eps;
        while self.tail(hi) > target && hi < 1e300 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.tail(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        let mean = self.rate * dt;
        let count = if mean > 0.0 {
            Poisson::new(mean)
                .map_err(|e| Error::Domain(format!("Poisson rate {mean}: {e}")))?
                .sample(rng) as u64
        } else {
            0
        };
        if count > CP_MAX_EVENTS {
            return domain(format!("{count} jumps in one increment exceeds the event budget"));
        }
        let mut x = self.drift * dt;
        for _ in 0..count {
            x += self.jump(rng);
        }
        Ok(x)
    }

    /// Exact first passage above `level` of the truncated process.
    pub fn passage<R: Rng + ?Sized>(&self, level: f64, rng: &mut R) -> Result<f64> {
        if self.rate == 0.0 && self.drift == 0.0 {
            return domain("truncated process never moves");
        }
        let (mut s, mut h) = (0.0, 0.0);
        for _ in 0..CP_MAX_EVENTS {
            let gap = if self.rate > 0.0 {
                rng.sample::<f64, _>(Exp1) / self.rate
            } else {
                f64::INFINITY
            };
            if self.drift > 0.0 && h + self.drift * gap > level {
                return Ok(s + (level - h) / self.drift);
            }
            s += gap;
            h += self.drift * gap + self.jump(rng);
            if h > level {
                return Ok(s);
            }
        }
        domain("first passage needed more jumps than the event budget")
    }
}

/// Exact increment `H_{s+dt} - H_s` for a fixed symbol.
#[derive(Clone, Debug)]
pub enum IncrementSampler {
    Linear,
    Stable { alpha: f64, b: f64 },
    Tempered { alpha: f64, beta: f64 },
    Gamma,
    Geometric { alpha: f64 },
    CompoundPoisson(CompoundPoisson),
}

impl IncrementSampler {
    /// `horizon` sets the small-jump truncation of user-supplied symbols.
    pub fn new(symbol: &BernsteinSymbol, horizon: f64) -> Result<Self> {
        Ok(match symbol.kind() {
            SymbolKind::Linear => Self::Linear,
            SymbolKind::Stable { alpha } => Self::Stable { alpha: *alpha, b: 0.0 },
            SymbolKind::StableWithDrift { alpha, b } => Self::Stable {
                alpha: *alpha,
                b: *b,
            },
            SymbolKind::TemperedStable { alpha, beta } => Self::Tempered {
                alpha: *alpha,
                beta: *beta,
            },
            SymbolKind::Gamma => Self::Gamma,
            SymbolKind::GeometricStable { alpha } => Self::Geometric { alpha: *alpha },
            SymbolKind::Custom(_) => Self::CompoundPoisson(CompoundPoisson::new(symbol, horizon)?),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> Result<f64> {
        if dt == 0.0 {
            return Ok(0.0);
        }
        Ok(match self {
            Self::Linear => dt,
            Self::Stable { alpha, b } => b * dt + dt.powf(1.0 / alpha) * positive_stable(*alpha, rng),
            Self::Tempered { alpha, beta } => {
                let pieces = (dt * beta.powf(*alpha)).ceil().max(1.0) as usize;
                let scale = (dt / pieces as f64).powf(1.0 / alpha);
                let mut x = 0.0;
                for _ in 0..pieces {
                    x += loop {
                        let y = scale * positive_stable(*alpha, rng);
                        if rng.random::<f64>() < (-beta * y).exp() {
                            break y;
                        }
                    };
                }
                x
            }
            Self::Gamma => ln_gamma_variate(dt, rng).exp(),
            Self::Geometric { alpha } => {
                (ln_gamma_variate(dt, rng) / alpha).exp() * positive_stable(*alpha, rng)
            }
            Self::CompoundPoisson(cp) => cp.increment(dt, rng)?,
        })
    }
}

/// First passage of the gamma subordinator above `level`, by block walk and gamma-bridge bisection.
pub fn gamma_passage<R: Rng + ?Sized>(level: f64, rng: &mut R) -> f64 {
    if level <= 0.0 {
        return 0.0;
    }
    let block = (level / 16.0).max(1.0);
    let (mut s, mut g) = (0.0, 0.0);
    loop {
        let next = g + ln_gamma_variate(block, rng).exp();
        if next > level {
            return bridge_bisect(s, g, s + block, next, level, rng);
        }
        s += block;
        g = next;
    }
}

fn bridge_bisect<R: Rng + ?Sized>(
    mut s_lo: f64,
    mut g_lo: f64,
    mut s_hi: f64,
    mut g_hi: f64,
    level: f64,
    rng: &mut R,
) -> f64 {
    let tol = 1e-12 * s_hi.max(1.0);
    while s_hi - s_lo > tol {
        let half = 0.5 * (s_hi - s_lo);
        let a = ln_gamma_variate(half, rng);
        let b = ln_gamma_variate(half, rng);
        let frac = 1.0 / (1.0 + (b - a).exp());
        let s_mid = s_lo + half;
        let g_mid = g_lo + frac * (g_hi - g_lo);
        if g_mid > level {
            s_hi = s_mid;
            g_hi = g_mid;
        } else {
            s_lo = s_mid;
            g_lo = g_mid;
        }
    }
    if g_hi > g_lo {
        s_lo + (s_hi - s_lo) * ((level - g_lo) / (g_hi - g_lo)).clamp(0.0, 1.0)
    } else {
        s_lo
    }
}

/// Root of `b s + s^{1/α} S = t` (drifted stable path at a frozen stable factor).
fn drifted_stable_passage(alpha: f64, b: f64, stable: f64, t: f64) -> f64 {
    let pure = (t / stable).powf(alpha);
    if b == 0.0 {
        return pure;
    }
    let inv = 1.0 / alpha;
    let mut s = pure.min(t / b);
    for _ in 0..200 {
        let f = b * s + s.powf(inv) * stable - t;
        let df = b + inv * s.powf(inv - 1.0) * stable;
        let next = (s - f / df).max(0.0);
        if (s - next).abs() <= 1e-15 * s {
            return next;
        }
        s = next;
    }
    s
}

/// Distribution function of `L_t` on a uniform grid, from `P(L_t > s) = P(H_s ≤ t)`,
/// whose `t`-transform is `exp(-s Φ(p)) / p`.
#[derive(Clone, Debug)]
pub struct PassageTable {
    step: f64,
    cdf: Vec<f64>,
}

const TABLE_NODES: usize = 4096;
const TABLE_TAIL: f64 = 1e-11;

impl PassageTable {
    pub fn new(symbol: &BernsteinSymbol, t: f64) -> Result<Self> {
        if !(t > 0.0) {
            return domain(format!("passage table needs t > 0, got {t}"));
        }
        if symbol.phi_complex(Complex64::new(1.0, 0.0)).is_none() {
            return Err(Error::UnsupportedMethod(format!(
                "{} has no complex continuation for tabulated passage sampling",
                symbol.label()
            )));
        }
        let phi = |p: Complex64| symbol.phi_complex(p).expect("checked above");
        let survival = |s: f64| -> Result<f64> {
            let f = LaplaceTransformFn::complex(move |p| (-s * phi(p)).exp() / p, 0.0);
            laplace_invert(&f, t)
        };
        let mean = laplace_invert(&LaplaceTransformFn::complex(move |p| 1.0 / (p * phi(p)), 0.0), t)?;
        if !(mean > 0.0 && mean.is_finite()) {
            return Err(Error::InversionFailure {
                node: format!("mean passage time at t = {t}"),
            });
        }
        let mut s_max = 4.0 * mean;
        let mut doublings = 0;
        while survival(s_max)? > TABLE_TAIL {
            s_max *= 2.0;
            doublings += 1;
            if doublings > 60 {
                return domain("passage distribution tail does not decay");
            }
        }
        let step = s_max / TABLE_NODES as f64;
        let mut cdf = Vec::with_capacity(TABLE_NODES + 1);
        cdf.push(0.0);
        let mut running: f64 = 0.0;
        for i in 1..=TABLE_NODES {
            let v = (1.0 - survival(i as f64 * step)?).clamp(0.0, 1.0);
            running = running.max(v);
            cdf.push(running);
        }
        *cdf.last_mut().expect("non-empty") = 1.0;
        Ok(Self { step, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.step * ((i - 1) as f64 + frac)
    }
}

/// Sampler of `L_t` for a fixed symbol and time.
#[derive(Clone, Debug)]
pub enum PassageSampler {
    Fixed(f64),
    Stable { alpha: f64, b: f64, t: f64 },
    Gamma { t: f64 },
    Geometric { alpha: f64, t: f64 },
    Table(PassageTable),
    CompoundPoisson { cp: CompoundPoisson, t: f64 },
}

impl PassageSampler {
    pub fn new(symbol: &BernsteinSymbol, t: f64) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return domain(format!("passage time needs finite t ≥ 0, got {t}"));
        }
        if t == 0.0 {
            return Ok(Self::Fixed(0.0));
        }
        Ok(match symbol.kind() {
            SymbolKind::Linear => Self::Fixed(t),
            SymbolKind::Stable { alpha } => Self::Stable {
                alpha: *alpha,
                b: 0.0,
                t,
            },
            SymbolKind::StableWithDrift { alpha, b } => Self::Stable {
                alpha: *alpha,
                b: *b,
                t,
            },
            SymbolKind::Gamma => Self::Gamma { t },
            SymbolKind::GeometricStable { alpha } => Self::Geometric { alpha: *alpha, t },
            SymbolKind::TemperedStable { .. } => Self::Table(PassageTable::new(symbol, t)?),
            SymbolKind::Custom(_) => match PassageTable::new(symbol, t) {
                Ok(table) => Self::Table(table),
                Err(Error::UnsupportedMethod(_)) => Self::CompoundPoisson {
                    cp: CompoundPoisson::new(symbol, t)?,
                    t,
                },
                Err(e) => return Err(e),
            },
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        Ok(match self {
            Self::Fixed(v) => *v,
            Self::Stable { alpha, b, t } => {
                drifted_stable_passage(*alpha, *b, positive_stable(*alpha, rng), *t)
            }
            Self::Gamma { t } => gamma_passage(*t, rng),
            Self::Geometric { alpha, t } => {
                let inner = (t / positive_stable(*alpha, rng)).powf(*alpha);
                gamma_passage(inner, rng)
            }
            Self::Table(table) => table.sample(rng),
            Self::CompoundPoisson { cp, t } => cp.passage(*t, rng)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::{par_samples, Estimate};

    fn laplace_check(n: usize, seed: u64, lambda: f64, target: f64, draw: impl Fn(&mut crate::mc::McRng) -> f64 + Sync) {
        let xs = par_samples(n, seed, |rng| Ok((-lambda * draw(rng)).exp())).unwrap();
        let e = Estimate::from_samples(&xs);
        assert!(e.within(target, 3.0), "mean {} target {target} se {}", e.mean, e.se);
    }

    #[test]
    fn stable_variate_laplace_exponent() {
        for &alpha in &[0.3, 0.5, 0.8] {
            for &lambda in &[0.5, 2.0] {
                laplace_check(100_000, 11, lambda, (-(lambda as f64).powf(alpha)).exp(), |r| {
                    positive_stable(alpha, r)
                });
            }
        }
    }

    #[test]
    fn small_shape_gamma_variates() {
        let xs = par_samples(100_000, 5, |rng| Ok(ln_gamma_variate(0.01, rng).exp())).unwrap();
        let e = Estimate::from_samples(&xs);
        assert!(e.within(0.01, 3.0), "{e:?}");
        let ys = par_samples(50_000, 6, |rng| Ok(ln_gamma_variate(1e-7, rng))).unwrap();
        assert!(ys.iter().all(|y| y.is_finite() || *y == f64::NEG_INFINITY));
    }

    #[test]
    fn increments_match_laplace_exponent() {
        let symbols = [
            BernsteinSymbol::stable_with_drift(0.6, 0.5).unwrap(),
            BernsteinSymbol::tempered_stable(0.5, 1.0).unwrap(),
            BernsteinSymbol::tempered_stable(0.7, 3.0).unwrap(),
            BernsteinSymbol::gamma(),
            BernsteinSymbol::geometric_stable(0.7).unwrap(),
        ];
        for symbol in &symbols {
            let sampler = IncrementSampler::new(symbol, 1.0).unwrap();
            for &dt in &[0.05, 1.3] {
                let target = (-dt * symbol.phi(1.5)).exp();
                laplace_check(100_000, 21, 1.5, target, |r| sampler.sample(dt, r).unwrap());
            }
        }
    }

    #[test]
    fn passages_match_inverted_transform() {
        let symbols = [
            BernsteinSymbol::stable_with_drift(0.6, 0.5).unwrap(),
            BernsteinSymbol::tempered_stable(0.5, 1.0).unwrap(),
            BernsteinSymbol::gamma(),
            BernsteinSymbol::geometric_stable(0.7).unwrap(),
        ];
        for symbol in &symbols {
            for &t in &[0.3, 2.0] {
                let sampler = PassageSampler::new(symbol, t).unwrap();
                let lambda: f64 = 2.0;
                let phi = |p: Complex64| symbol.phi_complex(p).unwrap();
                let f = LaplaceTransformFn::complex(move |p| phi(p) / (p * (phi(p) + lambda)), 0.0);
                let target = laplace_invert(&f, t).unwrap();
                laplace_check(50_000, 31, lambda, target, |r| sampler.sample(r).unwrap());
            }
        }
    }

    #[test]
    fn table_sampler_reproduces_stable_law() {
        let symbol = BernsteinSymbol::stable(0.5).unwrap();
        let table = PassageTable::new(&symbol, 1.0).unwrap();
        let xs = par_samples(100_000, 3, |rng| Ok(table.sample(rng))).unwrap();
        let e = Estimate::from_samples(&xs);
        let target = 1.0 / crate::special::gamma(1.5);
        assert!(e.within(target, 3.0), "{e:?} vs {target}");
    }

    #[test]
    fn gamma_passage_matches_mean() {
        // E[L_t] inverts 1/(p ln(1+p))
        let t = 1.5;
        let f = LaplaceTransformFn::complex(|p: Complex64| 1.0 / (p * (p + 1.0).ln()), 0.0);
        let target = laplace_invert(&f, t).unwrap();
        let xs = par_samples(100_000, 8, |rng| Ok(gamma_passage(t, rng))).unwrap();
        let e = Estimate::from_samples(&xs);
        assert!(e.within(target, 3.0), "{e:?} vs {target}");
    }

    #[test]
    fn compound_poisson_custom_symbol() {
        use crate::symbols::CustomSymbol;
        // Lévy measure e^{-z} dz: Φ(λ) = λ/(1+λ), Π̄(z) = e^{-z}
        let custom = CustomSymbol::new("poisson", |l| l / (1.0 + l)).with_tail(|z| (-z).exp());
        let symbol = BernsteinSymbol::custom(custom).unwrap();
        let cp = CompoundPoisson::new(&symbol, 1.0).unwrap();
        assert!(cp.drift < 1e-4);
        let sampler = IncrementSampler::new(&symbol, 1.0).unwrap();
        laplace_check(50_000, 4, 1.0, (-0.5f64).exp(), |r| sampler.sample(1.0, r).unwrap());
        let unsupported = BernsteinSymbol::custom(CustomSymbol::new("bare", |l| l.sqrt())).unwrap();
        assert!(matches!(
            IncrementSampler::new(&unsupported, 1.0),
            Err(Error::UnsupportedSymbol(_))
        ));
    }
}
