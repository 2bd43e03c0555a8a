//! Subordinators `H`, `F`, the inverse subordinator `L_t = inf{s : H_s > t}`,
//! the composed change `τ_t = F(L_t)`, and `l̃(t, λ) = E[exp(-λ L_t)]`.

mod derivative;
pub mod sampling;

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use derivative::{
    convolution_derivative, convolution_derivative_with, finite_difference, ConvolutionKernel,
    DerivativeScheme,
};
pub use sampling::{IncrementSampler, PassageSampler};

use crate::error::{domain, Error, Result};
use crate::mc::{self, Estimate};
use crate::special::{gamma, laplace_invert, mittag_leffler, LaplaceTransformFn};
use crate::symbols::{BernsteinSymbol, SymbolKind};

/// A subordinator sampled on a uniform grid.
#[derive(Debug, Clone)]
pub struct SubordinatorPath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub symbol: BernsteinSymbol,
    pub seed: u64,
}

/// One realization of `(L_t, τ_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeChangeSample {
    pub t: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub tau: f64,
    pub seed: u64,
}

/// Path with independent stationary increments on `k · horizon / n_steps`.
pub fn sample_subordinator(
    symbol: &BernsteinSymbol,
    horizon: f64,
    n_steps: usize,
    seed: u64,
) -> Result<SubordinatorPath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return domain(format!("horizon {horizon} must be positive"));
    }
    if n_steps == 0 {
        return domain("a path needs at least one step");
    }
    let sampler = IncrementSampler::new(symbol, horizon)?;
    let mut rng = mc::stream(seed, 0);
    let dt = horizon / n_steps as f64;
    let times: Vec<f64> = (0..=n_steps).map(|i| i as f64 * dt).collect();
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(0.0);
    if matches!(sampler, IncrementSampler::Linear) {
        values.clone_from(&times);
    } else {
        let mut h = 0.0;
        for _ in 0..n_steps {
            h += sampler.sample(dt, &mut rng)?;
            values.push(h);
        }
    }
    Ok(SubordinatorPath {
        times,
        values,
        symbol: symbol.clone(),
        seed,
    })
}

/// First grid time with `H > t`, refined linearly inside the bracketing step.
pub fn inverse_passage(path: &SubordinatorPath, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return domain(format!("passage level {t} must be nonnegative"));
    }
    let v = &path.values;
    let k = v.partition_point(|&h| h <= t);
    if k == v.len() {
        return Err(Error::PathExhausted {
            level: t,
            max: *v.last().unwrap_or(&0.0),
        });
    }
    if k == 0 {
        return Ok(path.times[0]);
    }
    let (s0, s1) = (path.times[k - 1], path.times[k]);
    let (h0, h1) = (v[k - 1], v[k]);
    Ok(s0 + (s1 - s0) * (t - h0) / (h1 - h0))
}

/// `n` independent draws of `L_t`.
pub fn sample_passages(symbol: &BernsteinSymbol, t: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let sampler = PassageSampler::new(symbol, t)?;
    mc::par_samples(n, seed, |rng| sampler.sample(rng))
}

/// `n` draws of `(L_t, F(L_t))` with `H` driven by `phi` and `F` by `psi`, independent.
pub fn sample_tau(
    phi: &BernsteinSymbol,
    psi: &BernsteinSymbol,
    t: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<TimeChangeSample>> {
    if n == 0 {
        return domain("sample_tau needs n ≥ 1");
    }
    let passage = PassageSampler::new(phi, t)?;
    let outer = IncrementSampler::new(psi, t.max(1.0))?;
    mc::par_samples(n, seed, |rng| {
        let l = passage.sample(rng)?;
        let tau = outer.sample(l, rng)?;
        Ok(TimeChangeSample { t, l, tau, seed })
    })
}

/// CSV with header `t,L,tau,seed`.
pub fn write_time_change_csv<W: Write>(writer: W, samples: &[TimeChangeSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Route used to evaluate `l̃` or negative moments of `L_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    LaplaceInversion,
    MonteCarlo { n: usize, seed: u64 },
}

impl Method {
    /// Closed form where one exists, numerical inversion otherwise.
    pub fn preferred(symbol: &BernsteinSymbol) -> Self {
        match symbol.kind() {
            SymbolKind::Stable { .. } | SymbolKind::Linear => Method::ClosedForm,
            _ => Method::LaplaceInversion,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        domain(format!("time {t} must be finite and nonnegative"))
    }
}

/// Transform `s ↦ Φ(s) / (s (Φ(s) + λ))` of `t ↦ l̃(t, λ)`.
pub fn ltilde_transform(symbol: &BernsteinSymbol, lambda: f64) -> LaplaceTransformFn<'_> {
    if symbol.phi_complex(Complex64::new(1.0, 0.0)).is_some() {
        LaplaceTransformFn::complex(
            move |s| {
                let p = symbol.phi_complex(s).expect("complex symbol");
                p / (s * (p + lambda))
            },
            0.0,
        )
    } else {
        LaplaceTransformFn::real(
            move |s| {
                let p = symbol.phi(s);
                p / (s * (p + lambda))
            },
            0.0,
        )
    }
}

/// `l̃(t, λ) = E[exp(-λ L_t)] ∈ (0, 1]`.
pub fn ltilde(symbol: &BernsteinSymbol, t: f64, lambda: f64, method: Method) -> Result<f64> {
    ltilde_estimate(symbol, t, lambda, method).map(|e| e.mean)
}

/// Same as [`ltilde`], with the Monte Carlo standard error (zero for deterministic routes).
pub fn ltilde_estimate(
    symbol: &BernsteinSymbol,
    t: f64,
    lambda: f64,
    method: Method,
) -> Result<Estimate> {
    check_time(t)?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return domain(format!("λ = {lambda} must be finite and nonnegative"));
    }
    if let Method::MonteCarlo { n, seed } = method {
        let ls = sample_passages(symbol, t, n, seed)?;
        let xs: Vec<f64> = ls.iter().map(|l| (-lambda * l).exp()).collect();
        return Ok(Estimate::from_samples(&xs));
    }
    if t == 0.0 || lambda == 0.0 {
        return Ok(Estimate::exact(1.0));
    }
    let value = match method {
        Method::ClosedForm => match symbol.kind() {
            SymbolKind::Stable { alpha } => mittag_leffler(*alpha, -lambda * t.powf(*alpha))?,
            SymbolKind::Linear => (-lambda * t).exp(),
            _ => {
                return Err(Error::UnsupportedMethod(format!(
                    "no closed form for l̃ with {}",
                    symbol.label()
                )))
            }
        },
        Method::LaplaceInversion => laplace_invert(&ltilde_transform(symbol, lambda), t)?,
        Method::MonteCarlo { .. } => unreachable!(),
    };
    Ok(Estimate::exact(value.clamp(f64::MIN_POSITIVE, 1.0)))
}

/// Monte Carlo `l̃(t, λ)` for several `λ` from one set of passage samples.
pub fn ltilde_monte_carlo(
    symbol: &BernsteinSymbol,
    t: f64,
    lambdas: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    check_time(t)?;
    let ls = sample_passages(symbol, t, n, seed)?;
    Ok(lambdas
        .iter()
        .map(|lambda| {
            let xs: Vec<f64> = ls.iter().map(|l| (-lambda * l).exp()).collect();
            Estimate::from_samples(&xs)
        })
        .collect())
}

/// `E[L_t^{-σ}]` for `σ ∈ (0, 1)`.
pub fn neg_moment(symbol: &BernsteinSymbol, t: f64, sigma: f64, method: Method) -> Result<f64> {
    neg_moment_estimate(symbol, t, sigma, method).map(|e| e.mean)
}

pub fn neg_moment_estimate(
    symbol: &BernsteinSymbol,
    t: f64,
    sigma: f64,
    method: Method,
) -> Result<Estimate> {
    if !(t > 0.0 && t.is_finite()) {
        return domain(format!("negative moments need t > 0, got {t}"));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return domain(format!("σ = {sigma} must lie in (0, 1)"));
    }
    match method {
        Method::ClosedForm => {
            let beta = match symbol.kind() {
                SymbolKind::Stable { alpha } => *alpha,
                SymbolKind::Linear => 1.0,
                _ => {
                    return Err(Error::UnsupportedMethod(format!(
                        "no closed negative moment for {}",
                        symbol.label()
                    )))
                }
            };
            Ok(Estimate::exact(
                gamma(1.0 - sigma) / gamma(1.0 - beta * sigma) * t.powf(-beta * sigma),
            ))
        }
        // ∫_0^∞ e^{-pt} E[L_t^{-σ}] dt = Γ(1-σ) Φ(p)^σ / p
        Method::LaplaceInversion => {
            let g = gamma(1.0 - sigma);
            let f = if symbol.phi_complex(Complex64::new(1.0, 0.0)).is_some() {
                LaplaceTransformFn::complex(
                    move |p| g * symbol.phi_complex(p).expect("complex symbol").powf(sigma) / p,
                    0.0,
                )
            } else {
                LaplaceTransformFn::real(move |p| g * symbol.phi(p).powf(sigma) / p, 0.0)
            };
            Ok(Estimate::exact(laplace_invert(&f, t)?))
        }
        Method::MonteCarlo { n, seed } => {
            let sampler = PassageSampler::new(symbol, t)?;
            let xs = mc::par_samples(n, seed, |rng| {
                for _ in 0..64 {
                    let l = sampler.sample(rng)?;
                    if l > 0.0 {
                        return Ok(l.powf(-sigma));
                    }
                }
                domain("passage sampler keeps returning zero")
            })?;
            Ok(Estimate::from_samples(&xs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::{gamma, ln_gamma};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn linear_path_is_the_identity() {
        let path = sample_subordinator(&BernsteinSymbol::linear(), 1.0, 1000, 3).unwrap();
        assert_eq!(path.values, path.times);
        assert!((inverse_passage(&path, 0.7).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(inverse_passage(&path, 0.0).unwrap(), 0.0);
        assert!(matches!(
            inverse_passage(&path, 1.5),
            Err(Error::PathExhausted { .. })
        ));
    }

    #[test]
    fn path_invariants_and_determinism() {
        for symbol in crate::symbols::catalog() {
            let a = sample_subordinator(&symbol, 2.0, 500, 17).unwrap();
            let b = sample_subordinator(&symbol, 2.0, 500, 17).unwrap();
            assert_eq!(a.values, b.values);
            assert_eq!(a.values[0], 0.0);
            assert!(a.values.windows(2).all(|w| w[0] <= w[1]), "{}", symbol.label());
            assert!(a.times.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn path_increments_have_the_right_laplace_exponent() {
        let dt = 0.1;
        for symbol in [BernsteinSymbol::stable(0.5).unwrap(), BernsteinSymbol::gamma()] {
            let n = 100_000;
            let path = sample_subordinator(&symbol, dt * n as f64, n, 99).unwrap();
            let xs: Vec<f64> = path.values.windows(2).map(|w| (-(w[1] - w[0])).exp()).collect();
            let e = Estimate::from_samples(&xs);
            assert!(e.within((-dt * symbol.phi(1.0)).exp(), 3.0), "{}: {e:?}", symbol.label());
        }
    }

    #[test]
    fn passage_is_monotone_on_a_fixed_path() {
        let path = sample_subordinator(&BernsteinSymbol::stable(0.6).unwrap(), 4.0, 4000, 5).unwrap();
        let top = *path.values.last().unwrap();
        let mut prev = 0.0;
        for i in 0..400 {
            let t = top * i as f64 / 401.0;
            let l = inverse_passage(&path, t).unwrap();
            assert!(l >= prev);
            prev = l;
        }
    }

    #[test]
    fn inverse_stable_mean() {
        // E[L_t] inverts 1/(p Φ(p)) = p^{-1-α}: t^α / Γ(1+α)
        let alpha = 0.5;
        let symbol = BernsteinSymbol::stable(alpha).unwrap();
        let f = LaplaceTransformFn::complex(move |p: Complex64| 1.0 / (p * p.powf(alpha)), 0.0);
        let oracle = laplace_invert(&f, 1.0).unwrap();
        assert!(rel(oracle, 1.0 / gamma(1.5)) < 1e-8);
        let ls = sample_passages(&symbol, 1.0, 100_000, 12).unwrap();
        assert!(Estimate::from_samples(&ls).within(oracle, 3.0));
        // path-based passage agrees at fine resolution
        let walk: Vec<f64> = (0..2000)
            .map(|i| {
                let p = sample_subordinator(&symbol, 40.0, 20_000, 1000 + i).unwrap();
                inverse_passage(&p, 1.0).unwrap()
            })
            .collect();
        assert!(Estimate::from_samples(&walk).within(oracle, 3.0));
    }

    #[test]
    fn ltilde_routes() {
        let lin = BernsteinSymbol::linear();
        for method in [Method::ClosedForm, Method::LaplaceInversion] {
            let v = ltilde(&lin, 1.3, 0.7, method).unwrap();
            assert!(rel(v, (-0.91f64).exp()) < 1e-8);
        }
        let st = BernsteinSymbol::stable(0.6).unwrap();
        let cf = ltilde(&st, 1.0, 2.0, Method::ClosedForm).unwrap();
        let li = ltilde(&st, 1.0, 2.0, Method::LaplaceInversion).unwrap();
        assert!(rel(li, cf) < 1e-5, "{li} vs {cf}");
        let mc = ltilde_estimate(&st, 1.0, 2.0, Method::MonteCarlo { n: 100_000, seed: 1 }).unwrap();
        assert!(mc.within(cf, 3.0), "{mc:?} vs {cf}");
        for s in crate::symbols::catalog() {
            assert_eq!(ltilde(&s, 0.8, 0.0, Method::LaplaceInversion).unwrap(), 1.0);
            assert_eq!(ltilde(&s, 0.0, 3.0, Method::LaplaceInversion).unwrap(), 1.0);
        }
        assert!(matches!(
            ltilde(&BernsteinSymbol::gamma(), 1.0, 1.0, Method::ClosedForm),
            Err(Error::UnsupportedMethod(_))
        ));
    }

    #[test]
    fn ltilde_is_monotone_in_both_arguments() {
        for s in crate::symbols::catalog() {
            let m = Method::preferred(&s);
            for &lambda in &[0.5, 2.0, 10.0] {
                let mut prev = 1.0;
                for i in 1..40 {
                    let v = ltilde(&s, 0.1 * i as f64, lambda, m).unwrap();
                    assert!(v <= prev + 1e-10 && v > 0.0, "{} λ={lambda}", s.label());
                    prev = v;
                }
            }
            let mut prev = 1.0;
            for i in 1..40 {
                let v = ltilde(&s, 1.0, 0.5 * i as f64, m).unwrap();
                assert!(v <= prev + 1e-10, "{}", s.label());
                prev = v;
            }
        }
    }

    #[test]
    fn negative_moments() {
        let st = BernsteinSymbol::stable(0.5).unwrap();
        let cf = neg_moment(&st, 1.0, 0.5, Method::ClosedForm).unwrap();
        let oracle = (ln_gamma(0.5) - ln_gamma(0.75)).exp();
        assert!(rel(cf, oracle) < 1e-12);
        assert!(rel(cf, 1.446_409_1) < 1e-6);
        let lin = neg_moment(&BernsteinSymbol::linear(), 2.0, 0.3, Method::ClosedForm).unwrap();
        assert!(rel(lin, 2f64.powf(-0.3)) < 1e-14);
        let inv = neg_moment(&st, 1.0, 0.5, Method::LaplaceInversion).unwrap();
        assert!(rel(inv, cf) < 1e-8);
        let mc = neg_moment_estimate(&st, 1.0, 0.3, Method::MonteCarlo { n: 100_000, seed: 2 }).unwrap();
        let cf3 = neg_moment(&st, 1.0, 0.3, Method::ClosedForm).unwrap();
        assert!(mc.within(cf3, 3.0), "{mc:?} vs {cf3}");
        assert!(neg_moment(&BernsteinSymbol::gamma(), 1.0, 0.5, Method::ClosedForm).is_err());
        assert!(neg_moment(&BernsteinSymbol::gamma(), 1.0, 0.5, Method::LaplaceInversion).unwrap() > 0.0);
    }

    #[test]
    fn tau_samples() {
        let lin = BernsteinSymbol::linear();
        let s = sample_tau(&lin, &lin, 0.8, 100, 1).unwrap();
        assert!(s.iter().all(|x| x.tau == 0.8 && x.l == 0.8));

        let phi = BernsteinSymbol::stable(0.6).unwrap();
        let psi = BernsteinSymbol::stable(0.5).unwrap();
        let s = sample_tau(&phi, &psi, 1.0, 100_000, 2).unwrap();
        let xs: Vec<f64> = s.iter().map(|x| (-x.tau).exp()).collect();
        let target = mittag_leffler(0.6, -1.0).unwrap();
        assert!(Estimate::from_samples(&xs).within(target, 3.0));

        let psi = BernsteinSymbol::tempered_stable(0.5, 1.0).unwrap();
        let s = sample_tau(&phi, &psi, 1.0, 100_000, 3).unwrap();
        let xs: Vec<f64> = s.iter().map(|x| (-2.0 * x.tau).exp()).collect();
        let target = ltilde(&phi, 1.0, psi.phi(2.0), Method::LaplaceInversion).unwrap();
        assert!(Estimate::from_samples(&xs).within(target, 3.0));
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        let s = [TimeChangeSample {
            t: 1.0,
            l: 0.5,
            tau: 0.25,
            seed: 7,
        }];
        write_time_change_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "t,L,tau,seed\n1.0,0.5,0.25,7\n");
    }

    #[test]
    fn derivative_of_linear_function() {
        let alpha = 0.4;
        let sym = BernsteinSymbol::stable(alpha).unwrap();
        let dt = 0.01;
        let u: Vec<f64> = (0..201).map(|k| k as f64 * dt).collect();
        for scheme in [DerivativeScheme::CellIncrements, DerivativeScheme::NodalDerivative] {
            let d = convolution_derivative_with(&u, dt, &sym, scheme, None).unwrap();
            for (k, v) in d.iter().enumerate().skip(1) {
                let t = k as f64 * dt;
                let exact = t.powf(1.0 - alpha) / gamma(2.0 - alpha);
                assert!(rel(*v, exact) < 1e-10, "t={t}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        for s in crate::symbols::catalog() {
            let d = convolution_derivative(&[2.5; 50], 0.02, &s).unwrap();
            assert!(d.iter().all(|v| *v == 0.0), "{}", s.label());
        }
        assert!(matches!(
            convolution_derivative(&[1.0, 2.0], 0.1, &BernsteinSymbol::gamma()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn mittag_leffler_is_an_eigenfunction() {
        let sym = BernsteinSymbol::stable(0.5).unwrap();
        let dt = 2.0 / 2000.0;
        let u: Vec<f64> = (0..=2000)
            .map(|k| mittag_leffler(0.5, -(k as f64 * dt).sqrt()).unwrap())
            .collect();
        let d = convolution_derivative(&u, dt, &sym).unwrap();
        for k in 200..=2000 {
            assert!(rel(d[k], -u[k]) < 1e-3, "t={}: {} vs {}", k as f64 * dt, d[k], -u[k]);
        }
    }
}
