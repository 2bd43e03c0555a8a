//! Isotropic Gaussian initial fields, the spectral solution
//! `X_t = Σ a_lm l̃(t, γ + Ψ(μ_l)) Y_lm` and its time-changed Brownian representation.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mc::{self, Estimate};
use crate::sphere::{brownian_step, eval_at, eval_ylm, mu, HarmonicCoeffs, SphericalPoint};
use crate::symbols::{BernsteinSymbol, SpectralSymbol};
use crate::timechange::{convolution_derivative, ltilde, sample_tau, Method};

/// Angular power spectrum `C_l` of an isotropic field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IsotropicSpectrum {
    /// `C_l = amplitude (1 + l)^{-theta}`.
    PowerLaw { amplitude: f64, theta: f64 },
    Table { values: Vec<f64> },
}

impl IsotropicSpectrum {
    pub fn power_law(amplitude: f64, theta: f64) -> Result<Self> {
        let s = Self::PowerLaw { amplitude, theta };
        s.validate()?;
        Ok(s)
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        let s = Self::Table { values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::PowerLaw { amplitude, theta } => {
                if !(*amplitude >= 0.0 && amplitude.is_finite()) {
                    return domain(format!("amplitude {amplitude} must be finite and nonnegative"));
                }
                if !(*theta > 2.0 && theta.is_finite()) {
                    return domain(format!("power-law exponent {theta} must exceed 2"));
                }
            }
            Self::Table { values } => {
                if let Some((l, c)) = values.iter().enumerate().find(|(_, c)| !(**c >= 0.0 && c.is_finite())) {
                    return domain(format!("C_{l} = {c} must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }

    /// `C_l`; table entries past the end are zero.
    pub fn cl(&self, l: usize) -> f64 {
        match self {
            Self::PowerLaw { amplitude, theta } => amplitude * (1.0 + l as f64).powf(-theta),
            Self::Table { values } => values.get(l).copied().unwrap_or(0.0),
        }
    }

    /// Largest degree with a nonzero entry, if the spectrum is band-limited.
    pub fn band_limit(&self) -> Option<usize> {
        match self {
            Self::PowerLaw { .. } => None,
            Self::Table { values } => Some(values.len().saturating_sub(1)),
        }
    }

    /// `Σ_{l ≤ lmax} (2l+1) C_l / (4π)`.
    pub fn variance(&self, lmax: usize) -> f64 {
        (0..=lmax)
            .map(|l| (2 * l + 1) as f64 * self.cl(l))
            .sum::<f64>()
            / (4.0 * std::f64::consts::PI)
    }

    /// Variance carried by degrees above `lmax` (integral estimate for power laws).
    pub fn variance_tail(&self, lmax: usize) -> f64 {
        match self {
            Self::PowerLaw { amplitude, theta } => {
                // Σ_{x ≥ lmax+2} (2x-1) A x^{-θ} by the midpoint integral
                let x0 = lmax as f64 + 1.5;
                let integral = 2.0 * x0.powf(2.0 - theta) / (theta - 2.0) - x0.powf(1.0 - theta) / (theta - 1.0);
                amplitude * integral / (4.0 * std::f64::consts::PI)
            }
            Self::Table { values } => {
                (lmax + 1..values.len()).map(|l| (2 * l + 1) as f64 * values[l]).sum::<f64>()
                    / (4.0 * std::f64::consts::PI)
            }
        }
    }
}

/// Parameters of `(γ - Ψ(-Δ) + 𝔇^Φ_t) X = 0` at time `t`.
#[derive(Debug, Clone)]
pub struct SolutionParams {
    pub phi: BernsteinSymbol,
    pub psi: SpectralSymbol,
    pub gamma: f64,
    pub t: f64,
    /// Route for `l̃`.
    pub method: Method,
}

impl SolutionParams {
    pub fn new(phi: BernsteinSymbol, psi: impl Into<SpectralSymbol>, gamma: f64, t: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return domain(format!("γ = {gamma} must be finite and nonnegative"));
        }
        if !(t >= 0.0 && t.is_finite()) {
            return domain(format!("t = {t} must be finite and nonnegative"));
        }
        let method = Method::preferred(&phi);
        Ok(Self {
            phi,
            psi: psi.into(),
            gamma,
            t,
            method,
        })
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn at_time(&self, t: f64) -> Result<Self> {
        Self::new(self.phi.clone(), self.psi.clone(), self.gamma, t).map(|p| p.with_method(self.method))
    }

    /// Decay rate `γ + Ψ(μ_l)` of degree `l`.
    pub fn rate(&self, l: usize) -> f64 {
        self.gamma + self.psi.eval(mu(l))
    }

    pub fn supports_coordinate_change(&self) -> bool {
        self.gamma == 0.0 && self.psi.as_bernstein().is_some()
    }
}

/// Memoized mode multipliers `l̃(t, γ + Ψ(μ_l))` for one parameter set.
#[derive(Debug)]
pub struct SpectralSolver {
    params: SolutionParams,
    cache: Mutex<HashMap<(u64, u64), f64>>,
}

impl SpectralSolver {
    pub fn new(params: SolutionParams) -> Self {
        Self {
            params,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn params(&self) -> &SolutionParams {
        &self.params
    }

    /// `l̃(t, λ)` with the configured route, cached per `(λ, t)`.
    pub fn trajectory_value(&self, t: f64, lambda: f64) -> Result<f64> {
        if t == 0.0 || lambda == 0.0 {
            return Ok(1.0);
        }
        let key = (lambda.to_bits(), t.to_bits());
        if let Some(v) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*v);
        }
        let v = ltilde(&self.params.phi, t, lambda, self.params.method)?;
        self.cache.lock().expect("cache lock").insert(key, v);
        Ok(v)
    }

    pub fn multiplier(&self, l: usize) -> Result<f64> {
        self.trajectory_value(self.params.t, self.params.rate(l))
    }

    pub fn multipliers(&self, lmax: usize) -> Result<Vec<f64>> {
        (0..=lmax).into_par_iter().map(|l| self.multiplier(l)).collect()
    }

    pub fn solve(&self, initial: &HarmonicCoeffs) -> Result<HarmonicCoeffs> {
        let m = self.multipliers(initial.lmax())?;
        Ok(initial.scale_degrees(|l| m[l]))
    }
}

/// Isotropic Gaussian coefficients with `E|a_lm|² = C_l`, real-field constraint enforced.
pub fn sample_gaussian_field(spec: &IsotropicSpectrum, lmax: usize, seed: u64) -> Result<HarmonicCoeffs> {
    spec.validate()?;
    let mut rng = mc::stream(seed, 0);
    let mut out = HarmonicCoeffs::zeros(lmax);
    for l in 0..=lmax {
        let c = spec.cl(l);
        let z: f64 = rng.sample(StandardNormal);
        out.set(l, 0, num_complex::Complex64::new(c.sqrt() * z, 0.0))?;
        let sd = (0.5 * c).sqrt();
        for m in 1..=l as i64 {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            out.set_real_pair(l, m, num_complex::Complex64::new(sd * re, sd * im))?;
        }
    }
    Ok(out)
}

/// `n` independent realizations; realization `i` uses the sub-seed `i` of `seed`.
pub fn sample_gaussian_ensemble(
    spec: &IsotropicSpectrum,
    lmax: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<HarmonicCoeffs>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_gaussian_field(spec, lmax, mc::subseed(seed, i)))
        .collect()
}

/// Coefficients of `X_t`.
pub fn solve_field(initial: &HarmonicCoeffs, params: &SolutionParams) -> Result<HarmonicCoeffs> {
    SpectralSolver::new(params.clone()).solve(initial)
}

/// Coefficients of `Ψ(-Δ) f` (positive-symbol action).
pub fn apply_generalized_laplacian(coeffs: &HarmonicCoeffs, psi: &SpectralSymbol) -> HarmonicCoeffs {
    coeffs.scale_degrees(|l| psi.eval(mu(l)))
}

/// Coefficients of `P_t f(x) = E f(x + B_t)`.
pub fn heat_semigroup(coeffs: &HarmonicCoeffs, t: f64) -> Result<HarmonicCoeffs> {
    if !(t >= 0.0 && t.is_finite()) {
        return domain(format!("semigroup time {t} must be finite and nonnegative"));
    }
    Ok(coeffs.scale_degrees(|l| (-t * mu(l)).exp()))
}

/// How the conditional expectation over the time change is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    /// Average of `T(x + B_τ)` with a Brownian draw per `τ`.
    #[default]
    MovedPoint,
    /// Average of `(P_τ T)(x)` computed from the coefficients.
    Semigroup,
}

/// Monte Carlo estimate of `X_t(x)` through `τ_t = F(L_t)`, `F` driven by `Ψ`. Needs `γ = 0`.
pub fn coordinate_change_estimate(
    initial: &HarmonicCoeffs,
    params: &SolutionParams,
    x: SphericalPoint,
    n: usize,
    seed: u64,
    representation: Representation,
) -> Result<Estimate> {
    let psi = match (&params.psi, params.gamma) {
        (SpectralSymbol::Bernstein(b), 0.0) => b,
        _ => {
            return Err(Error::UnsupportedSymbol(
                "coordinate change needs γ = 0 and a Bernstein spatial symbol".into(),
            ))
        }
    };
    let constant = initial.iter().all(|(l, _, v)| l == 0 || v.norm() == 0.0);
    if params.t == 0.0 || constant {
        return Ok(Estimate::exact(eval_at(initial, x)));
    }
    let taus = sample_tau(&params.phi, psi, params.t, n, seed)?;
    let values = match representation {
        Representation::MovedPoint => mc::par_map(&taus, mc::subseed(seed, 1), |s, rng| {
            Ok(eval_at(initial, brownian_step(x, s.tau, rng)?))
        })?,
        Representation::Semigroup => {
            let degree: Vec<f64> = (0..=initial.lmax())
                .map(|l| {
                    (-(l as i64)..=l as i64)
                        .map(|m| Ok((initial.get(l, m) * eval_ylm(l, m, x)?).re))
                        .sum::<Result<f64>>()
                })
                .collect::<Result<_>>()?;
            taus.iter()
                .map(|s| {
                    degree
                        .iter()
                        .enumerate()
                        .map(|(l, g)| (-s.tau * mu(l)).exp() * g)
                        .sum()
                })
                .collect()
        }
    };
    Ok(Estimate::from_samples(&values))
}

/// Uniform grid `t_k = k t_end / (n_nodes - 1)` with residuals reported on `[window_start, t_end]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_nodes: usize,
    pub window_start: f64,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_nodes: usize, window_start: f64) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) || !(0.0..t_end).contains(&window_start) {
            return domain(format!("invalid time grid [0, {t_end}] with window from {window_start}"));
        }
        if n_nodes < 100 {
            return Err(Error::InsufficientData(format!(
                "residual check needs at least 100 time nodes, got {n_nodes}"
            )));
        }
        Ok(Self {
            t_end,
            n_nodes,
            window_start,
        })
    }

    pub fn dt(&self) -> f64 {
        self.t_end / (self.n_nodes - 1) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|k| k as f64 * self.dt()).collect()
    }
}

/// Residual of the mode equation `𝔇^Φ_t u + (γ + Ψ(μ_l)) u = 0` for one degree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeResidual {
    pub l: usize,
    pub rate: f64,
    /// `sup |𝔇u + rate u|` over the window.
    pub sup_residual: f64,
    /// `sup_residual / sup |rate u|`, or the absolute residual when `rate = 0`.
    pub relative: f64,
}

/// Mode-by-mode check of the equation for every degree present in `initial`.
pub fn residual_check(
    initial: &HarmonicCoeffs,
    params: &SolutionParams,
    grid: &TimeGrid,
) -> Result<Vec<ModeResidual>> {
    let times = grid.times();
    let solver = SpectralSolver::new(params.clone());
    let degrees: Vec<usize> = (0..=initial.lmax()).filter(|&l| initial.degree_power(l) > 0.0).collect();
    degrees
        .into_par_iter()
        .map(|l| {
            let rate = params.rate(l);
            let u: Vec<f64> = times
                .iter()
                .map(|&t| solver.trajectory_value(t, rate))
                .collect::<Result<_>>()?;
            let d = convolution_derivative(&u, grid.dt(), &params.phi)?;
            let (mut res, mut scale) = (0.0f64, 0.0f64);
            for k in 0..times.len() {
                if times[k] + 1e-12 < grid.window_start {
                    continue;
                }
                res = res.max((d[k] + rate * u[k]).abs());
                scale = scale.max((rate * u[k]).abs());
            }
            Ok(ModeResidual {
                l,
                rate,
                sup_residual: res,
                relative: if rate == 0.0 { res } else { res / scale },
            })
        })
        .collect()
}
