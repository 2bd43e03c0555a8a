//! Angular power spectrum of `X_t`: empirical estimator, `C_l(t) = l̃² C_l`,
//! Laplace identity, high-degree decay, negative-moment bounds and moments at a point.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::fields::{sample_gaussian_field, IsotropicSpectrum, SolutionParams, SpectralSolver};
use crate::mc::{self, Estimate};
use crate::special::gamma;
use crate::sphere::HarmonicCoeffs;
use crate::symbols::{SpectralSymbol, SymbolKind};
use crate::timechange::{neg_moment, Method};

/// `Ĉ_l = Σ_m |a_lm|² / (2l+1)` for each degree.
pub fn empirical_cl(coeffs: &HarmonicCoeffs) -> Vec<f64> {
    (0..=coeffs.lmax())
        .map(|l| coeffs.degree_power(l) / (2 * l + 1) as f64)
        .collect()
}

/// Ensemble mean of `Ĉ_l` with standard errors.
pub fn empirical_cl_ensemble(ensemble: &[HarmonicCoeffs]) -> Result<Vec<Estimate>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::InsufficientData("empty ensemble".into()))?;
    let per: Vec<Vec<f64>> = ensemble.par_iter().map(empirical_cl).collect();
    Ok((0..=first.lmax())
        .map(|l| {
            let xs: Vec<f64> = per.iter().map(|c| c[l]).collect();
            Estimate::from_samples(&xs)
        })
        .collect())
}

/// Ensemble mean of `Ĉ_l(X_t)` over `n` fresh realizations, without keeping the coefficient sets.
///
/// Realization `i` is drawn from the sub-seed `i` of `seed`, as in
/// [`sample_gaussian_ensemble`](crate::fields::sample_gaussian_ensemble).
pub fn solved_ensemble_cl(
    spec: &IsotropicSpectrum,
    params: &SolutionParams,
    lmax: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Estimate>> {
    if n == 0 {
        return Err(Error::InsufficientData("empty ensemble".into()));
    }
    let m = SpectralSolver::new(params.clone()).multipliers(lmax)?;
    let per: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let c = sample_gaussian_field(spec, lmax, mc::subseed(seed, i))?;
            Ok(empirical_cl(&c).iter().zip(&m).map(|(c, m)| c * m * m).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..=lmax)
        .map(|l| {
            let xs: Vec<f64> = per.iter().map(|c| c[l]).collect();
            Estimate::from_samples(&xs)
        })
        .collect())
}

/// `C_l(t) = l̃(t, γ + Ψ(μ_l))² C_l`.
pub fn theoretical_cl_t(spec: &IsotropicSpectrum, params: &SolutionParams, l: usize) -> Result<f64> {
    theoretical_with(&SpectralSolver::new(params.clone()), spec, l)
}

fn theoretical_with(solver: &SpectralSolver, spec: &IsotropicSpectrum, l: usize) -> Result<f64> {
    if let Some(band) = spec.band_limit() {
        if l > band {
            return domain(format!("degree {l} beyond the tabulated spectrum (L_max = {band})"));
        }
    }
    let c = spec.cl(l);
    if c == 0.0 {
        return Ok(0.0);
    }
    let m = solver.multiplier(l)?;
    Ok(m * m * c)
}

/// `∫_0^∞ e^{-st} √C_l(t) dt = Φ(s) √C_l / (s (γ + Ψ(μ_l) + Φ(s)))`.
pub fn spectrum_laplace(spec: &IsotropicSpectrum, params: &SolutionParams, l: usize, s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return domain(format!("transform variable {s} must be positive"));
    }
    let p = params.phi.phi(s);
    Ok(p / s * spec.cl(l).sqrt() / (params.rate(l) + p))
}

/// Log-log fit of `C*_l(t) = (2l+1) C_l(t) / (4π)` against `l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub prefactor: f64,
    /// `1 - θ - 2ρ` with `Ψ(l²) ≍ l^ρ`.
    pub predicted_slope: f64,
    pub l_min: usize,
    pub l_max: usize,
    pub n_points: usize,
}

/// Default degrees for decay fits.
pub const DECAY_RANGE: (usize, usize) = (64, 512);

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn c_star(spec: &IsotropicSpectrum, params: &SolutionParams, l: usize) -> Result<f64> {
    Ok((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * theoretical_cl_t(spec, params, l)?)
}

/// Exponent `ρ` with `Ψ(l²) ≍ l^ρ` as `l → ∞` (zero for logarithmic growth).
pub fn growth_order(psi: &SpectralSymbol) -> f64 {
    match psi {
        SpectralSymbol::RieszBessel { alpha, gamma } => alpha + gamma,
        SpectralSymbol::Bernstein(b) => match b.kind() {
            SymbolKind::Stable { alpha } | SymbolKind::TemperedStable { alpha, .. } => 2.0 * alpha,
            SymbolKind::StableWithDrift { .. } | SymbolKind::Linear => 2.0,
            SymbolKind::Gamma | SymbolKind::GeometricStable { .. } => 0.0,
            SymbolKind::Custom(_) => {
                let (a, b2) = (1e8, 1e10);
                2.0 * (b.phi(b2).ln() - b.phi(a).ln()) / (b2 / a).ln()
            }
        },
    }
}

/// Slope and prefactor of `log C*_l(t)` over `l ∈ [l_min, l_max]` for a power-law spectrum.
pub fn asymptotic_decay(
    spec: &IsotropicSpectrum,
    params: &SolutionParams,
    l_range: (usize, usize),
) -> Result<DecayFit> {
    let theta = match spec {
        IsotropicSpectrum::PowerLaw { theta, .. } => *theta,
        _ => return domain("decay fits need a power-law spectrum"),
    };
    let (l_min, l_max) = l_range;
    if l_min == 0 || l_max < l_min + 3 {
        return Err(Error::Fit(format!(
            "degree range [{l_min}, {l_max}] must hold at least 4 positive degrees"
        )));
    }
    if !(params.t > 0.0) {
        return Err(Error::Fit("decay fits need t > 0".into()));
    }
    let solver = SpectralSolver::new(params.clone());
    let degrees: Vec<usize> = (l_min..=l_max).collect();
    let values: Vec<f64> = degrees
        .par_iter()
        .map(|&l| {
            Ok((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * theoretical_with(&solver, spec, l)?)
        })
        .collect::<Result<_>>()?;
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit("C*_l(t) underflows in the fit range".into()));
    }
    let x: Vec<f64> = degrees.iter().map(|&l| (l as f64).ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let (slope, intercept) = fit_line(&x, &y);
    let rho = growth_order(&params.psi);
    Ok(DecayFit {
        slope,
        prefactor: intercept.exp(),
        predicted_slope: 1.0 - theta - 2.0 * rho,
        l_min,
        l_max,
        n_points: degrees.len(),
    })
}

/// `n` equispaced points strictly inside `(0, 1)`.
pub fn sigma_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|k| k as f64 / (n + 1) as f64).collect()
}

/// `ln(Γ(1+σ) E[L_t^{-σ}])` for the time symbol of `params`.
fn log_moment_factor(params: &SolutionParams, sigma: f64) -> Result<f64> {
    let m = match params.phi.kind() {
        SymbolKind::Stable { alpha } => {
            // Γ(1-σ) t^{-βσ} / Γ(1-βσ)
            gamma(1.0 - sigma) / gamma(1.0 - alpha * sigma) * params.t.powf(-alpha * sigma)
        }
        SymbolKind::Linear => params.t.powf(-sigma),
        _ => neg_moment(&params.phi, params.t, sigma, Method::LaplaceInversion)?,
    };
    Ok(gamma(1.0 + sigma).ln() + m.ln())
}

fn check_bound_inputs(params: &SolutionParams, sigmas: &[f64]) -> Result<()> {
    if sigmas.is_empty() {
        return domain("σ grid is empty");
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return domain(format!("σ = {s} must lie in (0, 1)"));
    }
    if !(params.t > 0.0) {
        return domain("negative-moment bounds need t > 0");
    }
    Ok(())
}

/// `C_l · max_σ Γ(1+σ) (γ + Ψ(μ_l))^{-σ} E[L_t^{-σ}]` over the grid.
///
/// The factor is log-convex in `σ`, so the grid maximum is attained at an end point
/// and equals the supremum over the grid's hull.
pub fn cl_bound(spec: &IsotropicSpectrum, params: &SolutionParams, l: usize, sigmas: &[f64]) -> Result<f64> {
    check_bound_inputs(params, sigmas)?;
    let c = spec.cl(l);
    if c == 0.0 {
        return Ok(0.0);
    }
    let ln_rate = params.rate(l).ln();
    let mut best = f64::NEG_INFINITY;
    for &s in sigmas {
        best = best.max(log_moment_factor(params, s)? - s * ln_rate);
    }
    Ok(c * best.exp())
}

/// Smallest bound of the same family: grid minimum refined by golden-section search.
pub fn cl_bound_tight(
    spec: &IsotropicSpectrum,
    params: &SolutionParams,
    l: usize,
    sigmas: &[f64],
) -> Result<f64> {
    check_bound_inputs(params, sigmas)?;
    let c = spec.cl(l);
    if c == 0.0 {
        return Ok(0.0);
    }
    let ln_rate = params.rate(l).ln();
    let f = |s: f64| -> Result<f64> { Ok(log_moment_factor(params, s)? - s * ln_rate) };
    let mut grid: Vec<f64> = sigmas.to_vec();
    grid.sort_by(f64::total_cmp);
    let values: Vec<f64> = grid.iter().map(|&s| f(s)).collect::<Result<_>>()?;
    let k = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .expect("nonempty grid");
    let mut best = values[k];
    if grid.len() >= 3 {
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(grid.len() - 1)]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
        let (mut f1, mut f2) = (f(x1)?, f(x2)?);
        for _ in 0..40 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - r * (b - a);
                f1 = f(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + r * (b - a);
                f2 = f(x2)?;
            }
        }
        best = best.min(f1).min(f2);
    }
    Ok(c * best.exp())
}

/// Variance of `X_t(x)` over degrees `≤ lmax`, with the variance the truncation drops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub value: f64,
    /// Upper estimate of `Σ_{l > lmax} (2l+1) C_l(t) / (4π)`, using `C_l(t) ≤ C_l`.
    pub tail_estimate: f64,
    pub l_max: usize,
}

pub fn variance(spec: &IsotropicSpectrum, params: &SolutionParams, lmax: usize) -> Result<VarianceReport> {
    let solver = SpectralSolver::new(params.clone());
    let lmax = spec.band_limit().map_or(lmax, |b| b.min(lmax));
    let terms: Vec<f64> = (0..=lmax)
        .into_par_iter()
        .map(|l| Ok((2 * l + 1) as f64 * theoretical_with(&solver, spec, l)?))
        .collect::<Result<_>>()?;
    Ok(VarianceReport {
        value: terms.iter().sum::<f64>() / (4.0 * std::f64::consts::PI),
        tail_estimate: spec.variance_tail(lmax),
        l_max: lmax,
    })
}

/// `E[X_t(x)^n]` for `n ≤ 4` (Gaussian initial data).
pub fn higher_moments(spec: &IsotropicSpectrum, params: &SolutionParams, lmax: usize, n: u32) -> Result<f64> {
    match n {
        1 | 3 => Ok(0.0),
        2 => Ok(variance(spec, params, lmax)?.value),
        4 => {
            let v = variance(spec, params, lmax)?.value;
            Ok(3.0 * v * v)
        }
        _ => Err(Error::UnsupportedMethod(format!("moments of order {n} are not supported"))),
    }
}

/// The raw multiple sum `Σ_{l_1..l_n} Π l̃_j √((2l_j+1)/4π) E[a_{l_1 0} ⋯ a_{l_n 0}]`
/// for `n ∈ {2, 4}`, evaluated term by term. Cost `(lmax+1)^n`.
pub fn raw_moment_sum(spec: &IsotropicSpectrum, params: &SolutionParams, lmax: usize, n: u32) -> Result<f64> {
    if n != 2 && n != 4 {
        return Err(Error::UnsupportedMethod(format!("raw sums are provided for n = 2, 4, not {n}")));
    }
    let solver = SpectralSolver::new(params.clone());
    let w: Vec<f64> = (0..=lmax)
        .map(|l| Ok(solver.multiplier(l)? * ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt()))
        .collect::<Result<_>>()?;
    let c: Vec<f64> = (0..=lmax).map(|l| spec.cl(l)).collect();
    let pair = |a: usize, b: usize| if a == b { c[a] } else { 0.0 };
    let r = 0..=lmax;
    if n == 2 {
        return Ok(r.clone().flat_map(|a| r.clone().map(move |b| (a, b)))
            .map(|(a, b)| w[a] * w[b] * pair(a, b))
            .sum());
    }
    let mut total = 0.0;
    for a in 0..=lmax {
        for b in 0..=lmax {
            for d in 0..=lmax {
                for e in 0..=lmax {
                    let m4 = pair(a, b) * pair(d, e) + pair(a, d) * pair(b, e) + pair(a, e) * pair(b, d);
                    if m4 != 0.0 {
                        total += w[a] * w[b] * w[d] * w[e] * m4;
                    }
                }
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub l: usize,
    #[serde(rename = "C_l")]
    pub c_l: f64,
    #[serde(rename = "C_l_t")]
    pub c_l_t: f64,
    #[serde(rename = "C_star_l_t")]
    pub c_star_l_t: f64,
    pub bound: f64,
    pub empirical: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub t: f64,
    pub gamma: f64,
    pub phi: String,
    pub psi: String,
    #[serde(rename = "L_max")]
    pub l_max: usize,
    pub n_realizations: usize,
    pub seed: Option<u64>,
    /// Standard errors of the empirical column; absent for fewer than two realizations.
    pub empirical_se: Option<Vec<f64>>,
    pub sigma_grid_size: usize,
    pub decay_fit: Option<DecayFit>,
}

/// Per-degree spectrum table plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub rows: Vec<SpectrumRow>,
    pub meta: SpectrumMeta,
}

impl SpectrumReport {
    /// Theoretical columns; `empirical` is the ensemble of solved coefficient sets, if any.
    pub fn build(
        spec: &IsotropicSpectrum,
        params: &SolutionParams,
        lmax: usize,
        empirical: Option<&[HarmonicCoeffs]>,
        sigmas: &[f64],
        seed: Option<u64>,
    ) -> Result<Self> {
        let emp = match empirical {
            Some(e) => Some(empirical_cl_ensemble(e)?),
            None => None,
        };
        Self::from_estimates(spec, params, lmax, emp, sigmas, seed)
    }

    /// As [`build`](Self::build), from precomputed ensemble estimates of `Ĉ_l`.
    pub fn from_estimates(
        spec: &IsotropicSpectrum,
        params: &SolutionParams,
        lmax: usize,
        emp: Option<Vec<Estimate>>,
        sigmas: &[f64],
        seed: Option<u64>,
    ) -> Result<Self> {
        let solver = SpectralSolver::new(params.clone());
        let rows: Vec<SpectrumRow> = (0..=lmax)
            .into_par_iter()
            .map(|l| {
                let c_l_t = theoretical_with(&solver, spec, l)?;
                let bound = if params.t > 0.0 {
                    cl_bound(spec, params, l, sigmas)?
                } else {
                    spec.cl(l)
                };
                Ok(SpectrumRow {
                    l,
                    c_l: spec.cl(l),
                    c_l_t,
                    c_star_l_t: (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * c_l_t,
                    bound,
                    empirical: emp.as_ref().and_then(|e| e.get(l)).map(|e| e.mean),
                })
            })
            .collect::<Result<_>>()?;
        let n = emp.as_ref().and_then(|e| e.first()).map_or(0, |e| e.n);
        Ok(Self {
            rows,
            meta: SpectrumMeta {
                t: params.t,
                gamma: params.gamma,
                phi: params.phi.label(),
                psi: params.psi.label(),
                l_max: lmax,
                n_realizations: n,
                seed,
                empirical_se: emp.filter(|_| n > 1).map(|e| e.iter().map(|x| x.se).collect()),
                sigma_grid_size: sigmas.len(),
                decay_fit: None,
            },
        })
    }

    pub fn with_decay_fit(mut self, fit: DecayFit) -> Self {
        self.meta.decay_fit = Some(fit);
        self
    }

    /// CSV with header `l,C_l,C_l_t,C_star_l_t,bound,empirical`; missing values are empty.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_meta<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut writer, &self.meta)?;
        writeln!(writer)?;
        Ok(())
    }

    /// Writes `path` and the sidecar `path.with_extension("json")`.
    pub fn write_files(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        self.write_meta(std::fs::File::create(path.with_extension("json"))?)
    }
}
