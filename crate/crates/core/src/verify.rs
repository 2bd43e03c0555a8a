//! Invariant suites with measured values and pinned tolerances.
//!
//! Each suite returns a [`SuiteResult`]; [`VerifyReport`] collects them into a
//! deterministic JSON document (no timings, no thread counts).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fields::{
    coordinate_change_estimate, sample_gaussian_field, solve_field, IsotropicSpectrum, Representation,
    SolutionParams, SpectralSolver,
};
use crate::mc::{self, Estimate};
use crate::quad;
use crate::spectrum::{
    asymptotic_decay, cl_bound, higher_moments, raw_moment_sum, sigma_grid, solved_ensemble_cl,
    spectrum_laplace, theoretical_cl_t, DECAY_RANGE,
};
use crate::sphere::{
    analyze, eval_at, orthonormality_error, synthesize, HarmonicCoeffs, SphericalGrid, SphericalPoint,
};
use crate::symbols::{BernsteinSymbol, SpectralSymbol, SymbolKind};
use crate::timechange::{convolution_derivative, ltilde, ltilde_estimate, neg_moment_estimate, Method};

/// Relative slack below which Monte Carlo differences count as rounding noise.
const EXACT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(label: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }

    /// `|mean - target| / se` against `k`, with rounding-level differences treated as zero.
    pub fn z(label: impl Into<String>, est: &Estimate, target: f64, k: f64) -> Self {
        let d = (est.mean - target).abs();
        let z = if d <= EXACT_SLACK * target.abs().max(1e-300) || d == 0.0 {
            0.0
        } else {
            d / est.se
        };
        Self::at_most(label, z, k)
    }

    pub fn z_pair(label: impl Into<String>, a: &Estimate, b: &Estimate, k: f64) -> Self {
        let d = (a.mean - b.mean).abs();
        let z = if d <= EXACT_SLACK * a.mean.abs().max(1e-300) || d == 0.0 {
            0.0
        } else {
            d / (a.se * a.se + b.se * b.se).sqrt()
        };
        Self::at_most(label, z, k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub applicable: bool,
    pub passed: bool,
    pub note: Option<String>,
    pub checks: Vec<Check>,
}

impl SuiteResult {
    pub fn new(name: impl Into<String>, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            name: name.into(),
            applicable: true,
            passed,
            note: None,
            checks,
        }
    }

    pub fn skipped(name: impl Into<String>, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            applicable: false,
            passed: true,
            note: Some(note.into()),
            checks: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    /// Worst `measured / tolerance` over the checks.
    pub fn worst_ratio(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| if c.tolerance > 0.0 { c.measured / c.tolerance } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub tolerance_scale: f64,
    pub passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn new(seed: u64, tolerance_scale: f64, suites: Vec<SuiteResult>) -> Self {
        Self {
            seed,
            tolerance_scale,
            passed: suites.iter().all(|s| s.passed),
            suites,
        }
    }

    pub fn failing(&self) -> Vec<&str> {
        self.suites.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect()
    }
}

fn label(s: &BernsteinSymbol) -> String {
    s.label()
}

/// `𝔇^Φ_t l̃(·, λ) + λ l̃(·, λ)` on `[window, horizon]`, pointwise relative, sup over nodes.
pub fn eigen_residual(symbol: &BernsteinSymbol, lambda: f64, n_nodes: usize, horizon: f64, window: f64) -> Result<f64> {
    let dt = horizon / (n_nodes - 1) as f64;
    let method = Method::preferred(symbol);
    let u: Vec<f64> = (0..n_nodes)
        .into_par_iter()
        .map(|k| ltilde(symbol, k as f64 * dt, lambda, method))
        .collect::<Result<_>>()?;
    let d = convolution_derivative(&u, dt, symbol)?;
    let mut worst: f64 = 0.0;
    for k in 0..n_nodes {
        if (k as f64) * dt + 1e-12 < window {
            continue;
        }
        worst = worst.max((d[k] + lambda * u[k]).abs() / (lambda * u[k]).abs());
    }
    Ok(worst)
}

pub fn eigenfunction_suite(
    symbols: &[BernsteinSymbol],
    lambdas: &[f64],
    n_nodes: usize,
    tol: f64,
) -> Result<SuiteResult> {
    let mut checks = Vec::new();
    for s in symbols {
        for &lambda in lambdas {
            let r = eigen_residual(s, lambda, n_nodes, 2.0, 0.2)?;
            checks.push(Check::at_most(format!("{} lambda={lambda}", label(s)), r, tol));
        }
    }
    Ok(SuiteResult::new("eigenfunction", checks))
}

fn has_closed_form(s: &BernsteinSymbol) -> bool {
    matches!(s.kind(), SymbolKind::Stable { .. } | SymbolKind::Linear)
}

/// Mittag-Leffler vs inversion on a grid (stable symbols), and Monte Carlo vs the preferred route.
pub fn route_suite(
    symbols: &[BernsteinSymbol],
    times: &[f64],
    lambdas: &[f64],
    rel_tol: f64,
    mc_samples: usize,
    z_tol: f64,
    seed: u64,
) -> Result<SuiteResult> {
    let mut checks = Vec::new();
    for (k, s) in symbols.iter().enumerate() {
        if matches!(s.kind(), SymbolKind::Stable { .. }) {
            let mut worst: f64 = 0.0;
            for &t in times {
                for &lambda in lambdas {
                    let a = ltilde(s, t, lambda, Method::ClosedForm)?;
                    let b = ltilde(s, t, lambda, Method::LaplaceInversion)?;
                    worst = worst.max(((a - b) / a).abs());
                }
            }
            checks.push(Check::at_most(format!("{} closed form vs inversion", label(s)), worst, rel_tol));
        }
        let (t, lambda) = (1.0, 1.0);
        let target = ltilde(s, t, lambda, Method::preferred(s))?;
        let est = ltilde_estimate(
            s,
            t,
            lambda,
            Method::MonteCarlo {
                n: mc_samples,
                seed: mc::subseed(seed, k as u64),
            },
        )?;
        checks.push(Check::z(format!("{} Monte Carlo z-score", label(s)), &est, target, z_tol));
    }
    Ok(SuiteResult::new("route_consistency", checks))
}

/// Spectral solution vs time-changed Brownian motion, both representations.
#[allow(clippy::too_many_arguments)]
pub fn coordinate_change_suite(
    pairs: &[(BernsteinSymbol, BernsteinSymbol)],
    times: &[f64],
    points: &[SphericalPoint],
    initial: &HarmonicCoeffs,
    n: usize,
    z_tol: f64,
    seed: u64,
) -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let mut k = 0u64;
    for (phi, psi) in pairs {
        for &t in times {
            let params = SolutionParams::new(phi.clone(), psi.clone(), 0.0, t)?;
            let solved = solve_field(initial, &params)?;
            for p in points {
                let target = eval_at(&solved, *p);
                let s = mc::subseed(seed, k);
                k += 1;
                for (rep, name) in [(Representation::MovedPoint, "moved"), (Representation::Semigroup, "semigroup")] {
                    let est = coordinate_change_estimate(initial, &params, *p, n, s, rep)?;
                    checks.push(Check::z(
                        format!(
                            "{} / {} t={t} x=({:.4},{:.4}) {name}",
                            label(phi),
                            label(psi),
                            p.theta,
                            p.phi
                        ),
                        &est,
                        target,
                        z_tol,
                    ));
                }
            }
        }
    }
    Ok(SuiteResult::new("coordinate_change", checks))
}

/// Gram-matrix orthonormality and analysis/synthesis round trip of a random band-limited field.
pub fn harmonic_suite(lmax_ortho: usize, lmax_round: usize, tol: f64, seed: u64) -> Result<SuiteResult> {
    let ortho = orthonormality_error(lmax_ortho, &SphericalGrid::for_lmax(lmax_ortho))?;
    let spec = IsotropicSpectrum::table(vec![1.0; lmax_round + 1])?;
    let coeffs = sample_gaussian_field(&spec, lmax_round, seed)?;
    let grid = SphericalGrid::for_lmax(lmax_round);
    let back = analyze(&synthesize(&coeffs, &grid), &grid, lmax_round)?;
    let round = coeffs
        .as_slice()
        .iter()
        .zip(back.as_slice())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    Ok(SuiteResult::new(
        "harmonic_analysis",
        vec![
            Check::at_most(format!("orthonormality l <= {lmax_ortho}"), ortho, tol),
            Check::at_most(format!("round trip L_max = {lmax_round}"), round, tol),
        ],
    ))
}

/// Settings of the spectrum-law suite.
#[derive(Debug, Clone)]
pub struct SpectrumSuite {
    pub spec: IsotropicSpectrum,
    pub params: SolutionParams,
    pub lmax: usize,
    pub realizations: usize,
    pub z_tol: f64,
    pub laplace_tol: f64,
    pub slope_tol: f64,
    pub seed: u64,
}

pub fn spectrum_suite(cfg: &SpectrumSuite) -> Result<SuiteResult> {
    let p = &cfg.params;
    let spec = &cfg.spec;
    let mut checks = Vec::new();
    let solver = SpectralSolver::new(p.clone());

    // (a) ensemble mean of Ĉ_l(X_t)
    let emp = solved_ensemble_cl(spec, p, cfg.lmax, cfg.realizations, cfg.seed)?;
    let mut by_construction: f64 = 0.0;
    let mut worst_z: f64 = 0.0;
    let mut worst_l = 0;
    for (l, e) in emp.iter().enumerate() {
        let c = theoretical_cl_t(spec, p, l)?;
        let m = solver.multiplier(l)?;
        by_construction = by_construction.max((c - m * m * spec.cl(l)).abs());
        let z = Check::z("", e, c, cfg.z_tol).measured;
        if z > worst_z {
            worst_z = z;
            worst_l = l;
        }
    }
    checks.push(Check::at_most("C_l(t) - l~^2 C_l", by_construction, 0.0));
    checks.push(Check::at_most(
        format!("ensemble mean of empirical C_l, worst z at l={worst_l}"),
        worst_z,
        cfg.z_tol,
    ));

    // (b) Laplace identity against numeric forward transform
    if p.t > 0.0 {
        let mut worst: f64 = 0.0;
        for l in [0usize, 1, 2, 5] {
            let rate = p.rate(l);
            for s in [0.5, 1.0, 2.0] {
                let closed = spectrum_laplace(spec, p, l, s)?;
                if closed == 0.0 {
                    continue;
                }
                let numeric = quad::exp_sinh(
                    |t| (-s * t).exp() * solver.trajectory_value(t, rate).unwrap_or(f64::NAN),
                    0.0,
                    1e-10,
                )? * spec.cl(l).sqrt();
                worst = worst.max(((numeric - closed) / closed).abs());
            }
        }
        checks.push(Check::at_most("Laplace identity", worst, cfg.laplace_tol));

        // (c) bound domination
        let grid = sigma_grid(99);
        let mut margin = f64::INFINITY;
        for l in 1..=cfg.lmax {
            let c = theoretical_cl_t(spec, p, l)?;
            let b = cl_bound(spec, p, l, &grid)?;
            if c > 0.0 {
                margin = margin.min(b / c);
            }
        }
        checks.push(Check::at_most("C_l(t) / bound (max over l)", 1.0 / margin, 1.0));

        // (d) decay slopes
        if matches!(spec, IsotropicSpectrum::PowerLaw { .. }) && p.phi.has_tail() {
            let fit = asymptotic_decay(spec, p, DECAY_RANGE)?;
            checks.push(Check::at_most(
                format!("slope {:.4} vs predicted {:.4}", fit.slope, fit.predicted_slope),
                (fit.slope - fit.predicted_slope).abs(),
                cfg.slope_tol,
            ));
            let linear = SolutionParams::new(p.phi.clone(), SpectralSymbol::Bernstein(BernsteinSymbol::linear()), 0.0, p.t)?
                .with_method(p.method);
            let fit = asymptotic_decay(spec, &linear, DECAY_RANGE)?;
            let theta = match spec {
                IsotropicSpectrum::PowerLaw { theta, .. } => *theta,
                _ => unreachable!(),
            };
            checks.push(Check::at_most(
                format!("slope {:.4} vs -theta-3 with linear Psi", fit.slope),
                (fit.slope + theta + 3.0).abs(),
                cfg.slope_tol,
            ));
        }
    }
    Ok(SuiteResult::new(format!("spectrum_laws t={}", p.t), checks))
}

/// Moments of `X_t` at the North Pole and one other point.
#[allow(clippy::too_many_arguments)]
pub fn moments_suite(
    spec: &IsotropicSpectrum,
    params: &SolutionParams,
    lmax: usize,
    realizations: usize,
    raw_lmax: usize,
    z_tol: f64,
    raw_tol: f64,
    seed: u64,
) -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let m1 = higher_moments(spec, params, lmax, 1)?;
    let m3 = higher_moments(spec, params, lmax, 3)?;
    checks.push(Check::at_most("|n=1| + |n=3|", m1.abs() + m3.abs(), 0.0));
    let m2 = higher_moments(spec, params, lmax, 2)?;
    let m4 = higher_moments(spec, params, lmax, 4)?;
    checks.push(Check::at_most("|n=4 - 3 (n=2)^2|", (m4 - 3.0 * m2 * m2).abs(), 0.0));
    let solver = SpectralSolver::new(params.clone());
    let points = [
        ("north pole", SphericalPoint::NORTH_POLE),
        ("(pi/3, 1)", SphericalPoint::new(std::f64::consts::PI / 3.0, 1.0)?),
    ];
    let values: Vec<[f64; 2]> = (0..realizations as u64)
        .into_par_iter()
        .map(|i| {
            let c = solver.solve(&sample_gaussian_field(spec, lmax, mc::subseed(seed, i))?)?;
            Ok([eval_at(&c, points[0].1), eval_at(&c, points[1].1)])
        })
        .collect::<Result<_>>()?;
    for (k, (name, _)) in points.iter().enumerate() {
        let xs: Vec<f64> = values.iter().map(|v| v[k]).collect();
        let sq: Vec<f64> = xs.iter().map(|v| v * v).collect();
        let q: Vec<f64> = xs.iter().map(|v| v.powi(4)).collect();
        checks.push(Check::z(format!("n=2 Monte Carlo at {name}"), &Estimate::from_samples(&sq), m2, z_tol));
        checks.push(Check::z(format!("n=4 Monte Carlo at {name}"), &Estimate::from_samples(&q), m4, z_tol));
    }
    let isserlis = higher_moments(spec, params, raw_lmax, 4)?;
    let raw = raw_moment_sum(spec, params, raw_lmax, 4)?;
    checks.push(Check::at_most(
        format!("raw quadruple sum vs Isserlis, l <= {raw_lmax}"),
        ((raw - isserlis) / isserlis).abs(),
        raw_tol,
    ));
    Ok(SuiteResult::new(format!("moments t={}", params.t), checks))
}

/// Closed-form `E[L_t^{-σ}]` against Monte Carlo.
pub fn neg_moment_suite(
    symbols: &[BernsteinSymbol],
    sigmas: &[f64],
    times: &[f64],
    n: usize,
    z_tol: f64,
    seed: u64,
) -> Result<SuiteResult> {
    let mut checks = Vec::new();
    let mut k = 0u64;
    for s in symbols {
        let route = if has_closed_form(s) { Method::ClosedForm } else { Method::LaplaceInversion };
        for &sigma in sigmas {
            for &t in times {
                let target = neg_moment_estimate(s, t, sigma, route)?.mean;
                let est = neg_moment_estimate(
                    s,
                    t,
                    sigma,
                    Method::MonteCarlo {
                        n,
                        seed: mc::subseed(seed, k),
                    },
                )?;
                k += 1;
                checks.push(Check::z(format!("{} sigma={sigma} t={t}", label(s)), &est, target, z_tol));
            }
        }
    }
    Ok(SuiteResult::new("negative_moments", checks))
}
