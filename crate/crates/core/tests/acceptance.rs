//! Acceptance criteria. One PASS/FAIL line per criterion; nonzero exit if any fails.

use std::fs;
use std::time::{Duration, Instant};

use nonlocal_sphere::cli::{cmd_verify, test_points, RunConfig};
use nonlocal_sphere::fields::{sample_gaussian_field, IsotropicSpectrum, SolutionParams};
use nonlocal_sphere::symbols::{catalog, BernsteinSymbol};
use nonlocal_sphere::verify::{
    coordinate_change_suite, eigenfunction_suite, harmonic_suite, moments_suite, neg_moment_suite, route_suite,
    spectrum_suite, SpectrumSuite, SuiteResult,
};
use nonlocal_sphere::Result;

const SEED: u64 = 20_240_601;
const MC: usize = 100_000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn summarize(suites: &[SuiteResult]) -> Outcome {
    let passed = suites.iter().all(|s| s.passed);
    let n: usize = suites.iter().map(|s| s.checks.len()).sum();
    let worst = suites
        .iter()
        .flat_map(|s| s.checks.iter())
        .max_by(|a, b| (a.measured / a.tolerance).total_cmp(&(b.measured / b.tolerance)));
    let mut detail = format!("{n} checks");
    if let Some(c) = worst {
        detail.push_str(&format!(
            ", worst {}: {:.3e} (tol {:.1e})",
            c.label, c.measured, c.tolerance
        ));
    }
    for s in suites {
        for c in s.failures() {
            detail.push_str(&format!("\n      failed {}: {}: {:.3e} > {:.1e}", s.name, c.label, c.measured, c.tolerance));
        }
    }
    Outcome { passed, detail }
}

fn stable(a: f64) -> BernsteinSymbol {
    BernsteinSymbol::stable(a).unwrap()
}

fn c1() -> Result<Outcome> {
    let symbols = [
        stable(0.5),
        stable(0.8),
        BernsteinSymbol::tempered_stable(0.5, 1.0)?,
        BernsteinSymbol::gamma(),
    ];
    Ok(summarize(&[eigenfunction_suite(&symbols, &[0.5, 2.0, 10.0], 2000, 1e-2)?]))
}

fn c2() -> Result<Outcome> {
    let mut symbols = catalog();
    symbols.push(stable(0.8));
    Ok(summarize(&[route_suite(
        &symbols,
        &[0.25, 0.5, 1.0, 1.5, 2.0],
        &[0.1, 0.5, 1.0, 5.0, 10.0],
        1e-5,
        MC,
        3.0,
        SEED,
    )?]))
}

fn c3() -> Result<Outcome> {
    let initial = sample_gaussian_field(&IsotropicSpectrum::power_law(1.0, 3.0)?, 6, SEED)?;
    let pairs = [
        (stable(0.5), BernsteinSymbol::linear()),
        (BernsteinSymbol::tempered_stable(0.5, 1.0)?, stable(0.7)),
    ];
    Ok(summarize(&[coordinate_change_suite(
        &pairs,
        &[0.5, 1.0],
        &test_points()?,
        &initial,
        MC,
        3.0,
        SEED + 3,
    )?]))
}

fn c4() -> Result<Outcome> {
    Ok(summarize(&[harmonic_suite(20, 64, 1e-10, SEED + 4)?]))
}

fn c5() -> Result<Outcome> {
    let spec = IsotropicSpectrum::power_law(1.0, 4.0)?;
    let mut suites = Vec::new();
    for t in [0.5, 1.0] {
        suites.push(spectrum_suite(&SpectrumSuite {
            spec: spec.clone(),
            params: SolutionParams::new(stable(0.5), stable(0.8), 0.0, t)?,
            lmax: 32,
            realizations: 10_000,
            z_tol: 3.0,
            laplace_tol: 1e-4,
            slope_tol: 0.3,
            seed: SEED + 5,
        })?);
    }
    Ok(summarize(&suites))
}

fn c6() -> Result<Outcome> {
    let spec = IsotropicSpectrum::power_law(1.0, 4.0)?;
    let params = SolutionParams::new(stable(0.5), stable(0.8), 0.0, 0.5)?;
    Ok(summarize(&[moments_suite(&spec, &params, 32, 10_000, 16, 3.0, 1e-10, SEED + 6)?]))
}

fn c7() -> Result<Outcome> {
    Ok(summarize(&[neg_moment_suite(
        &[stable(0.5), stable(0.8)],
        &[0.3, 0.5],
        &[0.5, 1.0],
        MC,
        3.0,
        SEED + 7,
    )?]))
}

fn c8() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig {
        seed: SEED,
        ..RunConfig::default()
    };
    let mut reports = Vec::new();
    for run in ["a", "b"] {
        cfg.out = dir.path().join(run);
        cmd_verify(&cfg)?;
        reports.push(fs::read(cfg.out.join("verify_report.json"))?);
    }
    let same = reports[0] == reports[1];
    Ok(Outcome {
        passed: same,
        detail: format!("{} bytes, identical: {same}", reports[0].len()),
    })
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        ("1 eigenfunction residual <= 1e-2", c1, Duration::from_secs(60)),
        ("2 route consistency (rel 1e-5, 3 SE)", c2, Duration::from_secs(300)),
        ("3 spectral vs coordinate change (3 SE)", c3, Duration::from_secs(600)),
        ("4 orthonormality and round trip <= 1e-10", c4, Duration::from_secs(60)),
        ("5 spectrum laws (3 SE, 1e-4, bound, slope 0.3)", c5, Duration::from_secs(900)),
        ("6 moments (exact, 3 SE, rel 1e-10)", c6, Duration::from_secs(300)),
        ("7 negative moments (3 SE)", c7, Duration::from_secs(300)),
        ("8 verify determinism (byte identical)", c8, Duration::from_secs(600)),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f, budget) in criteria {
        if let Some(p) = &filter {
            if !name.contains(p.as_str()) {
                continue;
            }
        }
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_time = elapsed <= budget;
        let status = if ok && in_time { "PASS" } else { "FAIL" };
        if status == "FAIL" {
            failed += 1;
        }
        println!(
            "criterion {name}: {status} [{:.1}s of {}s] {detail}",
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
