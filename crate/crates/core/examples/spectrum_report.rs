//! Angular power spectrum of the solution: theoretical, bound, empirical,
//! and the high-degree decay fit.

use nonlocal_sphere::fields::{IsotropicSpectrum, SolutionParams};
use nonlocal_sphere::spectrum::{
    asymptotic_decay, higher_moments, sigma_grid, solved_ensemble_cl, variance, SpectrumReport, DECAY_RANGE,
};
use nonlocal_sphere::symbols::BernsteinSymbol;

fn main() -> nonlocal_sphere::Result<()> {
    let spec = IsotropicSpectrum::power_law(1.0, 4.0)?;
    let params = SolutionParams::new(BernsteinSymbol::stable(0.5)?, BernsteinSymbol::stable(0.8)?, 0.0, 1.0)?;
    let lmax = 12;
    let emp = solved_ensemble_cl(&spec, &params, lmax, 2000, 1)?;
    let report = SpectrumReport::from_estimates(&spec, &params, lmax, Some(emp), &sigma_grid(99), Some(1))?
        .with_decay_fit(asymptotic_decay(&spec, &params, DECAY_RANGE)?);
    report.write_csv(std::io::stdout())?;
    let fit = report.meta.decay_fit.as_ref().expect("fit");
    println!("decay slope {:.3}, predicted {:.3}", fit.slope, fit.predicted_slope);
    let v = variance(&spec, &params, 64)?;
    println!(
        "variance {:.6} (tail beyond l = {}: {:.1e}), fourth moment {:.6}",
        v.value,
        v.l_max,
        v.tail_estimate,
        higher_moments(&spec, &params, 64, 4)?
    );
    Ok(())
}
