//! The spectral solution at a point against its Monte Carlo representation
//! through subordinated Brownian motion, in both forms.

use nonlocal_sphere::cli::test_points;
use nonlocal_sphere::fields::{
    coordinate_change_estimate, residual_check, sample_gaussian_field, solve_field, IsotropicSpectrum, Representation,
    SolutionParams, TimeGrid,
};
use nonlocal_sphere::sphere::eval_at;
use nonlocal_sphere::symbols::BernsteinSymbol;

fn main() -> nonlocal_sphere::Result<()> {
    let initial = sample_gaussian_field(&IsotropicSpectrum::power_law(1.0, 3.0)?, 6, 17)?;
    let params = SolutionParams::new(BernsteinSymbol::stable(0.6)?, BernsteinSymbol::stable(0.8)?, 0.0, 0.5)?;
    let solved = solve_field(&initial, &params)?;
    for x in test_points()? {
        let exact = eval_at(&solved, x);
        for rep in [Representation::MovedPoint, Representation::Semigroup] {
            let e = coordinate_change_estimate(&initial, &params, x, 50_000, 23, rep)?;
            println!(
                "x = ({:.2}, {:.2}) {rep:?}: spectral {exact:+.5}, Monte Carlo {:+.5} +- {:.1e}",
                x.theta, x.phi, e.mean, e.se
            );
        }
    }
    for r in residual_check(&initial, &params, &TimeGrid::new(1.0, 1000, 0.2)?)?.iter().take(4) {
        println!("mode l = {}: relative residual {:.2e}", r.l, r.relative);
    }
    Ok(())
}
