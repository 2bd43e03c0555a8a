//! The convolution-type derivative applied to t ↦ l̃(t, λ): the residual
//! D u + λ u should vanish away from the origin.

use nonlocal_sphere::symbols::BernsteinSymbol;
use nonlocal_sphere::timechange::{convolution_derivative, ltilde, Method};

fn main() -> nonlocal_sphere::Result<()> {
    let n = 2001;
    let dt = 2.0 / (n - 1) as f64;
    for s in [BernsteinSymbol::stable(0.5)?, BernsteinSymbol::tempered_stable(0.5, 1.0)?, BernsteinSymbol::gamma()] {
        for lambda in [0.5, 2.0, 10.0] {
            let method = Method::preferred(&s);
            let u: Vec<f64> = (0..n).map(|k| ltilde(&s, k as f64 * dt, lambda, method)).collect::<Result<_, _>>()?;
            let d = convolution_derivative(&u, dt, &s)?;
            let worst = (0..n)
                .filter(|&k| k as f64 * dt >= 0.2)
                .map(|k| ((d[k] + lambda * u[k]) / (lambda * u[k])).abs())
                .fold(0.0, f64::max);
            println!("{:<24} lambda = {lambda:>4}: sup relative residual on [0.2, 2] = {worst:.2e}", s.label());
        }
    }
    Ok(())
}
