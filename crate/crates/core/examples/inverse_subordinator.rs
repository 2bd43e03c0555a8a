//! l̃(t, λ) = E[exp(-λ L_t)] by closed form, Laplace inversion and Monte Carlo,
//! plus samples of the time change τ = F(L_t) written as CSV.

use nonlocal_sphere::symbols::{catalog, BernsteinSymbol};
use nonlocal_sphere::timechange::{ltilde, ltilde_estimate, sample_tau, write_time_change_csv, Method};
use nonlocal_sphere::verify::Check;

fn main() -> nonlocal_sphere::Result<()> {
    let (t, lambda) = (1.0, 2.0);
    for s in catalog() {
        let exact = ltilde(&s, t, lambda, Method::preferred(&s))?;
        let mc = ltilde_estimate(&s, t, lambda, Method::MonteCarlo { n: 50_000, seed: 7 })?;
        println!(
            "{:<26} l~ = {exact:.6}  MC = {:.6} +- {:.1e}  z = {:.2}",
            s.label(),
            mc.mean,
            mc.se,
            Check::z("", &mc, exact, 3.0).measured
        );
    }
    let stable = BernsteinSymbol::stable(0.7)?;
    let ml = ltilde(&stable, t, lambda, Method::ClosedForm)?;
    let inv = ltilde(&stable, t, lambda, Method::LaplaceInversion)?;
    println!("stable(0.7): Mittag-Leffler {ml:.12} vs Talbot {inv:.12}");

    let taus = sample_tau(&stable, &BernsteinSymbol::stable(0.5)?, t, 5, 11)?;
    write_time_change_csv(std::io::stdout(), &taus)?;
    Ok(())
}
