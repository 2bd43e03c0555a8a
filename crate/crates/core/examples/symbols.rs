//! Laplace exponents and Lévy tails of the catalog symbols.

use nonlocal_sphere::symbols::{catalog, SpectralSymbol};

fn main() -> nonlocal_sphere::Result<()> {
    println!("{:<26} {:>12} {:>12} {:>12}", "symbol", "phi(1)", "phi(100)", "tail(0.5)");
    for s in catalog() {
        let tail = if s.has_tail() { format!("{:12.6}", s.levy_tail(0.5)?) } else { format!("{:>12}", "-") };
        println!("{:<26} {:12.6} {:12.6} {tail}", s.label(), s.phi(1.0), s.phi(100.0));
    }
    let rb = SpectralSymbol::riesz_bessel(1.2, 0.5)?;
    for l in [1usize, 10, 100] {
        let mu = (l * (l + 1)) as f64;
        println!("{} at mu_{l}: {:.6}", rb.label(), rb.eval(mu));
    }
    Ok(())
}
