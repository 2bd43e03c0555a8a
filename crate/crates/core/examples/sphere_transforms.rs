//! Gauss-Legendre synthesis and analysis, the finite-difference Laplace-Beltrami
//! check, and Brownian motion on the sphere.

use nonlocal_sphere::fields::{sample_gaussian_field, IsotropicSpectrum};
use nonlocal_sphere::mc;
use nonlocal_sphere::sphere::{
    analyze, laplace_beltrami_fd, mu, orthonormality_error, sample_sphere_bm, synthesize, BrownianMarginal,
    HarmonicCoeffs, SphericalGrid, SphericalPoint,
};

fn main() -> nonlocal_sphere::Result<()> {
    let lmax = 32;
    let grid = SphericalGrid::for_lmax(lmax);
    println!("grid {} x {}, orthonormality error to l = 20: {:.2e}", grid.n_theta, grid.n_phi, orthonormality_error(20, &SphericalGrid::for_lmax(20))?);

    let field = sample_gaussian_field(&IsotropicSpectrum::power_law(1.0, 3.0)?, lmax, 5)?;
    let back = analyze(&synthesize(&field, &grid), &grid, lmax)?;
    let err = field.as_slice().iter().zip(back.as_slice()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("round trip max error: {err:.2e}");

    let fine = SphericalGrid::new(256, 512)?;
    let y = HarmonicCoeffs::unit(3, 3, 2)?;
    let map = synthesize(&y, &fine);
    let lap = laplace_beltrami_fd(&map, &fine)?;
    let scale = map.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * mu(3);
    let worst = lap.values.iter().zip(&map.values).map(|(d, u)| (d + mu(3) * u).abs()).fold(0.0, f64::max);
    println!("Laplace-Beltrami eigenrelation for Y_3,2 on 256 x 512: {:.2e}", worst / scale);

    let start = SphericalPoint::NORTH_POLE;
    let t = 0.3;
    let n = 20_000;
    let marginal = BrownianMarginal::new(t)?;
    let mut rng = mc::stream(9, 0);
    let mean_cos: f64 = (0..n).map(|_| marginal.sample(start, &mut rng).theta.cos()).sum::<f64>() / n as f64;
    println!("E[cos angle] after t = {t}: {mean_cos:.4} (exact {:.4})", (-2.0 * t).exp());
    let p = sample_sphere_bm(start, t, 3)?;
    println!("one draw: theta = {:.4}, phi = {:.4}", p.theta, p.phi);
    Ok(())
}
