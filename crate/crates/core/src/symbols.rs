//! Bernstein functions (Laplace exponents of subordinators), their Lévy tails,
//! and the spectral symbols used for the spatial operator.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad;
use crate::special::{exp_integral_e1, gamma, gamma_lower, upper_incomplete_gamma_neg};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type ComplexFn = Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>;

/// A user-supplied Bernstein function.
///
/// `phi` is required. `tail` (the Lévy tail `Π̄`) enables the convolution
/// derivative and path sampling; `phi_complex` enables contour inversion.
#[derive(Clone)]
pub struct CustomSymbol {
    pub name: String,
    pub drift: f64,
    phi: RealFn,
    phi_complex: Option<ComplexFn>,
    tail: Option<RealFn>,
}

impl CustomSymbol {
    pub fn new(name: impl Into<String>, phi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            drift: 0.0,
            phi: Arc::new(phi),
            phi_complex: None,
            tail: None,
        }
    }

    pub fn with_tail(mut self, tail: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.tail = Some(Arc::new(tail));
        self
    }

    pub fn with_complex(
        mut self,
        phi: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        self.phi_complex = Some(Arc::new(phi));
        self
    }

    pub fn with_drift(mut self, drift: f64) -> Self {
        self.drift = drift;
        self
    }

    pub fn tail_fn(&self) -> Option<&(dyn Fn(f64) -> f64 + Send + Sync)> {
        self.tail.as_deref()
    }
}

impl fmt::Debug for CustomSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomSymbol")
            .field("name", &self.name)
            .field("drift", &self.drift)
            .field("has_tail", &self.tail.is_some())
            .field("has_complex", &self.phi_complex.is_some())
            .finish()
    }
}

/// Catalog entries. Construct through [`BernsteinSymbol`] so that parameters are validated.
#[derive(Clone, Debug)]
pub enum SymbolKind {
    /// `λ^α`
    Stable { alpha: f64 },
    /// `bλ + λ^α`
    StableWithDrift { alpha: f64, b: f64 },
    /// `(λ+β)^α − β^α`
    TemperedStable { alpha: f64, beta: f64 },
    /// `ln(1+λ)`
    Gamma,
    /// `ln(1+λ^α)`
    GeometricStable { alpha: f64 },
    /// `λ`: the ordinary derivative, `H_t = L_t = t`.
    Linear,
    Custom(CustomSymbol),
}

/// Laplace exponent `Φ` of a subordinator: `E[exp(-λ H_t)] = exp(-t Φ(λ))`.
#[derive(Clone, Debug)]
pub struct BernsteinSymbol {
    kind: SymbolKind,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        domain(format!("alpha = {alpha} must lie in (0, 1)"))
    }
}

impl BernsteinSymbol {
    pub fn stable(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: SymbolKind::Stable { alpha },
        })
    }

    pub fn stable_with_drift(alpha: f64, b: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(b >= 0.0 && b.is_finite()) {
            return domain(format!("drift b = {b} must be nonnegative"));
        }
        Ok(Self {
            kind: SymbolKind::StableWithDrift { alpha, b },
        })
    }

    pub fn tempered_stable(alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(beta > 0.0 && beta.is_finite()) {
            return domain(format!("tempering beta = {beta} must be positive"));
        }
        Ok(Self {
            kind: SymbolKind::TemperedStable { alpha, beta },
        })
    }

    pub fn gamma() -> Self {
        Self {
            kind: SymbolKind::Gamma,
        }
    }

    pub fn geometric_stable(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: SymbolKind::GeometricStable { alpha },
        })
    }

    pub fn linear() -> Self {
        Self {
            kind: SymbolKind::Linear,
        }
    }

    pub fn custom(symbol: CustomSymbol) -> Result<Self> {
        if !(symbol.drift >= 0.0) {
            return domain("custom drift must be nonnegative");
        }
        Ok(Self {
            kind: SymbolKind::Custom(symbol),
        })
    }

    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    /// Short human-readable label, e.g. `stable(0.5)`.
    pub fn label(&self) -> String {
        match &self.kind {
            SymbolKind::Stable { alpha } => format!("stable({alpha})"),
            SymbolKind::StableWithDrift { alpha, b } => format!("stable_with_drift({alpha},{b})"),
            SymbolKind::TemperedStable { alpha, beta } => format!("tempered_stable({alpha},{beta})"),
            SymbolKind::Gamma => "gamma".into(),
            SymbolKind::GeometricStable { alpha } => format!("geometric_stable({alpha})"),
            SymbolKind::Linear => "linear".into(),
            SymbolKind::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// `Φ(λ)` for `λ ≥ 0`.
    pub fn phi(&self, lambda: f64) -> f64 {
        debug_assert!(lambda >= 0.0, "phi evaluated at negative lambda {lambda}");
        match &self.kind {
            SymbolKind::Stable { alpha } => lambda.powf(*alpha),
            SymbolKind::StableWithDrift { alpha, b } => b * lambda + lambda.powf(*alpha),
            SymbolKind::TemperedStable { alpha, beta } => {
                beta.powf(*alpha) * (alpha * (lambda / beta).ln_1p()).exp_m1()
            }
            SymbolKind::Gamma => lambda.ln_1p(),
            SymbolKind::GeometricStable { alpha } => lambda.powf(*alpha).ln_1p(),
            SymbolKind::Linear => lambda,
            SymbolKind::Custom(c) => (c.phi)(lambda),
        }
    }

    /// Analytic continuation of `Φ` to `Re s > 0` (principal branches), when known.
    pub fn phi_complex(&self, s: Complex64) -> Option<Complex64> {
        Some(match &self.kind {
            SymbolKind::Stable { alpha } => s.powf(*alpha),
            SymbolKind::StableWithDrift { alpha, b } => s * *b + s.powf(*alpha),
            SymbolKind::TemperedStable { alpha, beta } => (s + *beta).powf(*alpha) - beta.powf(*alpha),
            SymbolKind::Gamma => (s + 1.0).ln(),
            SymbolKind::GeometricStable { alpha } => (s.powf(*alpha) + 1.0).ln(),
            SymbolKind::Linear => s,
            SymbolKind::Custom(c) => return c.phi_complex.as_ref().map(|f| f(s)),
        })
    }

    /// Drift coefficient `b` of the Lévy-Khintchine triplet.
    pub fn drift(&self) -> f64 {
        match &self.kind {
            SymbolKind::StableWithDrift { b, .. } => *b,
            SymbolKind::Linear => 1.0,
            SymbolKind::Custom(c) => c.drift,
            _ => 0.0,
        }
    }

    /// Whether the symbol carries a Lévy measure usable by tail-based code paths.
    pub fn has_tail(&self) -> bool {
        match &self.kind {
            SymbolKind::Linear => false,
            SymbolKind::Custom(c) => c.tail.is_some(),
            _ => true,
        }
    }

    fn unsupported_tail(&self) -> Error {
        Error::UnsupportedSymbol(format!(
            "{} has no Lévy tail available for this operation",
            self.label()
        ))
    }

    /// Lévy tail `Π̄(s) = Π((s, ∞))` for `s > 0`.
    pub fn levy_tail(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return domain(format!("Lévy tail evaluated at s = {s}; needs s > 0"));
        }
        match &self.kind {
            SymbolKind::Stable { alpha } | SymbolKind::StableWithDrift { alpha, .. } => {
                Ok(s.powf(-alpha) / gamma(1.0 - alpha))
            }
            SymbolKind::TemperedStable { alpha, beta } => {
                let g = upper_incomplete_gamma_neg(*alpha, beta * s)?;
                Ok(alpha * beta.powf(*alpha) * g / gamma(1.0 - alpha))
            }
            SymbolKind::Gamma => Ok(exp_integral_e1(s)),
            SymbolKind::GeometricStable { alpha } => geometric_mixture(*alpha, |c| exp_integral_e1(c * s)),
            SymbolKind::Linear => Err(self.unsupported_tail()),
            SymbolKind::Custom(c) => match &c.tail {
                Some(tail) => Ok(tail(s)),
                None => Err(self.unsupported_tail()),
            },
        }
    }

    /// Cumulative tail moments `(∫_0^s Π̄(z) dz, ∫_0^s z Π̄(z) dz)` for `s ≥ 0`.
    pub fn tail_moments(&self, s: f64) -> Result<(f64, f64)> {
        if s < 0.0 {
            return domain(format!("tail moments need s ≥ 0, got {s}"));
        }
        if s == 0.0 {
            return Ok((0.0, 0.0));
        }
        match &self.kind {
            SymbolKind::Stable { alpha } | SymbolKind::StableWithDrift { alpha, .. } => {
                let g = gamma(1.0 - alpha);
                Ok((
                    s.powf(1.0 - alpha) / ((1.0 - alpha) * g),
                    s.powf(2.0 - alpha) / ((2.0 - alpha) * g),
                ))
            }
            SymbolKind::TemperedStable { alpha, beta } => {
                let x = beta * s;
                let c = alpha * beta.powf(*alpha) / gamma(1.0 - alpha);
                let up = upper_incomplete_gamma_neg(*alpha, x)?;
                let m0 = c / beta * (x * up + gamma_lower(1.0 - alpha, x));
                let m1 = c / (beta * beta) * 0.5 * (x * x * up + gamma_lower(2.0 - alpha, x));
                Ok((m0, m1))
            }
            SymbolKind::Gamma => Ok(gamma_tail_moments(1.0, s)),
            SymbolKind::GeometricStable { alpha } => {
                let m0 = geometric_mixture(*alpha, |c| gamma_tail_moments(c, s).0)?;
                let m1 = geometric_mixture(*alpha, |c| gamma_tail_moments(c, s).1)?;
                Ok((m0, m1))
            }
            SymbolKind::Linear => Err(self.unsupported_tail()),
            SymbolKind::Custom(c) => {
                let tail = c.tail.as_ref().ok_or_else(|| self.unsupported_tail())?;
                let m0 = quad::tanh_sinh(|z| tail(z), 0.0, s, 1e-12)?;
                let m1 = quad::tanh_sinh(|z| z * tail(z), 0.0, s, 1e-12)?;
                Ok((m0, m1))
            }
        }
    }
}

/// Moments of the rescaled gamma tail `E₁(c z)` over `[0, s]`.
fn gamma_tail_moments(c: f64, s: f64) -> (f64, f64) {
    let x = c * s;
    let e1 = exp_integral_e1(x);
    let m0 = s * e1 + (-(-x).exp_m1()) / c;
    // 1 - e^{-x}(1 + x), summed directly when cancellation would bite
    let q = if x < 0.5 {
        let mut term = 1.0;
        let mut acc = 0.0;
        for k in 1..40 {
            term *= -x / k as f64;
            if k >= 2 {
                acc += term * (k as f64 - 1.0);
            }
        }
        acc
    } else {
        -(-x).exp_m1() - x * (-x).exp()
    };
    let m1 = 0.5 * s * s * e1 + 0.5 * q / (c * c);
    (m0, m1)
}

/// Geometric-stable tails as a mixture of gamma tails.
///
/// `Π̄(s) = sin(απ)/π ∫_0^∞ E₁(u^{1/α} s) / (u² + 2u cos(απ) + 1) du`, obtained by
/// inserting the integral representation of `E_α(-y^α)` into the Lévy density
/// `α y^{-1} E_α(-y^α)` and integrating in `y` first. The same mixing applies to
/// any functional of the tail that is linear in it.
fn geometric_mixture(alpha: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
    let (sin_a, cos_a) = (alpha * PI).sin_cos();
    let inv_alpha = 1.0 / alpha;
    let integrand = |u: f64| g(u.powf(inv_alpha)) / (u * u + 2.0 * u * cos_a + 1.0);
    let head = quad::tanh_sinh(integrand, 0.0, 1.0, 1e-12)?;
    let tail = quad::exp_sinh(|u| integrand(u), 1.0, 1e-12)?;
    Ok(sin_a / PI * (head + tail))
}

/// Spatial spectral symbol `ψ`, applied to the Laplace-Beltrami eigenvalues `μ_l = l(l+1)`.
#[derive(Clone, Debug)]
pub enum SpectralSymbol {
    Bernstein(BernsteinSymbol),
    /// `ψ(μ) = μ^{α/2} (1+μ)^{γ/2}`.
    RieszBessel { alpha: f64, gamma: f64 },
}

impl SpectralSymbol {
    pub fn riesz_bessel(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return domain(format!("Riesz-Bessel alpha = {alpha} must be positive"));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return domain(format!("Riesz-Bessel gamma = {gamma} must be nonnegative"));
        }
        Ok(Self::RieszBessel { alpha, gamma })
    }

    pub fn eval(&self, mu: f64) -> f64 {
        match self {
            SpectralSymbol::Bernstein(b) => b.phi(mu),
            SpectralSymbol::RieszBessel { alpha, gamma } => {
                mu.powf(0.5 * alpha) * (1.0 + mu).powf(0.5 * gamma)
            }
        }
    }

    pub fn as_bernstein(&self) -> Option<&BernsteinSymbol> {
        match self {
            SpectralSymbol::Bernstein(b) => Some(b),
            SpectralSymbol::RieszBessel { .. } => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            SpectralSymbol::Bernstein(b) => b.label(),
            SpectralSymbol::RieszBessel { alpha, gamma } => format!("riesz_bessel({alpha},{gamma})"),
        }
    }
}

impl From<BernsteinSymbol> for SpectralSymbol {
    fn from(b: BernsteinSymbol) -> Self {
        SpectralSymbol::Bernstein(b)
    }
}

/// `Φ(λ)` as a free function.
pub fn phi_eval(symbol: &BernsteinSymbol, lambda: f64) -> f64 {
    symbol.phi(lambda)
}

pub fn levy_tail(symbol: &BernsteinSymbol, s: f64) -> Result<f64> {
    symbol.levy_tail(s)
}

pub fn spectral_eval(symbol: &SpectralSymbol, mu: f64) -> f64 {
    symbol.eval(mu)
}

/// JSON form `{"kind": "...", "alpha": .., "beta": .., "b": .., "gamma": ..}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl SymbolSpec {
    fn need(&self, v: Option<f64>, name: &str) -> Result<f64> {
        v.ok_or_else(|| Error::Config(format!("symbol kind '{}' needs field '{name}'", self.kind)))
    }

    fn kind(kind: &str) -> Self {
        Self {
            kind: kind.into(),
            ..Self::default()
        }
    }
}

impl TryFrom<&SymbolSpec> for BernsteinSymbol {
    type Error = Error;

    fn try_from(spec: &SymbolSpec) -> Result<Self> {
        let wrap = |r: Result<Self>| r.map_err(|e| Error::Config(e.to_string()));
        match spec.kind.as_str() {
            "stable" => wrap(Self::stable(spec.need(spec.alpha, "alpha")?)),
            "stable_with_drift" => wrap(Self::stable_with_drift(
                spec.need(spec.alpha, "alpha")?,
                spec.need(spec.b, "b")?,
            )),
            "tempered_stable" => wrap(Self::tempered_stable(
                spec.need(spec.alpha, "alpha")?,
                spec.need(spec.beta, "beta")?,
            )),
            "gamma" => Ok(Self::gamma()),
            "geometric_stable" => wrap(Self::geometric_stable(spec.need(spec.alpha, "alpha")?)),
            "linear" => Ok(Self::linear()),
            other => Err(Error::Config(format!("unknown Bernstein symbol kind '{other}'"))),
        }
    }
}

impl TryFrom<&BernsteinSymbol> for SymbolSpec {
    type Error = Error;

    fn try_from(symbol: &BernsteinSymbol) -> Result<Self> {
        Ok(match &symbol.kind {
            SymbolKind::Stable { alpha } => Self {
                alpha: Some(*alpha),
                ..Self::kind("stable")
            },
            SymbolKind::StableWithDrift { alpha, b } => Self {
                alpha: Some(*alpha),
                b: Some(*b),
                ..Self::kind("stable_with_drift")
            },
            SymbolKind::TemperedStable { alpha, beta } => Self {
                alpha: Some(*alpha),
                beta: Some(*beta),
                ..Self::kind("tempered_stable")
            },
            SymbolKind::Gamma => Self::kind("gamma"),
            SymbolKind::GeometricStable { alpha } => Self {
                alpha: Some(*alpha),
                ..Self::kind("geometric_stable")
            },
            SymbolKind::Linear => Self::kind("linear"),
            SymbolKind::Custom(c) => {
                return Err(Error::UnsupportedSymbol(format!(
                    "custom symbol '{}' has no JSON form",
                    c.name
                )))
            }
        })
    }
}

impl TryFrom<&SymbolSpec> for SpectralSymbol {
    type Error = Error;

    fn try_from(spec: &SymbolSpec) -> Result<Self> {
        if spec.kind == "riesz_bessel" {
            return SpectralSymbol::riesz_bessel(
                spec.need(spec.alpha, "alpha")?,
                spec.need(spec.gamma, "gamma")?,
            )
            .map_err(|e| Error::Config(e.to_string()));
        }
        BernsteinSymbol::try_from(spec).map(SpectralSymbol::Bernstein)
    }
}

impl TryFrom<&SpectralSymbol> for SymbolSpec {
    type Error = Error;

    fn try_from(symbol: &SpectralSymbol) -> Result<Self> {
        match symbol {
            SpectralSymbol::Bernstein(b) => SymbolSpec::try_from(b),
            SpectralSymbol::RieszBessel { alpha, gamma } => Ok(Self {
                alpha: Some(*alpha),
                gamma: Some(*gamma),
                ..Self::kind("riesz_bessel")
            }),
        }
    }
}

/// Every catalog entry with sensible parameters, for sweeps and tests.
pub fn catalog() -> Vec<BernsteinSymbol> {
    vec![
        BernsteinSymbol::stable(0.5).expect("valid"),
        BernsteinSymbol::stable_with_drift(0.6, 0.5).expect("valid"),
        BernsteinSymbol::tempered_stable(0.5, 1.0).expect("valid"),
        BernsteinSymbol::gamma(),
        BernsteinSymbol::geometric_stable(0.7).expect("valid"),
        BernsteinSymbol::linear(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::mittag_leffler;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn density_tail(density: impl Fn(f64) -> f64, s: f64) -> f64 {
        quad::exp_sinh(density, s, 1e-12).unwrap()
    }

    #[test]
    fn catalog_phi_values() {
        assert!((phi_eval(&BernsteinSymbol::stable(0.5).unwrap(), 4.0) - 2.0).abs() < 1e-15);
        let ts = BernsteinSymbol::tempered_stable(0.3, 2.0).unwrap();
        assert_eq!(phi_eval(&ts, 0.0), 0.0);
        let g = BernsteinSymbol::gamma();
        assert!((phi_eval(&g, std::f64::consts::E - 1.0) - 1.0).abs() < 1e-15);
        let ts = BernsteinSymbol::tempered_stable(0.5, 1.0).unwrap();
        assert!(rel(ts.phi(3.0), 1.0) < 1e-15);
    }

    #[test]
    fn invalid_parameters_rejected_at_construction() {
        assert!(BernsteinSymbol::stable(1.0).is_err());
        assert!(BernsteinSymbol::stable(0.0).is_err());
        assert!(BernsteinSymbol::tempered_stable(0.5, 0.0).is_err());
        assert!(BernsteinSymbol::stable_with_drift(0.5, -1.0).is_err());
        assert!(BernsteinSymbol::geometric_stable(1.3).is_err());
        assert!(SpectralSymbol::riesz_bessel(0.0, 1.0).is_err());
    }

    #[test]
    fn phi_vanishes_at_zero_and_is_monotone_concave() {
        for s in catalog() {
            assert_eq!(s.phi(0.0), 0.0, "{}", s.label());
            let grid: Vec<f64> = (1..400).map(|i| 0.05 * i as f64).collect();
            for w in grid.windows(3) {
                let (a, b, c) = (s.phi(w[0]), s.phi(w[1]), s.phi(w[2]));
                assert!(a <= b && b <= c, "{} not monotone", s.label());
                assert!(b + 1e-12 >= 0.5 * (a + c), "{} not concave", s.label());
            }
        }
    }

    #[test]
    fn driftless_symbols_are_sublinear() {
        for s in catalog().into_iter().filter(|s| s.drift() == 0.0) {
            let r1 = s.phi(1e4) / 1e4;
            let r2 = s.phi(1e8) / 1e8;
            assert!(r2 < r1 && r2 < 1e-2, "{}", s.label());
        }
    }

    #[test]
    fn stable_tail_matches_density_quadrature() {
        let s = BernsteinSymbol::stable(0.5).unwrap();
        let v = levy_tail(&s, 1.0).unwrap();
        let g = gamma(0.5);
        let oracle = density_tail(|y| 0.5 * y.powf(-1.5) / g, 1.0);
        assert!(rel(v, 0.564_189_583_547_756_3) < 1e-12);
        assert!(rel(v, oracle) < 1e-9);
    }

    #[test]
    fn tempered_tail_uses_scaled_argument() {
        for &(alpha, beta, s) in &[(0.5, 1.0, 1.0), (0.5, 2.5, 0.4), (0.8, 0.3, 3.0)] {
            let sym = BernsteinSymbol::tempered_stable(alpha, beta).unwrap();
            let g = gamma(1.0 - alpha);
            let oracle = density_tail(|y| alpha * (-beta * y).exp() * y.powf(-alpha - 1.0) / g, s);
            let v = sym.levy_tail(s).unwrap();
            assert!(rel(v, oracle) < 1e-8, "alpha={alpha} beta={beta} s={s}: {v} vs {oracle}");
        }
    }

    #[test]
    fn gamma_tail_vanishes_at_infinity() {
        let g = BernsteinSymbol::gamma();
        assert!(g.levy_tail(50.0).unwrap() < 1e-23);
        assert!(g.levy_tail(800.0).unwrap() == 0.0);
    }

    #[test]
    fn geometric_tail_matches_mittag_leffler_density() {
        for &alpha in &[0.4, 0.7, 0.9] {
            let sym = BernsteinSymbol::geometric_stable(alpha).unwrap();
            for &s in &[0.05, 0.5, 2.0] {
                let density = |y: f64| alpha / y * mittag_leffler(alpha, -y.powf(alpha)).unwrap();
                let oracle = density_tail(density, s);
                let v = sym.levy_tail(s).unwrap();
                assert!(rel(v, oracle) < 1e-7, "alpha={alpha} s={s}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn linear_and_bad_arguments_are_rejected() {
        assert!(matches!(
            BernsteinSymbol::linear().levy_tail(1.0),
            Err(Error::UnsupportedSymbol(_))
        ));
        assert!(matches!(
            BernsteinSymbol::gamma().levy_tail(0.0),
            Err(Error::Domain(_))
        ));
    }

    // Φ(λ)/λ = b + ∫_0^∞ e^{-λz} Π̄(z) dz
    #[test]
    fn laplace_identity_for_catalog_tails() {
        for s in catalog().into_iter().filter(|s| s.has_tail()) {
            for &lambda in &[0.5, 1.0, 2.0, 5.0] {
                let rhs = quad::exp_sinh(|z| (-lambda * z).exp() * s.levy_tail(z).unwrap(), 0.0, 1e-9)
                    .unwrap()
                    + s.drift();
                let lhs = s.phi(lambda) / lambda;
                assert!(rel(rhs, lhs) < 1e-4, "{} lambda={lambda}: {lhs} vs {rhs}", s.label());
            }
        }
    }

    #[test]
    fn tails_are_nonincreasing() {
        for s in catalog().into_iter().filter(|s| s.has_tail()) {
            let mut prev = f64::INFINITY;
            for i in 1..200 {
                let v = s.levy_tail(0.02 * i as f64).unwrap();
                assert!(v <= prev && v >= 0.0, "{}", s.label());
                prev = v;
            }
        }
    }

    #[test]
    fn tail_moments_match_quadrature() {
        for s in catalog().into_iter().filter(|s| s.has_tail()) {
            for &x in &[0.01, 0.3, 2.0] {
                let (m0, m1) = s.tail_moments(x).unwrap();
                let q0 = quad::tanh_sinh(|z| s.levy_tail(z).unwrap(), 0.0, x, 1e-11).unwrap();
                let q1 = quad::tanh_sinh(|z| z * s.levy_tail(z).unwrap(), 0.0, x, 1e-11).unwrap();
                assert!(rel(m0, q0) < 1e-8, "{} x={x}: {m0} vs {q0}", s.label());
                assert!(rel(m1, q1) < 1e-8, "{} x={x}: {m1} vs {q1}", s.label());
            }
        }
    }

    #[test]
    fn spectral_symbol_values() {
        let rb = SpectralSymbol::riesz_bessel(1.0, 0.0).unwrap();
        assert!((spectral_eval(&rb, 4.0) - 2.0).abs() < 1e-15);
        let rb = SpectralSymbol::riesz_bessel(0.7, 1.3).unwrap();
        assert_eq!(rb.eval(0.0), 0.0);
        let st: SpectralSymbol = BernsteinSymbol::stable(0.5).unwrap().into();
        assert!((st.eval(6.0) - 6f64.sqrt()).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..100 {
            let v = rb.eval(i as f64 * 0.7);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn evaluation_is_bit_reproducible() {
        for s in catalog() {
            for &l in &[0.3, 7.0, 1234.5] {
                assert_eq!(s.phi(l).to_bits(), s.phi(l).to_bits());
            }
        }
    }

    #[test]
    fn complex_phi_agrees_on_real_axis() {
        for s in catalog() {
            for &l in &[0.1, 1.0, 9.0] {
                let c = s.phi_complex(Complex64::new(l, 0.0)).unwrap();
                assert!((c.re - s.phi(l)).abs() < 1e-13 * s.phi(l).max(1.0), "{}", s.label());
                assert!(c.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn custom_symbol_requires_tail_for_tail_paths() {
        let c = CustomSymbol::new("sqrt", |l| l.sqrt());
        let s = BernsteinSymbol::custom(c).unwrap();
        assert!(!s.has_tail());
        assert!(s.levy_tail(1.0).is_err());
        assert!(s.phi_complex(Complex64::new(1.0, 0.0)).is_none());
        assert!(SymbolSpec::try_from(&s).is_err());
    }

    #[test]
    fn json_form_round_trips() {
        let json = r#"{"kind": "tempered_stable", "alpha": 0.5, "beta": 2.0}"#;
        let spec: SymbolSpec = serde_json::from_str(json).unwrap();
        let sym = BernsteinSymbol::try_from(&spec).unwrap();
        assert!(matches!(sym.kind(), SymbolKind::TemperedStable { .. }));
        assert_eq!(SymbolSpec::try_from(&sym).unwrap(), spec);
        let bad: SymbolSpec = serde_json::from_str(r#"{"kind": "stable"}"#).unwrap();
        assert!(matches!(BernsteinSymbol::try_from(&bad), Err(Error::Config(_))));
        let rb: SymbolSpec = serde_json::from_str(r#"{"kind": "riesz_bessel", "alpha": 1.0, "gamma": 1.0}"#).unwrap();
        assert!(SpectralSymbol::try_from(&rb).is_ok());
        assert!(BernsteinSymbol::try_from(&rb).is_err());
    }
}
