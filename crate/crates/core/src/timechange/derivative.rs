//! Convolution-type derivative `𝔇^Φ_t u(t) = b u'(t) + ∫_0^t u'(t-s) Π̄(s) ds`
//! on a uniform grid, by product integration against the exact tail moments.

use crate::error::{domain, Error, Result};
use crate::symbols::BernsteinSymbol;

/// How `u'` enters the convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DerivativeScheme {
    /// `u` piecewise linear: each cell contributes its exact increment against `∫Π̄`.
    /// Insensitive to an integrable singularity of `u'` at the origin.
    #[default]
    CellIncrements,
    /// `u'` sampled at the nodes (given, or central differences) and interpolated linearly.
    NodalDerivative,
}

/// Second-order finite differences: central inside, one-sided at both ends.
pub fn finite_difference(u: &[f64], dt: f64) -> Vec<f64> {
    let n = u.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let s = (u[1] - u[0]) / dt;
            d.fill(s);
        }
        return d;
    }
    d[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * dt);
    for k in 1..n - 1 {
        d[k] = (u[k + 1] - u[k - 1]) / (2.0 * dt);
    }
    d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * dt);
    d
}

/// Product-integration weights for one symbol and one grid, reusable across trajectories.
#[derive(Debug, Clone)]
pub struct ConvolutionKernel {
    dt: f64,
    drift: f64,
    ordinary: bool,
    /// `∫_{ih}^{(i+1)h} Π̄`
    m0: Vec<f64>,
    /// `∫_{ih}^{(i+1)h} (s - ih) Π̄(s) ds`
    m1: Vec<f64>,
}

impl ConvolutionKernel {
    pub fn new(symbol: &BernsteinSymbol, dt: f64, n_nodes: usize) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return domain(format!("grid step {dt} must be positive"));
        }
        if n_nodes < 3 {
            return Err(Error::InsufficientData(format!(
                "convolution derivative needs at least 3 grid points, got {n_nodes}"
            )));
        }
        if matches!(symbol.kind(), crate::symbols::SymbolKind::Linear) {
            return Ok(Self {
                dt,
                drift: 1.0,
                ordinary: true,
                m0: Vec::new(),
                m1: Vec::new(),
            });
        }
        if !symbol.has_tail() {
            return Err(Error::UnsupportedSymbol(format!(
                "{} has no Lévy tail for the convolution kernel",
                symbol.label()
            )));
        }
        let cumulative: Vec<(f64, f64)> = (0..n_nodes)
            .map(|i| symbol.tail_moments(i as f64 * dt))
            .collect::<Result<_>>()?;
        let mut m0 = Vec::with_capacity(n_nodes - 1);
        let mut m1 = Vec::with_capacity(n_nodes - 1);
        for i in 0..n_nodes - 1 {
            let (a0, a1) = cumulative[i];
            let (b0, b1) = cumulative[i + 1];
            let d0 = b0 - a0;
            m0.push(d0);
            m1.push((b1 - a1) - i as f64 * dt * d0);
        }
        Ok(Self {
            dt,
            drift: symbol.drift(),
            ordinary: false,
            m0,
            m1,
        })
    }

    pub fn len(&self) -> usize {
        self.m0.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.apply_with(u, DerivativeScheme::default(), None)
    }

    pub fn apply_with(
        &self,
        u: &[f64],
        scheme: DerivativeScheme,
        du: Option<&[f64]>,
    ) -> Result<Vec<f64>> {
        let n = u.len();
        if n < 3 {
            return Err(Error::InsufficientData(format!(
                "convolution derivative needs at least 3 grid points, got {n}"
            )));
        }
        if !self.ordinary && n > self.len() {
            return domain(format!("trajectory of {n} nodes exceeds kernel of {}", self.len()));
        }
        if let Some(d) = du {
            if d.len() != n {
                return domain("derivative samples must match the trajectory length");
            }
        }
        let g: Vec<f64> = match du {
            Some(d) => d.to_vec(),
            None => finite_difference(u, self.dt),
        };
        if self.ordinary {
            return Ok(g);
        }
        let h = self.dt;
        let mut out = vec![0.0; n];
        match scheme {
            DerivativeScheme::CellIncrements => {
                let slopes: Vec<f64> = u.windows(2).map(|w| (w[1] - w[0]) / h).collect();
                for k in 1..n {
                    let mut acc = 0.0;
                    for j in 0..k {
                        acc += slopes[j] * self.m0[k - 1 - j];
                    }
                    out[k] = acc;
                }
            }
            DerivativeScheme::NodalDerivative => {
                for k in 1..n {
                    let mut acc = 0.0;
                    for i in 0..k {
                        let near = g[k - i];
                        let far = g[k - i - 1];
                        acc += near * self.m0[i] + (far - near) * self.m1[i] / h;
                    }
                    out[k] = acc;
                }
            }
        }
        if self.drift != 0.0 {
            for (o, d) in out.iter_mut().zip(&g) {
                *o += self.drift * d;
            }
        }
        Ok(out)
    }
}

/// `𝔇^Φ_t u` at every node of the uniform grid `t_k = k dt`.
pub fn convolution_derivative(u: &[f64], dt: f64, symbol: &BernsteinSymbol) -> Result<Vec<f64>> {
    convolution_derivative_with(u, dt, symbol, DerivativeScheme::default(), None)
}

pub fn convolution_derivative_with(
    u: &[f64],
    dt: f64,
    symbol: &BernsteinSymbol,
    scheme: DerivativeScheme,
    du: Option<&[f64]>,
) -> Result<Vec<f64>> {
    if u.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "convolution derivative needs at least 3 grid points, got {}",
            u.len()
        )));
    }
    ConvolutionKernel::new(symbol, dt, u.len())?.apply_with(u, scheme, du)
}
