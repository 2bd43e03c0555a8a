//! Spherical harmonics on the unit sphere, Gauss-Legendre grids, harmonic
//! analysis and synthesis, and Brownian motion driven by the Laplace-Beltrami operator.
//!
//! Conventions: `θ` is colatitude (North Pole at `θ = 0`), `φ` longitude.
//! `Y_lm = sqrt((2l+1)/(4π) (l-m)!/(l+m)!) Q_lm(cos θ) e^{imφ}` with the
//! Condon-Shortley phase inside `Q_lm`, so `Y_{l,-m} = (-1)^m conj(Y_lm)`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mc;
use crate::quad::gauss_legendre;

/// Eigenvalue `μ_l = l(l+1)` of `-Δ`.
pub fn mu(l: usize) -> f64 {
    let l = l as f64;
    l * (l + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalPoint {
    pub theta: f64,
    pub phi: f64,
}

impl SphericalPoint {
    pub const NORTH_POLE: SphericalPoint = SphericalPoint { theta: 0.0, phi: 0.0 };

    /// Validates `θ ∈ [0, π]` and wraps `φ` into `[0, 2π)`.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) || !phi.is_finite() {
            return domain(format!("invalid spherical point (θ={theta}, φ={phi})"));
        }
        Ok(Self {
            theta,
            phi: phi.rem_euclid(2.0 * PI),
        })
    }

    pub fn to_cartesian(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn from_cartesian(v: [f64; 3]) -> Self {
        let rho = v[0].hypot(v[1]);
        let theta = rho.atan2(v[2]).clamp(0.0, PI);
        let phi = if rho == 0.0 {
            0.0
        } else {
            v[1].atan2(v[0]).rem_euclid(2.0 * PI)
        };
        Self { theta, phi }
    }

    /// Great-circle distance.
    pub fn angle_to(&self, other: &SphericalPoint) -> f64 {
        let a = self.to_cartesian();
        let b = other.to_cartesian();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }

    /// Point at angular distance `gamma` from `self` in the direction `azimuth`,
    /// measured from the local `e_θ` towards `e_φ`.
    pub fn moved(&self, gamma: f64, azimuth: f64) -> SphericalPoint {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        let x = [st * cp, st * sp, ct];
        let e_theta = [ct * cp, ct * sp, -st];
        let e_phi = [-sp, cp, 0.0];
        let (sg, cg) = gamma.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        let mut v = [0.0; 3];
        for k in 0..3 {
            v[k] = cg * x[k] + sg * (ca * e_theta[k] + sa * e_phi[k]);
        }
        SphericalPoint::from_cartesian(v)
    }
}

fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

fn tri_len(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Orthonormalized `P̄_lm(x)` for `0 ≤ m ≤ l ≤ lmax`, stored at `l(l+1)/2 + m`.
/// `s = sqrt(1 - x²)` is passed separately to keep accuracy near the poles.
fn normalized_legendre_into(lmax: usize, x: f64, s: f64, out: &mut [f64]) {
    let mut pmm = 0.5 / PI.sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        out[tri(m, m)] = pmm;
        if m == lmax {
            break;
        }
        let mut p2 = pmm;
        let mut p1 = (2.0 * m as f64 + 3.0).sqrt() * x * pmm;
        out[tri(m + 1, m)] = p1;
        let m2 = (m * m) as f64;
        for l in m + 2..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - m2)).sqrt();
            let lm1 = lf - 1.0;
            let b = ((lm1 * lm1 - m2) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
            let p = a * (x * p1 - b * p2);
            out[tri(l, m)] = p;
            p2 = p1;
            p1 = p;
        }
    }
}

fn normalized_legendre(lmax: usize, x: f64, s: f64) -> Vec<f64> {
    let mut out = vec![0.0; tri_len(lmax)];
    normalized_legendre_into(lmax, x, s, &mut out);
    out
}

/// Associated Legendre function `Q_lm(x)` with the Condon-Shortley phase.
pub fn legendre_q(l: usize, m: i64, x: f64) -> Result<f64> {
    let mp = m.unsigned_abs() as usize;
    if mp > l {
        return domain(format!("|m| = {mp} exceeds l = {l}"));
    }
    if !(-1.0..=1.0).contains(&x) {
        return domain(format!("x = {x} outside [-1, 1]"));
    }
    let s = ((1.0 - x) * (1.0 + x)).sqrt();
    let mut pmm = 1.0;
    for i in 1..=mp {
        pmm *= -((2 * i - 1) as f64) * s;
    }
    let value = if l == mp {
        pmm
    } else {
        let mut p2 = pmm;
        let mut p1 = x * (2 * mp + 1) as f64 * pmm;
        for ll in mp + 2..=l {
            let p = (x * (2 * ll - 1) as f64 * p1 - (ll + mp - 1) as f64 * p2) / (ll - mp) as f64;
            p2 = p1;
            p1 = p;
        }
        p1
    };
    if m >= 0 {
        return Ok(value);
    }
    let mut ratio = 1.0;
    for k in (l - mp + 1)..=(l + mp) {
        ratio /= k as f64;
    }
    let sign = if mp % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * ratio * value)
}

/// Orthonormal complex spherical harmonic `Y_lm(θ, φ)`.
pub fn eval_ylm(l: usize, m: i64, p: SphericalPoint) -> Result<Complex64> {
    let mp = m.unsigned_abs() as usize;
    if mp > l {
        return domain(format!("|m| = {mp} exceeds l = {l}"));
    }
    let (s, x) = p.theta.sin_cos();
    let table = normalized_legendre(l, x, s);
    let value = table[tri(l, mp)];
    let y = Complex64::from_polar(value, mp as f64 * p.phi);
    Ok(if m >= 0 {
        y
    } else if mp % 2 == 0 {
        y.conj()
    } else {
        -y.conj()
    })
}

/// Coefficients `a_lm`, `0 ≤ l ≤ L_max`, `|m| ≤ l`, stored at `l² + l + m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    lmax: usize,
    data: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
struct CoeffRow {
    l: usize,
    m: i64,
    re: f64,
    im: f64,
}

impl HarmonicCoeffs {
    pub fn zeros(lmax: usize) -> Self {
        Self {
            lmax,
            data: vec![Complex64::new(0.0, 0.0); (lmax + 1) * (lmax + 1)],
        }
    }

    /// Single mode `a_lm = 1` (not real unless `m = 0`).
    pub fn unit(lmax: usize, l: usize, m: i64) -> Result<Self> {
        let mut c = Self::zeros(lmax);
        c.set(l, m, Complex64::new(1.0, 0.0))?;
        Ok(c)
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    /// Storage position `l² + l + m`.
    pub fn index(l: usize, m: i64) -> usize {
        idx(l, m)
    }

    fn check(&self, l: usize, m: i64) -> Result<usize> {
        if l > self.lmax || m.unsigned_abs() as usize > l {
            return domain(format!("(l={l}, m={m}) outside L_max = {}", self.lmax));
        }
        Ok(idx(l, m))
    }

    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        self.data[idx(l, m)]
    }

    pub fn try_get(&self, l: usize, m: i64) -> Result<Complex64> {
        self.check(l, m).map(|i| self.data[i])
    }

    pub fn set(&mut self, l: usize, m: i64, v: Complex64) -> Result<()> {
        let i = self.check(l, m)?;
        self.data[i] = v;
        Ok(())
    }

    /// Sets `a_lm = v` and `a_{l,-m} = (-1)^m conj(v)`.
    pub fn set_real_pair(&mut self, l: usize, m: i64, v: Complex64) -> Result<()> {
        let mp = m.unsigned_abs() as i64;
        let (pos, neg) = if m >= 0 { (v, reflect(mp, v)) } else { (reflect(mp, v), v) };
        if mp == 0 {
            return self.set(l, 0, Complex64::new(v.re, 0.0));
        }
        self.set(l, mp, pos)?;
        self.set(l, -mp, neg)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// `(l, m, a_lm)` in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, i64, Complex64)> + '_ {
        (0..=self.lmax).flat_map(move |l| {
            (-(l as i64)..=l as i64).map(move |m| (l, m, self.data[idx(l, m)]))
        })
    }

    /// Multiplies every degree `l` by `f(l)`.
    pub fn scale_degrees(&self, f: impl Fn(usize) -> f64) -> Self {
        let mut out = self.clone();
        for l in 0..=self.lmax {
            let g = f(l);
            for v in &mut out.data[l * l..(l + 1) * (l + 1)] {
                *v *= g;
            }
        }
        out
    }

    /// Largest violation of `a_{l,-m} = (-1)^m conj(a_lm)`.
    pub fn reality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for l in 0..=self.lmax {
            worst = worst.max(self.get(l, 0).im.abs());
            for m in 1..=l as i64 {
                worst = worst.max((self.get(l, -m) - reflect(m, self.get(l, m))).norm());
            }
        }
        worst
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.reality_defect() <= tol
    }

    /// `Σ_m |a_lm|²`.
    pub fn degree_power(&self, l: usize) -> f64 {
        self.data[l * l..(l + 1) * (l + 1)].iter().map(|v| v.norm_sqr()).sum()
    }

    /// `Σ_l (2l+1)^{2s} Σ_m |a_lm|²`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        (0..=self.lmax)
            .map(|l| ((2 * l + 1) as f64).powf(2.0 * s) * self.degree_power(l))
            .sum()
    }

    pub fn truncate(&self, lmax: usize) -> Self {
        let mut out = Self::zeros(lmax);
        let n = (lmax.min(self.lmax) + 1).pow(2);
        out.data[..n].copy_from_slice(&self.data[..n]);
        out
    }

    /// CSV with header `l,m,re,im`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (l, m, v) in self.iter() {
            w.serialize(CoeffRow { l, m, re: v.re, im: v.im })?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: CoeffRow = row?;
            rows.push(row);
        }
        let lmax = rows.iter().map(|r| r.l).max().unwrap_or(0);
        let mut out = Self::zeros(lmax);
        for r in rows {
            out.set(r.l, r.m, Complex64::new(r.re, r.im))?;
        }
        Ok(out)
    }
}

fn idx(l: usize, m: i64) -> usize {
    ((l * l + l) as i64 + m) as usize
}

fn reflect(m: i64, v: Complex64) -> Complex64 {
    if m % 2 == 0 {
        v.conj()
    } else {
        -v.conj()
    }
}

/// Gauss-Legendre nodes in `cos θ` (north to south) times equispaced longitudes.
#[derive(Debug, Clone)]
pub struct SphericalGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub theta: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub sin_theta: Vec<f64>,
    /// Gauss-Legendre weights in `cos θ`.
    pub gl_weights: Vec<f64>,
    pub phi: Vec<f64>,
}

impl SphericalGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta == 0 || n_phi == 0 {
            return domain("grid needs at least one node in each direction");
        }
        let (x, w) = gauss_legendre(n_theta);
        let theta: Vec<f64> = x.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect();
        let sin_theta = theta.iter().map(|t| t.sin()).collect();
        let phi = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        Ok(Self {
            n_theta,
            n_phi,
            theta,
            cos_theta: x,
            sin_theta,
            gl_weights: w,
            phi,
        })
    }

    /// Smallest grid integrating band-limited products exactly up to `lmax`.
    pub fn for_lmax(lmax: usize) -> Self {
        Self::new(lmax + 1, 2 * lmax + 1).expect("nonempty grid")
    }

    /// Quadrature weight of node `(i, ·)` for `sin θ dθ dφ`.
    pub fn weight(&self, i: usize) -> f64 {
        self.gl_weights[i] * 2.0 * PI / self.n_phi as f64
    }

    pub fn total_weight(&self) -> f64 {
        (0..self.n_theta).map(|i| self.weight(i)).sum::<f64>() * self.n_phi as f64
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, i: usize, j: usize) -> SphericalPoint {
        SphericalPoint {
            theta: self.theta[i],
            phi: self.phi[j],
        }
    }

    pub fn supports(&self, lmax: usize) -> bool {
        self.n_theta > lmax && self.n_phi > 2 * lmax
    }

    pub fn check_exact(&self, lmax: usize) -> Result<()> {
        if self.supports(lmax) {
            Ok(())
        } else {
            Err(Error::ExactnessViolation(format!(
                "{}x{} grid cannot resolve L_max = {lmax}; need at least {}x{}",
                self.n_theta,
                self.n_phi,
                lmax + 1,
                2 * lmax + 1
            )))
        }
    }
}

/// Real samples on a grid, row-major with `θ` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub n_theta: usize,
    pub n_phi: usize,
    pub values: Vec<f64>,
}

/// JSON sidecar of a binary map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub n_theta: usize,
    pub n_phi: usize,
    #[serde(rename = "L_max")]
    pub l_max: usize,
    pub t: f64,
    pub seed: u64,
}

impl FieldMap {
    pub fn from_fn(grid: &SphericalGrid, f: impl Fn(SphericalPoint) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_theta {
            for j in 0..grid.n_phi {
                values.push(f(grid.point(i, j)));
            }
        }
        Self {
            n_theta: grid.n_theta,
            n_phi: grid.n_phi,
            values,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_phi + j]
    }

    pub fn max_abs_diff(&self, other: &FieldMap) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sidecar_path(path: &Path) -> PathBuf {
        path.with_extension("json")
    }

    /// Little-endian float64 samples, plus `<name>.json` sidecar next to it.
    pub fn write_binary(&self, path: &Path, sidecar: &MapSidecar) -> Result<()> {
        if sidecar.n_theta != self.n_theta || sidecar.n_phi != self.n_phi {
            return domain("sidecar shape does not match the map");
        }
        let mut w = BufWriter::new(File::create(path)?);
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        let json = serde_json::to_string_pretty(sidecar)?;
        std::fs::write(Self::sidecar_path(path), json + "\n")?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<(FieldMap, MapSidecar)> {
        let sidecar: MapSidecar =
            serde_json::from_str(&std::fs::read_to_string(Self::sidecar_path(path))?)?;
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        let n = sidecar.n_theta * sidecar.n_phi;
        if bytes.len() != 8 * n {
            return Err(Error::Config(format!(
                "binary map holds {} bytes, sidecar expects {}",
                bytes.len(),
                8 * n
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok((
            FieldMap {
                n_theta: sidecar.n_theta,
                n_phi: sidecar.n_phi,
                values,
            },
            sidecar,
        ))
    }

    /// CSV with header `theta,phi,value`.
    pub fn write_csv<W: Write>(&self, writer: W, grid: &SphericalGrid) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["theta", "phi", "value"])?;
        for i in 0..self.n_theta {
            for j in 0..self.n_phi {
                w.write_record([
                    grid.theta[i].to_string(),
                    grid.phi[j].to_string(),
                    self.get(i, j).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Precomputed Legendre rows and longitude twiddles for repeated transforms on one grid.
#[derive(Debug, Clone)]
pub struct SphericalTransform {
    grid: SphericalGrid,
    lmax: usize,
    plm: Vec<f64>,
    cos_tab: Vec<f64>,
    sin_tab: Vec<f64>,
}

impl SphericalTransform {
    pub fn new(grid: &SphericalGrid, lmax: usize) -> Self {
        let width = tri_len(lmax);
        let mut plm = vec![0.0; width * grid.n_theta];
        plm.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
            normalized_legendre_into(lmax, grid.cos_theta[i], grid.sin_theta[i], row);
        });
        let n = grid.n_phi;
        let cos_tab = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).cos()).collect();
        let sin_tab = (0..n).map(|k| (2.0 * PI * k as f64 / n as f64).sin()).collect();
        Self {
            grid: grid.clone(),
            lmax,
            plm,
            cos_tab,
            sin_tab,
        }
    }

    pub fn grid(&self) -> &SphericalGrid {
        &self.grid
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    fn row(&self, i: usize) -> &[f64] {
        let w = tri_len(self.lmax);
        &self.plm[i * w..(i + 1) * w]
    }

    /// Real part of `Σ a_lm Y_lm` on the grid; degrees above the table's `L_max` are ignored.
    pub fn synthesize(&self, coeffs: &HarmonicCoeffs) -> FieldMap {
        let lmax = self.lmax.min(coeffs.lmax());
        let n_phi = self.grid.n_phi;
        let mut values = vec![0.0; self.grid.len()];
        values.par_chunks_mut(n_phi).enumerate().for_each(|(i, ring)| {
            let p = self.row(i);
            // h[m] multiplies e^{imφ}, negative orders folded in by conjugation
            let mut h = vec![Complex64::new(0.0, 0.0); lmax + 1];
            for (m, hm) in h.iter_mut().enumerate() {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                let mut pos = Complex64::new(0.0, 0.0);
                let mut neg = Complex64::new(0.0, 0.0);
                for l in m..=lmax {
                    let pl = p[tri(l, m)];
                    pos += coeffs.get(l, m as i64) * pl;
                    if m > 0 {
                        neg += coeffs.get(l, -(m as i64)) * (sign * pl);
                    }
                }
                *hm = pos + neg.conj();
            }
            for (j, out) in ring.iter_mut().enumerate() {
                let mut acc = h[0].re;
                for (m, hm) in h.iter().enumerate().skip(1) {
                    let k = (m * j) % n_phi;
                    acc += hm.re * self.cos_tab[k] - hm.im * self.sin_tab[k];
                }
                *out = acc;
            }
        });
        FieldMap {
            n_theta: self.grid.n_theta,
            n_phi,
            values,
        }
    }

    /// Quadrature coefficients of a real field up to the table's `L_max`.
    pub fn analyze(&self, map: &FieldMap) -> Result<HarmonicCoeffs> {
        let g = &self.grid;
        if map.n_theta != g.n_theta || map.n_phi != g.n_phi {
            return domain("field samples do not match the grid");
        }
        g.check_exact(self.lmax)?;
        let lmax = self.lmax;
        let n_phi = g.n_phi;
        let partial: Vec<Vec<Complex64>> = (0..g.n_theta)
            .into_par_iter()
            .map(|i| {
                let ring = &map.values[i * n_phi..(i + 1) * n_phi];
                let w = g.weight(i);
                let p = self.row(i);
                let mut acc = vec![Complex64::new(0.0, 0.0); tri_len(lmax)];
                for m in 0..=lmax {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (j, f) in ring.iter().enumerate() {
                        let k = (m * j) % n_phi;
                        re += f * self.cos_tab[k];
                        im -= f * self.sin_tab[k];
                    }
                    let fm = Complex64::new(re, im) * w;
                    for l in m..=lmax {
                        acc[tri(l, m)] = fm * p[tri(l, m)];
                    }
                }
                acc
            })
            .collect();
        let mut out = HarmonicCoeffs::zeros(lmax);
        for l in 0..=lmax {
            for m in 0..=l {
                let v: Complex64 = partial.iter().map(|row| row[tri(l, m)]).sum();
                out.set_real_pair(l, m as i64, v)?;
            }
        }
        Ok(out)
    }
}

pub fn synthesize(coeffs: &HarmonicCoeffs, grid: &SphericalGrid) -> FieldMap {
    SphericalTransform::new(grid, coeffs.lmax()).synthesize(coeffs)
}

pub fn analyze(map: &FieldMap, grid: &SphericalGrid, lmax: usize) -> Result<HarmonicCoeffs> {
    grid.check_exact(lmax)?;
    SphericalTransform::new(grid, lmax).analyze(map)
}

/// Real part of `Σ a_lm Y_lm(p)`.
pub fn eval_at(coeffs: &HarmonicCoeffs, p: SphericalPoint) -> f64 {
    let lmax = coeffs.lmax();
    let (s, x) = p.theta.sin_cos();
    let table = normalized_legendre(lmax, x, s);
    let mut acc = 0.0;
    for m in 0..=lmax {
        let e = Complex64::from_polar(1.0, m as f64 * p.phi);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let mut h = Complex64::new(0.0, 0.0);
        for l in m..=lmax {
            let pl = table[tri(l, m)];
            h += coeffs.get(l, m as i64) * pl;
            if m > 0 {
                h += (coeffs.get(l, -(m as i64)) * (sign * pl)).conj();
            }
        }
        acc += (h * e).re;
    }
    acc
}

/// Largest entry of `|G - I|`, `G` the quadrature Gram matrix of all `Y_lm` with `l ≤ lmax`.
pub fn orthonormality_error(lmax: usize, grid: &SphericalGrid) -> Result<f64> {
    grid.check_exact(lmax)?;
    let modes: Vec<(usize, i64)> = (0..=lmax)
        .flat_map(|l| (-(l as i64)..=l as i64).map(move |m| (l, m)))
        .collect();
    let n_pts = grid.len();
    // row k holds sqrt(w) Y_k at every node
    let mut y = vec![Complex64::new(0.0, 0.0); modes.len() * n_pts];
    for i in 0..grid.n_theta {
        let p = normalized_legendre(lmax, grid.cos_theta[i], grid.sin_theta[i]);
        let sw = grid.weight(i).sqrt();
        for j in 0..grid.n_phi {
            for (k, &(l, m)) in modes.iter().enumerate() {
                let mp = m.unsigned_abs() as usize;
                let v = Complex64::from_polar(sw * p[tri(l, mp)], mp as f64 * grid.phi[j]);
                let v = if m >= 0 { v } else { reflect(m, v) };
                y[k * n_pts + i * grid.n_phi + j] = v;
            }
        }
    }
    let worst = (0..modes.len())
        .into_par_iter()
        .map(|a| {
            let ra = &y[a * n_pts..(a + 1) * n_pts];
            let mut w: f64 = 0.0;
            for b in 0..modes.len() {
                let rb = &y[b * n_pts..(b + 1) * n_pts];
                let g: Complex64 = ra.iter().zip(rb).map(|(u, v)| u * v.conj()).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                w = w.max((g - target).norm());
            }
            w
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Weights of the first and second derivative at `x0` from values at `nodes` (Fornberg).
fn fd_weights(x0: f64, nodes: &[f64]) -> [Vec<f64>; 2] {
    let n = nodes.len();
    let mut c = vec![[0.0f64; 3]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(2);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    [c.iter().map(|w| w[1]).collect(), c.iter().map(|w| w[2]).collect()]
}

/// Finite-difference Laplace-Beltrami operator on a grid with even `n_phi`: five-point
/// stencils in `θ` and `φ`. Rows near the poles use ghost rows reflected through the pole.
pub fn laplace_beltrami_fd(map: &FieldMap, grid: &SphericalGrid) -> Result<FieldMap> {
    let (nt, np) = (grid.n_theta, grid.n_phi);
    if np % 2 == 1 || np < 4 || nt < 3 {
        return domain("finite-difference Laplacian needs n_phi even, n_phi ≥ 4 and n_theta ≥ 3");
    }
    let dphi = 2.0 * PI / np as f64;
    let half = np / 2;
    // (row, longitude shift, colatitude) for extended row index
    let row = |i: isize| -> (usize, usize, f64) {
        if i < 0 {
            let r = (-i - 1) as usize;
            (r, half, -grid.theta[r])
        } else if i as usize >= nt {
            let r = 2 * nt - 1 - i as usize;
            (r, half, 2.0 * PI - grid.theta[r])
        } else {
            (i as usize, 0, grid.theta[i as usize])
        }
    };
    let mut out = vec![0.0; grid.len()];
    out.par_chunks_mut(np).enumerate().for_each(|(i, ring)| {
        let th = grid.theta[i];
        let (s, c) = th.sin_cos();
        let stencil: Vec<(usize, usize, f64)> =
            (-2..=2).map(|k| row(i as isize + k)).filter(|r| r.0 < nt).collect();
        let nodes: Vec<f64> = stencil.iter().map(|r| r.2).collect();
        let [w1, w2] = fd_weights(th, &nodes);
        let weights: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| b + c / s * a).collect();
        for (j, o) in ring.iter_mut().enumerate() {
            let dtt: f64 = stencil
                .iter()
                .zip(&weights)
                .map(|(&(r, shift, _), w)| w * map.get(r, (j + shift) % np))
                .sum();
            let f = |k: usize| map.get(i, (j + np + k - 2) % np);
            let dpp = (-f(0) + 16.0 * f(1) - 30.0 * f(2) + 16.0 * f(3) - f(4)) / (12.0 * dphi * dphi);
            *o = dtt + dpp / (s * s);
        }
    });
    Ok(FieldMap {
        n_theta: nt,
        n_phi: np,
        values: out,
    })
}

/// Hard cap on the degree of the heat-kernel series.
pub const BM_DEGREE_CAP: usize = 4096;
const BM_SERIES_TOL: f64 = 1e-14;

/// Distribution of the angular displacement of Brownian motion (generator `Δ`) after time `t`.
#[derive(Debug, Clone)]
pub struct BrownianMarginal {
    t: f64,
    /// `e^{-t μ_l}` for `l = 0..=L`.
    weights: Vec<f64>,
}

impl BrownianMarginal {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return domain(format!("Brownian time {t} must be positive"));
        }
        let mut weights = vec![1.0];
        let mut l = 1;
        loop {
            let w = (-t * mu(l)).exp();
            weights.push(w);
            if (2 * l + 1) as f64 * w < BM_SERIES_TOL {
                break;
            }
            l += 1;
            if l > BM_DEGREE_CAP {
                return Err(Error::StepTooSmall {
                    t,
                    needed: ((32.3 / t).sqrt()).ceil() as usize,
                    cap: BM_DEGREE_CAP,
                });
            }
        }
        Ok(Self { t, weights })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn degree(&self) -> usize {
        self.weights.len() - 1
    }

    /// `(P(γ_t ≤ γ), density at γ)`.
    pub fn cdf_and_density(&self, gamma: f64) -> (f64, f64) {
        let (s, c) = gamma.sin_cos();
        let half = (0.5 * gamma).sin();
        let lmax = self.degree();
        let (mut p_prev, mut p) = (1.0, c);
        let mut cdf = 2.0 * half * half;
        let mut dens = self.weights[0];
        for l in 1..=lmax {
            let lf = l as f64;
            let p_next = ((2.0 * lf + 1.0) * c * p - lf * p_prev) / (lf + 1.0);
            let w = self.weights[l];
            cdf += w * (p_prev - p_next);
            dens += (2.0 * lf + 1.0) * w * p;
            p_prev = p;
            p = p_next;
        }
        (0.5 * cdf, 0.5 * s * dens)
    }

    /// Inverse distribution function by safeguarded Newton iteration.
    pub fn quantile(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, PI);
        let mut g = (-4.0 * self.t * (-u).ln_1p()).sqrt().clamp(1e-12, 0.5 * PI);
        for _ in 0..200 {
            let (f, d) = self.cdf_and_density(g);
            let r = f - u;
            if r > 0.0 {
                hi = g;
            } else {
                lo = g;
            }
            let mut next = g - r / d;
            if !(d > 0.0) || !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - g).abs() <= 1e-14 * g.max(1e-300) || hi - lo <= 1e-15 {
                return next;
            }
            g = next;
        }
        g
    }

    pub fn sample<R: Rng + ?Sized>(&self, start: SphericalPoint, rng: &mut R) -> SphericalPoint {
        let u: f64 = rng.sample(Open01);
        let gamma = self.quantile(u);
        let azimuth = 2.0 * PI * rng.random::<f64>();
        start.moved(gamma, azimuth)
    }
}

/// `x + B_t` by exact inversion of the heat-kernel marginal.
pub fn sample_sphere_bm(start: SphericalPoint, t: f64, rng_seed: u64) -> Result<SphericalPoint> {
    let mut rng = mc::stream(rng_seed, 0);
    Ok(BrownianMarginal::new(t)?.sample(start, &mut rng))
}

/// `x + B_t` for any `t ≥ 0`: exact series where the degree cap allows, otherwise the
/// small-time parametrix (Rayleigh proposal with variance `2t`, accepted with
/// probability `sqrt(sin γ / γ)`).
pub fn brownian_step<R: Rng + ?Sized>(start: SphericalPoint, t: f64, rng: &mut R) -> Result<SphericalPoint> {
    if t == 0.0 {
        return Ok(start);
    }
    match BrownianMarginal::new(t) {
        Ok(m) => Ok(m.sample(start, rng)),
        Err(Error::StepTooSmall { .. }) => {
            let gamma = loop {
                let e: f64 = rng.sample(Exp1);
                let g = (4.0 * t * e).sqrt();
                if g < PI && rng.random::<f64>() < (g.sin() / g).sqrt() {
                    break g;
                }
            };
            Ok(start.moved(gamma, 2.0 * PI * rng.random::<f64>()))
        }
        Err(e) => Err(e),
    }
}

/// Tangent-plane Euler scheme with `n_sub` substeps, for cross-checking the exact sampler.
pub fn euler_bm_step<R: Rng + ?Sized>(
    start: SphericalPoint,
    t: f64,
    n_sub: usize,
    rng: &mut R,
) -> SphericalPoint {
    let sd = (2.0 * t / n_sub.max(1) as f64).sqrt();
    let mut p = start;
    for _ in 0..n_sub.max(1) {
        let a: f64 = rng.sample(rand_distr::StandardNormal);
        let b: f64 = rng.sample(rand_distr::StandardNormal);
        p = p.moved(sd * a.hypot(b), b.atan2(a));
    }
    p
}
