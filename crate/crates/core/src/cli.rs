//! Command-line front end: run configuration, orchestration and file emission.
//!
//! Settings resolve as built-in defaults, then the `--config` JSON file, then
//! command-line flags. Every command writes `manifest.json` into the output
//! directory, listing each emitted file with its SHA-256 digest and the
//! resolved configuration. A manifest can be passed back as `--config` to
//! reproduce a run.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fields::{sample_gaussian_field, IsotropicSpectrum, SolutionParams, SpectralSolver};
use crate::spectrum::{asymptotic_decay, sigma_grid, solved_ensemble_cl, SpectrumReport, DECAY_RANGE};
use crate::sphere::{MapSidecar, SphericalGrid, SphericalPoint, SphericalTransform};
use crate::symbols::{BernsteinSymbol, SpectralSymbol, SymbolKind, SymbolSpec};
use crate::timechange::{convolution_derivative_with, DerivativeScheme};
use crate::verify::{self, SpectrumSuite, SuiteResult, VerifyReport};

const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOptions {
    /// Multiplies every tolerance; 0 makes every inexact check fail.
    pub tolerance_scale: f64,
    pub mc_samples: usize,
    pub realizations: usize,
    pub spectrum_lmax: usize,
    pub eigen_nodes: usize,
    /// Degree of the random initial field used by the coordinate-change suite.
    pub field_lmax: usize,
    pub raw_moment_lmax: usize,
    /// Runs only the named suites when set.
    pub suites: Option<Vec<String>>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            tolerance_scale: 1.0,
            mc_samples: 100_000,
            realizations: 10_000,
            spectrum_lmax: 32,
            eigen_nodes: 2000,
            field_lmax: 6,
            raw_moment_lmax: 16,
            suites: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeriveOptions {
    /// CSV with columns `t,u` and optionally `du`, uniform in `t` from 0.
    pub input: Option<PathBuf>,
    /// Use the nodal-derivative scheme (with `du` when supplied).
    pub nodal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub spectrum: IsotropicSpectrum,
    pub phi: SymbolSpec,
    pub psi: SymbolSpec,
    pub gamma: f64,
    pub t: Vec<f64>,
    #[serde(rename = "L_max")]
    pub lmax: usize,
    pub n_theta: Option<usize>,
    pub n_phi: Option<usize>,
    /// Ensemble size.
    pub n: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub sigma_grid: usize,
    /// `simulate`: compare the solved coefficients with `e^{-t(γ+Ψ(μ_l))}` (needs `phi = linear`).
    pub check: bool,
    pub verify: VerifyOptions,
    pub derive: DeriveOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            spectrum: IsotropicSpectrum::PowerLaw {
                amplitude: 1.0,
                theta: 4.0,
            },
            phi: SymbolSpec {
                kind: "stable".into(),
                alpha: Some(0.5),
                ..SymbolSpec::default()
            },
            psi: SymbolSpec {
                kind: "stable".into(),
                alpha: Some(0.8),
                ..SymbolSpec::default()
            },
            gamma: 0.0,
            t: vec![0.5, 1.0],
            lmax: 32,
            n_theta: None,
            n_phi: None,
            n: 100,
            seed: 42,
            out: PathBuf::from("out"),
            sigma_grid: 99,
            check: false,
            verify: VerifyOptions::default(),
            derive: DeriveOptions::default(),
        }
    }
}

impl RunConfig {
    /// Reads a config file, or the `config` field of a manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let value = match value.get("manifest_version") {
            Some(_) => value
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Config(format!("{}: manifest without config", path.display())))?,
            None => value,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn phi_symbol(&self) -> Result<BernsteinSymbol> {
        BernsteinSymbol::try_from(&self.phi)
    }

    pub fn psi_symbol(&self) -> Result<SpectralSymbol> {
        SpectralSymbol::try_from(&self.psi)
    }

    pub fn params(&self, t: f64) -> Result<SolutionParams> {
        SolutionParams::new(self.phi_symbol()?, self.psi_symbol()?, self.gamma, t).map_err(config_err)
    }

    pub fn grid(&self) -> Result<SphericalGrid> {
        match (self.n_theta, self.n_phi) {
            (None, None) => Ok(SphericalGrid::for_lmax(self.lmax)),
            (a, b) => SphericalGrid::new(a.unwrap_or(self.lmax + 1), b.unwrap_or(2 * self.lmax + 1)).map_err(config_err),
        }
    }

    /// Checks everything that does not need a numerical computation.
    pub fn validate(&self) -> Result<()> {
        self.spectrum.validate().map_err(config_err)?;
        for &t in &self.t {
            self.params(t)?;
        }
        if self.t.is_empty() {
            return Err(Error::Config("at least one time value is required".into()));
        }
        if !(self.verify.tolerance_scale >= 0.0 && self.verify.tolerance_scale.is_finite()) {
            return Err(Error::Config("tolerance_scale must be finite and nonnegative".into()));
        }
        if self.sigma_grid == 0 {
            return Err(Error::Config("sigma_grid must be positive".into()));
        }
        self.grid()?;
        Ok(())
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "nonlocal-sphere", version, about = "Random fields on the sphere under non-local time and space operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample an initial field, solve it at each time, write coefficients and maps.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Compare against the closed form (phi = linear only).
        #[arg(long)]
        check: bool,
    },
    /// Theoretical, bound and empirical angular power spectra.
    Spectrum {
        #[command(flatten)]
        common: CommonArgs,
        /// Ensemble size.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the invariant suites and write a pass/fail report.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        tolerance_scale: Option<f64>,
        /// Restrict to these suites (comma separated).
        #[arg(long, value_delimiter = ',')]
        suites: Option<Vec<String>>,
    },
    /// Apply the convolution-type derivative to a trajectory from CSV.
    Derive {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub lmax: Option<usize>,
    /// Time values, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub t: Option<Vec<f64>>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(l) = self.lmax {
            cfg.lmax = l;
        }
        if let Some(t) = &self.t {
            cfg.t = t.clone();
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    pub package: String,
    pub version: String,
    pub seed: u64,
    pub n: usize,
    pub config: RunConfig,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hashes `files` (relative to `cfg.out`) and writes `manifest.json`.
pub fn write_manifest(command: &str, cfg: &RunConfig, n: usize, files: &[String]) -> Result<PathBuf> {
    let mut entries = Vec::with_capacity(files.len());
    for f in files {
        let bytes = fs::read(cfg.out.join(f))?;
        entries.push(FileEntry {
            path: f.clone(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
        });
    }
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        command: command.into(),
        package: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        n,
        config: cfg.clone(),
        files: entries,
    };
    let path = cfg.out.join("manifest.json");
    write_json(&path, &manifest)?;
    Ok(path)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn create_out(cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    Ok(())
}

/// Outcome of `simulate --check`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearCheck {
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    pub files: Vec<String>,
    pub check: Option<LinearCheck>,
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutput> {
    cfg.validate()?;
    if cfg.check && !matches!(cfg.phi_symbol()?.kind(), SymbolKind::Linear) {
        return Err(Error::Config("the closed-form check needs phi = linear".into()));
    }
    create_out(cfg)?;
    let grid = cfg.grid()?;
    let transform = SphericalTransform::new(&grid, cfg.lmax);
    let initial = sample_gaussian_field(&cfg.spectrum, cfg.lmax, cfg.seed)?;
    let mut files = vec!["initial_coeffs.csv".to_string()];
    initial.write_csv(File::create(cfg.out.join(&files[0]))?)?;

    let mut worst: f64 = 0.0;
    for (i, &t) in cfg.t.iter().enumerate() {
        let params = cfg.params(t)?;
        let solved = SpectralSolver::new(params.clone()).solve(&initial)?;
        if cfg.check {
            for (l, m, v) in solved.iter() {
                let a = initial.get(l, m);
                let expect = a * (-t * params.rate(l)).exp();
                let scale = a.norm();
                if scale > 0.0 {
                    worst = worst.max((v - expect).norm() / scale / (-t * params.rate(l)).exp().max(f64::MIN_POSITIVE));
                }
            }
        }
        let coeff_name = format!("coeffs_t{i}.csv");
        solved.write_csv(File::create(cfg.out.join(&coeff_name))?)?;
        files.push(coeff_name);
        let map_name = format!("map_t{i}.bin");
        let map_path = cfg.out.join(&map_name);
        let map = transform.synthesize(&solved);
        map.write_binary(
            &map_path,
            &MapSidecar {
                n_theta: map.n_theta,
                n_phi: map.n_phi,
                l_max: cfg.lmax,
                t,
                seed: cfg.seed,
            },
        )?;
        files.push(map_name);
        files.push(format!("map_t{i}.json"));
    }
    write_manifest("simulate", cfg, 1, &files)?;
    let check = cfg.check.then_some(LinearCheck {
        max_relative_error: worst,
        tolerance: 1e-12,
        passed: worst <= 1e-12,
    });
    Ok(SimulateOutput { files, check })
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Vec<String>> {
    cfg.validate()?;
    if cfg.n == 0 {
        return Err(Error::Config("spectrum needs an ensemble size n >= 1".into()));
    }
    create_out(cfg)?;
    let sigmas = sigma_grid(cfg.sigma_grid);
    let mut files = Vec::new();
    for (i, &t) in cfg.t.iter().enumerate() {
        let params = cfg.params(t)?;
        let emp = solved_ensemble_cl(&cfg.spectrum, &params, cfg.lmax, cfg.n, cfg.seed)?;
        let mut report = SpectrumReport::from_estimates(&cfg.spectrum, &params, cfg.lmax, Some(emp), &sigmas, Some(cfg.seed))?;
        if t > 0.0 && matches!(cfg.spectrum, IsotropicSpectrum::PowerLaw { .. }) && params.phi.has_tail() {
            report = report.with_decay_fit(asymptotic_decay(&cfg.spectrum, &params, DECAY_RANGE)?);
        }
        let name = format!("spectrum_t{i}.csv");
        report.write_files(&cfg.out.join(&name))?;
        files.push(name);
        files.push(format!("spectrum_t{i}.json"));
    }
    write_manifest("spectrum", cfg, cfg.n, &files)?;
    Ok(files)
}

fn wanted(cfg: &RunConfig, name: &str) -> bool {
    cfg.verify.suites.as_ref().is_none_or(|s| s.iter().any(|x| x == name))
}

pub const SUITE_NAMES: [&str; 7] = [
    "eigenfunction",
    "route_consistency",
    "coordinate_change",
    "harmonic_analysis",
    "spectrum_laws",
    "moments",
    "negative_moments",
];

/// Runs the suites for the configured symbols. Deterministic in the config.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    if let Some(s) = &cfg.verify.suites {
        if let Some(bad) = s.iter().find(|x| !SUITE_NAMES.contains(&x.as_str())) {
            return Err(Error::Config(format!("unknown suite '{bad}'")));
        }
    }
    let v = &cfg.verify;
    let k = v.tolerance_scale;
    let z = 3.0 * k;
    let phi = cfg.phi_symbol()?;
    let psi = cfg.psi_symbol()?;
    let seed = cfg.seed;
    let times: Vec<f64> = cfg.t.iter().copied().filter(|&t| t > 0.0).collect();
    let mut suites = Vec::new();

    if wanted(cfg, "eigenfunction") {
        suites.push(verify::eigenfunction_suite(std::slice::from_ref(&phi), &[0.5, 2.0, 10.0], v.eigen_nodes, 1e-2 * k)?);
    }
    if wanted(cfg, "route_consistency") {
        let mut symbols = vec![phi.clone()];
        if let Some(b) = psi.as_bernstein() {
            if b.label() != phi.label() {
                symbols.push(b.clone());
            }
        }
        suites.push(verify::route_suite(
            &symbols,
            &[0.25, 0.5, 1.0, 1.5, 2.0],
            &[0.1, 0.5, 1.0, 5.0, 10.0],
            1e-5 * k,
            v.mc_samples,
            z,
            mc_seed(seed, 1),
        )?);
    }
    if wanted(cfg, "coordinate_change") {
        suites.push(match psi.as_bernstein() {
            Some(b) if cfg.gamma == 0.0 && !times.is_empty() => {
                let spec = IsotropicSpectrum::power_law(1.0, 3.0)?;
                let initial = sample_gaussian_field(&spec, v.field_lmax, mc_seed(seed, 2))?;
                verify::coordinate_change_suite(
                    &[(phi.clone(), b.clone())],
                    &times[..times.len().min(2)],
                    &test_points()?,
                    &initial,
                    v.mc_samples,
                    z,
                    mc_seed(seed, 3),
                )?
            }
            _ => SuiteResult::skipped("coordinate_change", "needs gamma = 0, a Bernstein psi and t > 0"),
        });
    }
    if wanted(cfg, "harmonic_analysis") {
        suites.push(verify::harmonic_suite(20, 64, 1e-10 * k, mc_seed(seed, 4))?);
    }
    for &t in &cfg.t {
        let params = cfg.params(t)?;
        if wanted(cfg, "spectrum_laws") {
            suites.push(verify::spectrum_suite(&SpectrumSuite {
                spec: cfg.spectrum.clone(),
                params: params.clone(),
                lmax: v.spectrum_lmax,
                realizations: v.realizations,
                z_tol: z,
                laplace_tol: 1e-4 * k,
                slope_tol: 0.3 * k,
                seed: mc_seed(seed, 5),
            })?);
        }
        if wanted(cfg, "moments") {
            suites.push(verify::moments_suite(
                &cfg.spectrum,
                &params,
                v.spectrum_lmax,
                v.realizations,
                v.raw_moment_lmax,
                z,
                1e-10 * k,
                mc_seed(seed, 6),
            )?);
        }
    }
    if wanted(cfg, "negative_moments") {
        suites.push(if times.is_empty() {
            SuiteResult::skipped("negative_moments", "needs t > 0")
        } else {
            verify::neg_moment_suite(&[phi], &[0.3, 0.5], &times, v.mc_samples, z, mc_seed(seed, 7))?
        });
    }
    Ok(VerifyReport::new(seed, k, suites))
}

fn mc_seed(seed: u64, tag: u64) -> u64 {
    crate::mc::subseed(seed, 1000 + tag)
}

/// Three fixed evaluation points away from the poles' coordinate singularity and from each other.
pub fn test_points() -> Result<[SphericalPoint; 3]> {
    Ok([
        SphericalPoint::new(0.3, 0.0)?,
        SphericalPoint::new(1.2, 2.0)?,
        SphericalPoint::new(2.5, 4.5)?,
    ])
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let report = run_verify(cfg)?;
    create_out(cfg)?;
    let name = "verify_report.json".to_string();
    write_json(&cfg.out.join(&name), &report)?;
    write_manifest("verify", cfg, cfg.verify.mc_samples, &[name])?;
    Ok(report)
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    t: f64,
    u: f64,
    du: Option<f64>,
}

#[derive(Debug, Serialize)]
struct DerivedRow {
    t: f64,
    u: f64,
    #[serde(rename = "D")]
    d: f64,
}

pub fn cmd_derive(cfg: &RunConfig) -> Result<Vec<String>> {
    let input = cfg
        .derive
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("derive needs an input trajectory".into()))?;
    let phi = cfg.phi_symbol()?;
    let mut rdr = csv::Reader::from_path(input)?;
    let rows: Vec<TrajectoryRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!("{} rows in {}", rows.len(), input.display())));
    }
    let dt = rows[1].t - rows[0].t;
    let uniform = rows[0].t.abs() <= 1e-12 * dt.abs().max(1.0)
        && dt > 0.0
        && rows
            .iter()
            .enumerate()
            .all(|(k, r)| (r.t - k as f64 * dt).abs() <= 1e-9 * dt.max(r.t.abs()));
    if !uniform {
        return Err(Error::Config("trajectory must be on a uniform grid starting at t = 0".into()));
    }
    let u: Vec<f64> = rows.iter().map(|r| r.u).collect();
    let du: Option<Vec<f64>> = rows.iter().map(|r| r.du).collect();
    let (scheme, du) = if cfg.derive.nodal {
        (DerivativeScheme::NodalDerivative, du)
    } else {
        (DerivativeScheme::default(), None)
    };
    let d = convolution_derivative_with(&u, dt, &phi, scheme, du.as_deref())?;
    create_out(cfg)?;
    let name = "derivative.csv".to_string();
    let mut w = csv::Writer::from_path(cfg.out.join(&name))?;
    for (r, d) in rows.iter().zip(d) {
        w.serialize(DerivedRow { t: r.t, u: r.u, d })?;
    }
    w.flush()?;
    write_manifest("derive", cfg, rows.len(), std::slice::from_ref(&name))?;
    Ok(vec![name])
}

fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        // A pool that is already initialized (repeated in-process calls) keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn print_report(report: &VerifyReport) {
    for s in &report.suites {
        let status = match (s.applicable, s.passed) {
            (false, _) => "SKIP",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        println!("{status} {} ({} checks)", s.name, s.checks.len());
        for c in s.failures() {
            println!("    {}: measured {:.6e} > tolerance {:.6e}", c.label, c.measured, c.tolerance);
        }
        if let Some(n) = &s.note {
            println!("    {n}");
        }
    }
}

/// Executes a parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, check } => {
            set_threads(common.threads)?;
            let mut cfg = common.resolve()?;
            cfg.check |= check;
            let out = cmd_simulate(&cfg)?;
            println!("wrote {} files to {}", out.files.len() + 1, cfg.out.display());
            if let Some(c) = out.check {
                println!(
                    "closed-form check: max relative error {:.3e} (tolerance {:.0e})",
                    c.max_relative_error, c.tolerance
                );
                if !c.passed {
                    return Err(Error::Verification("closed-form check failed".into()));
                }
            }
        }
        Command::Spectrum { common, n } => {
            set_threads(common.threads)?;
            let mut cfg = common.resolve()?;
            if let Some(n) = n {
                cfg.n = n;
            }
            let files = cmd_spectrum(&cfg)?;
            println!("wrote {} files to {}", files.len() + 1, cfg.out.display());
        }
        Command::Verify {
            common,
            tolerance_scale,
            suites,
        } => {
            set_threads(common.threads)?;
            let mut cfg = common.resolve()?;
            if let Some(k) = tolerance_scale {
                cfg.verify.tolerance_scale = k;
            }
            if suites.is_some() {
                cfg.verify.suites = suites;
            }
            let report = cmd_verify(&cfg)?;
            print_report(&report);
            if !report.passed {
                return Err(Error::Verification(format!(
                    "failing suites: {}",
                    report.failing().join(", ")
                )));
            }
        }
        Command::Derive { common, input } => {
            set_threads(common.threads)?;
            let mut cfg = common.resolve()?;
            if input.is_some() {
                cfg.derive.input = input;
            }
            cmd_derive(&cfg)?;
            println!("wrote derivative.csv to {}", cfg.out.display());
        }
    }
    Ok(())
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_cfg(out: &Path) -> RunConfig {
        RunConfig {
            phi: SymbolSpec {
                kind: "linear".into(),
                ..SymbolSpec::default()
            },
            psi: SymbolSpec {
                kind: "linear".into(),
                ..SymbolSpec::default()
            },
            lmax: 8,
            out: out.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_roundtrip_and_unknown_fields() {
        let cfg = RunConfig::default();
        let s = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), cfg);
        assert!(serde_json::from_str::<RunConfig>(r#"{"lmax": 3}"#).is_err());
        let partial: RunConfig = serde_json::from_str(r#"{"L_max": 3, "seed": 7}"#).unwrap();
        assert_eq!((partial.lmax, partial.seed, partial.n), (3, 7, 100));
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"seed": 5, "L_max": 4, "t": [2.0]}"#).unwrap();
        let args = CommonArgs {
            config: Some(p),
            seed: Some(9),
            t: Some(vec![0.0, 1.0]),
            ..CommonArgs::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.seed, cfg.lmax, cfg.t.clone()), (9, 4, vec![0.0, 1.0]));
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let mut cfg = RunConfig::default();
        cfg.phi.alpha = Some(1.5);
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        let mut cfg = RunConfig::default();
        cfg.spectrum = IsotropicSpectrum::PowerLaw {
            amplitude: 1.0,
            theta: 1.0,
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
        let mut cfg = RunConfig::default();
        cfg.t = vec![-1.0];
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn simulate_at_zero_time_copies_initial() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg(dir.path());
        cfg.t = vec![0.0];
        cmd_simulate(&cfg).unwrap();
        let a = fs::read(dir.path().join("initial_coeffs.csv")).unwrap();
        let b = fs::read(dir.path().join("coeffs_t0.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simulate_linear_check_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg(dir.path());
        cfg.check = true;
        cfg.gamma = 0.3;
        let out = cmd_simulate(&cfg).unwrap();
        let c = out.check.unwrap();
        assert!(c.passed, "{c:?}");
        let m: Manifest = serde_json::from_slice(&fs::read(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m.files.len(), out.files.len());
        for f in &m.files {
            assert_eq!(f.sha256, sha256_hex(&fs::read(dir.path().join(&f.path)).unwrap()));
        }
        let again = RunConfig::load(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn check_needs_linear_phi() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            check: true,
            lmax: 4,
            out: dir.path().to_path_buf(),
            ..RunConfig::default()
        };
        assert_eq!(cmd_simulate(&cfg).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn spectrum_single_realization_has_no_se() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg(dir.path());
        cfg.n = 1;
        cfg.t = vec![1.0];
        cmd_spectrum(&cfg).unwrap();
        let meta: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("spectrum_t0.json")).unwrap()).unwrap();
        assert!(meta["empirical_se"].is_null());
        let csv = fs::read_to_string(dir.path().join("spectrum_t0.csv")).unwrap();
        assert!(csv.starts_with("l,C_l,C_l_t,C_star_l_t,bound,empirical\n"));
    }

    #[test]
    fn derive_on_exponential() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("u.csv");
        let mut s = String::from("t,u\n");
        for k in 0..=400 {
            let t = k as f64 * 0.005;
            s.push_str(&format!("{t},{}\n", (-2.0 * t).exp()));
        }
        fs::write(&input, s).unwrap();
        let mut cfg = linear_cfg(&dir.path().join("o"));
        cfg.derive.input = Some(input);
        cmd_derive(&cfg).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join("o/derivative.csv")).unwrap();
        let rows: Vec<(f64, f64, f64)> = rdr.deserialize().map(|r| r.unwrap()).collect();
        for &(t, u, d) in &rows[40..] {
            assert!((d + 2.0 * u).abs() < 1e-3 * u, "t={t}");
        }
    }

    #[test]
    fn bad_arguments_exit_one_and_help_zero() {
        assert_eq!(main_with_args(["nonlocal-sphere", "simulate", "--bogus"]), 1);
        assert_eq!(main_with_args(["nonlocal-sphere", "--help"]), 0);
        assert_eq!(main_with_args(["nonlocal-sphere", "derive", "--out", "/nonexistent/x"]), 1);
    }

    #[test]
    fn missing_input_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg(dir.path());
        cfg.derive.input = Some(dir.path().join("missing.csv"));
        assert_eq!(cmd_derive(&cfg).unwrap_err().exit_code(), 3);
    }

    #[test]
    fn linear_verify_is_exact_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = linear_cfg(dir.path());
        cfg.verify.mc_samples = 2000;
        cfg.verify.realizations = 500;
        cfg.verify.spectrum_lmax = 8;
        cfg.verify.eigen_nodes = 400;
        cfg.verify.suites = Some(vec!["route_consistency".into(), "negative_moments".into(), "eigenfunction".into()]);
        let a = run_verify(&cfg).unwrap();
        assert!(a.passed, "{a:#?}");
        for s in &a.suites {
            for c in &s.checks {
                if c.label.contains("Monte Carlo") || s.name == "negative_moments" {
                    assert_eq!(c.measured, 0.0, "{c:?}");
                }
            }
        }
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&run_verify(&cfg).unwrap()).unwrap());
        cfg.verify.tolerance_scale = 0.0;
        assert!(!run_verify(&cfg).unwrap().passed);
    }
}
