//! Drives the command-line pipeline in-process: simulate, spectrum and a small verify run.

use nonlocal_sphere::cli::{cmd_simulate, cmd_spectrum, cmd_verify, RunConfig};

fn main() -> nonlocal_sphere::Result<()> {
    let out = std::env::temp_dir().join("nonlocal-sphere-example");
    let mut cfg = RunConfig {
        lmax: 16,
        n: 200,
        out: out.clone(),
        ..RunConfig::default()
    };
    let sim = cmd_simulate(&cfg)?;
    println!("simulate wrote {:?}", sim.files);
    println!("spectrum wrote {:?}", cmd_spectrum(&cfg)?);
    cfg.verify.mc_samples = 20_000;
    let report = cmd_verify(&cfg)?;
    for s in &report.suites {
        println!("{:<24} passed = {}", s.name, s.passed);
    }
    println!("outputs and manifest.json in {}", out.display());
    Ok(())
}
