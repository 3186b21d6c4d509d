//! Cucker-Smale flocking under switching, with the Lyapunov functional.

use switching_consensus::pipeline::{certify, simulate, write_trajectory_csv};
use switching_consensus::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/cs_flocking.json");
    let mut cfg = RunConfig::from_path(path.as_ref())?;
    cfg.record_stride = 10;
    let run = simulate(&cfg)?;
    let report = certify(&run)?;
    let lyap = report.lyapunov.as_ref().unwrap();
    let verdict = report.flocking_verdict.as_ref().unwrap();

    for k in (0..lyap.times.len()).step_by(lyap.times.len() / 12) {
        println!(
            "t = {:>6.2}  dV = {:.3e}  D = {:.3e}  phi = {:.4}  L = {:.4}",
            lyap.times[k], lyap.d_v[k], lyap.d_cal[k], lyap.phi[k], lyap.lyap[k]
        );
    }
    println!("monotone violations: {}", lyap.monotone.total);
    println!("sup dX = {:.4}, dV final / dV0 = {:.2e}", verdict.dx_sup, verdict.dv_final / verdict.dv0);
    println!("flocked: {}, all ok: {}", verdict.flocked, report.all_ok);

    let csv = std::env::temp_dir().join("cs_flocking.csv");
    write_trajectory_csv(&run, Some(lyap), std::fs::File::create(&csv)?)?;
    println!("trajectory with D, phi, L columns: {}", csv.display());
    Ok(())
}
