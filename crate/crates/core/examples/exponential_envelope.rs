//! With a contractive cycle the diameter stays under an exponential envelope.

use switching_consensus::pipeline::{certify, simulate};
use switching_consensus::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hk_envelope.json");
    let run = simulate(&RunConfig::from_path(path.as_ref())?)?;
    let report = certify(&run)?;
    let rate = report.constants.rate.ok_or("schedule is not contractive")?;
    println!("c = {:.4}, gamma = {:.4}, T = {}", rate.c, rate.gamma, rate.t_bound);

    let d0 = run.diam.d_x[0];
    for t in [0.0, 2.0, 5.0, 10.0, 15.0, 20.0] {
        let k = run.traj.times.partition_point(|&s| s < t).min(run.traj.len() - 1);
        let bound = d0 * rate.envelope(report.constants.k, run.traj.times[k]);
        println!("t = {:>5.2}: d = {:.3e}  envelope = {:.3e}", run.traj.times[k], run.diam.d_x[k], bound);
    }
    println!("envelope ok: {}", report.envelope.map_or(false, |e| e.ok));
    Ok(())
}
