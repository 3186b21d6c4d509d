//! A random HK run with every certificate checked.

use switching_consensus::pipeline::{certify, simulate};
use switching_consensus::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hk_geometric.json");
    let cfg = RunConfig::from_path(path.as_ref())?;
    let run = simulate(&cfg)?;
    let report = certify(&run)?;

    let c = &report.constants;
    println!("K = {}, M0 = {:.4}, psi0 = {:.4}", c.k, c.m0, c.psi0.as_ref().map_or(f64::NAN, |p| p.value));
    if let Some(contraction) = &report.per_good_interval {
        for iv in contraction.intervals.iter().take(6) {
            println!(
                "good [{:.3}, {:.3}]: d {:.3e} -> {:.3e}, bound {:.3e}, ok {}",
                iv.t_start, iv.t_end, iv.d_start, iv.d_end, iv.bound, iv.ok
            );
        }
    }
    for iv in report.per_bad_interval.intervals.iter().take(3) {
        println!("bad  [{:.3}, {:.3}]: growth {:.4} <= {:.4}", iv.t_start, iv.t_end, iv.d_end / iv.d_start, iv.factor);
    }
    println!("max principle ok: {}", report.max_principle.ok);
    println!("state bound ok: {} (max |x| = {:.4})", report.state_bound.ok, report.state_bound.max_norm);
    println!("d(0) = {:.4}, d(end) = {:.3e}", run.diam.d_x[0], run.diam.d_x.last().unwrap());
    println!("all ok: {}", report.all_ok);
    Ok(())
}
