//! A corrupted sample is caught by the directional max principle.

use switching_consensus::config::FaultInjection;
use switching_consensus::pipeline::{certify, simulate};
use switching_consensus::RunConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/hk_geometric.json");
    let mut cfg = RunConfig::from_path(path.as_ref())?;
    let samples = (cfg.horizon / cfg.h_max) as usize / cfg.record_stride;
    cfg.fault_injection = Some(FaultInjection { sample: samples / 3, agent: 0, coordinate: 0, delta: 0.3 });
    let report = certify(&simulate(&cfg)?)?;
    for v in &report.max_principle.violations {
        println!(
            "t = {:.3}, agent {}, direction {}: {:.4} > {:.4}",
            v.t, v.agent, v.direction, v.lhs, v.rhs
        );
    }
    println!("all ok: {}", report.all_ok);
    Ok(())
}
