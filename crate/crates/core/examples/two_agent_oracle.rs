//! Two HK agents with a constant kernel: the diameter has a closed form,
//! so the integrator error can be read off directly.

use switching_consensus::kernel::InfluenceKernel;
use switching_consensus::oracle::two_agent_hk;
use switching_consensus::schedule::Model;
use switching_consensus::{diameter, integrate, ModelSpec, Points, SwitchingSchedule, SystemState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schedule = SwitchingSchedule::explicit(vec![0.0, 1.0, 1.5], 3.0)?;
    let spec = ModelSpec::new(Model::Hk, InfluenceKernel::constant(1.0)?, schedule.clone(), 2, 1)?;
    let init = SystemState::hk(Points::new(2, 1, vec![-0.5, 0.5])?);

    println!("{:>8} {:>12} {:>12} {:>10}", "h", "d(3)", "exact", "rel err");
    let exact = two_agent_hk(1.0, 1.0, &schedule, 3.0);
    for h in [1e-1, 5e-2, 2.5e-2, 1e-2, 1e-3] {
        let traj = integrate(&spec, &init, 3.0, h, 1)?;
        let d = diameter(traj.positions(traj.len() - 1), 1);
        println!("{h:>8} {d:>12.9} {exact:>12.9} {:>10.2e}", (d - exact).abs() / exact);
    }
    Ok(())
}
