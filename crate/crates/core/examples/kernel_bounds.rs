//! Lower bounds of influence kernels on balls, and the running minimum
//! used by the flocking checks.

use std::sync::Arc;

use switching_consensus::kernel::{default_grid_step, running_min, InfluenceKernel, PairProfile, RadialProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rational = InfluenceKernel::rational(1.0)?;
    let gaussian = InfluenceKernel::general(PairProfile::Gaussian { sigma: 2.0 }, 1.0)?;
    let dip = InfluenceKernel::radial(
        RadialProfile::Custom(Arc::new(|r: f64| 0.3 + 0.7 * ((r - 1.5).powi(2)).min(1.0))),
        1.0,
    )?
    .with_lipschitz(1.4);

    for radius in [0.5, 1.0, 1.5, 2.0] {
        let step = default_grid_step(radius);
        let a = rational.lower_bound_on_ball(radius, step, 2)?;
        // general kernels are gridded over the product cube, so use a coarser step
        let b = gaussian.lower_bound_on_ball(radius, 0.1, 2)?;
        let c = dip.lower_bound_on_ball(radius, step, 2)?;
        println!(
            "radius {radius:>4}: rational {:.4}  gaussian(y,z) {:.4}  dip {:.4} (certified {})",
            a.value, b.value, c.value, c.certified
        );
    }

    // the running minimum only ever goes down as the reach grows
    let mut prev = None;
    for r in [0.5, 1.0, 1.5, 2.0, 3.0] {
        let m = running_min(&dip, r, prev, 1e-3)?;
        println!("min over [0, {r}] = {m:.4}");
        prev = Some((r, m));
    }
    Ok(())
}
