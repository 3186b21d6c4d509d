//! Checking switching schedules before integrating anything.

use switching_consensus::schedule::{growth_factor, Model};
use switching_consensus::SwitchingSchedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let k = 1.0;
    let cases = [
        ("geometric bad lengths", SwitchingSchedule::geometric_bad(1.0, 0.1, 0.5, 50.0)?),
        ("constant lengths", SwitchingSchedule::constant_lengths(1.0, 0.1, 50.0)?),
        ("bad length too long", SwitchingSchedule::constant_lengths(1.0, 0.8, 50.0)?),
        ("explicit", SwitchingSchedule::explicit(vec![0.0, 2.0, 2.3, 5.0, 5.1], 50.0)?),
    ];
    for (name, s) in &cases {
        let v = s.assess(k, Some(0.5), Model::Hk)?;
        println!("{name}:");
        println!("  ok = {}, bad_total = {}, S1 = {}, S2 diverges = {:?}", v.ok(), v.bad_total, v.s1, v.s2_diverges);
        if let Some(f) = &v.first_violation {
            println!("  {}", f.message);
        }
        match s.exp_rate(k, 0.5) {
            Ok(r) => println!("  exponential rate: c = {:.4}, gamma = {:.4}, T = {}", r.c, r.gamma, r.t_bound),
            Err(e) => println!("  no exponential rate: {e}"),
        }
    }
    for b in [0.1, 0.3, 0.6, 0.69, 0.7] {
        println!("growth factor over a bad interval of length {b}: {:?}", growth_factor(k, b));
    }
    Ok(())
}
