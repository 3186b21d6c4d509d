//! Sweeping the first bad length: longer repulsion leaves a larger final diameter.

use switching_consensus::pipeline::cmd_sweep;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/sweep_template.json");
    let template: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let out = std::env::temp_dir().join("swcons_sweep");
    let rows = cmd_sweep(&template, "schedule.bad0", &[0.1, 0.3, 0.5, 0.69], &out)?;
    for r in &rows {
        println!(
            "bad0 = {:<5} d_final = {:.3e}  cycle factor = {:.4}  {}",
            r.value,
            r.d_final.unwrap_or(f64::NAN),
            r.cycle_factor.unwrap_or(f64::NAN),
            r.status
        );
    }
    println!("per-run output under {}", out.display());
    Ok(())
}
