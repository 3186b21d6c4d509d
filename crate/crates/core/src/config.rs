//! Run configuration, read from one JSON file.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ModelSpec, Points, SystemState};
use crate::integrator::DEFAULT_H_MAX;
use crate::kernel::KernelSpec;
use crate::schedule::{Model, ScheduleFamily, SwitchingSchedule};
use crate::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "d")]
    pub dim: usize,
    pub kernel: KernelSpec,
    pub schedule: ScheduleSpec,
    pub horizon: f64,
    #[serde(default = "default_h_max")]
    pub h_max: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub seed: u64,
    pub init: InitSpec,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    /// Replaces the grid bound on the kernel minimum, e.g. with an analytic value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<f64>,
    #[serde(default)]
    pub lyapunov: LyapunovOptions,
    #[serde(default)]
    pub outputs: OutputSpec,
    /// Test hook: perturbs one recorded sample after integration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fault_injection: Option<FaultInjection>,
}

fn default_h_max() -> f64 {
    DEFAULT_H_MAX
}

fn default_stride() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    #[serde(flatten)]
    pub family: ScheduleFamily,
    /// Cut attractive intervals into pieces no longer than this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_good: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitSpec {
    /// Every coordinate uniform in `[lo, hi]`, drawn from the run seed.
    UniformBox {
        positions: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        velocities: Option<[f64; 2]>,
    },
    Explicit {
        positions: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        velocities: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cert: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyap: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovOptions {
    /// Bound on every interval length; defaults to the longest realized one.
    #[serde(rename = "T", default, skip_serializing_if = "Option::is_none")]
    pub t_bound: Option<f64>,
    #[serde(default = "default_eps_v")]
    pub eps_v: f64,
}

fn default_eps_v() -> f64 {
    1e-3
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions { t_bound: None, eps_v: default_eps_v() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    #[serde(rename = "envelope")]
    Envelope,
    #[serde(rename = "D")]
    D,
    #[serde(rename = "phi")]
    Phi,
    #[serde(rename = "L")]
    L,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::Envelope => "envelope",
            Column::D => "D",
            Column::Phi => "phi",
            Column::L => "L",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_csv")]
    pub trajectory_csv: String,
    #[serde(default = "default_summary")]
    pub summary_json: String,
    #[serde(default = "default_report")]
    pub report_json: String,
    /// Extra CSV columns.
    #[serde(default)]
    pub columns: Vec<Column>,
}

fn default_csv() -> String {
    "trajectory.csv".into()
}

fn default_summary() -> String {
    "summary.json".into()
}

fn default_report() -> String {
    "report.json".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            trajectory_csv: default_csv(),
            summary_json: default_summary(),
            report_json: default_report(),
            columns: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    pub sample: usize,
    pub agent: usize,
    #[serde(default)]
    pub coordinate: usize,
    pub delta: f64,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, Error> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, Error> {
        let cfg: RunConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Shape and range checks that need no integration.
    pub fn check(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("N must be at least 2, got {}", self.n));
        }
        if self.dim == 0 {
            return bad("d must be at least 1".into());
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon must be finite and >= 0, got {}", self.horizon));
        }
        if !(self.h_max > 0.0 && self.h_max.is_finite()) {
            return bad(format!("h_max must be positive, got {}", self.h_max));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        if let Some(p) = self.psi0 {
            if !(p > 0.0) {
                return bad(format!("psi0 must be positive, got {p}"));
            }
        }
        let cs = self.model == Model::Cs;
        match &self.init {
            InitSpec::UniformBox { positions, velocities } => {
                for b in std::iter::once(positions).chain(velocities.as_ref()) {
                    if !(b[0] <= b[1] && b[0].is_finite() && b[1].is_finite()) {
                        return bad(format!("box bounds must satisfy lo <= hi, got {b:?}"));
                    }
                }
                if cs != velocities.is_some() {
                    return bad("velocity box is required for CS and not allowed for HK".into());
                }
            }
            InitSpec::Explicit { positions, velocities } => {
                self.check_rows("positions", positions)?;
                match velocities {
                    Some(v) if cs => self.check_rows("velocities", v)?,
                    None if !cs => {}
                    _ => return bad("explicit velocities are required for CS and not allowed for HK".into()),
                }
            }
        }
        Ok(())
    }

    fn check_rows(&self, what: &str, rows: &[Vec<f64>]) -> Result<(), Error> {
        if rows.len() != self.n || rows.iter().any(|r| r.len() != self.dim) {
            return Err(Error::Config(format!("{what} must be {} rows of length {}", self.n, self.dim)));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<SwitchingSchedule, Error> {
        let s = SwitchingSchedule::new(self.schedule.family.clone(), self.horizon)?;
        Ok(match self.schedule.split_good {
            Some(m) => s.split_good(m)?,
            None => s,
        })
    }

    pub fn model_spec(&self) -> Result<ModelSpec, Error> {
        Ok(ModelSpec::new(self.model, self.kernel.build()?, self.schedule()?, self.n, self.dim)?)
    }

    /// Initial state; box draws come from `ChaCha8Rng` seeded with `seed`,
    /// positions first, then velocities.
    pub fn initial_state(&self) -> Result<SystemState, Error> {
        let (n, d) = (self.n, self.dim);
        match &self.init {
            InitSpec::UniformBox { positions, velocities } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let mut draw = |b: &[f64; 2]| -> Result<Points, Error> {
                    let data = (0..n * d).map(|_| if b[0] < b[1] { rng.gen_range(b[0]..=b[1]) } else { b[0] }).collect();
                    Ok(Points::new(n, d, data)?)
                };
                let x = draw(positions)?;
                Ok(match velocities {
                    Some(vb) => SystemState::cs(x, draw(vb)?)?,
                    None => SystemState::hk(x),
                })
            }
            InitSpec::Explicit { positions, velocities } => {
                let x = Points::from_rows(positions)?;
                Ok(match velocities {
                    Some(v) => SystemState::cs(x, Points::from_rows(v)?)?,
                    None => SystemState::hk(x),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HK: &str = r#"{
        "model": "HK", "N": 4, "d": 2,
        "kernel": {"family": "rational", "beta": 1.0, "sup_norm_K": 1.0},
        "schedule": {"family": "geometric-bad", "good_len": 1.0, "bad0": 0.1, "ratio": 0.5},
        "horizon": 5.0, "seed": 3,
        "init": {"kind": "uniform-box", "positions": [-1.0, 1.0]}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = RunConfig::from_json(HK).unwrap();
        assert_eq!(cfg.h_max, DEFAULT_H_MAX);
        assert_eq!(cfg.record_stride, 1);
        assert_eq!(cfg.lyapunov.eps_v, 1e-3);
        assert_eq!(cfg.outputs.trajectory_csv, "trajectory.csv");
        let back = serde_json::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_json(&back).unwrap(), cfg);
    }

    #[test]
    fn seeded_box_is_reproducible() {
        let cfg = RunConfig::from_json(HK).unwrap();
        let a = cfg.initial_state().unwrap();
        assert_eq!(a, cfg.initial_state().unwrap());
        assert!(a.positions.as_slice().iter().all(|x| (-1.0..=1.0).contains(x)));
        let mut other = cfg.clone();
        other.seed = 4;
        assert_ne!(a, other.initial_state().unwrap());
    }

    #[test]
    fn rejects_bad_shapes() {
        let v: serde_json::Value = serde_json::from_str(HK).unwrap();
        let mut w = v.clone();
        w["N"] = 1.into();
        assert!(RunConfig::from_value(w).is_err());
        let mut w = v.clone();
        w["model"] = "CS".into();
        assert!(RunConfig::from_value(w).is_err());
        let mut w = v.clone();
        w["typo"] = 1.into();
        assert!(RunConfig::from_value(w).is_err());
        let mut w = v;
        w["init"] = serde_json::json!({"kind": "explicit", "positions": [[0.0, 0.0], [1.0]]});
        assert!(RunConfig::from_value(w).is_err());
    }
}
