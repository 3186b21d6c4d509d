//! Fixed-step classical RK4, aligned to the switch times.
//!
//! Each realized interval `[a, b]` is cut into `n = ⌈(b − a)/h_max⌉` equal
//! steps. Step times are `a + k·(b − a)/n` and the last step lands on the
//! stored `b`, so no step crosses a switch and switch times are hit exactly.

use thiserror::Error;

use crate::dynamics::{DynamicsError, ModelSpec, SystemState};
use crate::kernel::KernelError;
use crate::schedule::{Interval, Model, SwitchingSchedule};

/// Largest state entry tolerated before a run counts as blown up.
pub const BLOWUP_NORM: f64 = 1e12;

/// Default step ceiling.
pub const DEFAULT_H_MAX: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrateError {
    #[error("state became non-finite or exceeded {BLOWUP_NORM:e} at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("invalid integration parameters: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// A realized interval and the sample indices of its endpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub interval: Interval,
    pub first: usize,
    pub last: usize,
}

/// Switch-aligned samples of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub model: Model,
    pub n: usize,
    pub dim: usize,
    pub times: Vec<f64>,
    /// Flat states, `stride` entries per sample.
    data: Vec<f64>,
    stride: usize,
    /// Indices of the samples taken at switch times (including `t₀ = 0`).
    pub switch_indices: Vec<usize>,
    pub segments: Vec<Segment>,
    pub h_max: f64,
    pub record_stride: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn flat(&self, k: usize) -> &[f64] {
        &self.data[k * self.stride..(k + 1) * self.stride]
    }

    pub fn positions(&self, k: usize) -> &[f64] {
        &self.flat(k)[..self.n * self.dim]
    }

    pub fn velocities(&self, k: usize) -> Option<&[f64]> {
        match self.model {
            Model::Cs => Some(&self.flat(k)[self.n * self.dim..]),
            Model::Hk => None,
        }
    }

    pub fn state(&self, k: usize) -> SystemState {
        SystemState::from_flat(self.n, self.dim, self.flat(k), self.model == Model::Cs)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has a sample at t = 0")
    }

    /// Replaces the stored state of sample `k`; fault injection for tests.
    pub fn overwrite_sample(&mut self, k: usize, flat: &[f64]) {
        assert_eq!(flat.len(), self.stride);
        self.data[k * self.stride..(k + 1) * self.stride].copy_from_slice(flat);
    }

    /// Index of the sample taken exactly at `t`, if any.
    pub fn index_of_time(&self, t: f64) -> Option<usize> {
        let k = self.times.partition_point(|&s| s < t);
        (self.times.get(k) == Some(&t)).then_some(k)
    }
}

/// Reusable RK4 stage buffers.
struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(len: usize) -> Self {
        Rk4 {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    fn step<E, F>(&mut self, f: &mut F, y: &mut [f64], t: f64, h: f64) -> Result<(), E>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), E>,
    {
        let half = 0.5 * h;
        f(t, y, &mut self.k1)?;
        axpy(&mut self.tmp, y, half, &self.k1);
        f(t + half, &self.tmp, &mut self.k2)?;
        axpy(&mut self.tmp, y, half, &self.k2);
        f(t + half, &self.tmp, &mut self.k3)?;
        axpy(&mut self.tmp, y, h, &self.k3);
        f(t + h, &self.tmp, &mut self.k4)?;
        let w = h / 6.0;
        for i in 0..y.len() {
            y[i] += w * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn axpy(out: &mut [f64], y: &[f64], a: f64, k: &[f64]) {
    for ((o, &yi), &ki) in out.iter_mut().zip(y).zip(k) {
        *o = yi + a * ki;
    }
}

pub(crate) fn blown_up(y: &[f64]) -> bool {
    y.iter().any(|v| !(v.abs() <= BLOWUP_NORM))
}

/// One classical RK4 step of `ẏ = rhs(t, y)`.
pub fn step_rk4<F>(mut rhs: F, y: &[f64], t: f64, h: f64) -> Result<Vec<f64>, IntegrateError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), IntegrateError>,
{
    if !(h > 0.0) {
        return Err(IntegrateError::Invalid(format!("step must be positive, got {h}")));
    }
    let mut out = y.to_vec();
    Rk4::new(y.len()).step(&mut rhs, &mut out, t, h)?;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(IntegrateError::NonFiniteState { t: t + h });
    }
    Ok(out)
}

/// Number of equal steps that cover an interval of length `len` with steps ≤ `h_max`.
pub fn steps_for(len: f64, h_max: f64) -> usize {
    ((len / h_max).ceil() as usize).max(1)
}

/// Drives a per-step update over the switch-aligned grid and records samples.
/// Shared by RK4 and the Euler reference.
pub(crate) fn run_aligned<S>(
    spec: &ModelSpec,
    init: &SystemState,
    horizon: f64,
    h_max: f64,
    record_stride: usize,
    mut step: S,
) -> Result<Trajectory, IntegrateError>
where
    S: FnMut(f64, &mut [f64], f64, f64) -> Result<(), IntegrateError>,
{
    if !(h_max > 0.0 && h_max.is_finite()) {
        return Err(IntegrateError::Invalid(format!("h_max must be positive, got {h_max}")));
    }
    if record_stride == 0 {
        return Err(IntegrateError::Invalid("record_stride must be at least 1".into()));
    }
    spec.check_state(init)?;
    let schedule: std::borrow::Cow<'_, SwitchingSchedule> = if horizon == spec.schedule.horizon() {
        std::borrow::Cow::Borrowed(&spec.schedule)
    } else {
        std::borrow::Cow::Owned(
            spec.schedule
                .with_horizon(horizon)
                .map_err(|e| IntegrateError::Invalid(e.to_string()))?,
        )
    };
    let mut y = init.to_flat();
    let stride = y.len();
    let intervals = schedule.intervals();
    let est = intervals.iter().map(|iv| steps_for(iv.len(), h_max) / record_stride + 1).sum::<usize>() + 1;

    let mut times = Vec::with_capacity(est);
    let mut data = Vec::with_capacity(est * stride);
    times.push(0.0);
    data.extend_from_slice(&y);
    let mut switch_indices = vec![0];
    let mut segments = Vec::with_capacity(intervals.len());

    for iv in intervals {
        let first = times.len() - 1;
        if iv.len() > 0.0 {
            let steps = steps_for(iv.len(), h_max);
            let h = iv.len() / steps as f64;
            let alpha = iv.sign();
            let mut t = iv.start;
            for k in 1..=steps {
                let t_next = if k == steps { iv.end } else { iv.start + k as f64 * h };
                step(alpha, &mut y, t, t_next - t)?;
                if blown_up(&y) {
                    return Err(IntegrateError::NonFiniteState { t: t_next });
                }
                t = t_next;
                if k == steps || k % record_stride == 0 {
                    times.push(t);
                    data.extend_from_slice(&y);
                }
            }
        }
        let last = times.len() - 1;
        segments.push(Segment { interval: *iv, first, last });
        let at_switch = iv.end < horizon || schedule.is_switch_time(iv.end);
        if at_switch && switch_indices.last() != Some(&last) {
            switch_indices.push(last);
        }
    }

    Ok(Trajectory {
        model: spec.model,
        n: spec.n,
        dim: spec.dim,
        times,
        data,
        stride,
        switch_indices,
        segments,
        h_max,
        record_stride,
    })
}

/// Integrates `spec` from `init` over `[0, horizon]` with switch-aligned RK4.
pub fn integrate(
    spec: &ModelSpec,
    init: &SystemState,
    horizon: f64,
    h_max: f64,
    record_stride: usize,
) -> Result<Trajectory, IntegrateError> {
    let mut rk = Rk4::new(spec.state_len());
    run_aligned(spec, init, horizon, h_max, record_stride, |alpha, y, t, h| {
        let mut f = |_t: f64, y: &[f64], out: &mut [f64]| spec.field(alpha, y, out);
        rk.step(&mut f, y, t, h).map_err(IntegrateError::from)
    })
}
