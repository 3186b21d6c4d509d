//! Right-hand sides of the switched Hegselmann–Krause and Cucker–Smale systems.
//!
//! HK:  `ẋᵢ = α(t)/(N−1) · Σ_{j≠i} ψ(xᵢ, xⱼ)(xⱼ − xᵢ)`
//! CS:  `ẋᵢ = vᵢ`, `v̇ᵢ = α(t)/(N−1) · Σ_{j≠i} ψ̃(|xᵢ − xⱼ|)(vⱼ − vᵢ)`

use rayon::prelude::*;
use thiserror::Error;

use crate::kernel::{InfluenceKernel, KernelError};
use crate::schedule::{Model, SwitchingSchedule};

/// Agent count from which the pairwise loop runs in parallel over rows.
const PARALLEL_MIN_AGENTS: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("Cucker-Smale state has no velocities")]
    MissingVelocities,
    #[error("Cucker-Smale dynamics need a radial kernel")]
    RadialKernelRequired,
    #[error("state shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `N` points in `ℝᵈ`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Points {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self, DynamicsError> {
        if dim == 0 {
            return Err(DynamicsError::Shape("dimension must be at least 1".into()));
        }
        if data.len() != n * dim {
            return Err(DynamicsError::Shape(format!(
                "expected {} entries for {n} points in dimension {dim}, got {}",
                n * dim,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(DynamicsError::Shape(format!("non-finite entry {v}")));
        }
        Ok(Points { n, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, DynamicsError> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(DynamicsError::Shape("rows have different lengths".into()));
        }
        Self::new(rows.len(), dim, rows.concat())
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Points { n, dim, data: vec![0.0; n * dim] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

/// Opinions (HK) or positions and velocities (CS).
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState {
    pub positions: Points,
    pub velocities: Option<Points>,
}

impl SystemState {
    pub fn hk(positions: Points) -> Self {
        SystemState { positions, velocities: None }
    }

    pub fn cs(positions: Points, velocities: Points) -> Result<Self, DynamicsError> {
        if positions.len() != velocities.len() || positions.dim() != velocities.dim() {
            return Err(DynamicsError::Shape("positions and velocities differ in shape".into()));
        }
        Ok(SystemState { positions, velocities: Some(velocities) })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn dim(&self) -> usize {
        self.positions.dim()
    }

    /// Positions followed by velocities, as the integrator sees them.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = self.positions.as_slice().to_vec();
        if let Some(vel) = &self.velocities {
            v.extend_from_slice(vel.as_slice());
        }
        v
    }

    pub fn from_flat(n: usize, dim: usize, flat: &[f64], with_velocities: bool) -> Self {
        let split = n * dim;
        let positions = Points { n, dim, data: flat[..split].to_vec() };
        let velocities = with_velocities.then(|| Points { n, dim, data: flat[split..2 * split].to_vec() });
        SystemState { positions, velocities }
    }
}

/// A fully specified model: dynamics, kernel, schedule and sizes.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub model: Model,
    pub kernel: InfluenceKernel,
    pub schedule: SwitchingSchedule,
    pub n: usize,
    pub dim: usize,
}

impl ModelSpec {
    pub fn new(
        model: Model,
        kernel: InfluenceKernel,
        schedule: SwitchingSchedule,
        n: usize,
        dim: usize,
    ) -> Result<Self, DynamicsError> {
        if n < 2 {
            return Err(DynamicsError::Shape(format!("need at least 2 agents, got {n}")));
        }
        if dim == 0 {
            return Err(DynamicsError::Shape("dimension must be at least 1".into()));
        }
        if model == Model::Cs && !kernel.is_radial() {
            return Err(DynamicsError::RadialKernelRequired);
        }
        Ok(ModelSpec { model, kernel, schedule, n, dim })
    }

    /// Length of the flat state vector.
    pub fn state_len(&self) -> usize {
        match self.model {
            Model::Hk => self.n * self.dim,
            Model::Cs => 2 * self.n * self.dim,
        }
    }

    pub fn check_state(&self, state: &SystemState) -> Result<(), DynamicsError> {
        if state.n() != self.n || state.dim() != self.dim {
            return Err(DynamicsError::Shape(format!(
                "state is {}x{}, model expects {}x{}",
                state.n(),
                state.dim(),
                self.n,
                self.dim
            )));
        }
        if self.model == Model::Cs && state.velocities.is_none() {
            return Err(DynamicsError::MissingVelocities);
        }
        Ok(())
    }

    /// Vector field on the flat state with a frozen sign `alpha`.
    pub fn field(&self, alpha: f64, y: &[f64], out: &mut [f64]) -> Result<(), KernelError> {
        let nd = self.n * self.dim;
        match self.model {
            Model::Hk => consensus_field(&self.kernel, self.n, self.dim, alpha, y, y, out),
            Model::Cs => {
                let (x, v) = y.split_at(nd);
                let (dx, dv) = out.split_at_mut(nd);
                dx.copy_from_slice(v);
                consensus_field(&self.kernel, self.n, self.dim, alpha, x, v, dv)
            }
        }
    }
}

/// `out_i = α/(N−1) Σ_{j≠i} ψ(xᵢ, xⱼ)(uⱼ − uᵢ)`: weights from `x`, differences of `u`.
fn consensus_field(
    kernel: &InfluenceKernel,
    n: usize,
    dim: usize,
    alpha: f64,
    x: &[f64],
    u: &[f64],
    out: &mut [f64],
) -> Result<(), KernelError> {
    let scale = alpha / (n - 1) as f64;
    if n >= PARALLEL_MIN_AGENTS {
        return out.par_chunks_mut(dim).enumerate().try_for_each(|(i, oi)| {
            row_field(kernel, n, dim, scale, x, u, i, oi)
        });
    }
    out.fill(0.0);
    if kernel.is_symmetric() {
        for i in 0..n {
            let xi = &x[i * dim..(i + 1) * dim];
            for j in i + 1..n {
                let xj = &x[j * dim..(j + 1) * dim];
                let w = scale * kernel.eval_pair(xi, xj)?;
                for a in 0..dim {
                    let f = w * (u[j * dim + a] - u[i * dim + a]);
                    out[i * dim + a] += f;
                    out[j * dim + a] -= f;
                }
            }
        }
        Ok(())
    } else {
        out.chunks_mut(dim).enumerate().try_for_each(|(i, oi)| row_field(kernel, n, dim, scale, x, u, i, oi))
    }
}

#[allow(clippy::too_many_arguments)]
fn row_field(
    kernel: &InfluenceKernel,
    n: usize,
    dim: usize,
    scale: f64,
    x: &[f64],
    u: &[f64],
    i: usize,
    oi: &mut [f64],
) -> Result<(), KernelError> {
    oi.fill(0.0);
    let xi = &x[i * dim..(i + 1) * dim];
    for j in (0..n).filter(|&j| j != i) {
        let w = scale * kernel.eval_pair(xi, &x[j * dim..(j + 1) * dim])?;
        for a in 0..dim {
            oi[a] += w * (u[j * dim + a] - u[i * dim + a]);
        }
    }
    Ok(())
}

/// HK velocity field at time `t`.
pub fn hk_rhs(spec: &ModelSpec, state: &SystemState, t: f64) -> Result<Points, DynamicsError> {
    spec.check_state(state)?;
    let alpha = spec.schedule.alpha_at(t);
    let mut out = Points::zeros(spec.n, spec.dim);
    consensus_field(
        &spec.kernel,
        spec.n,
        spec.dim,
        alpha,
        state.positions.as_slice(),
        state.positions.as_slice(),
        out.as_mut_slice(),
    )?;
    Ok(out)
}

/// CS field at time `t`: `(ẋ, v̇)`.
pub fn cs_rhs(spec: &ModelSpec, state: &SystemState, t: f64) -> Result<(Points, Points), DynamicsError> {
    let v = state.velocities.as_ref().ok_or(DynamicsError::MissingVelocities)?;
    if !spec.kernel.is_radial() {
        return Err(DynamicsError::RadialKernelRequired);
    }
    spec.check_state(state)?;
    let alpha = spec.schedule.alpha_at(t);
    let mut dv = Points::zeros(spec.n, spec.dim);
    consensus_field(
        &spec.kernel,
        spec.n,
        spec.dim,
        alpha,
        state.positions.as_slice(),
        v.as_slice(),
        dv.as_mut_slice(),
    )?;
    Ok((v.clone(), dv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{PairProfile, RadialProfile};
    use std::sync::Arc;

    fn sched() -> SwitchingSchedule {
        SwitchingSchedule::explicit(vec![0.0, 1.0, 1.5], 3.0).unwrap()
    }

    fn hk(kernel: InfluenceKernel, n: usize, dim: usize) -> ModelSpec {
        ModelSpec::new(Model::Hk, kernel, sched(), n, dim).unwrap()
    }

    #[test]
    fn hk_examples() {
        let spec = hk(InfluenceKernel::constant(1.0).unwrap(), 2, 1);
        let s = SystemState::hk(Points::new(2, 1, vec![0.0, 1.0]).unwrap());
        assert_eq!(hk_rhs(&spec, &s, 0.5).unwrap().as_slice(), &[1.0, -1.0]);
        assert_eq!(hk_rhs(&spec, &s, 1.2).unwrap().as_slice(), &[-1.0, 1.0]);

        let same = SystemState::hk(Points::new(3, 2, vec![0.5, -1.0, 0.5, -1.0, 0.5, -1.0]).unwrap());
        let spec = hk(InfluenceKernel::rational(1.0).unwrap(), 3, 2);
        assert!(hk_rhs(&spec, &same, 0.1).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cs_examples() {
        let spec = ModelSpec::new(Model::Cs, InfluenceKernel::constant(1.0).unwrap(), sched(), 2, 1).unwrap();
        let s = SystemState::cs(Points::new(2, 1, vec![0.0, 0.0]).unwrap(), Points::new(2, 1, vec![0.0, 1.0]).unwrap())
            .unwrap();
        let (dx, dv) = cs_rhs(&spec, &s, 0.5).unwrap();
        assert_eq!(dx.as_slice(), &[0.0, 1.0]);
        assert_eq!(dv.as_slice(), &[1.0, -1.0]);
        let (_, dv) = cs_rhs(&spec, &s, 1.2).unwrap();
        assert_eq!(dv.as_slice(), &[-1.0, 1.0]);

        let flocked =
            SystemState::cs(Points::new(2, 1, vec![0.0, 3.0]).unwrap(), Points::new(2, 1, vec![0.7, 0.7]).unwrap())
                .unwrap();
        let (dx, dv) = cs_rhs(&spec, &flocked, 0.5).unwrap();
        assert_eq!(dx.as_slice(), &[0.7, 0.7]);
        assert!(dv.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cs_errors() {
        let spec = ModelSpec::new(Model::Cs, InfluenceKernel::constant(1.0).unwrap(), sched(), 2, 1).unwrap();
        let s = SystemState::hk(Points::new(2, 1, vec![0.0, 1.0]).unwrap());
        assert_eq!(cs_rhs(&spec, &s, 0.0).unwrap_err(), DynamicsError::MissingVelocities);
        let g = InfluenceKernel::general(PairProfile::Gaussian { sigma: 1.0 }, 1.0).unwrap();
        assert_eq!(
            ModelSpec::new(Model::Cs, g, sched(), 2, 1).unwrap_err(),
            DynamicsError::RadialKernelRequired
        );
    }

    #[test]
    fn general_kernel_is_not_symmetrized() {
        // ψ(y, z) = 1 + 0.5·tanh(z − y) (scalar), asymmetric, bounded by 1.5
        let k = InfluenceKernel::general(
            PairProfile::Custom(Arc::new(|y: &[f64], z: &[f64]| 1.0 + 0.5 * (z[0] - y[0]).tanh())),
            1.5,
        )
        .unwrap();
        let spec = hk(k, 2, 1);
        let s = SystemState::hk(Points::new(2, 1, vec![0.0, 1.0]).unwrap());
        let out = hk_rhs(&spec, &s, 0.5).unwrap();
        let w01 = 1.0 + 0.5 * 1.0f64.tanh();
        let w10 = 1.0 + 0.5 * (-1.0f64).tanh();
        assert_eq!(out.as_slice(), &[w01, -w10]);
    }

    #[test]
    fn parallel_path_matches_serial() {
        let k = InfluenceKernel::radial(RadialProfile::Rational { beta: 1.0 }, 1.0).unwrap();
        let n = PARALLEL_MIN_AGENTS;
        let x: Vec<f64> = (0..n * 2).map(|i| ((i * 37 % 101) as f64) / 50.0 - 1.0).collect();
        let mut par = vec![0.0; n * 2];
        consensus_field(&k, n, 2, 1.0, &x, &x, &mut par).unwrap();
        let mut ser = vec![0.0; n * 2];
        for i in 0..n {
            row_field(&k, n, 2, 1.0 / (n - 1) as f64, &x, &x, i, &mut ser[i * 2..i * 2 + 2]).unwrap();
        }
        assert_eq!(par, ser);
    }
}
