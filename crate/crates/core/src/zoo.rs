//! Reference models: `x′ = √|x|`, the linear saddle `(a x, −b y)`, and a
//! planar Lipschitz inclusion with a tunable constant.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inclusion::{InclusionModel, Interval, LinearPart, StrategyKind};
use crate::par;
use crate::semiflow::{grid_steps, Generator};
use crate::state::StateVec;
use crate::trajectory::{Bundle, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum SqrtFamily {
    Unique,
    Constant,
    Depart { tau: f64, sign: i8 },
}

/// Exact solutions of `x′ = √|x|`. The negative `Unique` branch increases
/// towards 0 and is only valid until it gets there.
pub fn sqrt_ode_exact(x0: f64, family: SqrtFamily, t: f64) -> Result<f64> {
    match family {
        SqrtFamily::Unique => {
            if x0 > 0.0 {
                Ok((t / 2.0 + x0.sqrt()).powi(2))
            } else if x0 < 0.0 {
                let r = (-x0).sqrt();
                if t > 2.0 * r {
                    return Err(Error::Precondition(format!("solution from {x0} is not unique after t = {}", 2.0 * r)));
                }
                Ok(-(r - t / 2.0).powi(2))
            } else {
                invalid("the unique branch needs x0 ≠ 0")
            }
        }
        SqrtFamily::Constant if x0 == 0.0 => Ok(0.0),
        SqrtFamily::Depart { tau, sign } if x0 == 0.0 => {
            if sign != 1 && sign != -1 {
                return invalid("departure sign must be ±1");
            }
            Ok(if t <= tau { 0.0 } else { f64::from(sign) * (t - tau).powi(2) / 4.0 })
        }
        _ => invalid("constant and departing branches start at x0 = 0"),
    }
}

/// The √|x| model stepped with its exact local flow. Negative states follow
/// the mirrored branch, so the solutions from 0 are `0` and `±(t−τ)²/4`.
/// The strategy only decides when (and in which direction) a solution
/// sitting at 0 departs.
#[derive(Debug, Clone)]
pub struct SqrtOde {
    pub dt: f64,
    pub strategies: Vec<StrategyKind>,
}

impl SqrtOde {
    pub fn new(dt: f64) -> Self {
        Self { dt, strategies: Self::canonical() }
    }

    /// Constant, immediate ± departure, and delayed + departure at τ = 1.
    pub fn canonical() -> Vec<StrategyKind> {
        vec![
            StrategyKind::Zero,
            StrategyKind::DelayedDeparture { tau: 0.0, sign: 1 },
            StrategyKind::DelayedDeparture { tau: 0.0, sign: -1 },
            StrategyKind::DelayedDeparture { tau: 1.0, sign: 1 },
        ]
    }

    /// Departure time (absolute) and sign for a strategy.
    fn departure(kind: StrategyKind, seed: u64) -> (f64, f64) {
        match kind {
            StrategyKind::Zero => (f64::INFINITY, 0.0),
            StrategyKind::Maximal => (0.0, 1.0),
            StrategyKind::Minimal => (0.0, -1.0),
            StrategyKind::DelayedDeparture { tau, sign } => (tau, f64::from(sign)),
            StrategyKind::RandomPiecewiseConstant { dwell } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = rng.gen_range(0..10u32);
                let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                (dwell * f64::from(k), s)
            }
        }
    }

    /// Exact flow over `[t, t + dt]`: `|x|` grows like `(t/2 + √|x₀|)²` away
    /// from 0, and a solution at 0 leaves at the strategy's departure time.
    pub fn step(x: f64, t: f64, dt: f64, dep: (f64, f64)) -> f64 {
        if x != 0.0 {
            return x.signum() * (dt / 2.0 + x.abs().sqrt()).powi(2);
        }
        let leave = dep.0.max(t);
        let end = t + dt;
        if leave >= end {
            0.0
        } else {
            dep.1 * (end - leave).powi(2) / 4.0
        }
    }

    pub fn integrate(&self, x0: f64, kind: StrategyKind, seed: u64, t_end: f64) -> Result<Trajectory> {
        let steps = grid_steps(t_end, self.dt)?;
        let dep = Self::departure(kind, seed);
        let mut x = x0;
        let mut states = Vec::with_capacity(steps + 1);
        states.push(StateVec::euclidean(vec![x]));
        for j in 0..steps {
            x = Self::step(x, j as f64 * self.dt, self.dt, dep);
            states.push(StateVec::euclidean(vec![x]));
        }
        Trajectory::new(0.0, self.dt, states, Vec::new())
    }

    /// The set reachable from `x` in one step is an interval.
    pub fn reachable(x: f64, dt: f64) -> Interval {
        if x != 0.0 {
            return Interval::point(x.signum() * (dt / 2.0 + x.abs().sqrt()).powi(2));
        }
        Interval::new(-dt * dt / 4.0, dt * dt / 4.0)
    }
}

impl Generator for SqrtOde {
    fn dim(&self) -> usize {
        1
    }

    fn weights(&self) -> Arc<[f64]> {
        vec![1.0].into()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn bundle(&self, x0: &StateVec, horizon: f64, seed: u64) -> Result<Bundle> {
        if x0.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: x0.dim() });
        }
        let mut members: Vec<Trajectory> = Vec::new();
        for (i, k) in self.strategies.iter().enumerate() {
            let m = self.integrate(x0.coords()[0], *k, par::mix_seed(seed, i as u64), horizon)?;
            if !members.iter().any(|p| p.sup_distance(&m, usize::MAX) <= crate::inclusion::DEDUP_TOL) {
                members.push(m);
            }
        }
        Bundle::new(x0.clone(), members, seed)
    }

    fn residual(&self, traj: &Trajectory) -> f64 {
        let dt = traj.dt();
        (0..traj.steps())
            .map(|j| {
                let a = traj.state(j).coords()[0];
                let b = traj.state(j + 1).coords()[0];
                Self::reachable(a, dt).dist(b)
            })
            .fold(0.0, f64::max)
    }

    fn residual_tol(&self) -> f64 {
        1e-12
    }

    fn equilibria(&self) -> Vec<StateVec> {
        vec![StateVec::euclidean(vec![0.0])]
    }
}

pub fn saddle_exact(x0: &StateVec, t: f64, a: f64, b: f64) -> Result<StateVec> {
    if x0.dim() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: x0.dim() });
    }
    let c = x0.coords();
    Ok(x0.with_coords(vec![c[0] * (a * t).exp(), c[1] * (-b * t).exp()]))
}

/// Linear saddle sampled from its closed-form flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleFlow {
    pub a: f64,
    pub b: f64,
    pub dt: f64,
}

impl SaddleFlow {
    pub fn new(a: f64, b: f64, dt: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && dt > 0.0) {
            return invalid("saddle rates and dt must be positive");
        }
        Ok(Self { a, b, dt })
    }

    fn sampled(&self, x0: &StateVec, horizon: f64, sign: f64) -> Result<Trajectory> {
        if x0.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: x0.dim() });
        }
        let steps = grid_steps(horizon, self.dt)?;
        let states = (0..=steps)
            .map(|j| saddle_exact(x0, sign * j as f64 * self.dt, self.a, self.b))
            .collect::<Result<Vec<_>>>()?;
        Trajectory::new(0.0, self.dt, states, Vec::new())
    }
}

impl Generator for SaddleFlow {
    fn dim(&self) -> usize {
        2
    }

    fn weights(&self) -> Arc<[f64]> {
        vec![1.0, 1.0].into()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn bundle(&self, x0: &StateVec, horizon: f64, seed: u64) -> Result<Bundle> {
        Bundle::new(x0.clone(), vec![self.sampled(x0, horizon, 1.0)?], seed)
    }

    fn residual(&self, traj: &Trajectory) -> f64 {
        let dt = traj.dt();
        (0..traj.steps())
            .map(|j| {
                let next = saddle_exact(traj.state(j), dt, self.a, self.b).expect("planar state");
                next.dist(traj.state(j + 1)) / (dt * next.norm().max(1.0))
            })
            .fold(0.0, f64::max)
    }

    fn residual_tol(&self) -> f64 {
        1e-9
    }

    fn equilibria(&self) -> Vec<StateVec> {
        vec![StateVec::euclidean(vec![0.0, 0.0])]
    }

    fn single_valued(&self) -> bool {
        true
    }

    fn reverse(&self, x0: &StateVec, horizon: f64) -> Option<Trajectory> {
        self.sampled(x0, horizon, -1.0).ok()
    }
}

/// The saddle written as an inclusion with `F ≡ {0}` and `A = diag(a, −b)`,
/// for exercising the IMEX integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleInclusion {
    pub a: f64,
    pub b: f64,
    linear: LinearPart,
}

impl SaddleInclusion {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b, linear: LinearPart::Dense(vec![vec![a, 0.0], vec![0.0, -b]]) }
    }
}

impl InclusionModel for SaddleInclusion {
    fn dim(&self) -> usize {
        2
    }

    fn weights(&self) -> Arc<[f64]> {
        vec![1.0, 1.0].into()
    }

    fn selection_set(&self, _x: &[f64], out: &mut [Interval]) {
        out.iter_mut().for_each(|o| *o = Interval::point(0.0));
    }

    fn linear_part(&self) -> &LinearPart {
        &self.linear
    }

    fn lipschitz_c(&self) -> f64 {
        0.0
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if self.a * dt >= 1.0 {
            return invalid("implicit step needs a·dt < 1");
        }
        Ok(())
    }

    fn single_valued(&self) -> bool {
        true
    }
}

/// `u′ ∈ R u + F(u)`, `R` the quarter rotation, `F(u) = [−σ(u), σ(u)]²` with
/// `σ(u) = s₀ + κ sin(u₁)`, `κ = C/√2`, `s₀ = 1 + κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarLipschitzInclusion {
    pub c: f64,
    linear: LinearPart,
}

impl PlanarLipschitzInclusion {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return invalid("Lipschitz constant must be positive");
        }
        Ok(Self { c, linear: LinearPart::Dense(vec![vec![0.0, -1.0], vec![1.0, 0.0]]) })
    }

    pub fn sigma(&self, x: &[f64]) -> f64 {
        let k = self.c / 2f64.sqrt();
        1.0 + k + k * x[0].sin()
    }
}

impl InclusionModel for PlanarLipschitzInclusion {
    fn dim(&self) -> usize {
        2
    }

    fn weights(&self) -> Arc<[f64]> {
        vec![1.0, 1.0].into()
    }

    fn selection_set(&self, x: &[f64], out: &mut [Interval]) {
        let s = self.sigma(x);
        out.iter_mut().for_each(|o| *o = Interval::new(-s, s));
    }

    fn linear_part(&self) -> &LinearPart {
        &self.linear
    }

    fn lipschitz_c(&self) -> f64 {
        self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id")]
pub enum ZooModel {
    SqrtOde,
    LinearSaddle { a: f64, b: f64 },
    PlanarLipschitzInclusion { c: f64 },
}

impl ZooModel {
    /// Exact trajectory value, when the model has one.
    pub fn closed_form(&self, x0: &StateVec, t: f64) -> Option<StateVec> {
        match *self {
            ZooModel::SqrtOde => {
                // Same branch as the stepper: |x| grows for either sign.
                let x = x0.coords()[0];
                if x == 0.0 {
                    return None;
                }
                Some(x0.with_coords(vec![x.signum() * (t / 2.0 + x.abs().sqrt()).powi(2)]))
            }
            ZooModel::LinearSaddle { a, b } => saddle_exact(x0, t, a, b).ok(),
            ZooModel::PlanarLipschitzInclusion { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ZooModel::SqrtOde => 1,
            _ => 2,
        }
    }
}
