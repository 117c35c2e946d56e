//! Differential inclusions `u′ ∈ A u + F(u)` with box-valued `F`, integrated
//! by IMEX Euler (implicit in `A`, explicit in the selection) under a menu of
//! selection strategies.

pub mod filippov;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par::{self, Exec};
use crate::semiflow::{grid_steps, Generator};
use crate::state::StateVec;
use crate::trajectory::{Bundle, Trajectory};

pub use filippov::{drifted_trajectory, filippov_certificate, filippov_track, FilippovCertificate};

/// Components with `|u| ≤ SIGN_TOL` are treated as zero by the Heaviside selection.
pub const SIGN_TOL: f64 = 1e-12;

/// Members closer than this (sup over the grid) are merged in a bundle.
pub const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn dist(&self, v: f64) -> f64 {
        (self.lo - v).max(v - self.hi).max(0.0)
    }

    pub fn shift(&self, v: f64) -> Self {
        Self { lo: self.lo + v, hi: self.hi + v }
    }

    pub fn is_subset_of(&self, other: &Interval, tol: f64) -> bool {
        self.lo >= other.lo - tol && self.hi <= other.hi + tol
    }

    pub fn hausdorff(&self, other: &Interval) -> f64 {
        (self.lo - other.lo).abs().max((self.hi - other.hi).abs())
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

/// `H₀(u)`: `{−1}` for `u < 0`, `[−1, 1]` at 0, `{1}` for `u > 0`.
pub fn heaviside_selection(u: f64) -> Interval {
    if u > 0.0 {
        Interval::point(1.0)
    } else if u < 0.0 {
        Interval::point(-1.0)
    } else {
        Interval::new(-1.0, 1.0)
    }
}

/// `g_ε(u)`, the continuous (in Hausdorff distance) widening of `H₀`.
pub fn regularized_selection(u: f64, eps: f64) -> Result<Interval> {
    if !(eps > 0.0) {
        return invalid("regularization width must be positive");
    }
    Ok(if u <= -eps {
        Interval::point(-1.0)
    } else if u <= 0.0 {
        Interval::new(-1.0, 2.0 / eps * u + 1.0)
    } else if u <= eps {
        Interval::new(2.0 / eps * u - 1.0, 1.0)
    } else {
        Interval::point(1.0)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum StrategyKind {
    Maximal,
    Minimal,
    Zero,
    RandomPiecewiseConstant { dwell: f64 },
    DelayedDeparture { tau: f64, sign: i8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionStrategy {
    pub kind: StrategyKind,
    pub seed: u64,
}

impl SelectionStrategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            StrategyKind::RandomPiecewiseConstant { dwell } if !(dwell > 0.0) => invalid("dwell must be positive"),
            StrategyKind::DelayedDeparture { tau, .. } if !(tau >= 0.0) => invalid("departure time must be nonnegative"),
            StrategyKind::DelayedDeparture { sign, .. } if sign != 1 && sign != -1 => invalid("departure sign must be ±1"),
            _ => Ok(()),
        }
    }
}

/// The default 8-strategy menu.
pub fn default_strategies() -> Vec<StrategyKind> {
    vec![
        StrategyKind::Maximal,
        StrategyKind::Minimal,
        StrategyKind::Zero,
        StrategyKind::RandomPiecewiseConstant { dwell: 0.1 },
        StrategyKind::RandomPiecewiseConstant { dwell: 0.5 },
        StrategyKind::DelayedDeparture { tau: 0.5, sign: 1 },
        StrategyKind::DelayedDeparture { tau: 0.5, sign: -1 },
        StrategyKind::RandomPiecewiseConstant { dwell: 0.02 },
    ]
}

/// A menu of `count` strategies: the default eight, then further random and
/// delayed variants.
pub fn strategy_menu(count: usize) -> Vec<StrategyKind> {
    let mut v = default_strategies();
    let mut k = 0;
    while v.len() < count {
        let extra = match k % 4 {
            0 => StrategyKind::RandomPiecewiseConstant { dwell: 0.05 * (k / 4 + 1) as f64 },
            1 => StrategyKind::DelayedDeparture { tau: 0.25 * (k / 4 + 1) as f64, sign: 1 },
            2 => StrategyKind::DelayedDeparture { tau: 0.25 * (k / 4 + 1) as f64, sign: -1 },
            _ => StrategyKind::RandomPiecewiseConstant { dwell: 0.3 * (k / 4 + 1) as f64 },
        };
        v.push(extra);
        k += 1;
    }
    v.truncate(count);
    v
}

/// Per-run state of a strategy (random draws, dwell clock).
pub struct Selector {
    strategy: SelectionStrategy,
    rng: ChaCha8Rng,
    lambda: Vec<f64>,
    next_draw: f64,
}

impl Selector {
    pub fn new(strategy: SelectionStrategy, dim: usize) -> Self {
        Self {
            strategy,
            rng: ChaCha8Rng::seed_from_u64(strategy.seed),
            lambda: vec![0.5; dim],
            next_draw: f64::NEG_INFINITY,
        }
    }

    /// Value in `sets[i]` for each component at time `t`.
    pub fn emit(&mut self, t: f64, sets: &[Interval], out: &mut [f64]) {
        match self.strategy.kind {
            StrategyKind::Maximal => sets.iter().zip(out).for_each(|(s, o)| *o = s.hi),
            StrategyKind::Minimal => sets.iter().zip(out).for_each(|(s, o)| *o = s.lo),
            StrategyKind::Zero => sets.iter().zip(out).for_each(|(s, o)| *o = s.clamp(0.0)),
            StrategyKind::RandomPiecewiseConstant { dwell } => {
                if t >= self.next_draw - 1e-12 * dwell {
                    for l in self.lambda.iter_mut() {
                        *l = self.rng.gen::<f64>();
                    }
                    self.next_draw = if self.next_draw.is_finite() { self.next_draw + dwell } else { t + dwell };
                }
                for ((s, o), l) in sets.iter().zip(out).zip(&self.lambda) {
                    *o = s.lo + l * (s.hi - s.lo);
                }
            }
            StrategyKind::DelayedDeparture { tau, sign } => {
                let departed = t >= tau - 1e-12;
                for (s, o) in sets.iter().zip(out) {
                    *o = match (departed, sign > 0) {
                        (false, _) => s.clamp(0.0),
                        (true, true) => s.hi,
                        (true, false) => s.lo,
                    };
                }
            }
        }
    }
}

/// Stiff linear part `A` of `u′ ∈ A u + F(u)`.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearPart {
    None,
    /// Symmetric Toeplitz tridiagonal (e.g. the Dirichlet second difference).
    Tridiagonal { diag: f64, off: f64 },
    Dense(Vec<Vec<f64>>),
}

impl LinearPart {
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LinearPart::None => out.iter_mut().for_each(|o| *o = 0.0),
            LinearPart::Tridiagonal { diag, off } => {
                let n = x.len();
                for i in 0..n {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    out[i] = diag * x[i] + off * (l + r);
                }
            }
            LinearPart::Dense(m) => {
                for (o, row) in out.iter_mut().zip(m) {
                    *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    /// Factorization of `I − dt·A`.
    pub fn implicit(&self, dt: f64, n: usize) -> Result<ImplicitSolver> {
        match self {
            LinearPart::None => Ok(ImplicitSolver::Identity),
            LinearPart::Tridiagonal { diag, off } => {
                let b = 1.0 - dt * diag;
                let c = -dt * off;
                let mut cp = vec![0.0; n];
                let mut inv = vec![0.0; n];
                let mut denom = b;
                for i in 0..n {
                    if i > 0 {
                        denom = b - c * cp[i - 1];
                    }
                    if denom.abs() < 1e-300 {
                        return Err(Error::Numerical("singular implicit system".into()));
                    }
                    inv[i] = 1.0 / denom;
                    cp[i] = c * inv[i];
                }
                Ok(ImplicitSolver::Thomas { c, cp, inv })
            }
            LinearPart::Dense(m) => {
                if m.len() != n || m.iter().any(|r| r.len() != n) {
                    return invalid("dense linear part has the wrong shape");
                }
                let mut a: Vec<Vec<f64>> = (0..n)
                    .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 } - dt * m[i][j]).collect())
                    .collect();
                let mut perm: Vec<usize> = (0..n).collect();
                for k in 0..n {
                    let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
                    if a[p][k].abs() < 1e-300 {
                        return Err(Error::Numerical("singular implicit system".into()));
                    }
                    a.swap(k, p);
                    perm.swap(k, p);
                    for i in k + 1..n {
                        let f = a[i][k] / a[k][k];
                        a[i][k] = f;
                        for j in k + 1..n {
                            a[i][j] -= f * a[k][j];
                        }
                    }
                }
                Ok(ImplicitSolver::Lu { lu: a, perm })
            }
        }
    }
}

pub enum ImplicitSolver {
    Identity,
    Thomas { c: f64, cp: Vec<f64>, inv: Vec<f64> },
    Lu { lu: Vec<Vec<f64>>, perm: Vec<usize> },
}

impl ImplicitSolver {
    /// Solves `(I − dt A) x = rhs` in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        match self {
            ImplicitSolver::Identity => {}
            ImplicitSolver::Thomas { c, cp, inv } => {
                let n = rhs.len();
                rhs[0] *= inv[0];
                for i in 1..n {
                    rhs[i] = (rhs[i] - c * rhs[i - 1]) * inv[i];
                }
                for i in (0..n.saturating_sub(1)).rev() {
                    rhs[i] -= cp[i] * rhs[i + 1];
                }
            }
            ImplicitSolver::Lu { lu, perm } => {
                let n = rhs.len();
                let mut y: Vec<f64> = perm.iter().map(|&p| rhs[p]).collect();
                for i in 0..n {
                    for j in 0..i {
                        y[i] -= lu[i][j] * y[j];
                    }
                }
                for i in (0..n).rev() {
                    for j in i + 1..n {
                        y[i] -= lu[i][j] * y[j];
                    }
                    y[i] /= lu[i][i];
                }
                rhs.copy_from_slice(&y);
            }
        }
    }
}

/// `u′ ∈ A u + F(u)` with `F(u)` a box of per-component intervals.
pub trait InclusionModel: Send + Sync {
    fn dim(&self) -> usize;

    fn weights(&self) -> Arc<[f64]>;

    /// `F(x)` componentwise; nonempty closed intervals.
    fn selection_set(&self, x: &[f64], out: &mut [Interval]);

    fn linear_part(&self) -> &LinearPart;

    /// Multivalued Lipschitz constant of `F` (0 if unknown).
    fn lipschitz_c(&self) -> f64;

    /// Model-specific step-size checks (explicit-part stability, positivity).
    fn check_step(&self, _dt: f64) -> Result<()> {
        Ok(())
    }

    /// True if `F` is a singleton everywhere.
    fn single_valued(&self) -> bool {
        false
    }

    fn selection_box(&self, x: &[f64]) -> Vec<Interval> {
        let mut out = vec![Interval::point(0.0); self.dim()];
        self.selection_set(x, &mut out);
        out
    }
}

fn check_common(model: &dyn InclusionModel, x0: &StateVec, dt: f64) -> Result<()> {
    if x0.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x0.dim() });
    }
    let c = model.lipschitz_c();
    if c * dt > 1.0 {
        return invalid(format!("dt = {dt} exceeds the explicit stability limit 1/C = {}", 1.0 / c));
    }
    model.check_step(dt)
}

/// IMEX Euler: `(u_{j+1} − u_j)/dt = A u_{j+1} + h_j`, `h_j ∈ F(u_j)` chosen by `strategy`.
pub fn integrate(model: &dyn InclusionModel, x0: &StateVec, strategy: SelectionStrategy, t_end: f64, dt: f64) -> Result<Trajectory> {
    strategy.validate()?;
    let steps = grid_steps(t_end, dt)?;
    check_common(model, x0, dt)?;
    let n = model.dim();
    let solver = model.linear_part().implicit(dt, n)?;
    let mut sel = Selector::new(strategy, n);
    let mut sets = vec![Interval::point(0.0); n];
    let mut h = vec![0.0; n];
    let mut states = Vec::with_capacity(steps + 1);
    let keep_selection = !model.single_valued();
    let mut record = Vec::with_capacity(if keep_selection { steps } else { 0 });
    let mut u = x0.coords().to_vec();
    states.push(x0.clone());
    for j in 0..steps {
        model.selection_set(&u, &mut sets);
        sel.emit(j as f64 * dt, &sets, &mut h);
        for i in 0..n {
            u[i] += dt * h[i];
        }
        solver.solve(&mut u);
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite state at step {}", j + 1)));
        }
        states.push(x0.with_coords(u.clone()));
        if keep_selection {
            record.push(h.clone());
        }
    }
    Trajectory::new(0.0, dt, states, record)
}

/// Largest per-step residual: step-equation defect plus distance of the
/// recorded selection from `F(u_j)`, both in the weighted norm.
pub fn step_residual(model: &dyn InclusionModel, traj: &Trajectory) -> f64 {
    let n = model.dim();
    let dt = traj.dt();
    let w = model.weights();
    let mut sets = vec![Interval::point(0.0); n];
    let mut au = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for j in 0..traj.steps() {
        let u0 = traj.state(j).coords();
        let u1 = traj.state(j + 1).coords();
        model.selection_set(u0, &mut sets);
        let h: Vec<f64> = match traj.selection().get(j) {
            Some(h) => h.clone(),
            None => sets.iter().map(|s| s.lo).collect(),
        };
        model.linear_part().apply(u1, &mut au);
        let mut defect = 0.0;
        let mut outside = 0.0;
        for i in 0..n {
            let r = (u1[i] - u0[i]) / dt - au[i] - h[i];
            defect += w[i] * r * r;
            let d = sets[i].dist(h[i]);
            outside += w[i] * d * d;
        }
        worst = worst.max(defect.sqrt() + outside.sqrt());
    }
    worst
}

/// One member per strategy, integrated independently; near-duplicates are
/// merged in strategy order.
pub fn make_bundle(
    model: &dyn InclusionModel,
    x0: &StateVec,
    strategies: &[SelectionStrategy],
    t_end: f64,
    dt: f64,
    seed: u64,
    exec: Exec,
) -> Result<Bundle> {
    if strategies.is_empty() {
        return invalid("at least one strategy is required");
    }
    let used = if model.single_valued() { &strategies[..1] } else { strategies };
    let members = par::try_map(exec, used, |_, s| integrate(model, x0, *s, t_end, dt))?;
    let mut kept: Vec<Trajectory> = Vec::with_capacity(members.len());
    for m in members {
        if !kept.iter().any(|k| k.sup_distance(&m, usize::MAX) <= DEDUP_TOL) {
            kept.push(m);
        }
    }
    Bundle::new(x0.clone(), kept, seed)
}

/// Wraps an inclusion model and a strategy menu as a [`Generator`].
pub struct InclusionGenerator<M> {
    pub model: M,
    pub strategies: Vec<StrategyKind>,
    pub dt: f64,
    pub residual_tol: f64,
    pub equilibria: Vec<StateVec>,
    /// Bundles are generated sequentially inside a generator: the callers
    /// already parallelize over grid points.
    pub exec: Exec,
}

impl<M: InclusionModel> InclusionGenerator<M> {
    pub fn new(model: M, strategies: Vec<StrategyKind>, dt: f64) -> Self {
        Self { model, strategies, dt, residual_tol: 1e-7, equilibria: Vec::new(), exec: Exec::Sequential }
    }

    pub fn with_equilibria(mut self, eq: Vec<StateVec>) -> Self {
        self.equilibria = eq;
        self
    }

    pub fn seeded(&self, seed: u64) -> Vec<SelectionStrategy> {
        self.strategies
            .iter()
            .enumerate()
            .map(|(i, k)| SelectionStrategy::new(*k, par::mix_seed(seed, i as u64)))
            .collect()
    }
}

impl<M: InclusionModel> Generator for InclusionGenerator<M> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn weights(&self) -> Arc<[f64]> {
        self.model.weights()
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn bundle(&self, x0: &StateVec, horizon: f64, seed: u64) -> Result<Bundle> {
        make_bundle(&self.model, x0, &self.seeded(seed), horizon, self.dt, seed, self.exec)
    }

    fn residual(&self, traj: &Trajectory) -> f64 {
        step_residual(&self.model, traj)
    }

    fn residual_tol(&self) -> f64 {
        self.residual_tol
    }

    fn equilibria(&self) -> Vec<StateVec> {
        self.equilibria.clone()
    }

    fn single_valued(&self) -> bool {
        self.model.single_valued()
    }
}
