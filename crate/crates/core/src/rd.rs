//! Heaviside reaction–diffusion inclusion `u_t − u_xx ∈ H₀(u) + ωu` on (0, 1)
//! with Dirichlet conditions, discretized by the second difference on
//! `n` interior nodes (`h = 1/(n+1)`, metric weights `h`).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::inclusion::{
    default_strategies, heaviside_selection, integrate, regularized_selection, InclusionGenerator, InclusionModel,
    Interval, LinearPart, SelectionStrategy, StrategyKind, SIGN_TOL,
};
use crate::par::{self, Exec};
use crate::region::{CloudLabel, PointCloudSet, RegionSpec};
use crate::semiflow::{cluster, DEFAULT_CLUSTER_TOL};
use crate::state::StateVec;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdConfig {
    pub n: usize,
    pub omega: f64,
    pub epsilon_reg: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for RdConfig {
    fn default() -> Self {
        Self { n: 63, omega: 0.0, epsilon_reg: 0.0, dt: 1e-3, t_end: 5.0 }
    }
}

impl RdConfig {
    pub fn new(n: usize, omega: f64) -> Self {
        Self { n, omega, ..Self::default() }
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// First eigenvalue of the discrete Dirichlet operator, `(2/h²)(1 − cos πh)`.
    pub fn lambda1(&self) -> f64 {
        let h = self.h();
        2.0 / (h * h) * (1.0 - (PI * h).cos())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return invalid("need at least 3 interior grid points");
        }
        if !(self.omega >= 0.0 && self.omega < PI * PI) {
            return invalid("omega must lie in [0, π²)");
        }
        if self.omega >= self.lambda1() {
            return invalid("omega must stay below the discrete first eigenvalue");
        }
        if !(self.epsilon_reg >= 0.0) {
            return invalid("epsilon_reg must be nonnegative");
        }
        if !(self.dt > 0.0 && self.t_end > 0.0) {
            return invalid("dt and T must be positive");
        }
        Ok(())
    }

    /// Largest resolvable number of lobes (8 nodes per lobe).
    pub fn k_max(&self) -> usize {
        self.n / 8
    }

    /// `order_slack = uniqueness_tol = 10·dt·(1+ω)`.
    pub fn order_slack(&self) -> f64 {
        10.0 * self.dt * (1.0 + self.omega)
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n).map(|i| i as f64 * h).collect()
    }

    pub fn weights(&self) -> Arc<[f64]> {
        vec![self.h(); self.n].into()
    }

    pub fn state(&self, coords: Vec<f64>) -> Result<StateVec> {
        StateVec::new(coords, self.weights())
    }

    pub fn from_fn(&self, f: impl Fn(f64) -> f64) -> StateVec {
        self.state(self.nodes().into_iter().map(f).collect()).expect("n ≥ 3")
    }
}

/// The inclusion with selection `H₀(u) + ωu` (or `g_ε(u) + ωu` when
/// `epsilon_reg > 0`) and linear part the discrete Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct HeavisideRd {
    pub cfg: RdConfig,
    linear: LinearPart,
}

impl HeavisideRd {
    pub fn new(cfg: RdConfig) -> Result<Self> {
        cfg.validate()?;
        let h = cfg.h();
        Ok(Self { cfg, linear: LinearPart::Tridiagonal { diag: -2.0 / (h * h), off: 1.0 / (h * h) } })
    }

    pub fn component_set(&self, u: f64) -> Interval {
        let base = if self.cfg.epsilon_reg > 0.0 {
            regularized_selection(u, self.cfg.epsilon_reg).expect("positive width")
        } else if u.abs() <= SIGN_TOL {
            heaviside_selection(0.0)
        } else {
            heaviside_selection(u)
        };
        base.shift(self.cfg.omega * u)
    }

    pub fn generator(&self, strategies: Vec<StrategyKind>) -> InclusionGenerator<HeavisideRd> {
        InclusionGenerator::new(self.clone(), strategies, self.cfg.dt)
    }
}

impl InclusionModel for HeavisideRd {
    fn dim(&self) -> usize {
        self.cfg.n
    }

    fn weights(&self) -> Arc<[f64]> {
        self.cfg.weights()
    }

    fn selection_set(&self, x: &[f64], out: &mut [Interval]) {
        for (o, u) in out.iter_mut().zip(x) {
            *o = self.component_set(*u);
        }
    }

    fn linear_part(&self) -> &LinearPart {
        &self.linear
    }

    fn lipschitz_c(&self) -> f64 {
        if self.cfg.epsilon_reg > 0.0 {
            2.0 / self.cfg.epsilon_reg + self.cfg.omega
        } else {
            0.0
        }
    }

    fn check_step(&self, dt: f64) -> Result<()> {
        if dt * self.cfg.omega > 1.0 {
            return invalid("dt·ω must not exceed 1");
        }
        Ok(())
    }
}

/// Stationary system `(2/h² − ω) u_i − (u_{i−1} + u_{i+1})/h² = s_i`, with
/// rows in `zero` replaced by `u_i = 0` (Thomas algorithm).
fn solve_stationary(cfg: &RdConfig, s: &[f64], zero: &[bool]) -> Result<Vec<f64>> {
    let n = s.len();
    let h2 = cfg.h() * cfg.h();
    let (d, o) = (2.0 / h2 - cfg.omega, -1.0 / h2);
    let row = |i: usize| if zero[i] { (0.0, 1.0, 0.0, 0.0) } else { (o, d, o, s[i]) };
    let mut cp = vec![0.0; n];
    let mut x = vec![0.0; n];
    for i in 0..n {
        let (a, b, c, r) = row(i);
        let (denom, rhs) = if i == 0 { (b, r) } else { (b - a * cp[i - 1], r - a * x[i - 1]) };
        if denom.abs() < 1e-300 {
            return Err(Error::Numerical("singular stationary system".into()));
        }
        cp[i] = c / denom;
        x[i] = rhs / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Placement of one interior zero on the grid.
#[derive(Debug, Clone, Copy)]
enum Junction {
    /// Left lobe ends at node `i`, right lobe starts at `i + 1`.
    Between(usize),
    /// Node `i` is a zero node with a free selection.
    At(usize),
}

impl Junction {
    fn position(self) -> f64 {
        match self {
            Junction::Between(i) => i as f64 + 0.5,
            Junction::At(i) => i as f64,
        }
    }
}

/// Lobe sign pattern and zero nodes for a choice of junctions.
fn pattern(n: usize, sign: f64, junctions: &[Junction]) -> (Vec<f64>, Vec<bool>) {
    let mut s = vec![0.0; n];
    let mut zero = vec![false; n];
    let mut lobe = 0usize;
    let mut next = 0usize;
    for i in 0..n {
        while next < junctions.len() && junctions[next].position() < i as f64 {
            lobe += 1;
            next += 1;
        }
        if next < junctions.len() && matches!(junctions[next], Junction::At(j) if j == i) {
            zero[i] = true;
            continue;
        }
        s[i] = sign * if lobe.is_multiple_of(2) { 1.0 } else { -1.0 };
    }
    (s, zero)
}

/// Solution of the pattern if it is a genuine equilibrium: strict signs off
/// the zero nodes and zero-node selections inside `[−1, 1]`.
fn try_pattern(cfg: &RdConfig, s: &[f64], zero: &[bool]) -> Result<Option<Vec<f64>>> {
    let mut u = solve_stationary(cfg, s, zero)?;
    let tiny = 1e-12 * u.iter().fold(0.0, |a: f64, v| a.max(v.abs()));
    let h2 = cfg.h() * cfg.h();
    for i in 0..u.len() {
        if zero[i] {
            let l = if i > 0 { u[i - 1] } else { 0.0 };
            let r = if i + 1 < u.len() { u[i + 1] } else { 0.0 };
            // s_i = −(A_h u)_i at a zero node.
            if ((l + r) / h2).abs() > 1.0 + 1e-9 {
                return Ok(None);
            }
        } else if u[i].abs() > tiny && u[i].signum() != s[i] {
            return Ok(None);
        }
    }
    for v in u.iter_mut() {
        if v.abs() <= tiny {
            *v = 0.0;
        }
    }
    Ok(Some(u))
}

fn junction_options(q: f64, n: usize) -> Vec<Junction> {
    let base = q.floor() as i64;
    let near = q.round() as i64;
    let mut v = Vec::new();
    for i in base - 1..=base + 1 {
        if i >= 0 && (i as usize) + 1 < n {
            v.push(Junction::Between(i as usize));
        }
    }
    for i in near - 1..=near + 1 {
        if i >= 1 && (i as usize) + 1 < n {
            v.push(Junction::At(i as usize));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub k: usize,
    pub sign: i8,
    pub profile: StateVec,
    pub zeros: Vec<f64>,
    /// `|v′(0)|` of the continuous lobe solution.
    pub gamma0: f64,
    pub energy: f64,
    /// Discrete stationary residual (weighted norm).
    pub residual: f64,
}

/// Continuous lobe of width `L` solving `−u″ = 1 + ωu`, `u(0) = u(L) = 0`.
pub fn lobe_profile(x: f64, width: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        x * (width - x) / 2.0
    } else {
        let r = omega.sqrt();
        ((r * (x - width / 2.0)).cos() / (r * width / 2.0).cos() - 1.0) / omega
    }
}

/// Continuous `v_k^±` (the discrete problem is seeded by its sign pattern).
pub fn analytic_equilibrium(x: f64, k: usize, sign: i8, omega: f64) -> f64 {
    let width = 1.0 / k as f64;
    let lobe = ((x / width).floor() as usize).min(k - 1);
    let local = x - lobe as f64 * width;
    let s = f64::from(sign) * if lobe.is_multiple_of(2) { 1.0 } else { -1.0 };
    s * lobe_profile(local, width, omega)
}

pub fn gamma0(k: usize, omega: f64) -> f64 {
    let width = 1.0 / k as f64;
    if omega == 0.0 {
        width / 2.0
    } else {
        let r = omega.sqrt();
        (r * width / 2.0).tan() / r
    }
}

/// Selection `s ∈ H₀(u)` closest to balancing the stationary equation.
fn stationary_selection(u: &[f64], au: &[f64], omega: f64) -> Vec<f64> {
    u.iter()
        .zip(au)
        .map(|(&v, &a)| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { (-(a + omega * v)).clamp(-1.0, 1.0) })
        .collect()
}

/// Weighted norm of `A_h u + ωu + s` with `s ∈ H₀(u)` chosen optimally.
pub fn stationary_residual(u: &StateVec, cfg: &RdConfig) -> f64 {
    let h = cfg.h();
    let n = cfg.n;
    let lin = LinearPart::Tridiagonal { diag: -2.0 / (h * h), off: 1.0 / (h * h) };
    let mut au = vec![0.0; n];
    lin.apply(u.coords(), &mut au);
    let s = stationary_selection(u.coords(), &au, cfg.omega);
    (0..n).map(|i| h * (au[i] + cfg.omega * u.coords()[i] + s[i]).powi(2)).sum::<f64>().sqrt()
}

pub fn shoot_equilibrium(k: usize, sign: i8, cfg: &RdConfig) -> Result<Equilibrium> {
    cfg.validate()?;
    if sign != 1 && sign != -1 {
        return invalid("sign must be ±1");
    }
    if k == 0 || k > cfg.k_max() {
        return invalid(format!("k = {k} not resolvable on n = {} (k_max = {})", cfg.n, cfg.k_max()));
    }
    let h = cfg.h();
    // Continuous zeros m/k in node-index coordinates; try grid placements
    // nearest to them first.
    let opts: Vec<Vec<Junction>> =
        (1..k).map(|m| junction_options(m as f64 / (k as f64 * h) - 1.0, cfg.n)).collect();
    let targets: Vec<f64> = (1..k).map(|m| m as f64 / (k as f64 * h) - 1.0).collect();
    let mut combos: Vec<Vec<Junction>> = vec![Vec::new()];
    for o in &opts {
        combos = combos.into_iter().flat_map(|c| o.iter().map(move |j| [c.clone(), vec![*j]].concat())).collect();
    }
    let cost = |c: &[Junction]| c.iter().zip(&targets).map(|(j, t)| (j.position() - t).abs()).sum::<f64>();
    combos.sort_by(|a, b| cost(a).total_cmp(&cost(b)));
    let mut found = None;
    for c in &combos {
        if c.windows(2).any(|w| w[1].position() - w[0].position() < 2.0) {
            continue;
        }
        let (s, zero) = pattern(cfg.n, 1.0, c);
        if let Some(u) = try_pattern(cfg, &s, &zero)? {
            found = Some(u);
            break;
        }
    }
    let Some(mut u) = found else {
        return Err(Error::Numerical(format!("no discrete {k}-lobe equilibrium near the analytic zero layout")));
    };
    if sign < 0 {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    let profile = cfg.state(u)?;
    let residual = stationary_residual(&profile, cfg);
    if residual > 1e-8 {
        return Err(Error::Numerical(format!("stationary residual {residual:e} after active-set solve")));
    }
    let zeros = zero_locations(&profile, cfg);
    if zeros.len() != k - 1 {
        return Err(Error::Numerical(format!("found {} zeros for k = {k}", zeros.len())));
    }
    Ok(Equilibrium {
        k,
        sign,
        energy: lyapunov_e(&profile, cfg),
        profile,
        zeros,
        gamma0: gamma0(k, cfg.omega),
        residual,
    })
}

/// Interior zeros: nodes where the profile vanishes, and linear-interpolated
/// crossings between nodes of opposite sign.
pub fn zero_locations(u: &StateVec, cfg: &RdConfig) -> Vec<f64> {
    let h = cfg.h();
    let c = u.coords();
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &v) in c.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        if let Some((j, p)) = last {
            if p.signum() != v.signum() {
                if j + 1 == i {
                    out.push(h * (j as f64 + 1.0 + p / (p - v)));
                } else {
                    out.push(h * ((j + i) as f64 / 2.0 + 1.0));
                }
            }
        }
        last = Some((i, v));
    }
    out
}

/// `E(u) = ½ Σ h ((u_{i+1} − u_i)/h)² − Σ h (|u_i| + ω u_i²/2)`, zero boundary values.
pub fn lyapunov_e(u: &StateVec, cfg: &RdConfig) -> f64 {
    let h = cfg.h();
    let c = u.coords();
    let n = c.len();
    let mut grad = 0.0;
    for i in 0..=n {
        let a = if i == 0 { 0.0 } else { c[i - 1] };
        let b = if i == n { 0.0 } else { c[i] };
        grad += (b - a) * (b - a) / h;
    }
    let pot: f64 = c.iter().map(|v| h * (v.abs() + cfg.omega * v * v / 2.0)).sum();
    0.5 * grad - pot
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EnergyLevel {
    pub k: usize,
    pub e_plus: f64,
    pub e_minus: f64,
    pub sup_norm: f64,
    pub zeros: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct EnergyOrderingReport {
    pub levels: Vec<EnergyLevel>,
    pub strictly_increasing: bool,
    pub all_negative: bool,
    pub max_symmetry_gap: f64,
    pub pass: bool,
}

pub fn check_energy_ordering(cfg: &RdConfig, k_max: usize) -> Result<EnergyOrderingReport> {
    if k_max > cfg.k_max() {
        return invalid(format!("k_max = {k_max} exceeds the resolvable {}", cfg.k_max()));
    }
    let mut levels = Vec::new();
    for k in 1..=k_max {
        let p = shoot_equilibrium(k, 1, cfg)?;
        let m = shoot_equilibrium(k, -1, cfg)?;
        levels.push(EnergyLevel {
            k,
            e_plus: p.energy,
            e_minus: m.energy,
            sup_norm: p.profile.coords().iter().fold(0.0, |a: f64, v| a.max(v.abs())),
            zeros: p.zeros.len(),
        });
    }
    let strictly_increasing = levels.windows(2).all(|w| w[0].e_plus < w[1].e_plus);
    let all_negative = levels.iter().all(|l| l.e_plus < 0.0 && l.e_minus < 0.0);
    let max_symmetry_gap = levels.iter().map(|l| (l.e_plus - l.e_minus).abs()).fold(0.0, f64::max);
    Ok(EnergyOrderingReport {
        pass: strictly_increasing && all_negative && max_symmetry_gap == 0.0,
        levels,
        strictly_increasing,
        all_negative,
        max_symmetry_gap,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct LyapunovReport {
    pub energies: Vec<f64>,
    pub max_uphill: f64,
    pub slack: f64,
    pub pass: bool,
}

pub fn check_lyapunov_decrease(traj: &Trajectory, cfg: &RdConfig) -> LyapunovReport {
    let energies: Vec<f64> = traj.states().iter().map(|s| lyapunov_e(s, cfg)).collect();
    let max_uphill = energies.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let slack = 10.0 * traj.dt();
    LyapunovReport { pass: max_uphill <= slack, energies, max_uphill, slack }
}

/// `μ{x ∈ (0,1) : |v(x)| ≤ α}` for the piecewise-linear interpolant of `v`
/// (zero boundary values), exact per cell.
pub fn sublevel_measure(v: &[f64], h: f64, alpha: f64) -> f64 {
    let n = v.len();
    let mut total = 0.0;
    for i in 0..=n {
        let a = if i == 0 { 0.0 } else { v[i - 1] };
        let b = if i == n { 0.0 } else { v[i] };
        let frac = if a == b {
            if a.abs() <= alpha {
                1.0
            } else {
                0.0
            }
        } else {
            let t1 = (-alpha - a) / (b - a);
            let t2 = (alpha - a) / (b - a);
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            (hi.min(1.0) - lo.max(0.0)).max(0.0)
        };
        total += frac * h;
    }
    total
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct NondegeneracyReport {
    pub c: f64,
    pub alpha0: f64,
    /// `(α, μ{|v| ≤ α})` pairs.
    pub measured: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Ten geometric levels from `alpha0/10` to `alpha0`.
pub fn default_alphas(alpha0: f64) -> Vec<f64> {
    (0..10).map(|i| alpha0 / 10.0 * 10f64.powf(i as f64 / 9.0)).collect()
}

fn check_slopes(v: &StateVec, cfg: &RdConfig) -> Result<()> {
    let c = v.coords();
    let h = cfg.h();
    let tol = 1e-10;
    if (c[0] / h).abs() < tol || (c[c.len() - 1] / h).abs() < tol {
        return Err(Error::DegenerateProfile("zero boundary slope".into()));
    }
    Ok(())
}

fn report(v: &StateVec, cfg: &RdConfig, c: Option<f64>, alphas: &[f64]) -> Result<NondegeneracyReport> {
    if alphas.is_empty() || alphas.iter().any(|a| !(*a > 0.0)) {
        return invalid("alpha levels must be positive");
    }
    let measured: Vec<(f64, f64)> = alphas.iter().map(|&a| (a, sublevel_measure(v.coords(), cfg.h(), a))).collect();
    let c = c.unwrap_or_else(|| measured.iter().map(|(a, m)| m / a).fold(0.0, f64::max));
    let alpha0 = alphas.iter().cloned().fold(0.0, f64::max);
    let pass = measured.iter().all(|(a, m)| *m <= c * a * (1.0 + 1e-12));
    Ok(NondegeneracyReport { c, alpha0, measured, pass })
}

/// Equilibria use `C = 4k/γ₀`; other profiles get a fitted constant.
pub fn nondegeneracy_of_equilibrium(eq: &Equilibrium, cfg: &RdConfig, alphas: &[f64]) -> Result<NondegeneracyReport> {
    check_slopes(&eq.profile, cfg)?;
    report(&eq.profile, cfg, Some(4.0 * eq.k as f64 / eq.gamma0), alphas)
}

pub fn nondegeneracy(v: &StateVec, cfg: &RdConfig, alphas: &[f64]) -> Result<NondegeneracyReport> {
    if v.dim() != cfg.n {
        return Err(Error::DimensionMismatch { expected: cfg.n, got: v.dim() });
    }
    check_slopes(v, cfg)?;
    report(v, cfg, None, alphas)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ComparisonReport {
    pub pairs: usize,
    /// `max_{pairs, j, i} (u_i(t_j) − v_i(t_j))`.
    pub worst_violation: f64,
    pub order_slack: f64,
    /// Largest member spread within each bundle (uniqueness).
    pub spread_u: f64,
    pub spread_v: f64,
    pub pass: bool,
}

fn max_spread(ms: &[Trajectory]) -> f64 {
    let mut s: f64 = 0.0;
    for a in ms {
        for b in ms {
            s = s.max(a.sup_distance(b, usize::MAX));
        }
    }
    s
}

pub fn check_comparison(
    u0: &StateVec,
    v0: &StateVec,
    cfg: &RdConfig,
    strategies: &[StrategyKind],
    seed: u64,
    exec: Exec,
) -> Result<ComparisonReport> {
    if strategies.is_empty() {
        return invalid("at least one strategy is required");
    }
    if u0.coords().iter().zip(v0.coords()).any(|(a, b)| a > b) {
        return Err(Error::Precondition("u0 ≤ v0 does not hold componentwise".into()));
    }
    let alphas = default_alphas(1e-2);
    if nondegeneracy(u0, cfg, &alphas).is_err() && nondegeneracy(v0, cfg, &alphas).is_err() {
        return Err(Error::Precondition("neither u0 nor v0 is nondegenerate".into()));
    }
    let model = HeavisideRd::new(*cfg)?;
    let jobs: Vec<(usize, bool)> = (0..strategies.len()).flat_map(|i| [(i, false), (i, true)]).collect();
    let trajs = par::try_map(exec, &jobs, |_, &(i, upper)| {
        let x = if upper { v0 } else { u0 };
        integrate(&model, x, SelectionStrategy::new(strategies[i], par::mix_seed(seed, i as u64)), cfg.t_end, cfg.dt)
    })?;
    let (us, vs): (Vec<_>, Vec<_>) = trajs.into_iter().zip(&jobs).partition(|(_, j)| !j.1);
    let us: Vec<Trajectory> = us.into_iter().map(|(t, _)| t).collect();
    let vs: Vec<Trajectory> = vs.into_iter().map(|(t, _)| t).collect();
    let mut worst = f64::NEG_INFINITY;
    for a in &us {
        for b in &vs {
            for (x, y) in a.states().iter().zip(b.states()) {
                for (p, q) in x.coords().iter().zip(y.coords()) {
                    worst = worst.max(p - q);
                }
            }
        }
    }
    let slack = cfg.order_slack();
    Ok(ComparisonReport {
        pairs: us.len() * vs.len(),
        worst_violation: worst,
        order_slack: slack,
        spread_u: max_spread(&us),
        spread_v: max_spread(&vs),
        pass: worst <= slack,
    })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct UniquenessReport {
    pub members: usize,
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

/// All strategy members from `v_k^±` against the constant solution.
pub fn uniqueness_at_equilibrium(
    k: usize,
    sign: i8,
    cfg: &RdConfig,
    strategies: &[StrategyKind],
    seed: u64,
    exec: Exec,
) -> Result<UniquenessReport> {
    let eq = shoot_equilibrium(k, sign, cfg)?;
    let model = HeavisideRd::new(*cfg)?;
    let devs = par::try_map(exec, strategies, |i, s| -> Result<f64> {
        let t = integrate(&model, &eq.profile, SelectionStrategy::new(*s, par::mix_seed(seed, i as u64)), cfg.t_end, cfg.dt)?;
        Ok(t.states().iter().map(|x| x.dist(&eq.profile)).fold(0.0, f64::max))
    })?;
    let max_deviation = devs.iter().cloned().fold(0.0, f64::max);
    let tol = cfg.order_slack();
    Ok(UniquenessReport { members: devs.len(), max_deviation, tol, pass: max_deviation <= tol })
}

/// Exact solution at time `t` of the semi-discrete `w′ = A_h w + ωw + 1`, `w(0) = 0`.
pub fn forced_response(cfg: &RdConfig, t: f64) -> StateVec {
    let n = cfg.n;
    let h = cfg.h();
    let mut w = vec![0.0; n];
    for m in 1..=n {
        let lam = -4.0 / (h * h) * (m as f64 * PI * h / 2.0).sin().powi(2) + cfg.omega;
        let phi: Vec<f64> = (1..=n).map(|i| (2.0 * h).sqrt() * (m as f64 * PI * i as f64 * h).sin()).collect();
        let c: f64 = phi.iter().sum();
        let g = if lam.abs() < 1e-14 { t } else { ((lam * t).exp() - 1.0) / lam };
        for i in 0..n {
            w[i] += c * g * phi[i];
        }
    }
    cfg.state(w).expect("n ≥ 3")
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct DepartureReport {
    /// Distance between the Maximal and Minimal solutions from 0 at `T`.
    pub separation: f64,
    /// `2‖w(T)‖` for the exact forced response `w`.
    pub reference: f64,
    pub ratio: f64,
}

pub fn departure_from_zero(cfg: &RdConfig) -> Result<DepartureReport> {
    let model = HeavisideRd::new(*cfg)?;
    let zero = cfg.state(vec![0.0; cfg.n])?;
    let up = integrate(&model, &zero, SelectionStrategy::new(StrategyKind::Maximal, 0), cfg.t_end, cfg.dt)?;
    let down = integrate(&model, &zero, SelectionStrategy::new(StrategyKind::Minimal, 0), cfg.t_end, cfg.dt)?;
    let separation = up.last().dist(down.last());
    let reference = 2.0 * forced_response(cfg, cfg.t_end).norm();
    Ok(DepartureReport { separation, reference, ratio: separation / reference })
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RegularizedInputs {
    pub k_cloud: PointCloudSet,
    pub region: RegionSpec,
    pub equilibrium: StateVec,
    /// Largest distance from a harvested point to `v_k^±`.
    pub max_distance: f64,
    pub fits_half_ball: bool,
    pub note: &'static str,
}

/// `K_ε` surrogate: tails (t ≥ T/2) of `G_ε` solutions started at `v_k^±`
/// under the default strategies; they must stay in the `δ` ball.
pub fn regularized_block_inputs(k: usize, sign: i8, cfg: &RdConfig, delta: f64, seed: u64, exec: Exec) -> Result<RegularizedInputs> {
    if !(delta > 0.0) {
        return invalid("neighborhood radius must be positive");
    }
    let plain = RdConfig { epsilon_reg: 0.0, ..*cfg };
    let eq = shoot_equilibrium(k, sign, &plain)?;
    let model = HeavisideRd::new(*cfg)?;
    let strategies = default_strategies();
    let trajs = par::try_map(exec, &strategies, |i, s| {
        integrate(&model, &eq.profile, SelectionStrategy::new(*s, par::mix_seed(seed, i as u64)), cfg.t_end, cfg.dt)
    })?;
    let mut max_distance: f64 = 0.0;
    let mut tail = Vec::new();
    for t in &trajs {
        for (j, s) in t.states().iter().enumerate() {
            let d = s.dist(&eq.profile);
            if d > delta {
                return Err(Error::EpsilonTooLarge(format!(
                    "a regularized solution leaves the δ = {delta} ball (distance {d:.3e})"
                )));
            }
            if 2 * j >= t.steps() {
                max_distance = max_distance.max(d);
                tail.push(s.clone());
            }
        }
    }
    let k_cloud = cluster(CloudLabel::KApprox, tail, DEFAULT_CLUSTER_TOL * delta.min(1.0))?;
    Ok(RegularizedInputs {
        k_cloud,
        region: RegionSpec::ball(eq.profile.clone(), delta)?,
        equilibrium: eq.profile,
        max_distance,
        fits_half_ball: max_distance <= delta / 2.0,
        note: "forward-tail surrogate for complete bounded trajectories",
    })
}

/// Random smooth `u₀ = Σ_{m=1}^{modes} c_m sin(mπx)` with `c_m ∈ [−amp, amp]`.
pub fn random_profile(cfg: &RdConfig, modes: usize, amp: f64, seed: u64) -> StateVec {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..modes).map(|_| rng.gen_range(-amp..=amp)).collect();
    cfg.from_fn(|x| c.iter().enumerate().map(|(m, a)| a * ((m + 1) as f64 * PI * x).sin()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_matches_parabola() {
        let cfg = RdConfig::new(127, 0.0);
        let eq = shoot_equilibrium(1, 1, &cfg).unwrap();
        let err = cfg.nodes().iter().zip(eq.profile.coords()).map(|(x, v)| (v - x * (1.0 - x) / 2.0).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "err {err}");
        assert!(eq.zeros.is_empty());
        assert_eq!(eq.gamma0, 0.5);
    }

    #[test]
    fn k2_has_zero_at_half() {
        let cfg = RdConfig::new(63, 0.0);
        let eq = shoot_equilibrium(2, 1, &cfg).unwrap();
        assert_eq!(eq.zeros.len(), 1);
        assert!((eq.zeros[0] - 0.5).abs() < 1e-12);
        let x = cfg.nodes();
        assert!((eq.profile.coords()[15] - x[15] * (0.5 - x[15]) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn antisymmetry_and_parity_of_energy() {
        let cfg = RdConfig::new(63, 2.0);
        for k in 1..=3 {
            let p = shoot_equilibrium(k, 1, &cfg).unwrap();
            let m = shoot_equilibrium(k, -1, &cfg).unwrap();
            assert!(p.profile.coords().iter().zip(m.profile.coords()).all(|(a, b)| *a == -*b));
            assert_eq!(p.energy, m.energy);
        }
    }

    #[test]
    fn omega_lobes_follow_cosine_formula() {
        let cfg = RdConfig::new(255, 3.0);
        let eq = shoot_equilibrium(1, 1, &cfg).unwrap();
        let err = cfg
            .nodes()
            .iter()
            .zip(eq.profile.coords())
            .map(|(x, v)| (v - analytic_equilibrium(*x, 1, 1, 3.0)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-5, "err {err}");
    }

    #[test]
    fn too_many_lobes_rejected() {
        let cfg = RdConfig::new(31, 0.0);
        assert!(shoot_equilibrium(4, 1, &cfg).is_err());
        assert!(shoot_equilibrium(3, 1, &cfg).is_ok());
    }

    #[test]
    fn energy_of_zero_is_zero() {
        let cfg = RdConfig::new(15, 1.0);
        assert_eq!(lyapunov_e(&cfg.state(vec![0.0; 15]).unwrap(), &cfg), 0.0);
    }

    #[test]
    fn sublevel_measure_of_a_tent() {
        // Tent with peak 1 at x = 1/2 on n = 1 (h = 1/2): μ{|v| ≤ α} = α.
        assert!((sublevel_measure(&[1.0], 0.5, 0.25) - 0.25).abs() < 1e-15);
        assert_eq!(sublevel_measure(&[0.0, 0.0], 1.0 / 3.0, 0.1), 1.0);
    }

    #[test]
    fn zero_profile_is_degenerate() {
        let cfg = RdConfig::new(31, 0.0);
        let z = cfg.state(vec![0.0; 31]).unwrap();
        assert!(matches!(nondegeneracy(&z, &cfg, &default_alphas(1e-2)), Err(Error::DegenerateProfile(_))));
    }

    #[test]
    fn config_validation() {
        assert!(RdConfig::new(2, 0.0).validate().is_err());
        assert!(RdConfig::new(15, -1.0).validate().is_err());
        assert!(RdConfig::new(15, PI * PI).validate().is_err());
        assert!(RdConfig::new(15, 9.85).validate().is_err());
        assert!(RdConfig::new(15, 9.0).validate().is_ok());
    }

    #[test]
    fn forced_response_solves_the_linear_system() {
        let cfg = RdConfig::new(15, 1.0);
        let (t, e) = (0.7, 1e-5);
        let a = forced_response(&cfg, t - e);
        let b = forced_response(&cfg, t + e);
        let w = forced_response(&cfg, t);
        let h = cfg.h();
        let lin = LinearPart::Tridiagonal { diag: -2.0 / (h * h), off: 1.0 / (h * h) };
        let mut aw = vec![0.0; 15];
        lin.apply(w.coords(), &mut aw);
        for i in 0..15 {
            let dw = (b.coords()[i] - a.coords()[i]) / (2.0 * e);
            assert!((dw - aw[i] - cfg.omega * w.coords()[i] - 1.0).abs() < 1e-5);
        }
    }
}
