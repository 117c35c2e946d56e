//! Ready-made experiment setups and check suites shared by the CLI, the
//! benches and the acceptance tests.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::block::{BlockFunctionals, BlockParams, SampleGrid};
use crate::error::{invalid, Error, Result};
use crate::inclusion::filippov::{drifted_trajectory, filippov_certificate, filippov_track, xi_trapezoid};
use crate::inclusion::{default_strategies, InclusionModel, SelectionStrategy, StrategyKind};
use crate::par::{self, Exec};
use crate::rd::{
    check_comparison, check_lyapunov_decrease, departure_from_zero, random_profile, shoot_equilibrium,
    uniqueness_at_equilibrium, ComparisonReport, DepartureReport, HeavisideRd, RdConfig, UniquenessReport,
};
use crate::region::{CloudLabel, PointCloudSet, Region, RegionSpec};
use crate::semiflow::{check_k5, estimate_a_minus, AMinusOptions, Generator, K5Report};
use crate::state::StateVec;
use crate::zoo::{PlanarLipschitzInclusion, SaddleFlow, SqrtOde};

/// Inputs of a block construction.
pub struct BlockSetup {
    pub generator: Box<dyn Generator>,
    pub functionals: BlockFunctionals,
    pub grid: Arc<SampleGrid>,
    pub params: BlockParams,
}

#[derive(Debug, Clone)]
pub struct SaddleSetup {
    pub a: f64,
    pub b: f64,
    pub dt: f64,
    pub grid_n: usize,
    /// Half-width of `N = [−r, r]²`.
    pub n_radius: f64,
    /// Half-width of `𝓞(K)`.
    pub o_radius: f64,
}

impl Default for SaddleSetup {
    fn default() -> Self {
        Self { a: 1.0, b: 1.0, dt: 0.01, grid_n: 101, n_radius: 1.0, o_radius: 1.5 }
    }
}

impl SaddleSetup {
    pub fn build(&self, params: BlockParams) -> Result<BlockSetup> {
        if self.grid_n < 5 {
            return invalid("grid_n must be at least 5");
        }
        if !(self.o_radius >= self.n_radius) {
            return invalid("𝓞(K) must contain N");
        }
        let gen = SaddleFlow::new(self.a, self.b, self.dt)?;
        let origin = StateVec::euclidean(vec![0.0, 0.0]);
        let r = self.n_radius;
        let grid = Arc::new(SampleGrid::cartesian(
            vec![-r, -r],
            vec![r, r],
            vec![self.grid_n, self.grid_n],
            Arc::from(vec![1.0, 1.0]),
        )?);
        let n: Arc<dyn Region> = Arc::new(RegionSpec::cube(origin.clone(), r)?);
        let o: Arc<dyn Region> = Arc::new(RegionSpec::cube(origin.clone(), self.o_radius)?);
        let am = estimate_a_minus(&gen, n.as_ref(), &grid.points(), &params.a_minus, params.seed, params.exec)?;
        let k = PointCloudSet::new(CloudLabel::KApprox, vec![origin])?;
        let functionals = BlockFunctionals::new(k, am.cloud, n, o)?;
        Ok(BlockSetup { generator: Box::new(gen), functionals, grid, params })
    }
}

#[derive(Debug, Clone)]
pub struct RdBlockSetup {
    pub cfg: RdConfig,
    pub k: usize,
    pub sign: i8,
    /// Radius of the ball `N` around `v_k^±`.
    pub radius: f64,
    pub rays: usize,
    pub levels: usize,
    pub strategies: Vec<StrategyKind>,
}

impl Default for RdBlockSetup {
    fn default() -> Self {
        let mut cfg = RdConfig::new(31, 0.0);
        cfg.dt = 0.01;
        cfg.t_end = 5.0;
        Self { cfg, k: 1, sign: 1, radius: 0.05, rays: 100, levels: 20, strategies: default_strategies() }
    }
}

impl RdBlockSetup {
    pub fn generator(&self) -> Result<(crate::inclusion::InclusionGenerator<HeavisideRd>, StateVec)> {
        let eq = shoot_equilibrium(self.k, self.sign, &self.cfg)?;
        let model = HeavisideRd::new(self.cfg)?;
        Ok((model.generator(self.strategies.clone()).with_equilibria(vec![eq.profile.clone()]), eq.profile))
    }

    pub fn build(&self, mut params: BlockParams) -> Result<BlockSetup> {
        if !(self.radius > 0.0) || self.levels < 2 {
            return invalid("radius must be positive and levels ≥ 2");
        }
        let (gen, center) = self.generator()?;
        let n_region = RegionSpec::ball(center.clone(), self.radius)?;
        for j in 1..=self.cfg.k_max() {
            for s in [1i8, -1] {
                if (j, s) == (self.k, self.sign) {
                    continue;
                }
                let other = shoot_equilibrium(j, s, &self.cfg)?;
                if n_region.contains(&other.profile) {
                    return Err(Error::NeighborhoodTooTight(format!(
                        "N also contains v_{j}^{}: not an isolating neighborhood of K",
                        if s > 0 { '+' } else { '-' }
                    )));
                }
            }
        }
        let zero = self.cfg.state(vec![0.0; self.cfg.n])?;
        if n_region.contains(&zero) {
            return Err(Error::NeighborhoodTooTight(
                "N also contains the equilibrium 0: not an isolating neighborhood of K".into(),
            ));
        }
        let extra = self.rays.saturating_sub(2 * self.cfg.n);
        let grid = Arc::new(SampleGrid::rays(center.clone(), extra, self.levels, 1.2 * self.radius, params.seed)?);
        let n: Arc<dyn Region> = Arc::new(n_region);
        let o: Arc<dyn Region> = Arc::new(RegionSpec::ball(center.clone(), 1.5 * self.radius)?);
        if params.a_minus == AMinusOptions::default() {
            params.a_minus.stride = 50;
        }
        params.horizon = params.horizon.min(self.cfg.t_end.max(gen.dt));
        params.max_launch = params.max_launch.min(200);
        let pts: Vec<StateVec> = grid.points().into_iter().step_by(10).collect();
        let am = estimate_a_minus(&gen, n.as_ref(), &pts, &params.a_minus, params.seed, params.exec)?;
        let k = PointCloudSet::new(CloudLabel::KApprox, vec![center])?;
        let functionals = BlockFunctionals::new(k, am.cloud, n, o)?;
        Ok(BlockSetup { generator: Box::new(gen), functionals, grid, params })
    }
}

/// Computed equilibria `v_k^±` (k ≤ k_max) and 0.
pub fn equilibrium_list(cfg: &RdConfig, k_max: usize) -> Result<Vec<(String, StateVec)>> {
    let mut out = vec![("0".to_string(), cfg.state(vec![0.0; cfg.n])?)];
    for k in 1..=k_max {
        for s in [1i8, -1] {
            let e = shoot_equilibrium(k, s, cfg)?;
            out.push((format!("v{k}{}", if s > 0 { '+' } else { '-' }), e.profile));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovRun {
    pub seed: u64,
    pub max_uphill: f64,
    pub energy_ok: bool,
    pub nearest: String,
    pub limit_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSuite {
    pub runs: Vec<LyapunovRun>,
    pub slack: f64,
    pub limit_tol: f64,
    pub pass: bool,
}

/// Random smooth initial data, one strategy per run (cycling through the
/// default menu); energy decrease and distance of the final state to the
/// nearest computed equilibrium.
pub fn lyapunov_suite(cfg: &RdConfig, runs: usize, limit_tol: f64, seed: u64, exec: Exec) -> Result<LyapunovSuite> {
    let model = HeavisideRd::new(*cfg)?;
    let eqs = equilibrium_list(cfg, cfg.k_max().min(5))?;
    let menu = default_strategies();
    let seeds: Vec<u64> = (0..runs as u64).map(|i| par::mix_seed(seed, i)).collect();
    let out = par::try_map(exec, &seeds, |i, &s| -> Result<LyapunovRun> {
        let u0 = random_profile(cfg, 6, 0.3, s);
        let strat = SelectionStrategy::new(menu[i % menu.len()], s);
        let traj = crate::inclusion::integrate(&model, &u0, strat, cfg.t_end, cfg.dt)?;
        let rep = check_lyapunov_decrease(&traj, cfg);
        let (name, d) = eqs
            .iter()
            .map(|(n, e)| (n.clone(), traj.last().dist(e)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty list");
        Ok(LyapunovRun { seed: s, max_uphill: rep.max_uphill, energy_ok: rep.pass, nearest: name, limit_distance: d })
    })?;
    let pass = out.iter().all(|r| r.energy_ok && r.limit_distance <= limit_tol);
    Ok(LyapunovSuite { runs: out, slack: 10.0 * cfg.dt, limit_tol, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSuite {
    pub pairs: Vec<ComparisonReport>,
    pub uniqueness: UniquenessReport,
    pub departure: DepartureReport,
    pub departure_min_ratio: f64,
    pub pass: bool,
}

/// Ordered pairs `u₀ = v₀ − c·sin(πx) ≤ v₀` with random smooth `v₀`.
pub fn ordered_pairs(cfg: &RdConfig, count: usize, seed: u64) -> Vec<(StateVec, StateVec)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let v0 = random_profile(cfg, 4, 0.2, par::mix_seed(seed, i as u64));
            let c: f64 = rng.gen_range(0.005..0.05);
            let bump = cfg.from_fn(|x| (std::f64::consts::PI * x).sin());
            let u0 = v0.with_coords(v0.coords().iter().zip(bump.coords()).map(|(v, b)| v - c * b).collect());
            (u0, v0)
        })
        .collect()
}

pub fn comparison_suite(cfg: &RdConfig, pairs: usize, seed: u64, exec: Exec) -> Result<ComparisonSuite> {
    let menu = default_strategies();
    let reports = ordered_pairs(cfg, pairs, seed)
        .iter()
        .enumerate()
        .map(|(i, (u0, v0))| check_comparison(u0, v0, cfg, &menu, par::mix_seed(seed, 100 + i as u64), exec))
        .collect::<Result<Vec<_>>>()?;
    let uniqueness = uniqueness_at_equilibrium(1, 1, cfg, &menu, seed, exec)?;
    let departure = departure_from_zero(cfg)?;
    let min_ratio = 0.9;
    let pass = reports.iter().all(|r| r.pass) && uniqueness.pass && departure.ratio >= min_ratio;
    Ok(ComparisonSuite { pairs: reports, uniqueness, departure, departure_min_ratio: min_ratio, pass })
}

#[derive(Debug, Clone, Serialize)]
pub struct K5Suite {
    /// Approach `2^{-n} → 0⁺` against the minimal solution `−t²/4`.
    pub minimal: K5Report,
    /// Same approach against the maximal solution `t²/4`.
    pub maximal: K5Report,
    /// `T²/2`.
    pub expected_gap: f64,
    pub minimal_gap_rel_err: f64,
    /// The axiom holds for both targets.
    pub pass: bool,
}

pub fn k5_suite(dt: f64, horizon: f64, approach: usize, seed: u64, exec: Exec) -> Result<K5Suite> {
    let gen = SqrtOde::new(dt);
    let x = StateVec::euclidean(vec![0.0]);
    let seq: Vec<StateVec> = (1..=approach as i32).map(|n| StateVec::euclidean(vec![2f64.powi(-n)])).collect();
    let lower = gen.integrate(0.0, StrategyKind::DelayedDeparture { tau: 0.0, sign: -1 }, seed, horizon)?;
    let upper = gen.integrate(0.0, StrategyKind::DelayedDeparture { tau: 0.0, sign: 1 }, seed, horizon)?;
    let minimal = check_k5(&gen, &x, &lower, &seq, horizon, 1e-6, seed, exec)?;
    let maximal = check_k5(&gen, &x, &upper, &seq, horizon, 1e-6, seed, exec)?;
    let expected_gap = horizon * horizon / 2.0;
    Ok(K5Suite {
        minimal_gap_rel_err: (minimal.final_gap() - expected_gap).abs() / expected_gap,
        pass: minimal.pass && maximal.pass,
        minimal,
        maximal,
        expected_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FilippovPair {
    pub worst_excess: f64,
    pub slack: f64,
    pub final_gap: f64,
    pub final_xi: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FilippovSuite {
    pub c: f64,
    pub pairs: Vec<FilippovPair>,
    /// Matched selections: `‖u − z‖ ≤ ‖u₀ − z₀‖e^{2Ct}` within slack.
    pub matched_excess: f64,
    pub matched_slack: f64,
    /// Largest deviation of `ξ` from the closed-form exponential when `ρ ≡ 0`.
    pub matched_xi_error: f64,
    pub pass: bool,
}

pub fn filippov_suite(c: f64, pairs: usize, t_end: f64, dt: f64, seed: u64, exec: Exec) -> Result<FilippovSuite> {
    let model = PlanarLipschitzInclusion::new(c)?;
    let w = model.weights();
    let lc = model.lipschitz_c();
    let menu = default_strategies();
    let idx: Vec<usize> = (0..pairs).collect();
    let out = par::try_map(exec, &idx, |i, _| -> Result<FilippovPair> {
        let s = par::mix_seed(seed, i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let z0 = StateVec::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], w.clone())?;
        let u0 = z0.with_coords(z0.coords().iter().map(|v| v + rng.gen_range(-0.1..0.1)).collect());
        let strat = SelectionStrategy::new(menu[i % menu.len()], s);
        let amp = rng.gen_range(0.0..0.5);
        let z = drifted_trajectory(&model, &z0, strat, amp, 0.1, t_end, dt, s)?;
        let u = filippov_track(&model, &z, &u0)?;
        let cert = filippov_certificate(&model, &u, &z)?;
        Ok(FilippovPair {
            worst_excess: cert.worst_excess,
            slack: cert.slack,
            final_gap: *cert.observed_gap.last().expect("nonempty"),
            final_xi: *cert.xi.last().expect("nonempty"),
            valid: cert.valid,
        })
    })?;

    let z0 = StateVec::new(vec![0.3, -0.2], w.clone())?;
    let u0 = z0.with_coords(vec![0.35, -0.1]);
    let z = drifted_trajectory(&model, &z0, SelectionStrategy::new(StrategyKind::Maximal, seed), 0.0, 0.1, t_end, dt, seed)?;
    let u = filippov_track(&model, &z, &u0)?;
    let cert = filippov_certificate(&model, &u, &z)?;
    let gap0 = cert.observed_gap[0];
    let matched_excess = cert
        .observed_gap
        .iter()
        .zip(&cert.times)
        .map(|(g, t)| g - gap0 * (2.0 * lc * t).exp())
        .fold(f64::NEG_INFINITY, f64::max);
    let xi0 = xi_trapezoid(gap0, &vec![0.0; cert.times.len()], lc, dt);
    let matched_xi_error = xi0
        .iter()
        .zip(&cert.times)
        .map(|(x, t)| (x - gap0 * (2.0 * lc * t).exp()).abs())
        .fold(0.0, f64::max);
    let pass = out.iter().all(|p| p.valid) && matched_excess <= cert.slack && matched_xi_error <= cert.slack;
    Ok(FilippovSuite { c: lc, pairs: out, matched_excess, matched_slack: cert.slack, matched_xi_error, pass })
}
