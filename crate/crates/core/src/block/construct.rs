//! Two-stage block construction, boundary classification and verification.

use std::collections::VecDeque;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::functionals::{estimate_g_pair, exit_time, BlockFunctionals};
use super::grid::{SampleGrid, SublevelRegion};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::region::{PointCloudSet, Region};
use crate::semiflow::{estimate_a_minus, grid_steps, AMinusOptions, Generator};
use crate::state::StateVec;
use crate::trajectory::{fmt_f64, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryLabel {
    Egress,
    Ingress,
    BounceOff,
}

impl BoundaryLabel {
    pub fn name(self) -> &'static str {
        match self {
            BoundaryLabel::Egress => "egress",
            BoundaryLabel::Ingress => "ingress",
            BoundaryLabel::BounceOff => "bounce_off",
        }
    }

    pub fn is_exit(self) -> bool {
        self != BoundaryLabel::Ingress
    }
}

#[derive(Debug, Clone)]
pub struct BlockParams {
    pub horizon: f64,
    /// First value of the geometric ε scan.
    pub eps0: f64,
    pub eps_steps: usize,
    /// `None` means `ε/2`.
    pub delta: Option<f64>,
    /// `None` means `max(2·median edge variation, 1e-3)`.
    pub band: Option<f64>,
    pub probe_horizon: f64,
    pub a_minus: AMinusOptions,
    /// Cap on the grid points used to launch the stage-2 tail harvest.
    pub max_launch: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for BlockParams {
    fn default() -> Self {
        Self {
            horizon: 10.0,
            eps0: 1.0,
            eps_steps: 20,
            delta: None,
            band: None,
            probe_horizon: 2.0,
            a_minus: AMinusOptions::default(),
            max_launch: 2000,
            seed: 0,
            exec: Exec::Parallel,
        }
    }
}

/// `(g⁺, g⁻)` at grid points; `None` where the point is not in `U ∩ 𝓞(K)`
/// or was masked out.
#[derive(Debug, Clone)]
pub struct GridValues {
    pub g_plus: Vec<Option<f64>>,
    pub g_minus: Vec<Option<f64>>,
    pub bundle_size: usize,
}

impl GridValues {
    pub fn pair(&self, i: usize) -> Option<(f64, f64)> {
        Some((self.g_plus[i]?, self.g_minus[i]?))
    }

    pub fn max(&self, i: usize) -> Option<f64> {
        self.pair(i).map(|(p, m)| p.max(m))
    }
}

pub fn grid_values(
    gen: &dyn Generator,
    f: &BlockFunctionals,
    grid: &SampleGrid,
    horizon: f64,
    mask: Option<&[bool]>,
    seed: u64,
    exec: Exec,
) -> Result<GridValues> {
    let idx: Vec<usize> = (0..grid.len()).collect();
    let vals = par::try_map(exec, &idx, |_, &i| -> Result<Option<(f64, f64, usize)>> {
        if mask.is_some_and(|m| !m[i]) {
            return Ok(None);
        }
        let p = grid.point(i);
        if !f.admissible(&p) {
            return Ok(None);
        }
        let (gp, gm) = estimate_g_pair(&p, gen, f, horizon, par::mix_seed(seed, i as u64))?;
        Ok(Some((gp.value, gm.value, gp.bundle_size)))
    })?;
    let bundle_size = vals.iter().flatten().map(|v| v.2).max().unwrap_or(0);
    Ok(GridValues {
        g_plus: vals.iter().map(|v| v.map(|v| v.0)).collect(),
        g_minus: vals.iter().map(|v| v.map(|v| v.1)).collect(),
        bundle_size,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EpsilonChoice {
    pub epsilon: f64,
    /// Grid indices of `H_ε`.
    pub members: Vec<usize>,
    /// Scan values rejected before `epsilon`.
    pub rejected: Vec<f64>,
}

/// Indices of the grid points nearest to the `K` points.
fn k_nodes(grid: &SampleGrid, k: &PointCloudSet) -> Vec<usize> {
    let mut v: Vec<usize> = k.points().iter().map(|p| grid.nearest_index(p)).collect();
    v.sort_unstable();
    v.dedup();
    v
}

/// Components of `candidate` reachable from `seeds`; `None` if a seed is
/// not a candidate.
fn components_from(grid: &SampleGrid, candidate: &[bool], seeds: &[usize]) -> Option<Vec<bool>> {
    let mut seen = vec![false; candidate.len()];
    let mut queue = VecDeque::new();
    for &s in seeds {
        if !candidate[s] {
            return None;
        }
        if !seen[s] {
            seen[s] = true;
            queue.push_back(s);
        }
    }
    while let Some(i) = queue.pop_front() {
        for j in grid.neighbors(i).0 {
            if candidate[j] && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    Some(seen)
}

/// Largest `ε` of the scan whose sampled `H_ε` (the components containing
/// `K`) keeps its one-cell dilation inside `U ∩ 𝓞(K)`.
pub fn choose_epsilon(
    grid: &SampleGrid,
    f: &BlockFunctionals,
    values: &GridValues,
    eps0: f64,
    steps: usize,
) -> Result<EpsilonChoice> {
    if !(eps0 > 0.0) {
        return Err(Error::InvalidInput("eps0 must be positive".into()));
    }
    if let Some(p) = f.k_cloud.points().iter().find(|p| !f.admissible(p)) {
        return Err(Error::NeighborhoodTooTight(format!(
            "K point at {:?} is outside U ∩ 𝓞(K)",
            &p.coords()[..p.dim().min(4)]
        )));
    }
    let seeds = k_nodes(grid, &f.k_cloud);
    let mut rejected = Vec::new();
    let mut eps = eps0;
    for _ in 0..steps.max(1) {
        let candidate: Vec<bool> = (0..grid.len())
            .map(|i| values.pair(i).is_some_and(|(p, m)| p < eps && m < eps))
            .collect();
        if let Some(member) = components_from(grid, &candidate, &seeds) {
            let fits = (0..grid.len()).filter(|&i| member[i]).all(|i| {
                let (nb, complete) = grid.neighbors(i);
                complete && nb.iter().all(|&j| values.pair(j).is_some())
            });
            if fits {
                let members = (0..grid.len()).filter(|&i| member[i]).collect();
                return Ok(EpsilonChoice { epsilon: eps, members, rejected });
            }
        }
        rejected.push(eps);
        eps *= 0.5;
    }
    Err(Error::NeighborhoodTooTight(format!(
        "no ε in the scan down to {eps:e} qualifies"
    )))
}

#[derive(Debug, Clone, Serialize)]
pub struct InteriorSample {
    pub x: Vec<f64>,
    pub g_plus: f64,
    pub g_minus: f64,
    #[serde(skip)]
    pub node: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundarySample {
    pub x: Vec<f64>,
    pub label: BoundaryLabel,
    pub g_plus: f64,
    pub g_minus: f64,
    /// The probe disagreed with the label.
    pub flagged: bool,
    /// A grid neighbor's g-value differs by more than 10 band widths.
    pub discontinuity: bool,
    #[serde(skip)]
    pub node: usize,
}

/// Stage-2 objects kept for classification and verification.
pub struct BlockContext {
    pub grid: Arc<SampleGrid>,
    /// `Ñ = cl H_ε`.
    pub n_tilde: Arc<SublevelRegion>,
    /// `{max(g̃⁺, g̃⁻) − δ ≤ 0}`.
    pub block: SublevelRegion,
    pub functionals: BlockFunctionals,
    pub stage1: GridValues,
    pub stage2: GridValues,
}

#[derive(Clone, Serialize)]
pub struct BlockResult {
    pub epsilon: f64,
    pub delta: f64,
    pub band: f64,
    pub horizon: f64,
    pub probe_horizon: f64,
    pub bundle_size: usize,
    pub a_minus_horizon: f64,
    pub epsilon_rejected: Vec<f64>,
    pub h_epsilon_size: usize,
    pub interior_samples: Vec<InteriorSample>,
    pub boundary_samples: Vec<BoundarySample>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub context: Option<Arc<BlockContext>>,
}

impl std::fmt::Debug for BlockResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockResult")
            .field("epsilon", &self.epsilon)
            .field("delta", &self.delta)
            .field("band", &self.band)
            .field("interior", &self.interior_samples.len())
            .field("boundary", &self.boundary_samples.len())
            .finish()
    }
}

impl BlockResult {
    pub fn count(&self, label: BoundaryLabel) -> usize {
        self.boundary_samples.iter().filter(|s| s.label == label).count()
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.boundary_samples.is_empty() {
            return 0.0;
        }
        self.boundary_samples.iter().filter(|s| s.flagged).count() as f64 / self.boundary_samples.len() as f64
    }

    pub fn context(&self) -> Result<&Arc<BlockContext>> {
        self.context
            .as_ref()
            .ok_or_else(|| Error::Precondition("block result carries no construction context".into()))
    }

    /// `x_1..x_n,g_plus,g_minus,label` rows for every sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let dim = self
            .interior_samples
            .first()
            .map(|s| s.x.len())
            .or_else(|| self.boundary_samples.first().map(|s| s.x.len()))
            .unwrap_or(0);
        let head: Vec<String> = (1..=dim).map(|i| format!("x_{i}")).collect();
        writeln!(w, "{},g_plus,g_minus,label,flagged", head.join(","))?;
        let row = |w: &mut W, x: &[f64], gp: f64, gm: f64, label: &str, flag: bool| -> std::io::Result<()> {
            let xs: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(w, "{},{},{},{},{}", xs.join(","), fmt_f64(gp), fmt_f64(gm), label, flag as u8)
        };
        for s in &self.interior_samples {
            row(&mut w, &s.x, s.g_plus, s.g_minus, "interior", false)?;
        }
        for s in &self.boundary_samples {
            row(&mut w, &s.x, s.g_plus, s.g_minus, s.label.name(), s.flagged)?;
        }
        Ok(())
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn label_of(gp: f64, gm: f64, delta: f64, band: f64) -> BoundaryLabel {
    let near_p = (gp - delta).abs() <= band;
    let near_m = (gm - delta).abs() <= band;
    match (near_p, near_m) {
        (true, true) => BoundaryLabel::BounceOff,
        (true, false) => BoundaryLabel::Egress,
        _ => BoundaryLabel::Ingress,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeEvent {
    Exit,
    Enter,
    Undecided,
}

/// First event of the level along `traj`: rising `eta` above
/// `max(start, 0)` is an exit, falling `eta` below `min(start, 0)` an entry.
pub fn first_event(traj: &Trajectory, level: &dyn Fn(&StateVec) -> f64, eta: f64) -> ProbeEvent {
    let start = level(traj.first());
    let (up, down) = (start.max(0.0) + eta, start.min(0.0) - eta);
    for s in &traj.states()[1..] {
        let v = level(s);
        if v >= up {
            return ProbeEvent::Exit;
        }
        if v <= down {
            return ProbeEvent::Enter;
        }
    }
    ProbeEvent::Undecided
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeOutcome {
    pub forward: Vec<ProbeEvent>,
    pub backward: Option<ProbeEvent>,
}

impl ProbeOutcome {
    pub fn confirms(&self, label: BoundaryLabel) -> bool {
        let all = |e: ProbeEvent| self.forward.iter().all(|&f| f == e);
        match label {
            BoundaryLabel::Ingress => all(ProbeEvent::Enter),
            BoundaryLabel::Egress => all(ProbeEvent::Exit) && self.backward.is_none_or(|b| b == ProbeEvent::Enter),
            BoundaryLabel::BounceOff => all(ProbeEvent::Exit) && self.backward.is_none_or(|b| b == ProbeEvent::Exit),
        }
    }
}

pub fn probe(
    gen: &dyn Generator,
    block: &SublevelRegion,
    x: &StateVec,
    eta: f64,
    horizon: f64,
    seed: u64,
) -> Result<ProbeOutcome> {
    let level = |s: &StateVec| block.level(s);
    let b = gen.bundle(x, horizon, seed)?;
    let forward = b.members.iter().map(|m| first_event(m, &level, eta)).collect();
    let backward = gen.reverse(x, horizon).map(|r| first_event(&r, &level, eta));
    Ok(ProbeOutcome { forward, backward })
}

/// Two-stage construction: `ε` and `H_ε` from the given functionals, then
/// `δ`-sublevel samples of the functionals recomputed relative to `cl H_ε`.
pub fn build_block(
    gen: &dyn Generator,
    f: &BlockFunctionals,
    grid: Arc<SampleGrid>,
    params: &BlockParams,
) -> Result<BlockResult> {
    let exec = params.exec;
    let stage1 = grid_values(gen, f, &grid, params.horizon, None, params.seed, exec)?;
    let choice = choose_epsilon(&grid, f, &stage1, params.eps0, params.eps_steps)?;
    let eps = choice.epsilon;
    let delta = params.delta.unwrap_or(0.5 * eps);
    if !(delta > 0.0 && delta < eps) {
        return Err(Error::InvalidInput(format!("δ = {delta} must lie in (0, ε = {eps})")));
    }

    let mut member = vec![false; grid.len()];
    for &i in &choice.members {
        member[i] = true;
    }
    let psi1: Vec<f64> = (0..grid.len())
        .map(|i| match stage1.max(i) {
            Some(v) if member[i] => v - eps,
            Some(v) => (v - eps).max(1e-9),
            None => 1.0,
        })
        .collect();
    let n_tilde = Arc::new(SublevelRegion::new(grid.clone(), psi1)?);

    let launch_all: Vec<StateVec> = choice.members.iter().map(|&i| grid.point(i)).collect();
    let stride = launch_all.len().div_ceil(params.max_launch.max(1)).max(1);
    let launch: Vec<StateVec> = launch_all.into_iter().step_by(stride).collect();
    let a_minus = estimate_a_minus(gen, n_tilde.as_ref(), &launch, &params.a_minus, par::mix_seed(params.seed, 1), exec)?;
    let f2 = BlockFunctionals::new(
        f.k_cloud.clone(),
        a_minus.cloud,
        n_tilde.clone() as Arc<dyn Region>,
        f.region_o.clone(),
    )?;
    let stage2 = grid_values(gen, &f2, &grid, params.horizon, Some(&member), par::mix_seed(params.seed, 2), exec)?;

    let band = match params.band {
        Some(b) if b > 0.0 => b,
        Some(_) => return Err(Error::InvalidInput("band must be positive".into())),
        None => {
            let var: Vec<f64> = grid
                .edges()
                .into_iter()
                .filter_map(|(i, j)| {
                    let (a, b) = (stage2.pair(i)?, stage2.pair(j)?);
                    Some((a.0 - b.0).abs().max((a.1 - b.1).abs()))
                })
                .collect();
            (2.0 * median(var)).max(1e-3)
        }
    };

    let psi2: Vec<f64> = (0..grid.len()).map(|i| stage2.max(i).map_or(1.0, |v| v - delta)).collect();
    let block_region = SublevelRegion::new(grid.clone(), psi2)?;

    let mut interior = Vec::new();
    let mut boundary_nodes = Vec::new();
    for i in 0..grid.len() {
        let Some((gp, gm)) = stage2.pair(i) else { continue };
        let psi = gp.max(gm) - delta;
        if psi < -band {
            interior.push(InteriorSample { x: grid.point(i).into_coords(), g_plus: gp, g_minus: gm, node: i });
        } else if psi.abs() <= band {
            boundary_nodes.push((i, gp, gm));
        }
    }

    let eta = 0.5 * band;
    let probes = par::try_map(exec, &boundary_nodes, |_, &(i, gp, gm)| -> Result<BoundarySample> {
        let x = grid.point(i);
        let label = label_of(gp, gm, delta, band);
        let outcome = probe(gen, &block_region, &x, eta, params.probe_horizon, par::mix_seed(params.seed ^ 0xB0, i as u64))?;
        let discontinuity = grid.neighbors(i).0.iter().any(|&j| {
            stage2.pair(j).is_some_and(|(p, m)| (p - gp).abs() > 10.0 * band || (m - gm).abs() > 10.0 * band)
        });
        Ok(BoundarySample {
            x: x.into_coords(),
            label,
            g_plus: gp,
            g_minus: gm,
            flagged: !outcome.confirms(label),
            discontinuity,
            node: i,
        })
    })?;

    let notes = vec![
        format!(
            "A⁻ approximated by forward-tail harvesting (horizon_back = {}, tail = {})",
            params.a_minus.horizon_back, params.a_minus.tail
        ),
        "bundle min/max replaces inf/sup over all solutions".into(),
        "admissibility of N is assumed, not certified".into(),
    ];
    Ok(BlockResult {
        epsilon: eps,
        delta,
        band,
        horizon: params.horizon,
        probe_horizon: params.probe_horizon,
        bundle_size: stage2.bundle_size.max(stage1.bundle_size),
        a_minus_horizon: params.a_minus.horizon_back,
        epsilon_rejected: choice.rejected,
        h_epsilon_size: choice.members.len(),
        interior_samples: interior,
        boundary_samples: probes,
        notes,
        context: Some(Arc::new(BlockContext {
            grid,
            n_tilde,
            block: block_region,
            functionals: f2,
            stage1,
            stage2,
        })),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifiedPoint {
    pub label: BoundaryLabel,
    pub g_plus: f64,
    pub g_minus: f64,
    pub flagged: bool,
    pub probe: ProbeOutcome,
}

/// Label an arbitrary point of the boundary band from freshly estimated
/// stage-2 values, cross-checked by probing.
pub fn classify_boundary_point(
    x: &StateVec,
    gen: &dyn Generator,
    block: &BlockResult,
    probe_horizon: f64,
    seed: u64,
) -> Result<ClassifiedPoint> {
    let ctx = block.context()?;
    let (gp, gm) = estimate_g_pair(x, gen, &ctx.functionals, block.horizon, seed)?;
    let (gp, gm) = (gp.value, gm.value);
    if (gp.max(gm) - block.delta).abs() > block.band {
        return Err(Error::OutsideRegion(format!(
            "point is outside the boundary band: max(g⁺, g⁻) − δ = {:e}",
            gp.max(gm) - block.delta
        )));
    }
    let label = label_of(gp, gm, block.delta, block.band);
    let outcome = probe(gen, &ctx.block, x, 0.5 * block.band, probe_horizon, seed)?;
    Ok(ClassifiedPoint { label, g_plus: gp, g_minus: gm, flagged: !outcome.confirms(label), probe: outcome })
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub orbits: usize,
    /// Points sampled per orbit.
    pub orbit_points: usize,
    /// Spacing of orbit points, rounded to whole steps.
    pub tau: f64,
    pub slack: f64,
    pub strict_floor: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { orbits: 100, orbit_points: 5, tau: 0.1, slack: 1e-6, strict_floor: 1e-4, seed: 7, exec: Exec::Parallel }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityTrace {
    pub times: Vec<f64>,
    pub g_plus: Vec<f64>,
    pub g_minus: Vec<f64>,
    pub violations: Vec<String>,
}

/// `g̃±` sampled along the first bundle member from `x` while the orbit stays
/// in `U`; the horizon shrinks with the elapsed time so the windows nest.
pub fn monotonicity_along(
    gen: &dyn Generator,
    f: &BlockFunctionals,
    x: &StateVec,
    horizon: f64,
    tau: f64,
    points: usize,
    slack: f64,
    strict_floor: f64,
    seed: u64,
) -> Result<MonotonicityTrace> {
    let dt = gen.dt();
    let k = ((tau / dt).round() as usize).max(1);
    let span = (k * points.saturating_sub(1)) as f64 * dt;
    let orbit = gen.bundle(x, span.max(dt), seed)?.members.swap_remove(0);
    let mut trace = MonotonicityTrace { times: vec![], g_plus: vec![], g_minus: vec![], violations: vec![] };
    let total = grid_steps(horizon, dt)?;
    for p in 0..points {
        let j = p * k;
        if j >= orbit.len() || j >= total {
            break;
        }
        let y = orbit.state(j);
        if !f.admissible(y) {
            break;
        }
        let h = (total - j) as f64 * dt;
        let (gp, gm) = estimate_g_pair(y, gen, f, h, seed)?;
        trace.times.push(j as f64 * dt);
        trace.g_plus.push(gp.value);
        trace.g_minus.push(gm.value);
    }
    for w in 1..trace.times.len() {
        let (p0, p1) = (trace.g_plus[w - 1], trace.g_plus[w]);
        if p1 < p0 - slack {
            trace.violations.push(format!("g⁺ decreased {p0:e} → {p1:e} at t={}", trace.times[w]));
        } else if p0 > strict_floor && p1 <= p0 {
            trace.violations.push(format!("g⁺ not strictly increasing at {p0:e} (t={})", trace.times[w]));
        }
        let (m0, m1) = (trace.g_minus[w - 1], trace.g_minus[w]);
        if m1 > m0 + slack {
            trace.violations.push(format!("g⁻ increased {m0:e} → {m1:e} at t={}", trace.times[w]));
        } else if m1 > strict_floor && m1 >= m0 {
            trace.violations.push(format!("g⁻ not strictly decreasing at {m1:e} (t={})", trace.times[w]));
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub all_labeled: bool,
    pub exit_set_closed: bool,
    pub isolated_ingress: usize,
    pub monotone: bool,
    pub orbits_checked: usize,
    pub monotonicity_failures: Vec<String>,
    pub k_interior: bool,
    pub stage2_consistent: bool,
    pub stage2_mismatches: usize,
    pub egress: usize,
    pub ingress: usize,
    pub bounce_off: usize,
    pub flagged_fraction: f64,
    pub discontinuities: usize,
    pub pass: bool,
}

/// Checks (a) labels, (b) closedness of the exit set at sample resolution,
/// (c) monotonicity along orbits from interior samples, (d) `K ⊂ int B`;
/// plus stage-2 exit-time consistency on the same orbits.
pub fn verify_block(block: &BlockResult, gen: &dyn Generator, opts: &VerifyOptions) -> Result<VerificationReport> {
    let ctx = block.context()?;
    let grid = &ctx.grid;

    let all_labeled = block.boundary_samples.iter().all(|s| s.g_plus.is_finite() && s.g_minus.is_finite());

    // Every Ingress sample needs an Ingress boundary neighbor within 1.5 cells.
    let radius = 1.5 * grid.spacing();
    let pts: Vec<StateVec> = block.boundary_samples.iter().map(|s| grid.point(s.node)).collect();
    let isolated_ingress = block
        .boundary_samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.label == BoundaryLabel::Ingress)
        .filter(|&(i, _)| {
            !block.boundary_samples.iter().enumerate().any(|(j, t)| {
                j != i && t.label == BoundaryLabel::Ingress && pts[i].dist(&pts[j]) <= radius * (1.0 + 1e-9)
            })
        })
        .count();

    let k_interior = f_k_interior(block, ctx);

    let n = block.interior_samples.len();
    let chosen: Vec<usize> = if n == 0 {
        vec![]
    } else {
        let m = opts.orbits.min(n);
        (0..m).map(|i| i * n / m).collect()
    };
    let traces = par::try_map(opts.exec, &chosen, |c, &i| -> Result<(MonotonicityTrace, bool)> {
        let x = grid.point(block.interior_samples[i].node);
        let seed = par::mix_seed(opts.seed, c as u64);
        let tr = monotonicity_along(
            gen,
            &ctx.functionals,
            &x,
            block.horizon,
            opts.tau,
            opts.orbit_points,
            opts.slack,
            opts.strict_floor,
            seed,
        )?;
        let orbit = gen.bundle(&x, block.horizon, seed)?.members.swap_remove(0);
        let open = exit_time(&orbit, ctx.n_tilde.as_ref(), true)?;
        let closed = exit_time(&orbit, ctx.n_tilde.as_ref(), false)?;
        let consistent = open.truncated == closed.truncated && (open.time - closed.time).abs() <= gen.dt() * (1.0 + 1e-9);
        Ok((tr, consistent))
    })?;
    let monotonicity_failures: Vec<String> = traces.iter().flat_map(|(t, _)| t.violations.clone()).collect();
    let stage2_mismatches = traces.iter().filter(|(_, c)| !c).count();

    let exit_set_closed = isolated_ingress == 0;
    let monotone = monotonicity_failures.is_empty();
    let stage2_consistent = stage2_mismatches == 0;
    Ok(VerificationReport {
        all_labeled,
        exit_set_closed,
        isolated_ingress,
        monotone,
        orbits_checked: traces.len(),
        monotonicity_failures,
        k_interior,
        stage2_consistent,
        stage2_mismatches,
        egress: block.count(BoundaryLabel::Egress),
        ingress: block.count(BoundaryLabel::Ingress),
        bounce_off: block.count(BoundaryLabel::BounceOff),
        flagged_fraction: block.flagged_fraction(),
        discontinuities: block.boundary_samples.iter().filter(|s| s.discontinuity).count(),
        pass: all_labeled && exit_set_closed && monotone && k_interior && stage2_consistent,
    })
}

fn f_k_interior(block: &BlockResult, ctx: &BlockContext) -> bool {
    let interior_nodes: std::collections::HashSet<usize> = block.interior_samples.iter().map(|s| s.node).collect();
    ctx.functionals.k_cloud.points().iter().all(|k| {
        ctx.block.level(k) < 0.0 && interior_nodes.contains(&ctx.grid.nearest_index(k))
    })
}
