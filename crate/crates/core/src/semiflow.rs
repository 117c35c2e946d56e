//! Generator interface for multivalued semiflows and the finite-horizon
//! diagnostics built on it: axioms (K1)–(K5), `A±(N)` estimation, ω-limits
//! and weak positive invariance.

use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::par::{self, Exec};
use crate::region::{CloudLabel, PointCloudSet, Region};
use crate::state::StateVec;
use crate::trajectory::{Bundle, Trajectory};

/// Source of solution bundles `𝓓(x)` on a fixed time grid.
pub trait Generator: Send + Sync {
    fn dim(&self) -> usize;

    fn weights(&self) -> Arc<[f64]>;

    fn dt(&self) -> f64;

    /// Sample of the solutions through `x0` on `[0, horizon]`.
    fn bundle(&self, x0: &StateVec, horizon: f64, seed: u64) -> Result<Bundle>;

    /// Largest one-step residual of `traj` against the model.
    fn residual(&self, traj: &Trajectory) -> f64;

    fn residual_tol(&self) -> f64;

    /// Known equilibria (may be empty).
    fn equilibria(&self) -> Vec<StateVec> {
        Vec::new()
    }

    fn single_valued(&self) -> bool {
        false
    }

    /// Backward solution on `[0, horizon]` (time-reversed), if the model has one.
    fn reverse(&self, _x0: &StateVec, _horizon: f64) -> Option<Trajectory> {
        None
    }

    fn state(&self, coords: Vec<f64>) -> Result<StateVec> {
        StateVec::new(coords, self.weights())
    }
}

/// Number of `dt` steps in `horizon`; rejects horizons off the grid.
pub fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0) || !(dt > 0.0) {
        return invalid("horizon and dt must be positive");
    }
    let r = horizon / dt;
    let k = r.round();
    if (r - k).abs() > 1e-6 * r.max(1.0) {
        return invalid(format!("horizon {horizon} is not a multiple of dt {dt}"));
    }
    Ok(k as usize)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AxiomCheck {
    pub pass: bool,
    /// Worst measured quantity for the check (residual, gap, or failure count).
    pub measured: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct AxiomReport {
    pub k1: AxiomCheck,
    pub k2: AxiomCheck,
    pub k3: AxiomCheck,
    pub k4: AxiomCheck,
    pub horizon: f64,
    pub samples: usize,
    /// K4 is a finite-sample diagnostic: it can refute, not prove.
    pub finite_sample: bool,
    /// Informational: largest distance between a shifted tail and the bundle
    /// regenerated from the shifted origin.
    pub k2_bundle_gap: f64,
}

impl AxiomReport {
    pub fn all_pass(&self) -> bool {
        self.k1.pass && self.k2.pass && self.k3.pass && self.k4.pass
    }
}

fn check(pass: bool, measured: f64, detail: impl Into<String>) -> AxiomCheck {
    AxiomCheck { pass, measured, detail: detail.into() }
}

/// Tolerance used by the K4 Cauchy test.
pub const K4_TOL: f64 = 1e-3;

pub fn check_axioms(gen: &dyn Generator, samples: &[StateVec], horizon: f64, seed: u64, exec: Exec) -> Result<AxiomReport> {
    if samples.is_empty() {
        return invalid("axiom check needs at least one sample");
    }
    let steps = grid_steps(horizon, gen.dt())?;
    let tol = gen.residual_tol();

    struct PerSample {
        k1: bool,
        k2_res: f64,
        k2_gap: f64,
        k3_res: f64,
        k4_gap: f64,
    }

    let per: Vec<PerSample> = par::map(exec, samples, |i, x| {
        let s = par::mix_seed(seed, i as u64);
        let Ok(b) = gen.bundle(x, horizon, s) else {
            return PerSample { k1: false, k2_res: f64::NAN, k2_gap: f64::NAN, k3_res: f64::NAN, k4_gap: f64::NAN };
        };
        let k = (steps / 2).max(1).min(steps);
        let mut k2_res: f64 = 0.0;
        let mut k2_gap: f64 = 0.0;
        let mut k3_res: f64 = 0.0;
        for (m, phi) in b.members.iter().enumerate() {
            let tail = phi.shifted(k);
            k2_res = k2_res.max(gen.residual(&tail));
            let mid = phi.state(k).clone();
            if let Ok(b2) = gen.bundle(&mid, horizon, par::mix_seed(s, 1000 + m as u64)) {
                let lim = tail.len();
                let g = b2.members.iter().map(|psi| psi.sup_distance(&tail, lim)).fold(f64::INFINITY, f64::min);
                k2_gap = k2_gap.max(g);
                // K3: follow φ up to τ, then any member from φ(τ).
                let join = &b2.members[b2.members.len() - 1 - m % b2.members.len()];
                match phi.concatenate(k, join) {
                    Ok(c) => k3_res = k3_res.max(gen.residual(&c)),
                    Err(_) => k3_res = f64::INFINITY,
                }
            } else {
                k3_res = f64::INFINITY;
            }
        }
        let k4_gap = k4_last_gap(gen, x, horizon, s).unwrap_or(f64::INFINITY);
        PerSample { k1: !b.is_empty(), k2_res, k2_gap, k3_res, k4_gap }
    });

    let k1_fail = per.iter().filter(|p| !p.k1).count();
    let ok: Vec<&PerSample> = per.iter().filter(|p| p.k1).collect();
    let worst = |f: fn(&PerSample) -> f64| ok.iter().map(|p| f(p)).fold(0.0, f64::max);
    let k2_res = worst(|p| p.k2_res);
    let k3_res = worst(|p| p.k3_res);
    let k4_gap = worst(|p| p.k4_gap);
    let none_ok = ok.is_empty();
    Ok(AxiomReport {
        k1: check(k1_fail == 0, k1_fail as f64, format!("{k1_fail} of {} samples produced no solution", samples.len())),
        k2: check(!none_ok && k2_res <= tol, k2_res, "max residual of time-shifted tails"),
        k3: check(!none_ok && k3_res <= tol, k3_res, "max residual of concatenated solutions"),
        k4: check(!none_ok && k4_gap <= K4_TOL, k4_gap, "sup-gap between consecutive members for origins x + 2^-k e_1"),
        horizon,
        samples: samples.len(),
        finite_sample: true,
        k2_bundle_gap: worst(|p| p.k2_gap),
    })
}

/// Greedy subsequence for origins `x + 2^{-k} e_1`, `k = 1..=30`: each step
/// keeps the member closest to the previous pick; returns the last gap.
fn k4_last_gap(gen: &dyn Generator, x: &StateVec, horizon: f64, seed: u64) -> Result<f64> {
    let mut prev: Option<Trajectory> = None;
    let mut last = f64::INFINITY;
    for k in 1..=30 {
        let mut c = x.coords().to_vec();
        c[0] += 2f64.powi(-k);
        let b = gen.bundle(&x.with_coords(c), horizon, par::mix_seed(seed, 5000 + k as u64))?;
        let pick = match &prev {
            None => b.members[0].clone(),
            Some(p) => {
                let (g, m) = b
                    .members
                    .iter()
                    .map(|m| (m.sup_distance(p, usize::MAX), m))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("nonempty bundle");
                last = g;
                m.clone()
            }
        };
        prev = Some(pick);
    }
    Ok(last)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct K5Report {
    pub pass: bool,
    pub tol: f64,
    /// Min-over-bundle sup-distance to the target, one per approach point.
    pub gaps: Vec<f64>,
    pub horizon: f64,
    /// The last `dt` window before `min(horizon, t_φ)` is excluded.
    pub excluded_final_window: bool,
    pub finite_sample: bool,
}

impl K5Report {
    pub fn final_gap(&self) -> f64 {
        *self.gaps.last().unwrap_or(&f64::NAN)
    }
}

pub fn check_k5(
    gen: &dyn Generator,
    x: &StateVec,
    target: &Trajectory,
    approach: &[StateVec],
    horizon: f64,
    tol: f64,
    seed: u64,
    exec: Exec,
) -> Result<K5Report> {
    if approach.is_empty() {
        return invalid("approach sequence is empty");
    }
    if target.first().distance(x)? > 1e-9 {
        return invalid("target trajectory does not start at x");
    }
    let steps = grid_steps(horizon, gen.dt())?;
    let span = ((target.duration() / gen.dt()).round() as usize).min(steps);
    // Samples j < span only: drops the final dt window.
    let limit = span.max(1);
    let gaps: Vec<f64> = par::try_map(exec, approach, |i, xn| -> Result<f64> {
        let b = gen.bundle(xn, horizon, par::mix_seed(seed, i as u64))?;
        Ok(b.members.iter().map(|m| m.sup_distance(target, limit)).fold(f64::INFINITY, f64::min))
    })?;
    let pass = gaps.last().is_some_and(|g| *g <= tol);
    Ok(K5Report { pass, tol, gaps, horizon, excluded_final_window: true, finite_sample: true })
}

/// Cloud estimate together with the finite horizon it was computed on.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CloudEstimate {
    pub cloud: PointCloudSet,
    pub horizon: f64,
    pub note: &'static str,
}

/// First index at which `traj` leaves the closed region (None if it stays).
pub fn first_exit_index(traj: &Trajectory, region: &dyn Region) -> Option<usize> {
    traj.states().iter().position(|s| !region.contains(s))
}

pub fn estimate_a_plus(
    gen: &dyn Generator,
    region: &dyn Region,
    grid: &[StateVec],
    horizon: f64,
    seed: u64,
    exec: Exec,
) -> Result<CloudEstimate> {
    if let Some(p) = grid.iter().find(|p| !region.contains(p)) {
        return Err(Error::OutsideRegion(format!("grid point {:?} not in region", p.coords())));
    }
    let keep = par::try_map(exec, grid, |i, x| -> Result<bool> {
        let b = gen.bundle(x, horizon, par::mix_seed(seed, i as u64))?;
        Ok(b.members.iter().any(|m| first_exit_index(m, region).is_none()))
    })?;
    let pts = grid.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p.clone()).collect();
    Ok(CloudEstimate {
        cloud: PointCloudSet::new(CloudLabel::APlus, pts)?,
        horizon,
        note: "points with a sampled solution staying in N on [0, horizon]",
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AMinusOptions {
    pub horizon_back: f64,
    /// Extra time integrated past `horizon_back` to harvest tails.
    pub tail: f64,
    /// Radii of the seed rings placed around each known equilibrium.
    pub ring_radii: Vec<f64>,
    pub cluster_tol: f64,
    /// Keep every `stride`-th tail sample.
    pub stride: usize,
}

impl Default for AMinusOptions {
    fn default() -> Self {
        Self { horizon_back: 10.0, tail: 5.0, ring_radii: vec![1e-9, 1e-7, 1e-5, 1e-3], cluster_tol: 1e-3, stride: 1 }
    }
}

/// Tail harvesting: states reached after `horizon_back` by solutions that
/// stayed in N the whole time, launched from the grid and from tiny rings
/// around the known equilibria; the equilibria inside N are always included.
pub fn estimate_a_minus(
    gen: &dyn Generator,
    region: &dyn Region,
    grid: &[StateVec],
    opts: &AMinusOptions,
    seed: u64,
    exec: Exec,
) -> Result<CloudEstimate> {
    if !(opts.horizon_back > 0.0) {
        return invalid("horizon_back must be positive");
    }
    let eq: Vec<StateVec> = gen.equilibria().into_iter().filter(|e| region.contains(e)).collect();
    let mut launch: Vec<StateVec> = grid.iter().filter(|p| region.contains(p)).cloned().collect();
    for e in &eq {
        for &r in &opts.ring_radii {
            let w = e.weights();
            for i in 0..e.dim() {
                for s in [1.0, -1.0] {
                    let mut c = e.coords().to_vec();
                    c[i] += s * r / w[i].sqrt();
                    launch.push(e.with_coords(c));
                }
            }
        }
    }
    let dt = gen.dt();
    let total = ((opts.horizon_back + opts.tail) / dt - 1e-9).ceil() * dt;
    let first = (opts.horizon_back / dt).ceil() as usize;
    let stride = opts.stride.max(1);
    let tails: Vec<Vec<StateVec>> = par::try_map(exec, &launch, |i, x| -> Result<Vec<StateVec>> {
        let b = gen.bundle(x, total, par::mix_seed(seed, i as u64))?;
        let mut out = Vec::new();
        for m in &b.members {
            let stop = first_exit_index(m, region).unwrap_or(m.len());
            let mut j = first;
            while j < stop {
                out.push(m.state(j).clone());
                j += stride;
            }
        }
        Ok(out)
    })?;
    let candidates = eq.into_iter().chain(tails.into_iter().flatten());
    Ok(CloudEstimate {
        cloud: cluster(CloudLabel::AMinus, candidates, opts.cluster_tol)?,
        horizon: opts.horizon_back,
        note: "forward-tail surrogate for backward-bounded solutions",
    })
}

/// Cluster representatives: one point per cell of side `tol/√n` (in the
/// weighted coordinates), then a greedy merge of representatives.
pub fn cluster(label: CloudLabel, points: impl IntoIterator<Item = StateVec>, tol: f64) -> Result<PointCloudSet> {
    if !(tol > 0.0) {
        return invalid("cluster tolerance must be positive");
    }
    let mut cells: HashSet<Vec<i64>> = HashSet::new();
    let mut reps = Vec::new();
    for p in points {
        let side = tol / (p.dim() as f64).sqrt();
        let key: Vec<i64> =
            p.coords().iter().zip(p.weights().iter()).map(|(x, w)| (x * w.sqrt() / side).floor() as i64).collect();
        if cells.insert(key) {
            reps.push(p);
        }
    }
    if reps.len() <= 4000 {
        PointCloudSet::clustered(label, reps, tol)
    } else {
        PointCloudSet::new(label, reps)
    }
}

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-3;

pub fn omega_limit(traj: &Trajectory, tail_fraction: f64, cluster_tol: f64) -> Result<PointCloudSet> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return invalid("tail fraction must lie in (0, 1)");
    }
    let start = ((1.0 - tail_fraction) * traj.len() as f64).floor() as usize;
    if traj.len() - start < 10 {
        return invalid("trajectory tail has fewer than 10 samples");
    }
    // Later samples are better representatives of the limit.
    cluster(CloudLabel::OmegaLimit, traj.states()[start..].iter().rev().cloned(), cluster_tol)
}

/// Set tested for invariance: a region, or a cloud thickened by `tol`.
pub enum InvariantSet<'a> {
    Region(&'a dyn Region),
    Cloud { cloud: &'a PointCloudSet, tol: f64 },
}

impl InvariantSet<'_> {
    fn contains(&self, x: &StateVec) -> bool {
        match self {
            InvariantSet::Region(r) => r.contains(x),
            InvariantSet::Cloud { cloud, tol } => cloud.distance_to(x).is_some_and(|d| d <= *tol),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub horizon: f64,
    /// Indices of grid points without a solution staying in the set.
    pub failures: Vec<usize>,
}

pub fn is_weakly_positively_invariant(
    gen: &dyn Generator,
    set: &InvariantSet<'_>,
    grid: &[StateVec],
    horizon: f64,
    seed: u64,
    exec: Exec,
) -> Result<InvarianceReport> {
    if grid.iter().any(|p| !set.contains(p)) {
        return Err(Error::OutsideRegion("grid point not in the tested set".into()));
    }
    let ok = par::try_map(exec, grid, |i, x| -> Result<bool> {
        let b = gen.bundle(x, horizon, par::mix_seed(seed, i as u64))?;
        Ok(b.members.iter().any(|m| m.states().iter().all(|s| set.contains(s))))
    })?;
    let failures: Vec<usize> = ok.iter().enumerate().filter(|(_, k)| !**k).map(|(i, _)| i).collect();
    Ok(InvarianceReport { invariant: failures.is_empty(), horizon, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::RegionSpec;
    use crate::zoo::{SaddleFlow, SqrtOde};

    #[test]
    fn grid_steps_rejects_off_grid() {
        assert_eq!(grid_steps(1.0, 0.01).unwrap(), 100);
        assert!(grid_steps(1.005, 0.01).is_err());
        assert!(grid_steps(0.0, 0.01).is_err());
    }

    #[test]
    fn cluster_merges_and_keeps_order() {
        let p = |x: f64| StateVec::euclidean(vec![x, 0.0]);
        let c = cluster(CloudLabel::AMinus, [p(0.0), p(1e-5), p(0.5), p(0.5 + 1e-6), p(1.0)], 1e-3).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.points()[0].coords()[0], 0.0);
        assert!(cluster(CloudLabel::AMinus, [p(0.0)], 0.0).is_err());
    }

    #[test]
    fn saddle_a_minus_lies_on_unstable_axis() {
        let gen = SaddleFlow::new(1.0, 1.0, 0.01).unwrap();
        let n = RegionSpec::cube(StateVec::euclidean(vec![0.0, 0.0]), 1.0).unwrap();
        let grid: Vec<StateVec> = (0..11)
            .flat_map(|i| (0..11).map(move |j| StateVec::euclidean(vec![-1.0 + 0.2 * i as f64, -1.0 + 0.2 * j as f64])))
            .collect();
        let est = estimate_a_minus(&gen, &n, &grid, &AMinusOptions::default(), 0, Exec::Sequential).unwrap();
        assert!(!est.cloud.is_empty());
        assert!(est.cloud.points().iter().all(|p| p.coords()[1].abs() < 1e-3));
        let plus = estimate_a_plus(&gen, &n, &grid, 5.0, 0, Exec::Sequential).unwrap();
        assert!(plus.cloud.points().iter().all(|p| p.coords()[0].abs() < 1e-2));
    }

    #[test]
    fn omega_limit_of_decaying_orbit() {
        let gen = SaddleFlow::new(1.0, 1.0, 0.01).unwrap();
        let b = gen.bundle(&StateVec::euclidean(vec![0.0, 0.5]), 20.0, 0).unwrap();
        let w = omega_limit(&b.members[0], 0.1, 1e-3).unwrap();
        assert!(w.distance_to(&StateVec::euclidean(vec![0.0, 0.0])).unwrap() < 1e-3);
        assert!(omega_limit(&b.members[0], 1.5, 1e-3).is_err());
    }

    #[test]
    fn sqrt_origin_is_weakly_invariant() {
        let gen = SqrtOde::new(0.01);
        let k = PointCloudSet::new(CloudLabel::KApprox, vec![StateVec::euclidean(vec![0.0])]).unwrap();
        let set = InvariantSet::Cloud { cloud: &k, tol: 1e-12 };
        let r = is_weakly_positively_invariant(&gen, &set, &[StateVec::euclidean(vec![0.0])], 1.0, 0, Exec::Sequential).unwrap();
        assert!(r.invariant);
    }
}
