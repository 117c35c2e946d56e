//! `D`, `F`, exit times and the bundle estimates of `g⁺`, `g⁻`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::region::{PointCloudSet, Region};
use crate::semiflow::Generator;
use crate::state::StateVec;
use crate::trajectory::Trajectory;

/// `α(t) = 2 − 1/(1+t)`: increasing, `α(0) = 1`, `α < 2`.
pub fn alpha(t: f64) -> f64 {
    2.0 - 1.0 / (1.0 + t)
}

/// Everything `g±` depend on: `K`, `A⁻(N)`, `N` (with `U = int N`) and `𝓞(K)`.
#[derive(Clone)]
pub struct BlockFunctionals {
    pub k_cloud: PointCloudSet,
    pub a_minus: PointCloudSet,
    pub region_n: Arc<dyn Region>,
    pub region_o: Arc<dyn Region>,
}

impl std::fmt::Debug for BlockFunctionals {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockFunctionals")
            .field("k_points", &self.k_cloud.len())
            .field("a_minus_points", &self.a_minus.len())
            .finish()
    }
}

impl BlockFunctionals {
    pub fn new(
        k_cloud: PointCloudSet,
        a_minus: PointCloudSet,
        region_n: Arc<dyn Region>,
        region_o: Arc<dyn Region>,
    ) -> Result<Self> {
        if let Some(p) = k_cloud.points().iter().find(|p| !region_n.interior(p)) {
            return Err(Error::Precondition(format!(
                "K point {:?} is not interior to N: not an isolating neighborhood",
                &p.coords()[..p.dim().min(4)]
            )));
        }
        Ok(Self { k_cloud, a_minus, region_n, region_o })
    }

    pub(crate) fn d_raw(&self, x: &StateVec) -> f64 {
        let dk = self.k_cloud.distance_to(x).expect("K is nonempty");
        if dk == 0.0 {
            return 0.0;
        }
        dk / (dk + self.region_n.dist_to_complement(x))
    }

    /// `D(x) = d(x,K) / (d(x,K) + d(x, X∖N))`.
    pub fn compute_d(&self, x: &StateVec) -> Result<f64> {
        if !self.region_n.contains(x) {
            return Err(Error::OutsideRegion("D is evaluated on N only".into()));
        }
        Ok(self.d_raw(x))
    }

    pub(crate) fn f_raw(&self, x: &StateVec) -> f64 {
        self.a_minus.distance_to(x).map_or(1.0, |d| d.min(1.0))
    }

    /// `F(x) = min(1, d(x, A⁻(N)))`.
    pub fn compute_f(&self, x: &StateVec) -> Result<f64> {
        if self.a_minus.is_empty() {
            return Err(Error::InvalidInput("A⁻ cloud is empty".into()));
        }
        Ok(self.f_raw(x))
    }

    /// Point of `U ∩ 𝓞(K)`.
    pub fn admissible(&self, x: &StateVec) -> bool {
        self.region_n.interior(x) && self.region_o.interior(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitTime {
    pub time: f64,
    /// The trajectory ended inside the region.
    pub truncated: bool,
}

/// First exit from the region (`open`: from its interior), refined by
/// bisection on the linear interpolant to `dt/100`.
pub fn exit_time(traj: &Trajectory, region: &dyn Region, open: bool) -> Result<ExitTime> {
    let inside = |x: &StateVec| if open { region.interior(x) } else { region.contains(x) };
    let start = traj.first();
    if !region.contains(start) {
        return Err(Error::OutsideRegion("trajectory starts outside the region".into()));
    }
    if !inside(start) {
        return Ok(ExitTime { time: 0.0, truncated: false });
    }
    let Some(j) = traj.states().iter().position(|s| !inside(s)) else {
        return Ok(ExitTime { time: traj.duration(), truncated: true });
    };
    let (a, b) = (traj.state(j - 1), traj.state(j));
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-2 {
        let mid = 0.5 * (lo + hi);
        if inside(&a.lerp(b, mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ExitTime { time: (j as f64 - 1.0 + hi) * traj.dt(), truncated: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GEstimate {
    pub value: f64,
    pub bundle_size: usize,
    pub horizon: f64,
    /// Time of the extremum in the scanned window.
    pub arg_time: f64,
    pub truncated: bool,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the minimum of `f` on `[a, b]`.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..24 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `inf_{t < t⁺(φ)} D(φ(t))/(1+t)` for one member.
fn f_plus(f: &BlockFunctionals, m: &Trajectory) -> Result<(f64, f64, bool)> {
    let exit = exit_time(m, f.region_n.as_ref(), true)?;
    let dt = m.dt();
    let mut best = (f64::INFINITY, 0.0, 0usize);
    for (j, s) in m.states().iter().enumerate() {
        let t = j as f64 * dt;
        if !exit.truncated && t >= exit.time {
            break;
        }
        let v = f.d_raw(s) / (1.0 + t);
        if v < best.0 {
            best = (v, t, j);
        }
        if v == 0.0 {
            break;
        }
    }
    if best.0 > 0.0 && best.0.is_finite() {
        let lo = (best.2 as f64 - 1.0).max(0.0) * dt;
        let mut hi = (best.2 as f64 + 1.0) * dt;
        if !exit.truncated {
            hi = hi.min(exit.time * (1.0 - 1e-9));
        }
        hi = hi.min(m.duration());
        if hi > lo {
            let (t, v) = golden_min(|t| f.d_raw(&m.at_elapsed(t)) / (1.0 + t), lo, hi);
            if v < best.0 {
                best = (v, t, best.2);
            }
        }
    }
    if !best.0.is_finite() {
        // Immediate exit: only t = 0 is in the window.
        best = (f.d_raw(m.first()), 0.0, 0);
    }
    Ok((best.0, best.1, exit.truncated))
}

/// `sup_{t ∈ [0, s⁺(φ)]} α(t) F(φ(t))` for one member.
fn f_minus(f: &BlockFunctionals, m: &Trajectory) -> Result<(f64, f64, bool)> {
    let exit = exit_time(m, f.region_n.as_ref(), false)?;
    let dt = m.dt();
    let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
    for (j, s) in m.states().iter().enumerate() {
        let t = j as f64 * dt;
        if !exit.truncated && t > exit.time {
            break;
        }
        let v = alpha(t) * f.f_raw(s);
        if v > best.0 {
            best = (v, t, j);
        }
    }
    if !exit.truncated {
        let v = alpha(exit.time) * f.f_raw(&m.at_elapsed(exit.time));
        if v > best.0 {
            best = (v, exit.time, best.2);
        }
    }
    let lo = (best.2 as f64 - 1.0).max(0.0) * dt;
    let mut hi = ((best.2 as f64 + 1.0) * dt).min(m.duration());
    if !exit.truncated {
        hi = hi.min(exit.time);
    }
    if hi > lo && best.0 > 0.0 {
        let (t, v) = golden_min(|t| -alpha(t) * f.f_raw(&m.at_elapsed(t)), lo, hi);
        if -v > best.0 {
            best = (-v, t, best.2);
        }
    }
    Ok((best.0, best.1, exit.truncated))
}

fn reduce(vals: Vec<(f64, f64, bool)>, minimize: bool, horizon: f64) -> GEstimate {
    let bundle_size = vals.len();
    let truncated = vals.iter().any(|v| v.2);
    let pick = vals
        .into_iter()
        .reduce(|a, b| if (minimize && b.0 < a.0) || (!minimize && b.0 > a.0) { b } else { a })
        .expect("nonempty bundle");
    GEstimate { value: pick.0.max(0.0), bundle_size, horizon, arg_time: pick.1, truncated }
}

pub fn g_plus_of_bundle(f: &BlockFunctionals, members: &[Trajectory], horizon: f64) -> Result<GEstimate> {
    let vals = members.iter().map(|m| f_plus(f, m)).collect::<Result<Vec<_>>>()?;
    Ok(reduce(vals, true, horizon))
}

pub fn g_minus_of_bundle(f: &BlockFunctionals, members: &[Trajectory], horizon: f64) -> Result<GEstimate> {
    let vals = members.iter().map(|m| f_minus(f, m)).collect::<Result<Vec<_>>>()?;
    Ok(reduce(vals, false, horizon))
}

/// `g⁺(x)`: min over the bundle of the grid minimum (plus one golden-section
/// refinement) of `D(φ(t))/(1+t)` before the exit from `U`.
pub fn estimate_g_plus(x: &StateVec, gen: &dyn Generator, f: &BlockFunctionals, horizon: f64, seed: u64) -> Result<GEstimate> {
    if !f.region_n.interior(x) {
        return Err(Error::OutsideRegion("g⁺ is defined on U = int N".into()));
    }
    let b = gen.bundle(x, horizon, seed)?;
    g_plus_of_bundle(f, &b.members, horizon)
}

/// `g⁻(x)`: max over the bundle of `α(t) F(φ(t))` on `[0, s⁺(φ)]`.
pub fn estimate_g_minus(x: &StateVec, gen: &dyn Generator, f: &BlockFunctionals, horizon: f64, seed: u64) -> Result<GEstimate> {
    if !f.region_n.contains(x) {
        return Err(Error::OutsideRegion("g⁻ is defined on N".into()));
    }
    let b = gen.bundle(x, horizon, seed)?;
    g_minus_of_bundle(f, &b.members, horizon)
}

/// Both estimates from one bundle (`x ∈ U`).
pub fn estimate_g_pair(
    x: &StateVec,
    gen: &dyn Generator,
    f: &BlockFunctionals,
    horizon: f64,
    seed: u64,
) -> Result<(GEstimate, GEstimate)> {
    if !f.region_n.interior(x) {
        return Err(Error::OutsideRegion("g⁺ is defined on U = int N".into()));
    }
    let b = gen.bundle(x, horizon, seed)?;
    Ok((g_plus_of_bundle(f, &b.members, horizon)?, g_minus_of_bundle(f, &b.members, horizon)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{CloudLabel, RegionSpec};

    fn line_functionals() -> BlockFunctionals {
        let p = |x: f64| StateVec::euclidean(vec![x]);
        let k = PointCloudSet::new(CloudLabel::KApprox, vec![p(0.0)]).unwrap();
        let a = PointCloudSet::new(CloudLabel::AMinus, vec![p(0.0)]).unwrap();
        let n: Arc<dyn Region> = Arc::new(RegionSpec::cube(p(0.0), 2.0).unwrap());
        BlockFunctionals::new(k, a, n.clone(), n).unwrap()
    }

    #[test]
    fn d_cases() {
        let f = line_functionals();
        let p = |x: f64| StateVec::euclidean(vec![x]);
        assert_eq!(f.compute_d(&p(0.0)).unwrap(), 0.0);
        assert_eq!(f.compute_d(&p(1.0)).unwrap(), 0.5);
        assert_eq!(f.compute_d(&p(2.0)).unwrap(), 1.0);
        assert!(f.compute_d(&p(3.0)).is_err());
        assert_eq!(f.compute_f(&p(3.0)).unwrap(), 1.0);
        assert_eq!(f.compute_f(&p(0.25)).unwrap(), 0.25);
    }

    #[test]
    fn alpha_properties() {
        assert_eq!(alpha(0.0), 1.0);
        let mut prev = alpha(0.0);
        for i in 1..1000 {
            let a = alpha(i as f64 * 0.37);
            assert!(a > prev && a < 2.0);
            prev = a;
        }
    }

    #[test]
    fn k_on_boundary_is_rejected() {
        let p = |x: f64| StateVec::euclidean(vec![x]);
        let k = PointCloudSet::new(CloudLabel::KApprox, vec![p(0.0), p(2.0)]).unwrap();
        let n: Arc<dyn Region> = Arc::new(RegionSpec::cube(p(0.0), 2.0).unwrap());
        let a = PointCloudSet::new(CloudLabel::AMinus, vec![]).unwrap();
        assert!(BlockFunctionals::new(k, a, n.clone(), n).is_err());
    }

    #[test]
    fn golden_finds_parabola_minimum() {
        let (t, v) = golden_min(|t| (t - 0.3).powi(2) + 1.0, 0.0, 1.0);
        assert!((t - 0.3).abs() < 1e-4 && (v - 1.0).abs() < 1e-8);
    }
}
