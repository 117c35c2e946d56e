//! Regions of phase space (`N`, `U = int N`, `𝓞(K)`) and finite point clouds
//! approximating `K`, `A⁺(N)` and `A⁻(N)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::state::{weighted_dist_sq, StateVec};

/// Closed set with a continuous signed level function: negative inside,
/// zero on the boundary, positive outside.
pub trait Region: Send + Sync {
    fn signed_distance(&self, x: &StateVec) -> f64;

    fn membership_tol(&self) -> f64;

    /// Distance from an inside point to `X ∖ N` (zero outside).
    fn dist_to_complement(&self, x: &StateVec) -> f64 {
        (-self.signed_distance(x)).max(0.0)
    }

    /// Closed-set membership (boundary band included).
    fn contains(&self, x: &StateVec) -> bool {
        self.signed_distance(x) <= self.membership_tol()
    }

    /// Open-set membership (boundary band excluded).
    fn interior(&self, x: &StateVec) -> bool {
        self.signed_distance(x) < -self.membership_tol()
    }

    fn on_boundary(&self, x: &StateVec) -> bool {
        self.signed_distance(x).abs() <= self.membership_tol()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionShape {
    Box { radii: Vec<f64> },
    Ball { radius: f64 },
}

/// Box or ball around a center, measured in the center's metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub shape: RegionShape,
    pub center: StateVec,
    pub membership_tol: f64,
}

pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

impl RegionSpec {
    pub fn boxed(center: StateVec, radii: Vec<f64>) -> Result<Self> {
        if radii.len() != center.dim() {
            return Err(Error::DimensionMismatch { expected: center.dim(), got: radii.len() });
        }
        if radii.iter().any(|r| !(*r > 0.0)) {
            return invalid("box radii must be positive");
        }
        Ok(Self { shape: RegionShape::Box { radii }, center, membership_tol: DEFAULT_MEMBERSHIP_TOL })
    }

    /// Box with the same half-width along every axis.
    pub fn cube(center: StateVec, radius: f64) -> Result<Self> {
        let n = center.dim();
        Self::boxed(center, vec![radius; n])
    }

    pub fn ball(center: StateVec, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return invalid("ball radius must be positive");
        }
        Ok(Self { shape: RegionShape::Ball { radius }, center, membership_tol: DEFAULT_MEMBERSHIP_TOL })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.membership_tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }
}

impl Region for RegionSpec {
    fn signed_distance(&self, x: &StateVec) -> f64 {
        let c = self.center.coords();
        let w = self.center.weights();
        let xc = x.coords();
        match &self.shape {
            RegionShape::Ball { radius } => weighted_dist_sq(w, xc, c).sqrt() - radius,
            RegionShape::Box { radii } => {
                let mut outside = 0.0;
                let mut inside = f64::INFINITY;
                for i in 0..c.len() {
                    let gap = (xc[i] - c[i]).abs() - radii[i];
                    let sw = w[i].sqrt();
                    if gap > 0.0 {
                        outside += w[i] * gap * gap;
                    }
                    inside = inside.min(-gap * sw);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    -inside
                }
            }
        }
    }

    fn membership_tol(&self) -> f64 {
        self.membership_tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudLabel {
    KApprox,
    APlus,
    AMinus,
    OmegaLimit,
}

/// Finite point set with nearest-point queries. Points are kept sorted along
/// the coordinate of largest spread so that queries can prune on that axis.
#[derive(Debug, Clone, Serialize)]
pub struct PointCloudSet {
    pub label: CloudLabel,
    points: Vec<StateVec>,
    #[serde(skip)]
    axis: usize,
    #[serde(skip)]
    keys: Vec<f64>,
}

impl PartialEq for PointCloudSet {
    fn eq(&self, other: &Self) -> bool {
        self.label == other.label && self.points == other.points
    }
}

impl PointCloudSet {
    pub fn new(label: CloudLabel, points: Vec<StateVec>) -> Result<Self> {
        if label == CloudLabel::KApprox && points.is_empty() {
            return invalid("K approximation must not be empty");
        }
        if let Some(p0) = points.first() {
            if points.iter().any(|p| p.dim() != p0.dim()) {
                return invalid("cloud points must share one dimension");
            }
        }
        let axis = widest_axis(&points);
        let mut points = points;
        points.sort_by(|a, b| a.coords()[axis].total_cmp(&b.coords()[axis]));
        let keys = points.iter().map(|p| p.coords()[axis]).collect();
        Ok(Self { label, points, axis, keys })
    }

    pub fn points(&self) -> &[StateVec] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `d(x, cloud)`; `None` for an empty cloud.
    pub fn distance_to(&self, x: &StateVec) -> Option<f64> {
        self.nearest(x).map(|(_, d)| d)
    }

    /// Index and distance of the nearest point.
    pub fn nearest(&self, x: &StateVec) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let a = self.axis;
        let wa = x.weights()[a];
        let key = x.coords()[a];
        let start = self.keys.partition_point(|k| *k < key);
        let w = x.weights();
        let mut best = f64::INFINITY;
        let mut best_i = 0;
        let visit = |i: usize, best: &mut f64, best_i: &mut usize| -> bool {
            let dk = self.keys[i] - key;
            if wa * dk * dk >= *best {
                return false;
            }
            let d = weighted_dist_sq(w, x.coords(), self.points[i].coords());
            if d < *best {
                *best = d;
                *best_i = i;
            }
            true
        };
        let mut hi = start;
        while hi < self.points.len() && visit(hi, &mut best, &mut best_i) {
            hi += 1;
        }
        let mut lo = start;
        while lo > 0 && visit(lo - 1, &mut best, &mut best_i) {
            lo -= 1;
        }
        Some((best_i, best.sqrt()))
    }

    /// Greedy merge: keep a point only if it is farther than `tol` from every
    /// point kept so far (input order decides the representatives).
    pub fn clustered(label: CloudLabel, candidates: impl IntoIterator<Item = StateVec>, tol: f64) -> Result<Self> {
        let mut reps: Vec<StateVec> = Vec::new();
        for p in candidates {
            if !reps.iter().any(|r| r.dist(&p) <= tol) {
                reps.push(p);
            }
        }
        Self::new(label, reps)
    }

    pub fn relabeled(mut self, label: CloudLabel) -> Self {
        self.label = label;
        self
    }

    /// Hausdorff-style one-sided distance: `max_{p ∈ self} d(p, other)`.
    pub fn excess_over(&self, other: &PointCloudSet) -> Option<f64> {
        let mut worst: f64 = 0.0;
        for p in &self.points {
            worst = worst.max(other.distance_to(p)?);
        }
        Some(worst)
    }
}

fn widest_axis(points: &[StateVec]) -> usize {
    let Some(p0) = points.first() else { return 0 };
    let mut best = (0, -1.0);
    for a in 0..p0.dim() {
        let (lo, hi) = points
            .iter()
            .map(|p| p.coords()[a])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let spread = (hi - lo) * p0.weights()[a].sqrt();
        if spread > best.1 {
            best = (a, spread);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64) -> StateVec {
        StateVec::euclidean(vec![x, y])
    }

    #[test]
    fn box_signed_distance() {
        let b = RegionSpec::cube(p(0.0, 0.0), 1.0).unwrap();
        assert!((b.signed_distance(&p(0.5, 0.0)) + 0.5).abs() < 1e-15);
        assert!((b.signed_distance(&p(2.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((b.signed_distance(&p(2.0, 2.0)) - 2f64.sqrt()).abs() < 1e-15);
        assert!(b.on_boundary(&p(1.0, 0.3)));
        assert!(b.interior(&p(0.0, 0.999)));
        assert!(!b.interior(&p(1.0, 0.0)));
        assert!(b.contains(&p(1.0, 0.0)));
    }

    #[test]
    fn ball_signed_distance() {
        let b = RegionSpec::ball(p(1.0, 1.0), 0.5).unwrap();
        assert!((b.signed_distance(&p(1.0, 1.0)) + 0.5).abs() < 1e-15);
        assert!(b.on_boundary(&p(1.5, 1.0)));
    }

    #[test]
    fn interior_matches_tolerance_band() {
        let b = RegionSpec::cube(p(0.0, 0.0), 1.0).unwrap().with_tol(0.01);
        assert!(!b.interior(&p(0.995, 0.0)));
        assert!(b.on_boundary(&p(0.995, 0.0)));
        assert!(b.interior(&p(0.98, 0.0)));
    }

    #[test]
    fn empty_k_cloud_rejected() {
        assert!(PointCloudSet::new(CloudLabel::KApprox, vec![]).is_err());
        let c = PointCloudSet::new(CloudLabel::AMinus, vec![]).unwrap();
        assert_eq!(c.distance_to(&p(0.0, 0.0)), None);
    }

    #[test]
    fn clustering_merges_close_points() {
        let pts = vec![p(0.0, 0.0), p(1e-4, 0.0), p(1.0, 0.0), p(1.0, 1e-5)];
        let c = PointCloudSet::clustered(CloudLabel::OmegaLimit, pts, 1e-3).unwrap();
        assert_eq!(c.len(), 2);
    }

    proptest! {
        #[test]
        fn nearest_matches_brute_force(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..60),
            q in (-6.0f64..6.0, -6.0f64..6.0),
        ) {
            let cloud = PointCloudSet::new(CloudLabel::AMinus, pts.iter().map(|&(x, y)| p(x, y)).collect()).unwrap();
            let qp = p(q.0, q.1);
            let brute = pts.iter().map(|&(x, y)| p(x, y).dist(&qp)).fold(f64::INFINITY, f64::min);
            prop_assert!((cloud.distance_to(&qp).unwrap() - brute).abs() < 1e-12);
        }

        #[test]
        fn box_sign_on_rays(dir in (-1.0f64..1.0, -1.0f64..1.0), s in 0.0f64..2.0) {
            prop_assume!(dir.0.abs().max(dir.1.abs()) > 1e-3);
            let b = RegionSpec::cube(p(0.0, 0.0), 1.0).unwrap();
            let m = dir.0.abs().max(dir.1.abs());
            let x = p(s * dir.0 / m, s * dir.1 / m);
            let sd = b.signed_distance(&x);
            if s < 1.0 { prop_assert!(sd < 0.0); }
            if s > 1.0 { prop_assert!(sd > 0.0); }
            if (s - 1.0).abs() < 1e-12 { prop_assert!(sd.abs() < 1e-9); }
        }
    }
}
