//! Sample grids and the interpolated sublevel region `{ψ ≤ 0}` built on them.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::region::{CloudLabel, PointCloudSet, Region};
use crate::state::StateVec;

/// Interpolation penalty per unit distance outside the sampled domain.
const OUTSIDE_SLOPE: f64 = 1e3;

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind")]
pub enum SampleGrid {
    /// Tensor grid on a box, multilinear interpolation.
    Cartesian {
        lo: Vec<f64>,
        hi: Vec<f64>,
        counts: Vec<usize>,
        #[serde(skip)]
        weights: Arc<[f64]>,
    },
    /// Star-shaped grid: a center plus samples along rays. Interpolation uses
    /// the ray of largest cosine and is linear in the radius.
    Rays {
        center: StateVec,
        /// Unit directions in the weighted norm.
        dirs: Vec<Vec<f64>>,
        radii: Vec<f64>,
        #[serde(skip)]
        ray_neighbors: Vec<Vec<usize>>,
    },
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

impl SampleGrid {
    pub fn cartesian(lo: Vec<f64>, hi: Vec<f64>, counts: Vec<usize>, weights: Arc<[f64]>) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d || counts.len() != d || weights.len() != d {
            return invalid("grid bounds, counts and weights must share the dimension");
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(h > l)) || counts.iter().any(|&c| c < 2) {
            return invalid("each axis needs hi > lo and at least 2 samples");
        }
        if counts.iter().try_fold(1usize, |a, &c| a.checked_mul(c)).is_none_or(|n| n > 50_000_000) {
            return invalid("grid too large");
        }
        Ok(SampleGrid::Cartesian { lo, hi, counts, weights })
    }

    /// `2n` signed coordinate directions plus `extra` random ones; radii
    /// `r_max·(l+1)/levels`.
    pub fn rays(center: StateVec, extra: usize, levels: usize, r_max: f64, seed: u64) -> Result<Self> {
        if levels == 0 || !(r_max > 0.0) {
            return invalid("ray grid needs levels > 0 and r_max > 0");
        }
        let n = center.dim();
        let w = center.weights().clone();
        let mut dirs = Vec::with_capacity(2 * n + extra);
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut v = vec![0.0; n];
                v[i] = s / w[i].sqrt();
                dirs.push(v);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while dirs.len() < 2 * n + extra {
            // Gaussian direction via Box-Muller.
            let v: Vec<f64> = (0..n)
                .map(|i| {
                    let (u1, u2): (f64, f64) = (rng.gen_range(1e-12..1.0), rng.gen());
                    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() / w[i].sqrt()
                })
                .collect();
            let norm = weighted_dot(&w, &v, &v).sqrt();
            if norm > 1e-12 {
                dirs.push(v.into_iter().map(|c| c / norm).collect());
            }
        }
        let radii = (1..=levels).map(|l| r_max * l as f64 / levels as f64).collect();
        let k = dirs.len().min(2 * n).min(dirs.len() - 1);
        let ray_neighbors = dirs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut c: Vec<(usize, f64)> = dirs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(j, b)| (j, weighted_dot(&w, a, b)))
                    .collect();
                c.sort_by(|x, y| y.1.total_cmp(&x.1));
                c.into_iter().take(k).map(|(j, _)| j).collect()
            })
            .collect();
        Ok(SampleGrid::Rays { center, dirs, radii, ray_neighbors })
    }

    pub fn len(&self) -> usize {
        match self {
            SampleGrid::Cartesian { counts, .. } => counts.iter().product(),
            SampleGrid::Rays { dirs, radii, .. } => 1 + dirs.len() * radii.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        match self {
            SampleGrid::Cartesian { lo, .. } => lo.len(),
            SampleGrid::Rays { center, .. } => center.dim(),
        }
    }

    fn multi_index(counts: &[usize], mut i: usize) -> Vec<usize> {
        counts
            .iter()
            .map(|&c| {
                let r = i % c;
                i /= c;
                r
            })
            .collect()
    }

    fn flat_index(counts: &[usize], idx: &[usize]) -> usize {
        idx.iter().zip(counts).rev().fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn point(&self, i: usize) -> StateVec {
        match self {
            SampleGrid::Cartesian { lo, hi, counts, weights } => {
                let idx = Self::multi_index(counts, i);
                let c = (0..lo.len())
                    .map(|a| lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / (counts[a] - 1) as f64)
                    .collect();
                StateVec::new(c, weights.clone()).expect("finite grid point")
            }
            SampleGrid::Rays { center, dirs, radii, .. } => {
                if i == 0 {
                    return center.clone();
                }
                let (r, l) = ((i - 1) / radii.len(), (i - 1) % radii.len());
                let c = center.coords().iter().zip(&dirs[r]).map(|(c, d)| c + radii[l] * d).collect();
                center.with_coords(c)
            }
        }
    }

    pub fn points(&self) -> Vec<StateVec> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Grid neighbors and whether the neighborhood is complete (false on the
    /// outer layer of the grid).
    pub fn neighbors(&self, i: usize) -> (Vec<usize>, bool) {
        match self {
            SampleGrid::Cartesian { counts, .. } => {
                let idx = Self::multi_index(counts, i);
                let d = counts.len();
                let mut out = Vec::new();
                let mut complete = true;
                let diag = d <= 3;
                let total = if diag { 3usize.pow(d as u32) } else { 2 * d };
                for m in 0..total {
                    let offs: Vec<i64> = if diag {
                        let mut m = m;
                        (0..d)
                            .map(|_| {
                                let o = (m % 3) as i64 - 1;
                                m /= 3;
                                o
                            })
                            .collect()
                    } else {
                        let mut o = vec![0i64; d];
                        o[m / 2] = if m % 2 == 0 { 1 } else { -1 };
                        o
                    };
                    if offs.iter().all(|&o| o == 0) {
                        continue;
                    }
                    let mut j = Vec::with_capacity(d);
                    let mut ok = true;
                    for a in 0..d {
                        let v = idx[a] as i64 + offs[a];
                        if v < 0 || v >= counts[a] as i64 {
                            ok = false;
                            break;
                        }
                        j.push(v as usize);
                    }
                    if ok {
                        out.push(Self::flat_index(counts, &j));
                    } else {
                        complete = false;
                    }
                }
                (out, complete)
            }
            SampleGrid::Rays { dirs, radii, ray_neighbors, .. } => {
                let l_count = radii.len();
                if i == 0 {
                    return ((0..dirs.len()).map(|r| 1 + r * l_count).collect(), true);
                }
                let (r, l) = ((i - 1) / l_count, (i - 1) % l_count);
                let mut out = vec![if l == 0 { 0 } else { i - 1 }];
                let complete = l + 1 < l_count;
                if complete {
                    out.push(i + 1);
                }
                out.extend(ray_neighbors[r].iter().map(|&q| 1 + q * l_count + l));
                (out, complete)
            }
        }
    }

    /// Edges used for crossings and variation: axis edges (Cartesian) or
    /// radial edges (rays), each listed once.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        match self {
            SampleGrid::Cartesian { counts, .. } => {
                let mut out = Vec::new();
                for i in 0..self.len() {
                    let idx = Self::multi_index(counts, i);
                    let mut stride = 1;
                    for a in 0..counts.len() {
                        if idx[a] + 1 < counts[a] {
                            out.push((i, i + stride));
                        }
                        stride *= counts[a];
                    }
                }
                out
            }
            SampleGrid::Rays { dirs, radii, .. } => {
                let l_count = radii.len();
                let mut out = Vec::new();
                for r in 0..dirs.len() {
                    out.push((0, 1 + r * l_count));
                    for l in 0..l_count - 1 {
                        out.push((1 + r * l_count + l, 2 + r * l_count + l));
                    }
                }
                out
            }
        }
    }

    /// Typical spacing: the largest cell side (Cartesian) or radial step.
    pub fn spacing(&self) -> f64 {
        match self {
            SampleGrid::Cartesian { lo, hi, counts, weights } => (0..lo.len())
                .map(|a| (hi[a] - lo[a]) / (counts[a] - 1) as f64 * weights[a].sqrt())
                .fold(0.0, f64::max),
            SampleGrid::Rays { radii, .. } => radii[0],
        }
    }

    /// Index of the grid point nearest to `x` (in the grid's own topology).
    pub fn nearest_index(&self, x: &StateVec) -> usize {
        match self {
            SampleGrid::Cartesian { lo, hi, counts, .. } => {
                let idx: Vec<usize> = (0..lo.len())
                    .map(|a| {
                        let s = (x.coords()[a] - lo[a]) / (hi[a] - lo[a]) * (counts[a] - 1) as f64;
                        (s.round().max(0.0) as usize).min(counts[a] - 1)
                    })
                    .collect();
                Self::flat_index(counts, &idx)
            }
            SampleGrid::Rays { center, dirs, radii, .. } => {
                let (r, rho) = Self::polar(center, dirs, x);
                let step = radii[0];
                let l = (rho / step).round() as usize;
                if l == 0 {
                    0
                } else {
                    1 + r * radii.len() + (l - 1).min(radii.len() - 1)
                }
            }
        }
    }

    fn polar(center: &StateVec, dirs: &[Vec<f64>], x: &StateVec) -> (usize, f64) {
        let w = center.weights();
        let v: Vec<f64> = x.coords().iter().zip(center.coords()).map(|(a, b)| a - b).collect();
        let rho = weighted_dot(w, &v, &v).sqrt();
        let best = dirs
            .iter()
            .enumerate()
            .map(|(i, d)| (i, weighted_dot(w, &v, d)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |b| b.0);
        (best, rho)
    }

    /// Interpolate nodal `values` at `x`; outside the sampled domain the
    /// value grows linearly with the distance.
    pub fn interpolate(&self, values: &[f64], x: &StateVec) -> f64 {
        match self {
            SampleGrid::Cartesian { lo, hi, counts, weights } => {
                let d = lo.len();
                let mut base = vec![0usize; d];
                let mut frac = vec![0.0; d];
                let mut outside = 0.0;
                for a in 0..d {
                    let c = x.coords()[a];
                    let cl = c.clamp(lo[a], hi[a]);
                    outside += weights[a] * (c - cl).powi(2);
                    let s = (cl - lo[a]) / (hi[a] - lo[a]) * (counts[a] - 1) as f64;
                    let b = (s.floor() as usize).min(counts[a] - 2);
                    base[a] = b;
                    frac[a] = s - b as f64;
                }
                let mut acc = 0.0;
                let mut corner = vec![0usize; d];
                for m in 0..(1usize << d) {
                    let mut wgt = 1.0;
                    for a in 0..d {
                        let bit = (m >> a) & 1;
                        corner[a] = base[a] + bit;
                        wgt *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                    }
                    if wgt != 0.0 {
                        acc += wgt * values[Self::flat_index(counts, &corner)];
                    }
                }
                acc + OUTSIDE_SLOPE * outside.sqrt()
            }
            SampleGrid::Rays { center, dirs, radii, .. } => {
                let (r, rho) = Self::polar(center, dirs, x);
                let l_count = radii.len();
                let at = |l: usize| values[1 + r * l_count + l];
                if rho <= radii[0] {
                    let s = rho / radii[0];
                    return (1.0 - s) * values[0] + s * at(0);
                }
                let r_max = radii[l_count - 1];
                if rho >= r_max {
                    return at(l_count - 1) + OUTSIDE_SLOPE * (rho - r_max);
                }
                let l = radii.partition_point(|&q| q <= rho).max(1) - 1;
                let s = (rho - radii[l]) / (radii[l + 1] - radii[l]);
                (1.0 - s) * at(l) + s * at(l + 1)
            }
        }
    }
}

/// `{x : ψ(x) ≤ 0}` for a nodal level function `ψ` interpolated on a grid.
/// The distance to the complement is the distance to the cloud of edge
/// crossings of `ψ = 0`.
#[derive(Debug, Clone)]
pub struct SublevelRegion {
    grid: Arc<SampleGrid>,
    psi: Vec<f64>,
    crossings: PointCloudSet,
    tol: f64,
}

impl SublevelRegion {
    pub fn new(grid: Arc<SampleGrid>, psi: Vec<f64>) -> Result<Self> {
        if psi.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: psi.len() });
        }
        if psi.iter().any(|v| v.is_nan()) {
            return invalid("level function contains NaN");
        }
        let mut pts = Vec::new();
        for (i, j) in grid.edges() {
            let (a, b) = (psi[i], psi[j]);
            if (a <= 0.0) != (b <= 0.0) {
                let s = if a.is_finite() && b.is_finite() { a / (a - b) } else { 0.5 };
                pts.push(grid.point(i).lerp(&grid.point(j), s.clamp(0.0, 1.0)));
            }
        }
        if pts.is_empty() {
            return Err(Error::NeighborhoodTooTight(
                "the sublevel set has no boundary crossing on the grid".into(),
            ));
        }
        let crossings = PointCloudSet::new(CloudLabel::APlus, pts)?;
        Ok(Self { grid, psi, crossings, tol: 1e-12 })
    }

    pub fn grid(&self) -> &Arc<SampleGrid> {
        &self.grid
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    pub fn level(&self, x: &StateVec) -> f64 {
        self.grid.interpolate(&self.psi, x)
    }

    pub fn crossings(&self) -> &PointCloudSet {
        &self.crossings
    }
}

impl Region for SublevelRegion {
    fn signed_distance(&self, x: &StateVec) -> f64 {
        self.level(x)
    }

    fn membership_tol(&self) -> f64 {
        self.tol
    }

    fn dist_to_complement(&self, x: &StateVec) -> f64 {
        if self.level(x) >= 0.0 {
            0.0
        } else {
            self.crossings.distance_to(x).unwrap_or(0.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> SampleGrid {
        SampleGrid::cartesian(vec![-1.0, -1.0], vec![1.0, 1.0], vec![n, n], Arc::from(vec![1.0, 1.0])).unwrap()
    }

    #[test]
    fn cartesian_indexing_roundtrip() {
        let g = unit_grid(5);
        assert_eq!(g.len(), 25);
        for i in 0..25 {
            assert_eq!(g.nearest_index(&g.point(i)), i);
        }
        let (nb, complete) = g.neighbors(12);
        assert_eq!(nb.len(), 8);
        assert!(complete);
        let (nb, complete) = g.neighbors(0);
        assert_eq!(nb.len(), 3);
        assert!(!complete);
        assert_eq!(g.edges().len(), 2 * 5 * 4);
    }

    proptest! {
        #[test]
        fn bilinear_reproduces_affine(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -1.0f64..1.0,
                                      x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let g = unit_grid(7);
            let vals: Vec<f64> = g.points().iter().map(|p| a * p.coords()[0] + b * p.coords()[1] + c).collect();
            let v = g.interpolate(&vals, &StateVec::euclidean(vec![x, y]));
            prop_assert!((v - (a * x + b * y + c)).abs() < 1e-10);
        }
    }

    #[test]
    fn disk_sublevel_region() {
        let g = Arc::new(unit_grid(81));
        let psi = g.points().iter().map(|p| p.norm() - 0.5).collect();
        let r = SublevelRegion::new(g, psi).unwrap();
        let p = |x: f64, y: f64| StateVec::euclidean(vec![x, y]);
        assert!(r.interior(&p(0.1, 0.2)));
        assert!(!r.contains(&p(0.5, 0.5)));
        assert!((r.dist_to_complement(&p(0.0, 0.0)) - 0.5).abs() < 0.01);
        assert!((r.dist_to_complement(&p(0.3, 0.0)) - 0.2).abs() < 0.01);
        assert_eq!(r.dist_to_complement(&p(0.9, 0.0)), 0.0);
        assert!(r.level(&p(3.0, 0.0)) > 1e3);
    }

    #[test]
    fn ray_grid_ball() {
        let c = StateVec::uniform(vec![0.0; 5], 0.5).unwrap();
        let g = Arc::new(SampleGrid::rays(c.clone(), 40, 10, 1.0, 3).unwrap());
        assert_eq!(g.len(), 1 + 50 * 10);
        for i in 1..g.len() {
            let p = g.point(i);
            assert_eq!(g.nearest_index(&p), i);
        }
        let psi = g.points().iter().map(|p| p.dist(&c) - 0.55).collect();
        let r = SublevelRegion::new(g.clone(), psi).unwrap();
        assert!(r.interior(&c));
        assert!((r.dist_to_complement(&c) - 0.55).abs() < 1e-9);
        let (nb, complete) = g.neighbors(1 + 10 * 3 + 9);
        assert!(!complete && nb.len() > 2);
    }

    #[test]
    fn empty_boundary_is_rejected() {
        let g = Arc::new(unit_grid(5));
        assert!(SublevelRegion::new(g, vec![-1.0; 25]).is_err());
    }
}
