use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A point of the discretized phase space carrying its own weighted-ℓ² metric
/// `d(x, y) = sqrt(Σ w_i (x_i − y_i)²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVec {
    coords: Vec<f64>,
    weights: Arc<[f64]>,
}

impl StateVec {
    pub fn new(coords: Vec<f64>, weights: Arc<[f64]>) -> Result<Self> {
        if coords.is_empty() {
            return invalid("state dimension must be at least 1");
        }
        if coords.len() != weights.len() {
            return Err(Error::DimensionMismatch { expected: weights.len(), got: coords.len() });
        }
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return invalid("metric weights must be finite and strictly positive");
        }
        Ok(Self { coords, weights })
    }

    /// Unit weights (plain Euclidean metric).
    pub fn euclidean(coords: Vec<f64>) -> Self {
        let w: Arc<[f64]> = vec![1.0; coords.len()].into();
        Self::new(coords, w).expect("nonempty coords")
    }

    /// Same weight for every component, e.g. the spatial step `h` of a grid.
    pub fn uniform(coords: Vec<f64>, weight: f64) -> Result<Self> {
        let w: Arc<[f64]> = vec![weight; coords.len()].into();
        Self::new(coords, w)
    }

    /// New state sharing this state's metric.
    pub fn with_coords(&self, coords: Vec<f64>) -> Self {
        assert_eq!(coords.len(), self.coords.len(), "dimension mismatch");
        Self { coords, weights: Arc::clone(&self.weights) }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn coords_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn weights(&self) -> &Arc<[f64]> {
        &self.weights
    }

    pub fn distance(&self, other: &StateVec) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(self.dist(other))
    }

    /// Distance without the dimension check; panics on mismatch.
    pub fn dist(&self, other: &StateVec) -> f64 {
        weighted_dist_sq(&self.weights, &self.coords, &other.coords).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.coords
            .iter()
            .zip(self.weights.iter())
            .map(|(x, w)| w * x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &StateVec) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `self + s·(other − self)`.
    pub fn lerp(&self, other: &StateVec, s: f64) -> StateVec {
        let c = self.coords.iter().zip(&other.coords).map(|(a, b)| a + s * (b - a)).collect();
        self.with_coords(c)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|x| x.is_finite())
    }
}

pub(crate) fn weighted_dist_sq(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    let mut s = 0.0;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += w[i] * d * d;
    }
    s
}

pub fn distance(x: &StateVec, y: &StateVec) -> Result<f64> {
    x.distance(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_is_zero() {
        let x = StateVec::euclidean(vec![0.3, -1.0]);
        assert_eq!(distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn one_dimensional() {
        let x = StateVec::euclidean(vec![1.0]);
        let y = StateVec::euclidean(vec![-2.0]);
        assert_eq!(distance(&x, &y).unwrap(), 3.0);
    }

    #[test]
    fn half_weights() {
        let x = StateVec::uniform(vec![0.0, 0.0], 0.5).unwrap();
        let y = StateVec::uniform(vec![2.0, 2.0], 0.5).unwrap();
        assert!((distance(&x, &y).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mismatch_errors() {
        let x = StateVec::euclidean(vec![0.0]);
        let y = StateVec::euclidean(vec![0.0, 1.0]);
        assert!(matches!(distance(&x, &y), Err(Error::DimensionMismatch { .. })));
        let w: Arc<[f64]> = vec![1.0, 0.0].into();
        assert!(StateVec::new(vec![1.0, 2.0], w).is_err());
    }

    proptest! {
        #[test]
        fn metric_axioms(
            a in prop::collection::vec(-10.0f64..10.0, 3),
            b in prop::collection::vec(-10.0f64..10.0, 3),
            c in prop::collection::vec(-10.0f64..10.0, 3),
            w in prop::collection::vec(0.01f64..5.0, 3),
        ) {
            let w: Arc<[f64]> = w.into();
            let x = StateVec::new(a, w.clone()).unwrap();
            let y = StateVec::new(b, w.clone()).unwrap();
            let z = StateVec::new(c, w).unwrap();
            let dxy = x.dist(&y);
            prop_assert!(dxy >= 0.0);
            prop_assert!((dxy - y.dist(&x)).abs() < 1e-12);
            prop_assert!(dxy <= x.dist(&z) + z.dist(&y) + 1e-9);
            prop_assert_eq!(dxy == 0.0, x.coords() == y.coords());
        }
    }
}
