use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::state::StateVec;

/// A sampled solution on the uniform grid `t_j = t0 + j·dt`, together with the
/// selection values `h(t_j)` that produced each step (empty when the model is
/// single-valued).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    t0: f64,
    dt: f64,
    states: Vec<StateVec>,
    selection: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(t0: f64, dt: f64, states: Vec<StateVec>, selection: Vec<Vec<f64>>) -> Result<Self> {
        if states.is_empty() {
            return invalid("trajectory needs at least one state");
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return invalid("trajectory time step must be positive");
        }
        if !selection.is_empty() && selection.len() + 1 != states.len() {
            return invalid("selection record must have one entry per step");
        }
        let n = states[0].dim();
        if states.iter().any(|s| s.dim() != n) {
            return invalid("trajectory states must share one dimension");
        }
        Ok(Self { t0, dt, states, selection })
    }

    /// Constant trajectory sitting at `x` for `steps` steps.
    pub fn constant(x: StateVec, dt: f64, steps: usize) -> Self {
        Self { t0: 0.0, dt, states: vec![x; steps + 1], selection: Vec::new() }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.steps())
    }

    /// Length of the covered time window.
    pub fn duration(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn states(&self) -> &[StateVec] {
        &self.states
    }

    pub fn state(&self, j: usize) -> &StateVec {
        &self.states[j]
    }

    pub fn first(&self) -> &StateVec {
        &self.states[0]
    }

    pub fn last(&self) -> &StateVec {
        &self.states[self.states.len() - 1]
    }

    pub fn selection(&self) -> &[Vec<f64>] {
        &self.selection
    }

    /// Linear interpolant at elapsed time `s` (relative to `t0`), clamped to the window.
    pub fn at_elapsed(&self, s: f64) -> StateVec {
        let pos = (s / self.dt).clamp(0.0, self.steps() as f64);
        let j = (pos.floor() as usize).min(self.steps().saturating_sub(1));
        if self.steps() == 0 {
            return self.states[0].clone();
        }
        self.states[j].lerp(&self.states[j + 1], pos - j as f64)
    }

    /// Tail starting at sample `k`, re-based so that it starts at time 0.
    pub fn shifted(&self, k: usize) -> Trajectory {
        let k = k.min(self.steps());
        let selection = if self.selection.is_empty() { Vec::new() } else { self.selection[k..].to_vec() };
        Trajectory { t0: 0.0, dt: self.dt, states: self.states[k..].to_vec(), selection }
    }

    /// Prefix covering samples `0..=k`.
    pub fn truncated(&self, k: usize) -> Trajectory {
        let k = k.min(self.steps());
        let selection = if self.selection.is_empty() { Vec::new() } else { self.selection[..k].to_vec() };
        Trajectory { t0: self.t0, dt: self.dt, states: self.states[..=k].to_vec(), selection }
    }

    /// `self` on samples `0..=k`, then `next` (which must start at `self.state(k)`).
    pub fn concatenate(&self, k: usize, next: &Trajectory) -> Result<Trajectory> {
        if (next.dt - self.dt).abs() > 1e-12 * self.dt {
            return invalid("concatenated trajectories must share the time step");
        }
        if k > self.steps() {
            return invalid("concatenation index beyond trajectory end");
        }
        let mut states = self.states[..=k].to_vec();
        states.extend_from_slice(&next.states[1..]);
        let selection = match (self.selection.is_empty(), next.selection.is_empty()) {
            (true, true) => Vec::new(),
            (false, false) => {
                let mut s = self.selection[..k].to_vec();
                s.extend_from_slice(&next.selection);
                s
            }
            _ => return invalid("cannot concatenate trajectories with and without selection records"),
        };
        Trajectory::new(self.t0, self.dt, states, selection)
    }

    /// `max_j d(self_j, other_j)` over the common samples `j < limit`.
    pub fn sup_distance(&self, other: &Trajectory, limit: usize) -> f64 {
        let m = self.len().min(other.len()).min(limit);
        (0..m).map(|j| self.states[j].dist(&other.states[j])).fold(0.0, f64::max)
    }

    /// CSV with columns `t, x_1..x_n`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.dim();
        let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=n).map(|i| format!("x_{i}"))).collect();
        writeln!(w, "{}", header.join(","))?;
        for (j, s) in self.states.iter().enumerate() {
            let mut row = vec![fmt_f64(self.time(j))];
            row.extend(s.coords().iter().map(|v| fmt_f64(*v)));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Finite sample of the solution set through one origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bundle {
    pub origin: StateVec,
    pub members: Vec<Trajectory>,
    pub seed: u64,
}

impl Bundle {
    pub fn new(origin: StateVec, members: Vec<Trajectory>, seed: u64) -> Result<Self> {
        if members.is_empty() {
            return invalid("bundle must contain at least one member");
        }
        Ok(Self { origin, members, seed })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Values `{φ(t_j) : φ ∈ bundle}` at sample `j`.
    pub fn section(&self, j: usize) -> Vec<&StateVec> {
        self.members.iter().filter(|m| j < m.len()).map(|m| m.state(j)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Trajectory {
        let states = (0..=n).map(|j| StateVec::euclidean(vec![j as f64])).collect();
        Trajectory::new(0.0, 0.5, states, Vec::new()).unwrap()
    }

    #[test]
    fn grid_and_interpolation() {
        let t = line(4);
        assert_eq!(t.end_time(), 2.0);
        assert!((t.at_elapsed(0.75).coords()[0] - 1.5).abs() < 1e-15);
        assert_eq!(t.at_elapsed(10.0).coords()[0], 4.0);
    }

    #[test]
    fn shift_and_concat() {
        let t = line(4);
        let s = t.shifted(2);
        assert_eq!(s.first().coords()[0], 2.0);
        assert_eq!(s.t0(), 0.0);
        let c = t.concatenate(2, &s).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.state(4).coords()[0], 4.0);
    }

    #[test]
    fn rejects_bad_selection_length() {
        let states = vec![StateVec::euclidean(vec![0.0]); 3];
        assert!(Trajectory::new(0.0, 0.1, states, vec![vec![1.0]]).is_err());
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        line(1).write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,x_1\n"));
        assert_eq!(s.lines().count(), 3);
    }
}
