//! Relaxation bounds: distance between an approximate trajectory `z` (driven
//! by an arbitrary `g`) and a true solution `u` of the inclusion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_common, integrate, InclusionModel, Interval, SelectionStrategy, Selector};
use crate::error::{invalid, Error, Result};
use crate::semiflow::grid_steps;
use crate::state::StateVec;
use crate::trajectory::Trajectory;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FilippovCertificate {
    pub times: Vec<f64>,
    /// `ρ(t_j) = 2·dist(g_j, F(z_j))`, held constant over the last step.
    pub rho: Vec<f64>,
    pub xi: Vec<f64>,
    pub observed_gap: Vec<f64>,
    pub lipschitz_c: f64,
    pub slack: f64,
    pub valid: bool,
    /// Largest `observed_gap − xi` (negative when the bound holds strictly).
    pub worst_excess: f64,
}

fn weighted_norm(w: &[f64], v: impl Iterator<Item = f64>) -> f64 {
    v.zip(w).map(|(x, w)| w * x * x).sum::<f64>().sqrt()
}

/// `ξ_j = ‖u₀ − z₀‖e^{2Ct_j} + ∫₀^{t_j} e^{2C(t_j−s)} ρ(s) ds`, trapezoid rule.
pub fn xi_trapezoid(gap0: f64, rho: &[f64], c: f64, dt: f64) -> Vec<f64> {
    let q = (2.0 * c * dt).exp();
    let mut xi = Vec::with_capacity(rho.len());
    let mut integral = 0.0;
    let mut growth = 1.0;
    for j in 0..rho.len() {
        if j > 0 {
            integral = q * integral + 0.5 * dt * (q * rho[j - 1] + rho[j]);
            growth *= q;
        }
        xi.push(gap0 * growth + integral);
    }
    xi
}

pub fn filippov_certificate(model: &dyn InclusionModel, u: &Trajectory, z: &Trajectory) -> Result<FilippovCertificate> {
    let c = model.lipschitz_c();
    if !(c > 0.0) {
        return Err(Error::Precondition("certificate needs a positive Lipschitz constant".into()));
    }
    if u.len() != z.len() || (u.dt() - z.dt()).abs() > 1e-15 || (u.t0() - z.t0()).abs() > 1e-15 {
        return invalid("u and z must share one time grid");
    }
    if z.steps() > 0 && z.selection().len() != z.steps() {
        return invalid("z needs a selection record");
    }
    let n = model.dim();
    let w = model.weights();
    let dt = z.dt();
    let mut sets = vec![Interval::point(0.0); n];
    let mut rho = Vec::with_capacity(z.len());
    for j in 0..z.steps() {
        model.selection_set(z.state(j).coords(), &mut sets);
        let g = &z.selection()[j];
        rho.push(2.0 * weighted_norm(&w, sets.iter().zip(g).map(|(s, g)| s.dist(*g))));
    }
    rho.push(*rho.last().unwrap_or(&0.0));
    let gap: Vec<f64> = (0..u.len()).map(|j| u.state(j).dist(z.state(j))).collect();
    let xi = xi_trapezoid(gap[0], &rho, c, dt);
    let mut rate: f64 = 0.0;
    for t in [u, z] {
        for j in 0..t.steps() {
            let a = t.state(j).coords();
            let b = t.state(j + 1).coords();
            for i in 0..n {
                rate = rate.max(((b[i] - a[i]) / dt).abs());
            }
        }
    }
    let slack = 10.0 * dt * rate;
    let worst_excess = gap.iter().zip(&xi).map(|(g, x)| g - x).fold(f64::NEG_INFINITY, f64::max);
    Ok(FilippovCertificate {
        times: (0..u.len()).map(|j| u.time(j)).collect(),
        rho,
        xi,
        observed_gap: gap,
        lipschitz_c: c,
        slack,
        valid: worst_excess <= slack,
        worst_excess,
    })
}

/// Solution from `u0` whose selection is the projection of `z`'s driving
/// term onto `F(u_j)` (the construction behind the relaxation bound).
pub fn filippov_track(model: &dyn InclusionModel, z: &Trajectory, u0: &StateVec) -> Result<Trajectory> {
    let dt = z.dt();
    check_common(model, u0, dt)?;
    if z.steps() > 0 && z.selection().len() != z.steps() {
        return invalid("z needs a selection record");
    }
    let n = model.dim();
    let solver = model.linear_part().implicit(dt, n)?;
    let mut sets = vec![Interval::point(0.0); n];
    let mut u = u0.coords().to_vec();
    let mut states = vec![u0.clone()];
    let mut record = Vec::with_capacity(z.steps());
    for g in z.selection() {
        model.selection_set(&u, &mut sets);
        let h: Vec<f64> = sets.iter().zip(g).map(|(s, g)| s.clamp(*g)).collect();
        for i in 0..n {
            u[i] += dt * h[i];
        }
        solver.solve(&mut u);
        states.push(u0.with_coords(u.clone()));
        record.push(h);
    }
    Trajectory::new(z.t0(), dt, states, record)
}

/// IMEX trajectory driven by `g_j = h_j + η_j`, where `h_j` follows `strategy`
/// and `η_j` is piecewise-constant noise in `[−amplitude, amplitude]` redrawn
/// every `dwell`; `g_j` may leave `F(z_j)`.
pub fn drifted_trajectory(
    model: &dyn InclusionModel,
    z0: &StateVec,
    strategy: SelectionStrategy,
    amplitude: f64,
    dwell: f64,
    t_end: f64,
    dt: f64,
    seed: u64,
) -> Result<Trajectory> {
    if amplitude == 0.0 {
        return integrate(model, z0, strategy, t_end, dt).map(|t| with_record(model, t));
    }
    if !(dwell > 0.0) {
        return invalid("dwell must be positive");
    }
    let steps = grid_steps(t_end, dt)?;
    check_common(model, z0, dt)?;
    let n = model.dim();
    let solver = model.linear_part().implicit(dt, n)?;
    let mut sel = Selector::new(strategy, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = vec![0.0; n];
    let mut next = 0.0;
    let mut sets = vec![Interval::point(0.0); n];
    let mut h = vec![0.0; n];
    let mut u = z0.coords().to_vec();
    let mut states = vec![z0.clone()];
    let mut record = Vec::with_capacity(steps);
    for j in 0..steps {
        let t = j as f64 * dt;
        if t >= next - 1e-12 {
            for e in noise.iter_mut() {
                *e = rng.gen_range(-amplitude..=amplitude);
            }
            next += dwell;
        }
        model.selection_set(&u, &mut sets);
        sel.emit(t, &sets, &mut h);
        let g: Vec<f64> = h.iter().zip(&noise).map(|(a, b)| a + b).collect();
        for i in 0..n {
            u[i] += dt * g[i];
        }
        solver.solve(&mut u);
        states.push(z0.with_coords(u.clone()));
        record.push(g);
    }
    Trajectory::new(0.0, dt, states, record)
}

/// Ensures a selection record exists (single-valued models omit it).
fn with_record(model: &dyn InclusionModel, t: Trajectory) -> Trajectory {
    if !t.selection().is_empty() || t.steps() == 0 {
        return t;
    }
    let rec = (0..t.steps()).map(|j| model.selection_box(t.state(j).coords()).iter().map(|s| s.lo).collect()).collect();
    Trajectory::new(t.t0(), t.dt(), t.states().to_vec(), rec).expect("same shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xi_without_forcing_is_pure_exponential() {
        let xi = xi_trapezoid(0.1, &[0.0; 11], 0.5, 0.1);
        for (j, x) in xi.iter().enumerate() {
            let t = j as f64 * 0.1;
            assert!((x - 0.1 * (2.0 * 0.5 * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn xi_matches_direct_trapezoid_sum() {
        let rho: Vec<f64> = (0..21).map(|j| (j as f64 * 0.3).sin().abs()).collect();
        let (c, dt) = (0.7, 0.05);
        let xi = xi_trapezoid(0.02, &rho, c, dt);
        for (j, &x) in xi.iter().enumerate() {
            let t = j as f64 * dt;
            let mut integral = 0.0;
            for i in 0..j {
                let (s0, s1) = (i as f64 * dt, (i + 1) as f64 * dt);
                integral += 0.5 * dt * ((2.0 * c * (t - s0)).exp() * rho[i] + (2.0 * c * (t - s1)).exp() * rho[i + 1]);
            }
            let direct = 0.02 * (2.0 * c * t).exp() + integral;
            assert!((x - direct).abs() < 1e-12 * direct.max(1.0), "j={j}");
        }
    }
}
