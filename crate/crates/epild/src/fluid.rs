//! Fluid limit: the deterministic ODE y' = b(y) that the scaled process
//! tracks for large populations, and the sup-distance between a simulated
//! path and the ODE solution that quantifies the law of large numbers.

use crate::error::{Error, Result};
use crate::model::JumpModel;
use crate::simulate::Trajectory;

/// Band inside which states that drift out of the domain are projected back;
/// larger excursions abort the integration.
const PROJECTION_BAND: f64 = 1e-9;

/// Solution of the fluid ODE on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl OdePath {
    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("ODE path is never empty")
    }

    /// Linear interpolation between grid points; clamped at the ends.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= self.horizon() {
            return self.final_state().to_vec();
        }
        let idx = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => return self.states[i].clone(),
            Err(i) => i,
        };
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        self.states[idx - 1]
            .iter()
            .zip(&self.states[idx])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// CSV export: header `t,y_1..y_d`, one row per grid point.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        let d = self.states.first().map_or(0, |s| s.len());
        write!(w, "t")?;
        for i in 1..=d {
            write!(w, ",y_{i}")?;
        }
        writeln!(w)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in s {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Integrate y' = b(y) from `x0` over [0, T] by classical fourth-order
/// Runge–Kutta with fixed step.
///
/// The grid is uniform with step T/round(T/dt), i.e. exactly `dt` whenever
/// `dt` divides T. States that leave the domain by more than a projection
/// band abort with an escape error: either the step is too large or the
/// model's drift points out of its own domain.
pub fn integrate_ode(model: &JumpModel, x0: &[f64], t_end: f64, dt: f64) -> Result<OdePath> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Precondition(format!(
            "horizon and step must be positive, got T={t_end}, dt={dt}"
        )));
    }
    if !model.contains(x0) {
        return Err(Error::OutsideDomain(format!("{x0:?}")));
    }
    let n_steps = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / n_steps as f64;
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut y = x0.to_vec();
    times.push(0.0);
    states.push(y.clone());

    let d = model.dim();
    let mut stage = vec![0.0; d];
    for step in 1..=n_steps {
        let k1 = model.drift_raw(&y);
        for i in 0..d {
            stage[i] = y[i] + 0.5 * h * k1[i];
        }
        let k2 = model.drift_raw(&stage);
        for i in 0..d {
            stage[i] = y[i] + 0.5 * h * k2[i];
        }
        let k3 = model.drift_raw(&stage);
        for i in 0..d {
            stage[i] = y[i] + h * k3[i];
        }
        let k4 = model.drift_raw(&stage);
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !model.contains(&y) {
            match model.project_within(&y, PROJECTION_BAND) {
                Some(z) => y = z,
                None => {
                    return Err(Error::IntegrationEscape {
                        t: step as f64 * h,
                        detail: format!("state {y:?}"),
                    })
                }
            }
        }
        times.push(step as f64 * h);
        states.push(y.clone());
    }
    Ok(OdePath { times, states })
}

/// Supremum over time of the Euclidean distance between a trajectory
/// (evaluated right-continuously) and the ODE path (linearly interpolated).
///
/// Requires matching initial states and horizons.
pub fn lln_distance(traj: &Trajectory, model: &JumpModel, ode: &OdePath) -> Result<f64> {
    if (traj.end_time - ode.horizon()).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "horizons differ: trajectory {} vs ODE {}",
            traj.end_time,
            ode.horizon()
        )));
    }
    let start_gap: f64 = traj
        .initial_state
        .iter()
        .zip(&ode.states[0])
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if start_gap > 1e-9 {
        return Err(Error::Precondition(format!(
            "initial states differ by {start_gap}"
        )));
    }

    // Between consecutive merged grid times the trajectory is constant and
    // the ODE linear, so the distance is maximal at an endpoint. Evaluate
    // each constant piece of Z against the ODE at both ends of the piece.
    let mut sup: f64 = 0.0;
    let mut piece_start = 0.0;
    let mut walker = traj.walk(model);
    let mut current = walker.next().expect("walk yields the initial state").1;

    let eval_piece = |z: &[f64], t0: f64, t1: f64, sup: &mut f64| {
        for t in [t0, t1] {
            let y = ode.interpolate(t);
            let dist: f64 = z
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > *sup {
                *sup = dist;
            }
        }
        // Interior ODE grid points inside the piece are also linear-segment
        // endpoints of the interpolation.
        let lo = ode.times.partition_point(|&u| u <= t0);
        let hi = ode.times.partition_point(|&u| u < t1);
        for &u in &ode.times[lo..hi] {
            let y = ode.interpolate(u);
            let dist: f64 = z
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist > *sup {
                *sup = dist;
            }
        }
    };

    for (tau, state) in walker {
        eval_piece(&current, piece_start, tau, &mut sup);
        current = state;
        piece_start = tau;
    }
    eval_piece(&current, piece_start, traj.end_time, &mut sup);
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{endemic_equilibrium, grid_snap, linear_birth_1d, sirs_model, SirsParams};
    use crate::simulate::{simulate_exact, SimConfig};

    #[test]
    fn equilibrium_start_stays_put() {
        let p = SirsParams::new(2.0, 1.0, 1.0).unwrap();
        let m = sirs_model(&p).unwrap();
        let xs = endemic_equilibrium(&p).unwrap();
        let path = integrate_ode(&m, &xs, 10.0, 1e-2).unwrap();
        for s in &path.states {
            let gap: f64 = s
                .iter()
                .zip(&xs)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(gap < 1e-12, "drifted to {s:?}");
        }
    }

    #[test]
    fn interior_start_converges_to_endemic_equilibrium() {
        let p = SirsParams::new(2.0, 1.0, 1.0).unwrap();
        let m = sirs_model(&p).unwrap();
        let path = integrate_ode(&m, &[0.6, 0.1], 50.0, 1e-3).unwrap();
        let xs = endemic_equilibrium(&p).unwrap();
        let gap: f64 = path
            .final_state()
            .iter()
            .zip(&xs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(gap < 1e-6, "end-state gap {gap}");
    }

    #[test]
    fn linear_birth_solves_exponential() {
        let m = linear_birth_1d();
        let x0 = 0.7;
        let path = integrate_ode(&m, &[x0], 1.0, 1e-3).unwrap();
        let exact = x0 * 1.0f64.exp();
        assert!((path.final_state()[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn rk4_halving_shows_fourth_order() {
        // Richardson ratio of endpoint errors under step halving is ~16 for
        // a smooth field.
        let m = linear_birth_1d();
        let x0 = 0.5;
        let exact = x0 * 2.0f64.exp();
        let coarse = (integrate_ode(&m, &[x0], 2.0, 0.02).unwrap().final_state()[0] - exact).abs();
        let fine = (integrate_ode(&m, &[x0], 2.0, 0.01).unwrap().final_state()[0] - exact).abs();
        let ratio = coarse / fine;
        assert!((12.0..=20.0).contains(&ratio), "ratio = {ratio}");
    }

    #[test]
    fn escaping_field_aborts_integration() {
        // A drift that points out of the declared domain escapes the
        // projection band and must abort.
        let rates = std::sync::Arc::new(|_: &[f64], out: &mut [f64]| out[0] = 1.0);
        let domain = std::sync::Arc::new(|x: &[f64]| x[0] >= -1e-12);
        let m = crate::model::JumpModel::new("leaver", vec![vec![-1]], rates, domain, 1.0, 0.0)
            .unwrap()
            .with_domain_desc(vec![crate::model::HalfSpace {
                normal: vec![-1.0],
                offset: 0.0,
            }]);
        let err = integrate_ode(&m, &[0.5], 2.0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::IntegrationEscape { .. }), "got {err:?}");
    }

    #[test]
    fn zero_jump_zero_drift_distance_is_zero() {
        let p = SirsParams::new(2.0, 1.0, 1.0).unwrap();
        let m = sirs_model(&p).unwrap();
        let traj = Trajectory {
            population: 4,
            initial_state: vec![0.25, 0.25],
            jump_times: vec![],
            reactions: vec![],
            end_time: 1.0,
            censored: false,
        };
        let ode = integrate_ode(&m, &[0.25, 0.25], 1.0, 1e-2).unwrap();
        let dist = lln_distance(&traj, &m, &ode).unwrap();
        assert!(dist < 1e-12);
    }

    #[test]
    fn poisson_distance_matches_compensated_sup() {
        // Constant rate 1 from 0: the distance is sup |P(Nt)/N - t| computed
        // directly from the jump times.
        let m = crate::model::constant_rate_1d(1.0).unwrap();
        let n = 40u64;
        let cfg = SimConfig { t_max: 3.0, seed: 19, ..Default::default() };
        let traj = simulate_exact(&m, n, &[0.0], &cfg).unwrap();
        let ode = integrate_ode(&m, &[0.0], 3.0, 1e-3).unwrap();
        let dist = lln_distance(&traj, &m, &ode).unwrap();
        let mut expected: f64 = 0.0;
        for (i, &tau) in traj.jump_times.iter().enumerate() {
            let before = i as f64 / n as f64;
            let after = (i + 1) as f64 / n as f64;
            expected = expected.max((before - tau).abs()).max((after - tau).abs());
        }
        expected = expected
            .max((traj.n_jumps() as f64 / n as f64 - traj.end_time).abs());
        assert!(
            (dist - expected).abs() < 2e-3,
            "merged-grid sup {dist} vs exact {expected}"
        );
    }

    #[test]
    fn mismatched_horizon_is_error() {
        let m = linear_birth_1d();
        let traj = Trajectory {
            population: 10,
            initial_state: vec![0.5],
            jump_times: vec![],
            reactions: vec![],
            end_time: 2.0,
            censored: false,
        };
        let ode = integrate_ode(&m, &[0.5], 1.0, 1e-2).unwrap();
        assert!(lln_distance(&traj, &m, &ode).is_err());
    }

    #[test]
    fn csv_export_schema() {
        let p = SirsParams::new(2.0, 1.0, 1.0).unwrap();
        let m = sirs_model(&p).unwrap();
        let path = integrate_ode(&m, &[0.3, 0.2], 1.0, 0.25).unwrap();
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,y_1,y_2");
        assert_eq!(lines.count(), 5);
    }

    #[test]
    fn sup_distance_shrinks_with_population() {
        let p = SirsParams::new(2.0, 1.0, 1.0).unwrap();
        let m = sirs_model(&p).unwrap();
        let xs = endemic_equilibrium(&p).unwrap();
        let mut prev = f64::INFINITY;
        for n in [50u64, 800] {
            let x0 = grid_snap(&m, &xs, n).unwrap();
            let ode = integrate_ode(&m, &x0, 3.0, 1e-2).unwrap();
            let cfg = SimConfig { t_max: 3.0, seed: 43, replicas: 60, ..Default::default() };
            let dists: Vec<f64> = crate::simulate::simulate_ensemble(&m, n, &x0, &cfg)
                .unwrap()
                .iter()
                .map(|t| lln_distance(t, &m, &ode).unwrap())
                .collect();
            let mean = crate::stats::mean(&dists);
            assert!(mean < prev, "mean distance did not shrink: {mean} vs {prev}");
            prev = mean;
        }
    }
}
