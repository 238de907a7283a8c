//! Exact stochastic simulation and change of measure.
//!
//! Simulation uses the Gillespie direct method, which samples the jump chain
//! of the model exactly: waiting times are exponential with the total rate
//! N·Σ_j β_j(x), and the fired reaction is drawn proportionally to its rate.
//! States are tracked as integer count vectors (N times the scaled state),
//! so grid membership is exact and never drifts.
//!
//! The log likelihood ratio between two rate families evaluated on a
//! trajectory with jump times τ and fired reactions j(τ) is
//!
//! ```text
//! log ξ_T = Σ_τ [log β̃_{j(τ)}(Z(τ−)) − log β_{j(τ)}(Z(τ−))]
//!           − N Σ_j ∫_0^T (β̃_j(Z(t)) − β_j(Z(t))) dt,
//! ```
//!
//! with the integral evaluated segment-by-segment over the piecewise-constant
//! state, so there is no quadrature error. ξ_T converts expectations under
//! the tilted law into expectations under the nominal one, which is the basis
//! of the importance sampling estimator: sampling under rates β̃ and weighting
//! by ξ_T⁻¹ gives unbiased estimates under rates β for events that are
//! possible under both.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::JumpModel;
use crate::rng::ReplicaRng;

/// Simulation controls. `replicas` is consumed by the ensemble drivers;
/// single-trajectory calls use the stream of replica 0.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    /// Time horizon.
    pub t_max: f64,
    /// Hard cap on the number of jumps per replica; hitting it flags the
    /// trajectory as censored rather than silently truncating.
    pub max_jumps: u64,
    /// Master seed; per-replica streams are derived from it.
    pub seed: u64,
    /// Number of replicas for ensemble runs.
    pub replicas: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { t_max: 1.0, max_jumps: 10_000_000, seed: 0, replicas: 1 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::InvalidParameter(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.max_jumps == 0 {
            return Err(Error::InvalidParameter("max_jumps must be at least 1".into()));
        }
        if self.replicas == 0 {
            return Err(Error::InvalidParameter("replicas must be at least 1".into()));
        }
        Ok(())
    }
}

/// One simulated path: jump times, fired reactions (0-based indices into the
/// model's reaction list) and enough data to reconstruct every visited state
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Population size N.
    pub population: u64,
    /// Initial scaled state, exactly on the grid.
    pub initial_state: Vec<f64>,
    /// Strictly increasing jump times in (0, end_time].
    pub jump_times: Vec<f64>,
    /// Fired reaction per jump, 0-based.
    pub reactions: Vec<u32>,
    /// Horizon actually covered.
    pub end_time: f64,
    /// True when the max-jumps cap stopped the simulation.
    pub censored: bool,
}

impl Trajectory {
    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    /// Integer counts N·x0 of the initial state.
    fn initial_counts(&self) -> Vec<i64> {
        self.initial_state
            .iter()
            .map(|&x| (x * self.population as f64).round() as i64)
            .collect()
    }

    /// Final state after the last jump.
    pub fn final_state(&self, model: &JumpModel) -> Vec<f64> {
        let mut counts = self.initial_counts();
        for &r in &self.reactions {
            for (c, h) in counts.iter_mut().zip(&model.jump_dirs_int()[r as usize]) {
                *c += h;
            }
        }
        counts.iter().map(|&c| c as f64 / self.population as f64).collect()
    }

    /// State at time `t`, right-continuous (the post-jump state at jump
    /// times).
    pub fn state_at(&self, model: &JumpModel, t: f64) -> Vec<f64> {
        let mut counts = self.initial_counts();
        for (tau, &r) in self.jump_times.iter().zip(&self.reactions) {
            if *tau > t {
                break;
            }
            for (c, h) in counts.iter_mut().zip(&model.jump_dirs_int()[r as usize]) {
                *c += h;
            }
        }
        counts.iter().map(|&c| c as f64 / self.population as f64).collect()
    }

    /// Visit (time, post-jump state) pairs, starting with (0, x0).
    pub fn walk<'a>(&'a self, model: &'a JumpModel) -> TrajectoryWalk<'a> {
        TrajectoryWalk {
            traj: self,
            model,
            counts: self.initial_counts(),
            next: 0,
        }
    }

    /// Number of jumps with time in the window (s, t].
    pub fn jumps_in(&self, s: f64, t: f64) -> usize {
        self.jump_times.iter().filter(|&&tau| tau > s && tau <= t).count()
    }

    /// CSV export: header `t,reaction,x_1..x_d`, one row per jump with the
    /// post-jump state. The reaction column is 1-based.
    pub fn write_csv<W: std::io::Write>(&self, model: &JumpModel, w: &mut W) -> std::io::Result<()> {
        write!(w, "t,reaction")?;
        for i in 1..=model.dim() {
            write!(w, ",x_{i}")?;
        }
        writeln!(w)?;
        let mut counts = self.initial_counts();
        for (tau, &r) in self.jump_times.iter().zip(&self.reactions) {
            for (c, h) in counts.iter_mut().zip(&model.jump_dirs_int()[r as usize]) {
                *c += h;
            }
            write!(w, "{},{}", tau, r + 1)?;
            for &c in &counts {
                write!(w, ",{}", c as f64 / self.population as f64)?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Iterator over (time, state) of a trajectory.
pub struct TrajectoryWalk<'a> {
    traj: &'a Trajectory,
    model: &'a JumpModel,
    counts: Vec<i64>,
    next: usize,
}

impl Iterator for TrajectoryWalk<'_> {
    type Item = (f64, Vec<f64>);

    fn next(&mut self) -> Option<Self::Item> {
        let n = self.traj.population as f64;
        if self.next == 0 {
            self.next = 1;
            return Some((0.0, self.counts.iter().map(|&c| c as f64 / n).collect()));
        }
        let idx = self.next - 1;
        if idx >= self.traj.jump_times.len() {
            return None;
        }
        let r = self.traj.reactions[idx] as usize;
        for (c, h) in self.counts.iter_mut().zip(&self.model.jump_dirs_int()[r]) {
            *c += h;
        }
        self.next += 1;
        Some((
            self.traj.jump_times[idx],
            self.counts.iter().map(|&c| c as f64 / n).collect(),
        ))
    }
}

fn checked_initial_counts(model: &JumpModel, n: u64, x0: &[f64]) -> Result<Vec<i64>> {
    if n == 0 {
        return Err(Error::Precondition("population size must be at least 1".into()));
    }
    if x0.len() != model.dim() {
        return Err(Error::Precondition(format!(
            "initial state has dimension {}, model expects {}",
            x0.len(),
            model.dim()
        )));
    }
    if !model.contains(x0) {
        return Err(Error::OutsideDomain(format!("{x0:?}")));
    }
    let nf = n as f64;
    let mut counts = Vec::with_capacity(x0.len());
    for &xi in x0 {
        let c = xi * nf;
        if (c - c.round()).abs() > 1e-6 {
            return Err(Error::Precondition(format!(
                "initial state {x0:?} is not on the 1/{n} grid"
            )));
        }
        counts.push(c.round() as i64);
    }
    Ok(counts)
}

/// Exact simulation of one trajectory using the replica-0 stream of the
/// configured seed.
///
/// The run stops at the horizon, at absorption (total rate zero), or at the
/// max-jumps cap, which sets the censored flag.
pub fn simulate_exact(model: &JumpModel, n: u64, x0: &[f64], cfg: &SimConfig) -> Result<Trajectory> {
    simulate_replica(model, n, x0, cfg, 0)
}

/// Exact simulation on the stream of a specific replica index.
pub fn simulate_replica(
    model: &JumpModel,
    n: u64,
    x0: &[f64],
    cfg: &SimConfig,
    replica: u64,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut counts = checked_initial_counts(model, n, x0)?;
    let nf = n as f64;
    let k = model.n_reactions();
    let mut rng = ReplicaRng::new(cfg.seed, replica);
    let mut rates = vec![0.0; k];
    let mut state = vec![0.0; model.dim()];
    let mut t = 0.0;
    let mut jump_times = Vec::new();
    let mut reactions = Vec::new();
    let mut censored = false;

    loop {
        for (s, &c) in state.iter_mut().zip(&counts) {
            *s = c as f64 / nf;
        }
        model.rates_into(&state, &mut rates);
        let mut total = 0.0;
        for (j, &b) in rates.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::Model(format!(
                    "rate {} evaluated to {b} at state {state:?}",
                    j + 1
                )));
            }
            total += b;
        }
        if total <= 0.0 {
            break; // absorbed
        }
        let dt = rng.exp(nf * total);
        if t + dt > cfg.t_max {
            break;
        }
        t += dt;
        // Draw the reaction proportionally to its rate.
        let mut u = rng.u01() * total;
        let mut fired = k - 1;
        for (j, &b) in rates.iter().enumerate() {
            u -= b;
            if u <= 0.0 {
                fired = j;
                break;
            }
        }
        // Guard against rounding landing past the last positive rate.
        while rates[fired] == 0.0 && fired > 0 {
            fired -= 1;
        }
        for (c, h) in counts.iter_mut().zip(&model.jump_dirs_int()[fired]) {
            *c += h;
        }
        jump_times.push(t);
        reactions.push(fired as u32);
        if jump_times.len() as u64 >= cfg.max_jumps {
            censored = true;
            break;
        }
    }

    Ok(Trajectory {
        population: n,
        initial_state: x0.iter().map(|&x| (x * nf).round() / nf).collect(),
        jump_times,
        reactions,
        end_time: cfg.t_max,
        censored,
    })
}

/// Ensemble of independent replicas, fanned out across the thread pool.
/// Replica `i` uses stream `i`; the output order is by replica index, so the
/// result is identical however many threads run.
pub fn simulate_ensemble(
    model: &JumpModel,
    n: u64,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| simulate_replica(model, n, x0, cfg, r))
        .collect()
}

/// Outcome of an exit-time sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExitOutcome {
    /// First jump time whose post-jump state left the domain of interest.
    Exit(f64),
    /// The horizon was reached (or the process was absorbed) first.
    Censored { at: f64 },
}

impl ExitOutcome {
    pub fn time(&self) -> f64 {
        match *self {
            ExitOutcome::Exit(t) => t,
            ExitOutcome::Censored { at } => at,
        }
    }

    pub fn is_censored(&self) -> bool {
        matches!(self, ExitOutcome::Censored { .. })
    }
}

/// First time the process leaves `{x : domain_pred(x)}`, sampled on the
/// replica-0 stream.
///
/// A start outside the region returns `Exit(0)`: the infimum over an empty
/// excursion.
pub fn exit_time(
    model: &JumpModel,
    n: u64,
    x0: &[f64],
    domain_pred: &(dyn Fn(&[f64]) -> bool + Sync),
    cfg: &SimConfig,
) -> Result<ExitOutcome> {
    exit_time_replica(model, n, x0, domain_pred, cfg, 0)
}

/// Exit-time sample on the stream of a specific replica index.
pub fn exit_time_replica(
    model: &JumpModel,
    n: u64,
    x0: &[f64],
    domain_pred: &(dyn Fn(&[f64]) -> bool + Sync),
    cfg: &SimConfig,
    replica: u64,
) -> Result<ExitOutcome> {
    cfg.validate()?;
    let mut counts = checked_initial_counts(model, n, x0)?;
    if !domain_pred(x0) {
        return Ok(ExitOutcome::Exit(0.0));
    }
    let nf = n as f64;
    let k = model.n_reactions();
    let mut rng = ReplicaRng::new(cfg.seed, replica);
    let mut rates = vec![0.0; k];
    let mut state = vec![0.0; model.dim()];
    let mut t = 0.0;
    let mut jumps: u64 = 0;

    loop {
        for (s, &c) in state.iter_mut().zip(&counts) {
            *s = c as f64 / nf;
        }
        model.rates_into(&state, &mut rates);
        let mut total = 0.0;
        for (j, &b) in rates.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::Model(format!(
                    "rate {} evaluated to {b} at state {state:?}",
                    j + 1
                )));
            }
            total += b;
        }
        if total <= 0.0 {
            return Ok(ExitOutcome::Censored { at: cfg.t_max });
        }
        let dt = rng.exp(nf * total);
        if t + dt > cfg.t_max {
            return Ok(ExitOutcome::Censored { at: cfg.t_max });
        }
        t += dt;
        let mut u = rng.u01() * total;
        let mut fired = k - 1;
        for (j, &b) in rates.iter().enumerate() {
            u -= b;
            if u <= 0.0 {
                fired = j;
                break;
            }
        }
        while rates[fired] == 0.0 && fired > 0 {
            fired -= 1;
        }
        for (c, h) in counts.iter_mut().zip(&model.jump_dirs_int()[fired]) {
            *c += h;
        }
        for (s, &c) in state.iter_mut().zip(&counts) {
            *s = c as f64 / nf;
        }
        if !domain_pred(&state) {
            return Ok(ExitOutcome::Exit(t));
        }
        jumps += 1;
        if jumps >= cfg.max_jumps {
            return Ok(ExitOutcome::Censored { at: t });
        }
    }
}

/// Ensemble of exit-time samples, one per replica stream.
pub fn exit_time_ensemble(
    model: &JumpModel,
    n: u64,
    x0: &[f64],
    domain_pred: &(dyn Fn(&[f64]) -> bool + Sync),
    cfg: &SimConfig,
) -> Result<Vec<ExitOutcome>> {
    cfg.validate()?;
    (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| exit_time_replica(model, n, x0, domain_pred, cfg, r))
        .collect()
}

/// Log likelihood ratio of a trajectory between two rate families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogWeight {
    /// log ξ_T; −∞ when the ratio degenerates.
    pub log_ratio: f64,
    /// True when some fired reaction has zero numerator rate, i.e. ξ_T = 0
    /// and the trajectory is impossible under the numerator law.
    pub degenerate: bool,
}

/// log ξ_T of `traj` with denominator rates from `model_p` and numerator
/// rates from `model_q`, both sharing the jump directions of the trajectory's
/// model.
///
/// A fired reaction with zero numerator rate yields a flagged −∞. A fired
/// reaction with zero denominator rate means the trajectory is impossible
/// under `model_p` and is a precondition error, as is a censored trajectory:
/// its record does not cover the full horizon.
pub fn log_radon_nikodym(
    traj: &Trajectory,
    model_p: &JumpModel,
    model_q: &JumpModel,
) -> Result<LogWeight> {
    if model_p.dim() != model_q.dim() || model_p.n_reactions() != model_q.n_reactions() {
        return Err(Error::Precondition(
            "likelihood ratio needs models with matching dimensions".into(),
        ));
    }
    if traj.censored {
        return Err(Error::Precondition(
            "cannot weight a censored trajectory: the jump record is incomplete".into(),
        ));
    }
    let n = traj.population as f64;
    let k = model_p.n_reactions();
    let mut counts: Vec<i64> = traj
        .initial_state
        .iter()
        .map(|&x| (x * n).round() as i64)
        .collect();
    let mut state: Vec<f64> = counts.iter().map(|&c| c as f64 / n).collect();
    let mut rates_p = vec![0.0; k];
    let mut rates_q = vec![0.0; k];

    let mut jump_sum = 0.0;
    let mut integral = 0.0;
    let mut degenerate = false;
    let mut prev_t = 0.0;

    for (idx, (&tau, &r)) in traj.jump_times.iter().zip(&traj.reactions).enumerate() {
        model_p.rates_into(&state, &mut rates_p);
        model_q.rates_into(&state, &mut rates_q);
        let seg = tau - prev_t;
        let diff: f64 = rates_q.iter().zip(&rates_p).map(|(q, p)| q - p).sum();
        integral += seg * diff;
        let bp = rates_p[r as usize];
        let bq = rates_q[r as usize];
        if bp <= 0.0 {
            return Err(Error::Precondition(format!(
                "jump {idx} fired reaction {} with zero denominator rate",
                r + 1
            )));
        }
        if bq <= 0.0 {
            degenerate = true;
        } else {
            jump_sum += bq.ln() - bp.ln();
        }
        for (c, h) in counts.iter_mut().zip(&model_p.jump_dirs_int()[r as usize]) {
            *c += h;
        }
        for (s, &c) in state.iter_mut().zip(&counts) {
            *s = c as f64 / n;
        }
        prev_t = tau;
    }
    // Tail segment up to the horizon.
    model_p.rates_into(&state, &mut rates_p);
    model_q.rates_into(&state, &mut rates_q);
    let diff: f64 = rates_q.iter().zip(&rates_p).map(|(q, p)| q - p).sum();
    integral += (traj.end_time - prev_t) * diff;

    if degenerate {
        return Ok(LogWeight { log_ratio: f64::NEG_INFINITY, degenerate: true });
    }
    Ok(LogWeight { log_ratio: jump_sum - n * integral, degenerate: false })
}

/// Simulate under the rates of `model_q` and return the trajectory together
/// with log ξ_T⁻¹: the log weight that converts samples from the tilted law
/// into unbiased estimates under `model_p`.
pub fn simulate_tilted(
    model_p: &JumpModel,
    model_q: &JumpModel,
    n: u64,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<(Trajectory, LogWeight)> {
    simulate_tilted_replica(model_p, model_q, n, x0, cfg, 0)
}

/// Tilted simulation on the stream of a specific replica index.
pub fn simulate_tilted_replica(
    model_p: &JumpModel,
    model_q: &JumpModel,
    n: u64,
    x0: &[f64],
    cfg: &SimConfig,
    replica: u64,
) -> Result<(Trajectory, LogWeight)> {
    let traj = simulate_replica(model_q, n, x0, cfg, replica)?;
    // ξ here is d(tilted)/d(nominal); the estimator weight is its inverse.
    let lw = log_radon_nikodym(&traj, model_q, model_p)?;
    Ok((traj, lw))
}

/// Ensemble of tilted samples with their log weights.
pub fn tilted_ensemble(
    model_p: &JumpModel,
    model_q: &JumpModel,
    n: u64,
    x0: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<(Trajectory, LogWeight)>> {
    cfg.validate()?;
    (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|r| simulate_tilted_replica(model_p, model_q, n, x0, cfg, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        birth_death_1d, constant_rate_1d, grid_snap, pure_death_1d, sirs_model, SirsParams,
    };
    use crate::stats::{mean, standard_error};

    fn sirs(beta: f64, gamma: f64, nu: f64) -> JumpModel {
        sirs_model(&SirsParams::new(beta, gamma, nu).unwrap()).unwrap()
    }

    #[test]
    fn identical_config_gives_identical_trajectory() {
        let m = sirs(2.0, 1.0, 1.0);
        let cfg = SimConfig { t_max: 3.0, seed: 42, ..Default::default() };
        let a = simulate_exact(&m, 100, &[0.25, 0.25], &cfg).unwrap();
        let b = simulate_exact(&m, 100, &[0.25, 0.25], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn poisson_process_mean_matches_horizon() {
        // Constant rate 1 from x0 = 0: state at t is P(Nt)/N with mean t.
        let m = constant_rate_1d(1.0).unwrap();
        let n = 50;
        let cfg = SimConfig { t_max: 2.0, seed: 7, replicas: 400, ..Default::default() };
        let trajs = simulate_ensemble(&m, n, &[0.0], &cfg).unwrap();
        let finals: Vec<f64> = trajs.iter().map(|t| t.final_state(&m)[0]).collect();
        let mu = mean(&finals);
        let se = standard_error(&finals);
        assert!((mu - 2.0).abs() < 4.0 * se + 0.01, "mean = {mu}, se = {se}");
    }

    #[test]
    fn sirs_stays_on_simplex_grid() {
        let p = SirsParams::new(2.0, 1.0, 1.0).unwrap();
        let m = sirs_model(&p).unwrap();
        let n = 60;
        let x0 = grid_snap(&m, &crate::model::endemic_equilibrium(&p).unwrap(), n).unwrap();
        let cfg = SimConfig { t_max: 5.0, seed: 11, ..Default::default() };
        let traj = simulate_exact(&m, n, &x0, &cfg).unwrap();
        assert!(traj.n_jumps() > 0);
        for (_, z) in traj.walk(&m) {
            assert!(m.contains(&z), "left the simplex: {z:?}");
            for zi in &z {
                let c = zi * n as f64;
                assert!((c - c.round()).abs() < 1e-9);
            }
        }
        let mut prev = 0.0;
        for &t in &traj.jump_times {
            assert!(t > prev && t <= traj.end_time);
            prev = t;
        }
    }

    #[test]
    fn absorbing_boundary_forces_immunity_loss_only() {
        // With z1 = 0 only reaction 3 can fire, down to full absorption.
        let m = sirs(2.0, 1.0, 1.0);
        let cfg = SimConfig { t_max: 100.0, seed: 3, ..Default::default() };
        let traj = simulate_exact(&m, 40, &[0.0, 0.5], &cfg).unwrap();
        assert!(traj.n_jumps() > 0);
        assert!(traj.reactions.iter().all(|&r| r == 2));
        assert_eq!(traj.final_state(&m), vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let bad = [
            SimConfig { t_max: 0.0, ..Default::default() },
            SimConfig { t_max: f64::NAN, ..Default::default() },
            SimConfig { max_jumps: 0, ..Default::default() },
            SimConfig { replicas: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "accepted {cfg:?}");
        }
        assert!(SimConfig::default().validate().is_ok());
    }

    #[test]
    fn off_grid_start_is_rejected() {
        let m = sirs(2.0, 1.0, 1.0);
        let cfg = SimConfig::default();
        assert!(simulate_exact(&m, 10, &[0.21, 0.25], &cfg).is_err());
    }

    #[test]
    fn max_jumps_censors() {
        let m = constant_rate_1d(1.0).unwrap();
        let cfg = SimConfig { t_max: 100.0, max_jumps: 5, seed: 1, ..Default::default() };
        let traj = simulate_exact(&m, 100, &[0.0], &cfg).unwrap();
        assert!(traj.censored);
        assert_eq!(traj.n_jumps(), 5);
    }

    #[test]
    fn exit_outside_start_returns_zero() {
        let m = sirs(2.0, 1.0, 1.0);
        let cfg = SimConfig { t_max: 10.0, seed: 5, ..Default::default() };
        let out = exit_time(&m, 20, &[0.0, 0.5], &|z: &[f64]| z[0] > 0.0, &cfg).unwrap();
        assert_eq!(out, ExitOutcome::Exit(0.0));
    }

    #[test]
    fn pure_death_mean_absorption_is_harmonic_sum() {
        // From x0 = 1 with N individuals the stages are Exp(m), m = N..1, so
        // the mean absorption time is the harmonic number H_N.
        let m = pure_death_1d();
        let n = 20u64;
        let cfg = SimConfig { t_max: 1e4, seed: 13, replicas: 3000, ..Default::default() };
        let outs = exit_time_ensemble(&m, n, &[1.0], &|z: &[f64]| z[0] > 0.0, &cfg).unwrap();
        assert!(outs.iter().all(|o| !o.is_censored()));
        let times: Vec<f64> = outs.iter().map(|o| o.time()).collect();
        let h_n: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
        let mu = mean(&times);
        let se = standard_error(&times);
        assert!((mu - h_n).abs() < 4.0 * se, "mean {mu} vs H_N {h_n}, se {se}");
    }

    #[test]
    fn censored_fraction_vanishes_with_longer_horizons() {
        // Extinction of the epidemic happens eventually; raising the horizon
        // drives the censored fraction to zero.
        let p = SirsParams::new(1.5, 1.0, 1.0).unwrap();
        let m = sirs_model(&p).unwrap();
        let n = 20;
        let x0 = grid_snap(&m, &crate::model::endemic_equilibrium(&p).unwrap(), n).unwrap();
        let pred = |z: &[f64]| z[0] > 0.0;
        let mut fractions = Vec::new();
        for t_max in [2.0, 2000.0] {
            let cfg = SimConfig { t_max, seed: 47, replicas: 200, ..Default::default() };
            let outs = exit_time_ensemble(&m, n, &x0, &pred, &cfg).unwrap();
            let censored = outs.iter().filter(|o| o.is_censored()).count();
            fractions.push(censored as f64 / outs.len() as f64);
        }
        assert!(fractions[1] < fractions[0], "fractions {fractions:?}");
        assert_eq!(fractions[1], 0.0, "fractions {fractions:?}");
    }

    #[test]
    fn identity_tilt_has_zero_log_ratio() {
        let m = sirs(2.0, 1.0, 1.0);
        let cfg = SimConfig { t_max: 2.0, seed: 17, ..Default::default() };
        let traj = simulate_exact(&m, 48, &[0.25, 0.25], &cfg).unwrap();
        let lw = log_radon_nikodym(&traj, &m, &m).unwrap();
        assert!(!lw.degenerate);
        assert!(lw.log_ratio.abs() < 1e-12, "log ratio = {}", lw.log_ratio);
    }

    #[test]
    fn constant_rate_log_ratio_closed_form() {
        // P-rate 1 vs Q-rate mu: log ξ_T = m log mu − N T (mu − 1).
        let p = constant_rate_1d(1.0).unwrap();
        let q = constant_rate_1d(2.5).unwrap();
        let n = 30;
        let cfg = SimConfig { t_max: 1.5, seed: 23, ..Default::default() };
        let traj = simulate_exact(&p, n, &[0.0], &cfg).unwrap();
        let m_jumps = traj.n_jumps() as f64;
        let expected = m_jumps * 2.5f64.ln() - n as f64 * 1.5 * 1.5;
        let lw = log_radon_nikodym(&traj, &p, &q).unwrap();
        assert!((lw.log_ratio - expected).abs() < 1e-10);
    }

    #[test]
    fn zero_numerator_rate_flags_degenerate() {
        // A birth-death trajectory containing deaths has zero density under
        // the pure-birth law.
        let bd = birth_death_1d(1.0, 1.0).unwrap();
        let mut cfg = SimConfig { t_max: 5.0, seed: 29, ..Default::default() };
        let mut found = false;
        for seed in 29..40 {
            cfg.seed = seed;
            let traj = simulate_exact(&bd, 10, &[1.0], &cfg).unwrap();
            if traj.reactions.iter().any(|&r| r == 1) {
                // Map reaction indices onto a 2-reaction model with the
                // second reaction forbidden.
                let q = JumpModel::new(
                    "birth-with-dead-death",
                    vec![vec![1], vec![-1]],
                    std::sync::Arc::new(|x: &[f64], out: &mut [f64]| {
                        out[0] = x[0].max(0.0);
                        out[1] = 0.0;
                    }),
                    std::sync::Arc::new(|x: &[f64]| x[0] >= -1e-12),
                    f64::INFINITY,
                    1.0,
                )
                .unwrap();
                let lw = log_radon_nikodym(&traj, &bd, &q).unwrap();
                assert!(lw.degenerate);
                assert_eq!(lw.log_ratio, f64::NEG_INFINITY);
                found = true;
                break;
            }
        }
        assert!(found, "no trajectory with a death was generated");
    }

    #[test]
    fn censored_trajectories_cannot_be_weighted() {
        let m = constant_rate_1d(1.0).unwrap();
        let cfg = SimConfig { t_max: 100.0, max_jumps: 5, seed: 1, ..Default::default() };
        let traj = simulate_exact(&m, 100, &[0.0], &cfg).unwrap();
        assert!(traj.censored);
        assert!(log_radon_nikodym(&traj, &m, &m).is_err());
    }

    #[test]
    fn identity_tilt_weight_is_one() {
        let m = sirs(2.0, 1.0, 1.0);
        let cfg = SimConfig { t_max: 1.0, seed: 31, ..Default::default() };
        let (_, lw) = simulate_tilted(&m, &m, 40, &[0.25, 0.25], &cfg).unwrap();
        assert!(lw.log_ratio.abs() < 1e-12);
    }

    #[test]
    fn tilted_estimator_of_one_is_unbiased() {
        // E_P[1] = 1 estimated under the tilted law with weights.
        let p = constant_rate_1d(1.0).unwrap();
        let q = constant_rate_1d(2.0).unwrap();
        let cfg = SimConfig { t_max: 1.0, seed: 37, replicas: 20_000, ..Default::default() };
        let samples = tilted_ensemble(&p, &q, 25, &[0.0], &cfg).unwrap();
        let weights: Vec<f64> = samples.iter().map(|(_, lw)| lw.log_ratio.exp()).collect();
        let mu = mean(&weights);
        let se = standard_error(&weights);
        assert!((mu - 1.0).abs() < 4.0 * se, "mean {mu}, se {se}");
    }

    #[test]
    fn jump_count_mean_below_tail_bound() {
        // Mean jump count over a window is at most k β̄ N Δ, with slack for
        // Monte Carlo noise.
        let m = sirs(2.0, 1.0, 1.0);
        let n = 100;
        let reps = 300u32;
        let cfg = SimConfig { t_max: 2.0, seed: 41, replicas: reps, ..Default::default() };
        let trajs = simulate_ensemble(&m, n, &[0.25, 0.25], &cfg).unwrap();
        let counts: Vec<f64> = trajs.iter().map(|t| t.jumps_in(0.5, 1.5) as f64).collect();
        let bound = m.n_reactions() as f64
            * m.beta_bar()
            * n as f64
            * 1.0
            * (1.0 + 3.0 / (reps as f64).sqrt());
        assert!(mean(&counts) <= bound, "mean {} > bound {bound}", mean(&counts));
    }

    #[test]
    fn csv_export_shape() {
        let m = sirs(2.0, 1.0, 1.0);
        let cfg = SimConfig { t_max: 0.5, seed: 2, ..Default::default() };
        let traj = simulate_exact(&m, 30, &[0.2, 0.3], &cfg).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&m, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,reaction,x_1,x_2");
        assert_eq!(lines.count(), traj.n_jumps());
    }
}
