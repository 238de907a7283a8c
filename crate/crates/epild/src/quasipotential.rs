//! Quasipotentials and exit-time asymptotics.
//!
//! The minimal action to connect x to z in time T is
//!
//! ```text
//! V(x, z, T) = inf { I_T(φ) : φ(0) = x, φ(T) = z },
//! V(x, z)    = inf_{T > 0} V(x, z, T),
//! V̄          = inf_{z ∈ ∂O} V(x*, z),
//! ```
//!
//! and V̄ governs the exit time from the basin O of the stable equilibrium
//! x*: log E(τ) / N → V̄ as the population N grows. The minimizers here work
//! on piecewise-linear paths with uniform knot times, optimized
//! coarse-to-fine by limited-memory BFGS over finite-difference action
//! gradients and multi-started from a straight line, a time-reversed flow
//! heuristic, and a seeded perturbation. Every reported value is a certified
//! upper bound on the infimum: the returned path achieves it.
//!
//! Domains whose boundary is characteristic (the flow neither crosses nor
//! leaves it, and rates degenerate there) are handled by shrinking: compute
//! V̄_η on the offset boundary {z₁ = η} and extrapolate η → 0 linearly.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{endemic_equilibrium, grid_snap, sirs_model, JumpModel, SirsParams};
use crate::optim::{golden_section, minimize_with, LbfgsOptions, OptimOutcome};
use crate::ratefn::{path_rate, path_rate_grad, path_rate_with_cache, PlPath, DEFAULT_QUAD_ORDER};
use crate::rng::ReplicaRng;
use crate::simulate::{exit_time_ensemble, SimConfig};
use crate::stats;

/// Default number of path segments.
pub const DEFAULT_SEGMENTS: usize = 16;

/// Default horizon grid: logarithmic from 2^-2 to 2^6.
pub fn default_t_grid() -> Vec<f64> {
    (-2..=6).map(|e| 2.0f64.powi(e)).collect()
}

/// Result of one action minimization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QpResult {
    /// Achieved action value (an upper bound on the infimum).
    pub value: f64,
    /// The minimizing path.
    pub path: PlPath,
    /// Horizon of the path.
    pub horizon: f64,
    /// Total optimizer iterations spent.
    pub iterations: u64,
    /// Whether the final optimization converged by its own criteria.
    pub converged: bool,
    /// Boundary offset used (0 when none).
    pub eta: f64,
}

type PredFn = dyn Fn(&[f64]) -> bool + Send + Sync;
type BoundaryFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// An exit problem: a model, an open region O containing a stable
/// equilibrium, and a parameterized sampler of the relevant boundary.
#[derive(Clone)]
pub struct ExitProblem {
    pub model: JumpModel,
    domain: Arc<PredFn>,
    boundary: Arc<BoundaryFn>,
    equilibrium: Vec<f64>,
}

impl ExitProblem {
    /// Build and validate: the equilibrium must lie inside O and be a zero
    /// of the drift.
    pub fn new(
        model: JumpModel,
        domain: Arc<PredFn>,
        boundary: Arc<BoundaryFn>,
        equilibrium: Vec<f64>,
    ) -> Result<Self> {
        if !model.contains(&equilibrium) || !(domain)(&equilibrium) {
            return Err(Error::Precondition(format!(
                "equilibrium {equilibrium:?} is not inside the exit domain"
            )));
        }
        let drift = model.drift(&equilibrium)?;
        let norm: f64 = drift.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return Err(Error::Precondition(format!(
                "drift at the declared equilibrium has norm {norm:.3e}"
            )));
        }
        Ok(ExitProblem { model, domain, boundary, equilibrium })
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }

    pub fn domain_pred(&self) -> &PredFn {
        &*self.domain
    }

    /// Point on the boundary at curve parameter u in [0, 1].
    pub fn boundary_point(&self, u: f64) -> Vec<f64> {
        (self.boundary)(u.clamp(0.0, 1.0))
    }

    /// `n` boundary points at evenly spaced curve parameters.
    pub fn boundary_points(&self, n: usize) -> Vec<Vec<f64>> {
        if n == 1 {
            return vec![self.boundary_point(0.5)];
        }
        (0..n)
            .map(|i| self.boundary_point(i as f64 / (n - 1) as f64))
            .collect()
    }
}

fn force_into_domain(model: &JumpModel, z: &[f64]) -> Option<Vec<f64>> {
    if model.contains(z) {
        return Some(z.to_vec());
    }
    let desc = model.domain_desc()?;
    let mut w = z.to_vec();
    for _ in 0..10 {
        let mut any = false;
        for hs in desc {
            let v = hs.violation(&w);
            if v > 0.0 {
                any = true;
                let n2: f64 = hs.normal.iter().map(|n| n * n).sum();
                for (wi, ni) in w.iter_mut().zip(&hs.normal) {
                    *wi -= v * ni / n2;
                }
            }
        }
        if !any {
            break;
        }
    }
    if model.contains(&w) {
        Some(w)
    } else {
        None
    }
}

/// Straight line, reversed-flow heuristic, seeded perturbation.
fn build_starts(
    model: &JumpModel,
    x: &[f64],
    z: &[f64],
    t_end: f64,
    segments: usize,
    seed: u64,
) -> Vec<PlPath> {
    let mut starts = Vec::new();
    if let Ok(line) = PlPath::line(x, z, t_end, segments) {
        // Perturbed copy first so the plain line survives even when the
        // perturbation leaves the domain.
        let mut rng = ReplicaRng::new(seed, 0x9d5);
        let dist: f64 = x
            .iter()
            .zip(z)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let sigma = 0.05 * dist.max(0.05);
        let mut pert = line.clone();
        for knot in pert.knot_points[1..segments].iter_mut() {
            for c in knot.iter_mut() {
                *c += rng.range(-sigma, sigma);
            }
            if let Some(fixed) = force_into_domain(model, knot) {
                *knot = fixed;
            }
        }
        if pert.knot_points.iter().all(|p| model.contains(p)) {
            starts.push(pert);
        }
        starts.push(line);
    }
    if let Some(rev) = reversed_flow_start(model, x, z, t_end, segments) {
        starts.push(rev);
    }
    starts
}

/// Integrate the time-reversed flow y' = -b(y) from z, then blend the start
/// onto x. Escaping states hold their last in-domain value; the heuristic
/// only has to produce a feasible warm start.
fn reversed_flow_start(
    model: &JumpModel,
    x: &[f64],
    z: &[f64],
    t_end: f64,
    segments: usize,
) -> Option<PlPath> {
    let d = model.dim();
    let sub = 8;
    let steps = segments * sub;
    let h = t_end / steps as f64;
    let mut states = Vec::with_capacity(steps + 1);
    let mut w = z.to_vec();
    states.push(w.clone());
    let mut stage = vec![0.0; d];
    for _ in 0..steps {
        let neg = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|c| -c).collect() };
        let k1 = neg(model.drift_raw(&w));
        for i in 0..d {
            stage[i] = w[i] + 0.5 * h * k1[i];
        }
        let k2 = neg(model.drift_raw(&stage));
        for i in 0..d {
            stage[i] = w[i] + 0.5 * h * k2[i];
        }
        let k3 = neg(model.drift_raw(&stage));
        for i in 0..d {
            stage[i] = w[i] + h * k3[i];
        }
        let k4 = neg(model.drift_raw(&stage));
        let mut next = w.clone();
        for i in 0..d {
            next[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        match force_into_domain(model, &next) {
            Some(ok) => {
                w = ok;
                states.push(w.clone());
            }
            None => {
                // Hold position for the remaining steps.
                while states.len() <= steps {
                    states.push(w.clone());
                }
                break;
            }
        }
    }
    let times: Vec<f64> = (0..=segments)
        .map(|i| t_end * i as f64 / segments as f64)
        .collect();
    let raw0 = states[steps].clone();
    let mut points = Vec::with_capacity(segments + 1);
    for (i, _) in times.iter().enumerate() {
        // Reversed in time: knot i sits at flow time T - t_i.
        let mut p = states[steps - i * sub].clone();
        let blend = 1.0 - i as f64 / segments as f64;
        for j in 0..d {
            p[j] += blend * (x[j] - raw0[j]);
        }
        points.push(force_into_domain(model, &p)?);
    }
    points[0] = x.to_vec();
    points[segments] = z.to_vec();
    PlPath::new(times, points).ok()
}

fn flatten_interior(path: &PlPath) -> Vec<f64> {
    path.knot_points[1..path.segments()]
        .iter()
        .flatten()
        .copied()
        .collect()
}

fn path_from_interior(
    times: &[f64],
    start: &[f64],
    end: &[f64],
    interior: &[f64],
    d: usize,
) -> PlPath {
    let segments = times.len() - 1;
    let mut points = Vec::with_capacity(segments + 1);
    points.push(start.to_vec());
    for i in 0..segments - 1 {
        points.push(interior[i * d..(i + 1) * d].to_vec());
    }
    points.push(end.to_vec());
    PlPath { knot_times: times.to_vec(), knot_points: points }
}

/// Optimize one start at a fixed knot count; returns (interior, value,
/// iterations, converged). The objective and its gradient share a
/// warm-start cache of dual multipliers; the gradient comes from the
/// envelope identity rather than finite differences of the action.
fn optimize_start(
    model: &JumpModel,
    times: &[f64],
    x: &[f64],
    z: &[f64],
    start: &PlPath,
    opts: &LbfgsOptions,
) -> Option<OptimOutcome> {
    let d = model.dim();
    let cache = std::cell::RefCell::new(Vec::new());
    let value = |flat: &[f64]| -> f64 {
        let path = path_from_interior(times, x, z, flat, d);
        path_rate_with_cache(model, &path, DEFAULT_QUAD_ORDER, &mut cache.borrow_mut())
            .unwrap_or(f64::INFINITY)
    };
    let gradient = |flat: &mut [f64], _fx: f64, out: &mut [f64]| {
        let path = path_from_interior(times, x, z, flat, d);
        match path_rate_grad(model, &path, DEFAULT_QUAD_ORDER, &mut cache.borrow_mut()) {
            Ok((_, full)) => {
                // Endpoints are pinned: take the interior block.
                out.copy_from_slice(&full[d..full.len() - d]);
            }
            Err(_) => out.fill(0.0),
        }
    };
    let x0 = flatten_interior(start);
    if !value(&x0).is_finite() {
        return None;
    }
    Some(minimize_with(value, gradient, &x0, opts))
}

/// Coarse-to-fine action minimization with fixed endpoints and horizon.
///
/// `quick` skips the multi-start exploration and polishes only the supplied
/// warm starts at full resolution; refinement sweeps use it once a good
/// path is known.
#[allow(clippy::too_many_arguments)]
fn minimize_fixed(
    model: &JumpModel,
    x: &[f64],
    z: &[f64],
    t_end: f64,
    segments: usize,
    seed: u64,
    extra_starts: &[PlPath],
    quick: bool,
) -> Result<QpResult> {
    if !model.contains(x) {
        return Err(Error::OutsideDomain(format!("start {x:?}")));
    }
    if !model.contains(z) {
        return Err(Error::OutsideDomain(format!("target {z:?}")));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Precondition(format!("horizon must be positive, got {t_end}")));
    }
    if segments < 2 {
        return Err(Error::Precondition("need at least two path segments".into()));
    }

    let mut levels = vec![segments];
    if !quick {
        while levels.last().unwrap() % 2 == 0 && levels.last().unwrap() / 2 >= 4 {
            levels.push(levels.last().unwrap() / 2);
        }
    }
    levels.reverse();

    let d = model.dim();
    let mut iterations = 0u64;
    let mut best: Option<(f64, PlPath, bool)> = None;

    for (li, &level) in levels.iter().enumerate() {
        let times: Vec<f64> = (0..=level)
            .map(|i| t_end * i as f64 / level as f64)
            .collect();
        let mut starts: Vec<PlPath> = Vec::new();
        if li == 0 {
            for extra in extra_starts {
                if let Ok(r) = extra
                    .rescale_horizon(t_end)
                    .and_then(|r| r.resample_uniform(level))
                {
                    starts.push(r);
                }
            }
            if !quick || starts.is_empty() {
                starts.extend(build_starts(model, x, z, t_end, level, seed));
            }
        }
        if let Some((_, path, _)) = &best {
            if let Ok(r) = path.resample_uniform(level) {
                starts.push(r);
            }
        }
        // One cap for every level: the level-J prefix of a run with finer
        // target then reproduces the coarser run exactly, which makes the
        // value monotone under grid refinement.
        let opts = LbfgsOptions { max_iters: 160, grad_tol: 3e-7, ..Default::default() };
        let mut level_best: Option<(f64, PlPath, bool)> = None;
        for start in &starts {
            let Some(OptimOutcome { x: sol, value, iterations: it, converged }) =
                optimize_start(model, &times, x, z, start, &opts)
            else {
                continue;
            };
            iterations += it;
            if level_best.as_ref().is_none_or(|(bv, _, _)| value < *bv) {
                let path = path_from_interior(&times, x, z, &sol, d);
                level_best = Some((value, path, converged));
            }
        }
        if let Some(lb) = level_best {
            // A refined path evaluates identically, so the value can only
            // improve level over level.
            best = Some(lb);
        }
    }

    let Some((_, path, converged)) = best else {
        return Err(Error::InfeasiblePath(format!(
            "no start produced a finite action from {x:?} to {z:?} over T={t_end}"
        )));
    };
    let value = path_rate(model, &path, DEFAULT_QUAD_ORDER)?;
    if !value.is_finite() {
        return Err(Error::InfeasiblePath(format!(
            "optimized path still has infinite action from {x:?} to {z:?}"
        )));
    }
    Ok(QpResult { value, path, horizon: t_end, iterations, converged, eta: 0.0 })
}

/// Minimal action V(x, z, T) over piecewise-linear paths with `segments`
/// uniform pieces, multi-started and refined coarse-to-fine.
///
/// The result is an upper bound on the true infimum; the returned path
/// certifies it.
pub fn v_fixed_horizon(
    model: &JumpModel,
    x: &[f64],
    z: &[f64],
    t_end: f64,
    segments: usize,
    seed: u64,
) -> Result<QpResult> {
    minimize_fixed(model, x, z, t_end, segments, seed, &[], false)
}

/// Free-horizon quasipotential V(x, z): minimum of the fixed-horizon value
/// over a horizon grid, refined by golden-section search around the grid
/// minimum.
pub fn v_free_horizon(
    model: &JumpModel,
    x: &[f64],
    z: &[f64],
    segments: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<QpResult> {
    free_horizon_inner(model, x, z, segments, t_grid, seed, &[])
}

fn free_horizon_inner(
    model: &JumpModel,
    x: &[f64],
    z: &[f64],
    segments: usize,
    t_grid: &[f64],
    seed: u64,
    extra_starts: &[PlPath],
) -> Result<QpResult> {
    if t_grid.is_empty() {
        return Err(Error::Precondition("horizon grid is empty".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::Precondition("horizon grid must be positive".into()));
    }
    let mut grid = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut iterations = 0u64;
    let mut best: Option<QpResult> = None;
    let mut best_idx = 0usize;
    let mut last_err: Option<Error> = None;
    for (i, &t_end) in grid.iter().enumerate() {
        let mut extras: Vec<PlPath> = extra_starts.to_vec();
        if let Some(b) = &best {
            if let Ok(r) = b.path.rescale_horizon(t_end) {
                extras.push(r);
            }
        }
        match minimize_fixed(model, x, z, t_end, segments, seed, &extras, false) {
            Ok(res) => {
                iterations += res.iterations;
                if best.as_ref().is_none_or(|b| res.value < b.value) {
                    best = Some(res);
                    best_idx = i;
                }
            }
            Err(e @ (Error::InfeasiblePath(_) | Error::PathSegment { .. })) => {
                last_err = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    let Some(mut best_res) = best else {
        return Err(last_err.unwrap_or_else(|| {
            Error::InfeasiblePath("no horizon produced a finite action".into())
        }));
    };

    // Refine the horizon around the grid minimum.
    let t_best = grid[best_idx];
    let lo = if best_idx > 0 { grid[best_idx - 1] } else { t_best * 0.5 };
    let hi = if best_idx + 1 < grid.len() { grid[best_idx + 1] } else { t_best * 2.0 };
    {
        let objective = |t_end: f64| -> f64 {
            let extras = match best_res.path.rescale_horizon(t_end) {
                Ok(r) => vec![r],
                Err(_) => Vec::new(),
            };
            match minimize_fixed(model, x, z, t_end, segments, seed, &extras, true) {
                Ok(res) => {
                    iterations += res.iterations;
                    let v = res.value;
                    if v < best_res.value {
                        best_res = res;
                    }
                    v
                }
                Err(_) => f64::INFINITY,
            }
        };
        golden_section(objective, lo, hi, 5e-3, 24);
    }
    best_res.iterations = iterations;
    Ok(best_res)
}

/// Minimal action from the equilibrium to the sampled boundary:
/// V̄ = inf over boundary points z of V(x*, z), with local refinement of the
/// boundary parameter around the best sample.
pub fn vbar(
    problem: &ExitProblem,
    segments: usize,
    t_grid: &[f64],
    boundary_samples: usize,
    seed: u64,
) -> Result<QpResult> {
    if boundary_samples == 0 {
        return Err(Error::Precondition("boundary sample count must be positive".into()));
    }
    let xstar = problem.equilibrium.clone();
    let us: Vec<f64> = if boundary_samples == 1 {
        vec![0.5]
    } else {
        (0..boundary_samples)
            .map(|i| i as f64 / (boundary_samples - 1) as f64)
            .collect()
    };
    let mut iterations = 0u64;
    let mut best: Option<(f64, QpResult, f64)> = None;
    for &u in &us {
        let z = problem.boundary_point(u);
        if !problem.model.contains(&z) {
            return Err(Error::Precondition(format!(
                "boundary sampler produced a point outside the domain: {z:?}"
            )));
        }
        let extras: Vec<PlPath> = best
            .iter()
            .map(|(_, res, _)| {
                let mut p = res.path.clone();
                *p.knot_points.last_mut().unwrap() = z.clone();
                p
            })
            .collect();
        match free_horizon_inner(&problem.model, &xstar, &z, segments, t_grid, seed, &extras) {
            Ok(res) => {
                iterations += res.iterations;
                if best.as_ref().is_none_or(|(bv, _, _)| res.value < *bv) {
                    best = Some((res.value, res, u));
                }
            }
            Err(Error::InfeasiblePath(_)) | Err(Error::PathSegment { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    let Some((_, mut best_res, u_best)) = best else {
        return Err(Error::InfeasiblePath(
            "no boundary sample was reachable with finite action".into(),
        ));
    };

    // Slide the boundary point locally at the best horizon.
    if us.len() > 1 {
        let du = 1.0 / (us.len() - 1) as f64;
        let lo = (u_best - du).max(0.0);
        let hi = (u_best + du).min(1.0);
        let t_best = best_res.horizon;
        let (u_ref, _) = {
            let best_path = best_res.path.clone();
            let mut obj = |u: f64| -> f64 {
                let z = problem.boundary_point(u);
                let mut warm = best_path.clone();
                *warm.knot_points.last_mut().unwrap() = z.clone();
                match minimize_fixed(&problem.model, &xstar, &z, t_best, segments, seed, &[warm], true) {
                    Ok(res) => {
                        iterations += res.iterations;
                        res.value
                    }
                    Err(_) => f64::INFINITY,
                }
            };
            golden_section(&mut obj, lo, hi, 1e-3, 16)
        };
        let z_ref = problem.boundary_point(u_ref);
        let mut warm = best_res.path.clone();
        *warm.knot_points.last_mut().unwrap() = z_ref.clone();
        if let Ok(res) =
            free_horizon_inner(&problem.model, &xstar, &z_ref, segments, t_grid, seed, &[warm])
        {
            iterations += res.iterations;
            if res.value < best_res.value {
                best_res = res;
            }
        }
    }
    best_res.iterations = iterations;
    Ok(best_res)
}

/// The SIRS exit problem on the shrunken domain O_η = {z₁ > η}: boundary
/// {z₁ = η, 0 ≤ z₂ ≤ 1 − η}, equilibrium at the endemic point.
///
/// Requires 0 < η < z₁*: the equilibrium must stay interior.
pub fn eta_boundary_problem(params: &SirsParams, eta: f64) -> Result<ExitProblem> {
    let xstar = endemic_equilibrium(params)?;
    if !(eta > 0.0) || eta >= xstar[0] {
        return Err(Error::Precondition(format!(
            "eta must satisfy 0 < eta < {}, got {eta}",
            xstar[0]
        )));
    }
    let model = sirs_model(params)?;
    let pred: Arc<PredFn> = Arc::new(move |z: &[f64]| z[0] > eta);
    let boundary: Arc<BoundaryFn> = Arc::new(move |u: f64| vec![eta, u * (1.0 - eta)]);
    ExitProblem::new(model, pred, boundary, xstar)
}

/// The SIRS extinction problem: exit through the characteristic boundary
/// {z₁ = 0} itself.
pub fn extinction_problem(params: &SirsParams) -> Result<ExitProblem> {
    let xstar = endemic_equilibrium(params)?;
    let model = sirs_model(params)?;
    let pred: Arc<PredFn> = Arc::new(|z: &[f64]| z[0] > 0.0);
    let boundary: Arc<BoundaryFn> = Arc::new(|u: f64| vec![0.0, u]);
    ExitProblem::new(model, pred, boundary, xstar)
}

/// Least-squares linear extrapolation of (η, V̄_η) pairs to η = 0.
///
/// Returns (extrapolated value, slope in η).
pub fn extrapolate_vbar(points: &[(f64, f64)]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::Precondition(
            "extrapolation needs at least two offsets".into(),
        ));
    }
    let etas: Vec<f64> = points.iter().map(|p| p.0).collect();
    let vals: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (slope, intercept, _) = stats::ols(&etas, &vals)?;
    Ok((intercept, slope))
}

/// Monte Carlo summary of exit times at one population size.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExitTimeStats {
    pub n_pop: u64,
    pub mean: f64,
    pub se: f64,
    pub exits: usize,
    pub censored: usize,
}

/// Mean exit time from the problem's domain started at the grid point
/// nearest the equilibrium; statistics over uncensored exits only.
pub fn mean_exit_time(problem: &ExitProblem, n_pop: u64, cfg: &SimConfig) -> Result<ExitTimeStats> {
    let x0 = grid_snap(&problem.model, &problem.equilibrium, n_pop)?;
    let outcomes = exit_time_ensemble(&problem.model, n_pop, &x0, &*problem.domain, cfg)?;
    let times: Vec<f64> = outcomes
        .iter()
        .filter(|o| !o.is_censored())
        .map(|o| o.time())
        .collect();
    let censored = outcomes.len() - times.len();
    if times.is_empty() {
        return Err(Error::Numerical(format!(
            "all {} replicas were censored at N={n_pop}; raise t_max",
            outcomes.len()
        )));
    }
    Ok(ExitTimeStats {
        n_pop,
        mean: stats::mean(&times),
        se: stats::standard_error(&times),
        exits: times.len(),
        censored,
    })
}

/// Fit log(mean exit time) = intercept + slope · N by ordinary least
/// squares. The slope estimates the exit exponent V̄.
///
/// Takes (N, mean, se) triples; the standard errors ride along for
/// reporting. Needs at least three distinct population sizes and positive
/// means.
pub fn fit_exit_scaling(samples: &[(f64, f64, f64)]) -> Result<(f64, f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::Precondition(
            "exit-scaling fit needs at least three population sizes".into(),
        ));
    }
    let mut ns: Vec<f64> = samples.iter().map(|s| s.0).collect();
    for (n, mean, _) in samples {
        if !(*mean > 0.0) {
            return Err(Error::Precondition(format!(
                "mean exit time must be positive, got {mean} at N={n}"
            )));
        }
    }
    let mut distinct = ns.clone();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateDesign(
            "need at least three distinct population sizes".into(),
        ));
    }
    let logs: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    ns = samples.iter().map(|s| s.0).collect();
    stats::ols(&ns, &logs)
}

/// Extinction probability before time `t` of a linear birth–death process
/// with the given per-individual rates, started from `n0` individuals.
///
/// Uses the standard single-ancestor formula
/// q(t) = γ(e^{(β−γ)t} − 1) / (β e^{(β−γ)t} − γ) raised to n0, with the
/// equal-rates limit q(t) = βt/(1+βt) when |β−γ|t is below resolution, in
/// numerically stable exponential forms on both sides of criticality.
/// `t = ∞` gives the eventual extinction probability min(1, γ/β)^n0.
pub fn branching_extinction_prob(birth: f64, death: f64, n0: u64, t: f64) -> Result<f64> {
    if !(birth > 0.0) || !(death > 0.0) {
        return Err(Error::Precondition(format!(
            "rates must be strictly positive, got birth={birth}, death={death}"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Precondition(format!("time must be positive, got {t}")));
    }
    if n0 == 0 {
        return Ok(1.0);
    }
    let q = if t.is_infinite() {
        if birth > death {
            death / birth
        } else {
            1.0
        }
    } else if ((birth - death) * t).abs() < 1e-8 {
        birth * t / (1.0 + birth * t)
    } else if birth > death {
        // q = γ(1 − e^{−(β−γ)t}) / (β − γ e^{−(β−γ)t}); stable for large t.
        let r = (-(birth - death) * t).exp();
        death * (1.0 - r) / (birth - death * r)
    } else {
        let r = ((birth - death) * t).exp();
        death * (r - 1.0) / (birth * r - death)
    };
    Ok(q.clamp(0.0, 1.0).powi(n0 as i32))
}
