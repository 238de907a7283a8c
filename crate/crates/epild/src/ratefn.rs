//! The local large-deviations rate function and the action of a path.
//!
//! For a state x with rate vector β(x) and jump directions h_j, the cost of
//! replacing the rates by μ ≥ 0 is the relative-entropy-type functional
//!
//! ```text
//! ℓ(x, μ) = Σ_j [ β_j(x) − μ_j + μ_j log(μ_j / β_j(x)) ],   0·log(0/·) = 0.
//! ```
//!
//! The local rate function at velocity y has two equivalent characterizations
//! (a primal infimum and a concave dual supremum):
//!
//! ```text
//! L(x, y) = inf { ℓ(x, μ) : μ ≥ 0, μ_j = 0 where β_j(x) = 0, Σ_j μ_j h_j = y }
//!         = sup_θ { <θ, y> − Σ_j β_j(x) (e^{<θ, h_j>} − 1) }.
//! ```
//!
//! L is finite exactly on the cone of velocities representable by the active
//! jump directions, vanishes only at the drift, and is strictly convex in y.
//! The dual is maximized here by safeguarded Newton; the primal optimizer is
//! recovered from the dual via μ*_j = β_j(x) e^{<θ*, h_j>}. The dual route is
//! numerically benign near states with vanishing rates because it never takes
//! a logarithm of a rate.
//!
//! The action of an absolutely continuous path φ on [0, T] is
//! I(φ) = ∫_0^T L(φ(t), φ'(t)) dt, computed segment-by-segment for piecewise
//! linear paths with Gauss–Legendre quadrature; nodes are interior to each
//! segment, so an endpoint where L degenerates is never evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::cone_contains;
use crate::model::JumpModel;
use crate::quad::gauss_legendre;

/// Rates below this threshold are treated as zero when deciding which jump
/// directions are active; the primal/dual split needs a strict-positivity
/// cut that is robust in floating point.
pub const ACTIVE_TOL: f64 = 1e-12;

/// Default quadrature order for path actions.
pub const DEFAULT_QUAD_ORDER: usize = 16;

const MAX_NEWTON_ITERS: usize = 120;
const THETA_DIVERGENCE_NORM: f64 = 1e3;

/// Finiteness classification of a local rate value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateStatus {
    /// y lies in the cone of active directions.
    Finite,
    /// y is not representable by the jump directions at all.
    InfiniteOutsideCone,
    /// y is representable by the full direction set but only using reactions
    /// whose rate vanishes at x.
    InfiniteZeroRate,
}

/// Value and optimizers of the local rate function at one (x, y) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRate {
    /// L(x, y): nonnegative, possibly +∞.
    pub value: f64,
    /// Dual optimizer θ*. When the supremum is approached only along a
    /// diverging sequence this is the last iterate; the value and μ* still
    /// carry the limit.
    pub theta_star: Option<Vec<f64>>,
    /// Primal optimizer μ*, recovered as β_j e^{<θ*, h_j>}.
    pub mu_star: Option<Vec<f64>>,
    pub status: RateStatus,
    /// |ℓ(x, μ*) − dual value| diagnostic; 0 for infinite values.
    pub dual_gap: f64,
}

impl LocalRate {
    fn infinite(status: RateStatus) -> Self {
        LocalRate {
            value: f64::INFINITY,
            theta_star: None,
            mu_star: None,
            status,
            dual_gap: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.status == RateStatus::Finite
    }
}

/// ℓ(x, μ) from a rate vector and a candidate μ, with the 0·log(0/·) = 0
/// convention. Returns +∞ when some μ_j > 0 pairs with a vanishing rate.
pub fn ell(beta: &[f64], mu: &[f64]) -> Result<f64> {
    if beta.len() != mu.len() {
        return Err(Error::Precondition(format!(
            "ell: mismatched lengths {} vs {}",
            beta.len(),
            mu.len()
        )));
    }
    let mut acc = 0.0;
    for (&b, &m) in beta.iter().zip(mu) {
        if !(b >= 0.0) || !(m >= 0.0) {
            return Err(Error::Precondition(format!(
                "ell: negative or NaN input (beta={b}, mu={m})"
            )));
        }
        if m == 0.0 {
            acc += b;
        } else if b <= ACTIVE_TOL {
            return Ok(f64::INFINITY);
        } else {
            acc += b - m + m * (m / b).ln();
        }
    }
    Ok(acc)
}

/// The dual integrand ℓ̃(x, y, θ) = <θ, y> − Σ_j β_j (e^{<θ, h_j>} − 1).
///
/// Exponent overflow saturates to −∞ in IEEE semantics: the value is a valid
/// lower bound that a maximizing line search simply rejects.
pub fn ell_tilde(beta: &[f64], jump_dirs: &[Vec<f64>], y: &[f64], theta: &[f64]) -> f64 {
    let mut acc: f64 = theta.iter().zip(y).map(|(t, v)| t * v).sum();
    for (&b, h) in beta.iter().zip(jump_dirs) {
        if b > 0.0 {
            let e: f64 = theta.iter().zip(h).map(|(t, hi)| t * hi).sum();
            acc -= b * (e.exp() - 1.0);
        }
    }
    acc
}

struct DualProblem<'a> {
    dirs: &'a [Vec<f64>],
    beta: &'a [f64],
    active: Vec<usize>,
    y: &'a [f64],
    d: usize,
}

impl DualProblem<'_> {
    fn objective(&self, theta: &[f64]) -> f64 {
        let mut acc: f64 = theta.iter().zip(self.y).map(|(t, v)| t * v).sum();
        for &j in &self.active {
            let e: f64 = theta.iter().zip(&self.dirs[j]).map(|(t, h)| t * h).sum();
            acc -= self.beta[j] * (e.exp() - 1.0);
        }
        acc
    }

    fn gradient(&self, theta: &[f64], out: &mut [f64]) {
        out.copy_from_slice(self.y);
        for &j in &self.active {
            let e: f64 = theta.iter().zip(&self.dirs[j]).map(|(t, h)| t * h).sum();
            let w = self.beta[j] * e.exp();
            for (o, h) in out.iter_mut().zip(&self.dirs[j]) {
                *o -= w * h;
            }
        }
    }

    /// Negated Hessian Σ β_j e^{<θ,h_j>} h_j h_jᵀ (positive semidefinite).
    fn neg_hessian(&self, theta: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for &j in &self.active {
            let h = &self.dirs[j];
            let e: f64 = theta.iter().zip(h).map(|(t, hi)| t * hi).sum();
            let w = self.beta[j] * e.exp();
            for a in 0..self.d {
                for b in 0..self.d {
                    out[a * self.d + b] += w * h[a] * h[b];
                }
            }
        }
    }
}

/// Solve the d×d system M s = g by Gaussian elimination with partial
/// pivoting; None when the matrix is numerically singular.
fn solve_dense(m: &[f64], g: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut b = g.to_vec();
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..d {
        let mut piv = col;
        for row in col + 1..d {
            if a[row * d + col].abs() > a[piv * d + col].abs() {
                piv = row;
            }
        }
        if a[piv * d + col].abs() < 1e-12 * scale {
            return None;
        }
        if piv != col {
            for j in 0..d {
                a.swap(col * d + j, piv * d + j);
            }
            b.swap(col, piv);
        }
        let inv = 1.0 / a[col * d + col];
        for row in col + 1..d {
            let f = a[row * d + col] * inv;
            if f != 0.0 {
                for j in col..d {
                    a[row * d + j] -= f * a[col * d + j];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut s = vec![0.0; d];
    for row in (0..d).rev() {
        let mut acc = b[row];
        for j in row + 1..d {
            acc -= a[row * d + j] * s[j];
        }
        s[row] = acc / a[row * d + row];
    }
    Some(s)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Local rate by the dual route: maximize the concave ℓ̃(x, y, ·).
pub fn local_rate_dual(model: &JumpModel, x: &[f64], y: &[f64]) -> Result<LocalRate> {
    local_rate_dual_warm(model, x, y, None)
}

/// Dual solve with an optional warm-start multiplier, used when sweeping
/// quadrature nodes along a path where the optimizer moves slowly.
pub(crate) fn local_rate_dual_warm(
    model: &JumpModel,
    x: &[f64],
    y: &[f64],
    warm: Option<&[f64]>,
) -> Result<LocalRate> {
    if !model.contains(x) {
        return Err(Error::OutsideDomain(format!("{x:?}")));
    }
    if y.len() != model.dim() {
        return Err(Error::Precondition(format!(
            "velocity has dimension {}, model expects {}",
            y.len(),
            model.dim()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!("non-finite velocity {y:?}")));
    }
    let beta = model.rates_checked(x)?;
    solve_dual(model, &beta, y, warm)
}

fn solve_dual(
    model: &JumpModel,
    beta: &[f64],
    y: &[f64],
    warm: Option<&[f64]>,
) -> Result<LocalRate> {
    let d = model.dim();
    let dirs = model.jump_dirs();
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] > ACTIVE_TOL).collect();

    // Finiteness is decided exactly by linear feasibility over the active
    // directions, before any iteration runs.
    let active_dirs: Vec<&[f64]> = active.iter().map(|&j| dirs[j].as_slice()).collect();
    if !cone_contains(&active_dirs, y, ACTIVE_TOL) {
        let all_dirs: Vec<&[f64]> = dirs.iter().map(|h| h.as_slice()).collect();
        let status = if cone_contains(&all_dirs, y, ACTIVE_TOL) {
            RateStatus::InfiniteZeroRate
        } else {
            RateStatus::InfiniteOutsideCone
        };
        return Ok(LocalRate::infinite(status));
    }

    let problem = DualProblem { dirs, beta, active, y, d };
    let scale = 1.0 + norm2(y) + beta.iter().sum::<f64>();
    let grad_tol = 1e-12 * scale;

    let mut theta = match warm {
        Some(w) if w.len() == d && problem.objective(w).is_finite() => w.to_vec(),
        _ => vec![0.0; d],
    };
    let mut f = problem.objective(&theta);
    if !f.is_finite() {
        theta = vec![0.0; d];
        f = 0.0;
    }
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    let mut converged = false;

    for _ in 0..MAX_NEWTON_ITERS {
        problem.gradient(&theta, &mut grad);
        if norm2(&grad) <= grad_tol {
            converged = true;
            break;
        }
        problem.neg_hessian(&theta, &mut hess);
        let (dir, mut alpha) = match solve_dense(&hess, &grad, d) {
            Some(s) => (s, 1.0),
            // Near-singular curvature (some rates almost zero): fall back to
            // plain ascent with a conservative initial step.
            None => {
                let g = grad.clone();
                let a0 = 1.0 / (1.0 + norm2(&g));
                (g, a0)
            }
        };
        let mut slope: f64 = grad.iter().zip(&dir).map(|(g, s)| g * s).sum();
        // Endgame: once the gradient is small the objective sits at its f64
        // resolution and a damped search cannot make progress, but the full
        // Newton step still contracts the gradient quadratically.
        if slope > 0.0 && norm2(&grad) <= 1e-4 * scale {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, s)| t + s).collect();
            let fc = problem.objective(&cand);
            if fc.is_finite() && fc >= f - 1e-12 * (1.0 + f.abs()) {
                theta = cand;
                f = fc;
                continue;
            }
        }
        let dir = if slope <= 0.0 {
            // The solve lost positive-definiteness; use the gradient.
            slope = grad.iter().map(|g| g * g).sum();
            alpha = 1.0 / (1.0 + norm2(&grad));
            grad.clone()
        } else {
            dir
        };
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, s)| t + alpha * s).collect();
            let fc = problem.objective(&cand);
            if fc.is_finite() && fc >= f + 1e-4 * alpha * slope {
                theta = cand;
                f = fc;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No uphill step exists at f64 resolution: the supremum is
            // attained (or approached along a maximizing sequence whose
            // residual gradient has already decayed below resolution).
            converged = norm2(&grad) <= 1e-6 * scale;
            break;
        }
        if norm2(&theta) > THETA_DIVERGENCE_NORM {
            // Maximizing-sequence regime: some coupling <θ, h_j> drifts to
            // −∞ while the value and the recovered μ* converge.
            converged = true;
            break;
        }
    }

    if !converged {
        problem.gradient(&theta, &mut grad);
        if norm2(&grad) > 1e-6 * scale {
            return Err(Error::Numerical(format!(
                "dual ascent did not converge: |grad|={:.3e}, theta={theta:?}, value={f:.6e}",
                norm2(&grad)
            )));
        }
    }

    let mut mu = vec![0.0; beta.len()];
    for &j in &problem.active {
        let e: f64 = theta.iter().zip(&dirs[j]).map(|(t, h)| t * h).sum();
        mu[j] = beta[j] * e.exp();
    }
    let value = f.max(0.0);
    let gap = match ell(beta, &mu) {
        Ok(pv) if pv.is_finite() => (pv - value).abs(),
        _ => f64::INFINITY,
    };
    Ok(LocalRate {
        value,
        theta_star: Some(theta),
        mu_star: Some(mu),
        status: RateStatus::Finite,
        dual_gap: gap,
    })
}

/// Local rate by the primal route: solve the dual, recover
/// μ*_j = β_j e^{<θ*, h_j>}, verify the linear constraint Σ_j μ*_j h_j = y,
/// and evaluate ℓ(x, μ*).
pub fn local_rate_primal(model: &JumpModel, x: &[f64], y: &[f64]) -> Result<LocalRate> {
    let dual = local_rate_dual(model, x, y)?;
    if !dual.is_finite() {
        return Ok(dual);
    }
    let beta = model.rates_checked(x)?;
    let mu = dual.mu_star.clone().expect("finite dual carries mu");
    let dirs = model.jump_dirs();
    let mut recon = vec![0.0; model.dim()];
    for (mj, h) in mu.iter().zip(dirs) {
        for (r, hi) in recon.iter_mut().zip(h) {
            *r += mj * hi;
        }
    }
    let resid: f64 = recon
        .iter()
        .zip(y)
        .map(|(r, v)| (r - v) * (r - v))
        .sum::<f64>()
        .sqrt();
    let tol = 1e-8 * (1.0 + norm2(y));
    if resid > tol {
        return Err(Error::Numerical(format!(
            "primal recovery violates the velocity constraint: residual {resid:.3e} \
             (theta={:?})",
            dual.theta_star
        )));
    }
    let value = ell(&beta, &mu)?;
    let gap = (value - dual.value).abs();
    Ok(LocalRate {
        value,
        theta_star: dual.theta_star,
        mu_star: Some(mu),
        status: RateStatus::Finite,
        dual_gap: gap,
    })
}

/// Piecewise-linear path: strictly increasing knot times with one state per
/// knot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlPath {
    pub knot_times: Vec<f64>,
    pub knot_points: Vec<Vec<f64>>,
}

impl PlPath {
    pub fn new(knot_times: Vec<f64>, knot_points: Vec<Vec<f64>>) -> Result<Self> {
        if knot_times.len() != knot_points.len() {
            return Err(Error::Precondition(format!(
                "knot count mismatch: {} times vs {} points",
                knot_times.len(),
                knot_points.len()
            )));
        }
        if knot_times.len() < 2 {
            return Err(Error::Precondition("a path needs at least two knots".into()));
        }
        if knot_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("knot times must be strictly increasing".into()));
        }
        let d = knot_points[0].len();
        if knot_points.iter().any(|p| p.len() != d) {
            return Err(Error::Precondition("knot points must share one dimension".into()));
        }
        if knot_points.iter().flatten().any(|v| !v.is_finite())
            || knot_times.iter().any(|t| !t.is_finite())
        {
            return Err(Error::Precondition("path contains non-finite entries".into()));
        }
        Ok(PlPath { knot_times, knot_points })
    }

    /// Straight line from `a` to `b` over [0, T] with `segments` pieces.
    pub fn line(a: &[f64], b: &[f64], t_end: f64, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::Precondition("need at least one segment".into()));
        }
        let times: Vec<f64> = (0..=segments)
            .map(|i| t_end * i as f64 / segments as f64)
            .collect();
        let points: Vec<Vec<f64>> = (0..=segments)
            .map(|i| {
                let w = i as f64 / segments as f64;
                a.iter().zip(b).map(|(ai, bi)| ai + w * (bi - ai)).collect()
            })
            .collect();
        PlPath::new(times, points)
    }

    pub fn dim(&self) -> usize {
        self.knot_points[0].len()
    }

    pub fn segments(&self) -> usize {
        self.knot_times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.knot_times.last().unwrap()
    }

    pub fn start(&self) -> &[f64] {
        &self.knot_points[0]
    }

    pub fn end(&self) -> &[f64] {
        self.knot_points.last().unwrap()
    }

    /// Value at time t by linear interpolation, clamped at the ends.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        if t <= self.knot_times[0] {
            return self.knot_points[0].clone();
        }
        if t >= self.horizon() {
            return self.end().to_vec();
        }
        let idx = self.knot_times.partition_point(|&u| u <= t);
        let (t0, t1) = (self.knot_times[idx - 1], self.knot_times[idx]);
        let w = (t - t0) / (t1 - t0);
        self.knot_points[idx - 1]
            .iter()
            .zip(&self.knot_points[idx])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Resample onto `segments` uniform pieces over the same horizon. When
    /// the new grid refines the old one the path is unchanged as a function.
    pub fn resample_uniform(&self, segments: usize) -> Result<Self> {
        if segments == 0 {
            return Err(Error::Precondition("need at least one segment".into()));
        }
        let t0 = self.knot_times[0];
        let t_end = self.horizon();
        let times: Vec<f64> = (0..=segments)
            .map(|i| t0 + (t_end - t0) * i as f64 / segments as f64)
            .collect();
        let points = times.iter().map(|&t| self.interpolate(t)).collect();
        PlPath::new(times, points)
    }

    /// Same knot points over a rescaled horizon.
    pub fn rescale_horizon(&self, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::Precondition("horizon must be positive".into()));
        }
        let t0 = self.knot_times[0];
        let span = self.horizon() - t0;
        let times = self
            .knot_times
            .iter()
            .map(|&t| (t - t0) / span * t_end)
            .collect();
        PlPath::new(times, self.knot_points.clone())
    }
}

/// Action I(φ) = ∫ L(φ(t), φ'(t)) dt of a piecewise-linear path.
///
/// Each segment is integrated with a `quad_order`-point Gauss–Legendre rule;
/// a node where L is infinite makes the whole action +∞, and node-level
/// failures carry the segment index.
pub fn path_rate(model: &JumpModel, path: &PlPath, quad_order: usize) -> Result<f64> {
    path_rate_with_cache(model, path, quad_order, &mut Vec::new())
}

/// Action with a caller-owned warm-start cache of dual multipliers, one slot
/// per (segment, node). Repeated evaluations of nearby paths (as in the
/// action minimizer's finite-difference sweeps) then start each Newton solve
/// from the previous optimum.
pub(crate) fn path_rate_with_cache(
    model: &JumpModel,
    path: &PlPath,
    quad_order: usize,
    cache: &mut Vec<Option<Vec<f64>>>,
) -> Result<f64> {
    if quad_order == 0 {
        return Err(Error::Precondition("quadrature order must be at least 1".into()));
    }
    if path.dim() != model.dim() {
        return Err(Error::Precondition(format!(
            "path dimension {} does not match model dimension {}",
            path.dim(),
            model.dim()
        )));
    }
    for (i, p) in path.knot_points.iter().enumerate() {
        if !model.contains(p) {
            return Err(Error::OutsideDomain(format!("knot {i}: {p:?}")));
        }
    }
    let (nodes, weights) = gauss_legendre(quad_order);
    let d = model.dim();
    let n_slots = path.segments() * quad_order;
    if cache.len() != n_slots {
        cache.clear();
        cache.resize(n_slots, None);
    }
    let mut total = 0.0;
    let mut last: Option<Vec<f64>> = None;
    let mut xt = vec![0.0; d];
    let mut slope = vec![0.0; d];
    for seg in 0..path.segments() {
        let (ta, tb) = (path.knot_times[seg], path.knot_times[seg + 1]);
        let (za, zb) = (&path.knot_points[seg], &path.knot_points[seg + 1]);
        let dt = tb - ta;
        for i in 0..d {
            slope[i] = (zb[i] - za[i]) / dt;
        }
        if slope.iter().any(|s| !s.is_finite()) {
            return Err(Error::Precondition(format!(
                "segment {seg} has a non-finite slope"
            )));
        }
        let half = 0.5 * dt;
        for (node_idx, (node, w)) in nodes.iter().zip(&weights).enumerate() {
            let lambda = 0.5 * (node + 1.0);
            for i in 0..d {
                xt[i] = za[i] + lambda * (zb[i] - za[i]);
            }
            let slot = seg * quad_order + node_idx;
            let warm = cache[slot].as_deref().or(last.as_deref());
            let lr = local_rate_dual_warm(model, &xt, &slope, warm)
                .map_err(|e| Error::PathSegment { segment: seg, source: Box::new(e) })?;
            if !lr.is_finite() {
                return Ok(f64::INFINITY);
            }
            total += w * half * lr.value;
            cache[slot] = lr.theta_star.clone();
            last = lr.theta_star;
        }
    }
    Ok(total)
}

/// Action value plus its gradient with respect to every knot coordinate,
/// via the envelope identity: at the dual optimizer θ*,
/// ∂L/∂y = θ* and ∂L/∂x = −Σ_j ∇β_j(x) (e^{<θ*, h_j>} − 1), where the rate
/// gradients are finite-differenced (the expensive Newton solves are not).
///
/// Returns (value, gradient) with the gradient laid out knot-major; the
/// gradient is meaningless when the value is +∞.
pub(crate) fn path_rate_grad(
    model: &JumpModel,
    path: &PlPath,
    quad_order: usize,
    cache: &mut Vec<Option<Vec<f64>>>,
) -> Result<(f64, Vec<f64>)> {
    let d = model.dim();
    let k = model.n_reactions();
    let n_knots = path.knot_points.len();
    let mut grad = vec![0.0; n_knots * d];
    for (i, p) in path.knot_points.iter().enumerate() {
        if !model.contains(p) {
            return Err(Error::OutsideDomain(format!("knot {i}: {p:?}")));
        }
    }
    let (nodes, weights) = gauss_legendre(quad_order);
    let n_slots = path.segments() * quad_order;
    if cache.len() != n_slots {
        cache.clear();
        cache.resize(n_slots, None);
    }
    let mut total = 0.0;
    let mut last: Option<Vec<f64>> = None;
    let mut xt = vec![0.0; d];
    let mut slope = vec![0.0; d];
    let mut probe = vec![0.0; d];
    let mut rp = vec![0.0; k];
    let mut rm = vec![0.0; k];
    let mut lx = vec![0.0; d];
    const HX: f64 = 1e-6;
    for seg in 0..path.segments() {
        let (ta, tb) = (path.knot_times[seg], path.knot_times[seg + 1]);
        let (za, zb) = (&path.knot_points[seg], &path.knot_points[seg + 1]);
        let dt = tb - ta;
        for i in 0..d {
            slope[i] = (zb[i] - za[i]) / dt;
        }
        let half = 0.5 * dt;
        for (node_idx, (node, w)) in nodes.iter().zip(&weights).enumerate() {
            let lambda = 0.5 * (node + 1.0);
            for i in 0..d {
                xt[i] = za[i] + lambda * (zb[i] - za[i]);
            }
            let slot = seg * quad_order + node_idx;
            let warm = cache[slot].as_deref().or(last.as_deref());
            let lr = local_rate_dual_warm(model, &xt, &slope, warm)
                .map_err(|e| Error::PathSegment { segment: seg, source: Box::new(e) })?;
            if !lr.is_finite() {
                return Ok((f64::INFINITY, grad));
            }
            let theta = lr.theta_star.as_ref().expect("finite rate carries theta");
            let mu = lr.mu_star.as_ref().expect("finite rate carries mu");
            let beta = model.rates_checked(&xt)?;
            // dL/dx_c = -sum_j dbeta_j/dx_c (e^{<theta,h_j>} - 1); the
            // exponential factors are mu_j / beta_j on the active set.
            lx.fill(0.0);
            for c in 0..d {
                probe.copy_from_slice(&xt);
                probe[c] = xt[c] + HX;
                model.rates_into(&probe, &mut rp);
                probe[c] = xt[c] - HX;
                model.rates_into(&probe, &mut rm);
                for j in 0..k {
                    if beta[j] > ACTIVE_TOL {
                        let dbeta = (rp[j] - rm[j]) / (2.0 * HX);
                        lx[c] -= dbeta * (mu[j] / beta[j] - 1.0);
                    }
                }
            }
            total += w * half * lr.value;
            let wh = w * half;
            for c in 0..d {
                grad[seg * d + c] += wh * ((1.0 - lambda) * lx[c] - theta[c] / dt);
                grad[(seg + 1) * d + c] += wh * (lambda * lx[c] + theta[c] / dt);
            }
            cache[slot] = lr.theta_star.clone();
            last = cache[slot].clone();
        }
    }
    Ok((total, grad))
}
