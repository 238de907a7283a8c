//! Generic minimizers used by the action optimization: limited-memory BFGS
//! over finite-difference gradients, and golden-section search on an
//! interval.
//!
//! Objectives may return +∞ (infeasible barrier); the line search rejects
//! such steps and the gradient falls back to one-sided differences next to
//! the barrier.

pub(crate) struct LbfgsOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    pub fd_step: f64,
    pub memory: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions { max_iters: 200, grad_tol: 1e-7, fd_step: 1e-6, memory: 8 }
    }
}

pub(crate) struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
    pub converged: bool,
}

#[cfg_attr(not(test), allow(dead_code))]
fn fd_gradient<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x: &mut [f64],
    fx: f64,
    step: f64,
    grad: &mut [f64],
) {
    for i in 0..grad.len() {
        let xi = x[i];
        x[i] = xi + step;
        let fp = f(x);
        x[i] = xi - step;
        let fm = f(x);
        x[i] = xi;
        grad[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * step)
        } else if fp.is_finite() {
            (fp - fx) / step
        } else if fm.is_finite() {
            (fx - fm) / step
        } else {
            0.0
        };
    }
}

/// Minimize `f` from `x0` with finite-difference gradients. Kept as the
/// reference route that validates the analytic action gradient.
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) fn minimize_lbfgs<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &LbfgsOptions,
) -> OptimOutcome {
    let step = opts.fd_step;
    // Route the single objective into both closures through a cell.
    let cell = std::cell::RefCell::new(&mut f);
    let value = |x: &[f64]| -> f64 { (*cell.borrow_mut())(x) };
    let gradient = |x: &mut [f64], fx: f64, out: &mut [f64]| {
        fd_gradient(&mut *cell.borrow_mut(), x, fx, step, out);
    };
    minimize_with(value, gradient, x0, opts)
}

/// Minimize with a caller-supplied gradient, evaluated only at accepted
/// iterates.
pub(crate) fn minimize_with<F, G>(mut f: F, mut g: G, x0: &[f64], opts: &LbfgsOptions) -> OptimOutcome
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&mut [f64], f64, &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    if n == 0 || !fx.is_finite() {
        return OptimOutcome { x, value: fx, iterations: 0, converged: n == 0 };
    }
    let mut grad = vec![0.0; n];
    g(&mut x, fx, &mut grad);

    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut iterations = 0u64;
    let mut converged = false;
    let mut flat_steps = 0u32;
    // Step memory for gradient steps, so a fallback without curvature
    // history still walks at the scale that worked last time.
    let mut grad_step = {
        let g0 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        1.0 / (1.0 + g0)
    };

    for _ in 0..opts.max_iters {
        iterations += 1;
        let gnorm = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gnorm <= opts.grad_tol {
            converged = true;
            break;
        }

        // Two-loop recursion for the search direction.
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let m = s_hist.len();
        let mut alphas = vec![0.0; m];
        for i in (0..m).rev() {
            let a = rho_hist[i]
                * s_hist[i].iter().zip(&dir).map(|(s, d)| s * d).sum::<f64>();
            alphas[i] = a;
            for (dj, yj) in dir.iter_mut().zip(&y_hist[i]) {
                *dj -= a * yj;
            }
        }
        if m > 0 {
            let last = m - 1;
            let sy: f64 = s_hist[last].iter().zip(&y_hist[last]).map(|(s, y)| s * y).sum();
            let yy: f64 = y_hist[last].iter().map(|y| y * y).sum();
            if sy > 0.0 && yy > 0.0 {
                let scale = sy / yy;
                for dj in dir.iter_mut() {
                    *dj *= scale;
                }
            }
        }
        for i in 0..m {
            let b = rho_hist[i]
                * y_hist[i].iter().zip(&dir).map(|(y, d)| y * d).sum::<f64>();
            for (dj, sj) in dir.iter_mut().zip(&s_hist[i]) {
                *dj += (alphas[i] - b) * sj;
            }
        }
        let mut slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let mut alpha = 1.0;
        let used_gradient = slope >= 0.0 || m == 0;
        if used_gradient {
            // No usable curvature history: scaled steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (dj, g) in dir.iter_mut().zip(&grad) {
                *dj = -g;
            }
            slope = -grad.iter().map(|g| g * g).sum::<f64>();
            alpha = grad_step;
        }

        // Backtracking Armijo line search that rejects infinite values; at
        // vanishing steps plain decrease is accepted to ride out rounding
        // noise in the objective.
        let mut accepted = false;
        let mut grew = false;
        let mut x_new = vec![0.0; n];
        let mut f_new = fx;
        for bt in 0..50 {
            for i in 0..n {
                x_new[i] = x[i] + alpha * dir[i];
            }
            let cand = f(&x_new);
            if cand.is_finite()
                && (cand <= fx + 1e-4 * alpha * slope || (alpha < 1e-9 && cand < fx))
            {
                f_new = cand;
                accepted = true;
                grew = bt == 0;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            converged = true;
            break;
        }
        if used_gradient {
            // Remember the working gradient-step scale; grow it after a
            // first-try acceptance.
            grad_step = if grew { alpha * 2.0 } else { alpha };
        }

        let mut grad_new = vec![0.0; n];
        g(&mut x_new, f_new, &mut grad_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = grad_new.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = yv.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-10 * s_norm * y_norm {
            s_hist.push(s);
            y_hist.push(yv);
            rho_hist.push(1.0 / sy);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
        }
        let df = fx - f_new;
        x = x_new;
        fx = f_new;
        grad = grad_new;
        if df <= 2e-14 * (1.0 + fx.abs()) {
            flat_steps += 1;
            if flat_steps >= 5 {
                converged = true;
                break;
            }
        } else {
            flat_steps = 0;
        }
    }

    OptimOutcome { x, value: fx, iterations, converged }
}

/// Golden-section minimization of a unimodal function on [lo, hi].
pub(crate) fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_iters: usize,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iters {
        if (b - a).abs() <= rel_tol * (a.abs() + b.abs()).max(1e-12) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
