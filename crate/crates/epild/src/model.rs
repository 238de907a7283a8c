//! Density-dependent jump models.
//!
//! A model is a population-scaled Markov jump process on the grid (1/N)Z^d:
//! reaction j shifts the scaled state by h_j/N and fires at rate N·β_j(x).
//! The drift b(x) = Σ_j β_j(x) h_j is the vector field of the fluid limit.
//! Models are immutable after construction and safe to share across worker
//! threads.
//!
//! The shipped reference is the two-compartment SIRS model without
//! demography, with state (infectious, removed) on the simplex
//! {z ≥ 0, z₁ + z₂ ≤ 1}:
//!
//! ```text
//! h₁ = ( 1, 0)   β₁(z) = β z₁ (1 − z₁ − z₂)   infection
//! h₂ = (−1, 1)   β₂(z) = γ z₁                 recovery
//! h₃ = ( 0,−1)   β₃(z) = ν z₂                 loss of immunity
//! ```

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Tolerance used by shipped domain predicates to absorb float noise on
/// inequality constraints.
pub const DOMAIN_TOL: f64 = 1e-12;

type RateFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type DomainFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// Closed half-space `{x : <normal, x> <= offset}`.
///
/// A conjunction of half-spaces optionally describes the domain exactly; it
/// is used for projecting tiny boundary excursions and for boundary-aware
/// tooling.
#[derive(Debug, Clone)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    /// Signed violation of the constraint at `x` (positive means outside).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dot: f64 = self.normal.iter().zip(x).map(|(n, v)| n * v).sum();
        dot - self.offset
    }
}

/// A density-dependent jump model: jump directions, rate evaluator, domain.
#[derive(Clone)]
pub struct JumpModel {
    id: String,
    d: usize,
    k: usize,
    jump_dirs_int: Vec<Vec<i64>>,
    jump_dirs: Vec<Vec<f64>>,
    rates: Arc<RateFn>,
    domain: Arc<DomainFn>,
    domain_desc: Option<Vec<HalfSpace>>,
    beta_bar: f64,
    lipschitz: f64,
}

impl std::fmt::Debug for JumpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JumpModel")
            .field("id", &self.id)
            .field("d", &self.d)
            .field("k", &self.k)
            .field("jump_dirs", &self.jump_dirs_int)
            .finish()
    }
}

impl JumpModel {
    /// Build a model from integer jump directions, a rate evaluator and a
    /// domain predicate.
    ///
    /// `beta_bar` is a declared upper bound on every rate over the domain and
    /// `lipschitz` a declared Lipschitz constant of the rate vector; both are
    /// testable empirically and used by tail bounds and diagnostics.
    pub fn new(
        id: impl Into<String>,
        jump_dirs: Vec<Vec<i64>>,
        rates: Arc<RateFn>,
        domain: Arc<DomainFn>,
        beta_bar: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        let id = id.into();
        let k = jump_dirs.len();
        if k == 0 {
            return Err(Error::InvalidParameter("model needs at least one reaction".into()));
        }
        let d = jump_dirs[0].len();
        if d == 0 {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        if jump_dirs.iter().any(|h| h.len() != d) {
            return Err(Error::InvalidParameter(
                "all jump directions must share the state dimension".into(),
            ));
        }
        if !(beta_bar > 0.0) || !(lipschitz >= 0.0) {
            return Err(Error::InvalidParameter(
                "rate bound and Lipschitz constant must be positive".into(),
            ));
        }
        let dirs_f64 = jump_dirs
            .iter()
            .map(|h| h.iter().map(|&v| v as f64).collect())
            .collect();
        Ok(JumpModel {
            id,
            d,
            k,
            jump_dirs_int: jump_dirs,
            jump_dirs: dirs_f64,
            rates,
            domain,
            domain_desc: None,
            beta_bar,
            lipschitz,
        })
    }

    pub fn with_domain_desc(mut self, desc: Vec<HalfSpace>) -> Self {
        self.domain_desc = Some(desc);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// State dimension d.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Number of reactions k.
    pub fn n_reactions(&self) -> usize {
        self.k
    }

    /// Jump directions as floats, one vector per reaction.
    pub fn jump_dirs(&self) -> &[Vec<f64>] {
        &self.jump_dirs
    }

    /// Jump directions as the underlying integer increments.
    pub fn jump_dirs_int(&self) -> &[Vec<i64>] {
        &self.jump_dirs_int
    }

    /// Declared supremum of the rates over the domain.
    pub fn beta_bar(&self) -> f64 {
        self.beta_bar
    }

    /// Declared Lipschitz constant of the rate vector.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain_desc(&self) -> Option<&[HalfSpace]> {
        self.domain_desc.as_deref()
    }

    /// Domain membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.d && (self.domain)(x)
    }

    /// Evaluate the rate vector into `out` without validity checks.
    pub fn rates_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.k);
        (self.rates)(x, out);
    }

    /// Rate vector at `x`, validated: every component finite and nonnegative.
    pub fn rates_checked(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.k];
        (self.rates)(x, &mut out);
        for (j, &b) in out.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(Error::Model(format!(
                    "rate {} evaluated to {b} at state {x:?}",
                    j + 1
                )));
            }
        }
        Ok(out)
    }

    /// Drift b(x) = Σ_j β_j(x) h_j. Errors when `x` is outside the domain.
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.contains(x) {
            return Err(Error::OutsideDomain(format!("{x:?}")));
        }
        Ok(self.drift_raw(x))
    }

    /// Drift evaluated without the domain check. Runge–Kutta stages probe
    /// states slightly outside the domain; the shipped rate formulas extend
    /// smoothly there.
    pub fn drift_raw(&self, x: &[f64]) -> Vec<f64> {
        let mut beta = vec![0.0; self.k];
        (self.rates)(x, &mut beta);
        let mut b = vec![0.0; self.d];
        for (bj, h) in beta.iter().zip(&self.jump_dirs) {
            for (bi, hi) in b.iter_mut().zip(h) {
                *bi += bj * hi;
            }
        }
        b
    }

    /// Project a state with tiny constraint violations back onto the domain.
    ///
    /// Succeeds when every half-space violation is at most `band`; returns
    /// None when no half-space description is available or the excursion is
    /// larger than the band.
    pub fn project_within(&self, x: &[f64], band: f64) -> Option<Vec<f64>> {
        if self.contains(x) {
            return Some(x.to_vec());
        }
        let desc = self.domain_desc.as_ref()?;
        let mut z = x.to_vec();
        for _ in 0..4 {
            let mut violated = false;
            for hs in desc {
                let v = hs.violation(&z);
                if v > 0.0 {
                    if v > band {
                        return None;
                    }
                    violated = true;
                    let n2: f64 = hs.normal.iter().map(|n| n * n).sum();
                    for (zi, ni) in z.iter_mut().zip(&hs.normal) {
                        *zi -= v * ni / n2;
                    }
                }
            }
            if !violated {
                break;
            }
        }
        if self.contains(&z) {
            Some(z)
        } else {
            None
        }
    }

    /// FNV-1a hash of the model identity (id string, dimensions, jump
    /// directions), used to stamp run manifests.
    pub fn param_hash(&self) -> u64 {
        let mut repr = String::new();
        let _ = write!(repr, "{}|d={}|k={}", self.id, self.d, self.k);
        for h in &self.jump_dirs_int {
            let _ = write!(repr, "|{h:?}");
        }
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for b in repr.as_bytes() {
            hash ^= *b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
        hash
    }
}

/// Parameters of the SIRS reference model: infection rate `beta`, recovery
/// rate `gamma`, immunity-loss rate `nu`, all strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SirsParams {
    pub beta: f64,
    pub gamma: f64,
    pub nu: f64,
}

impl SirsParams {
    pub fn new(beta: f64, gamma: f64, nu: f64) -> Result<Self> {
        let p = SirsParams { beta, gamma, nu };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma), ("nu", self.nu)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "SIRS parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Basic reproduction number beta / gamma.
    pub fn r0(&self) -> f64 {
        self.beta / self.gamma
    }
}

/// Basic reproduction number of the SIRS model.
pub fn r0(params: &SirsParams) -> f64 {
    params.r0()
}

/// Build the SIRS model on the simplex {z ≥ 0, z₁ + z₂ ≤ 1}.
pub fn sirs_model(params: &SirsParams) -> Result<JumpModel> {
    params.validate()?;
    let SirsParams { beta, gamma, nu } = *params;
    let rates = Arc::new(move |z: &[f64], out: &mut [f64]| {
        // Clamp at zero so rates never go (spuriously) negative just outside
        // the simplex, matching the x_i <= 0 => rate 0 convention.
        let z1 = z[0].max(0.0);
        let z2 = z[1].max(0.0);
        out[0] = beta * z1 * (1.0 - z1 - z2).max(0.0);
        out[1] = gamma * z1;
        out[2] = nu * z2;
    });
    let domain = Arc::new(|z: &[f64]| {
        z[0] >= -DOMAIN_TOL && z[1] >= -DOMAIN_TOL && z[0] + z[1] <= 1.0 + DOMAIN_TOL
    });
    let beta_bar = (beta / 4.0).max(gamma).max(nu);
    let lipschitz = (beta * 2.0f64.sqrt()).max(gamma).max(nu);
    let model = JumpModel::new(
        format!("sirs(beta={beta},gamma={gamma},nu={nu})"),
        vec![vec![1, 0], vec![-1, 1], vec![0, -1]],
        rates,
        domain,
        beta_bar,
        lipschitz,
    )?;
    Ok(model.with_domain_desc(vec![
        HalfSpace { normal: vec![-1.0, 0.0], offset: 0.0 },
        HalfSpace { normal: vec![0.0, -1.0], offset: 0.0 },
        HalfSpace { normal: vec![1.0, 1.0], offset: 1.0 },
    ]))
}

/// Endemic equilibrium of the SIRS fluid limit; requires beta > gamma.
pub fn endemic_equilibrium(params: &SirsParams) -> Result<Vec<f64>> {
    params.validate()?;
    let SirsParams { beta, gamma, nu } = *params;
    if beta <= gamma {
        return Err(Error::Precondition(format!(
            "no endemic equilibrium: beta={beta} <= gamma={gamma} (R0 <= 1)"
        )));
    }
    let denom = beta * (gamma + nu);
    Ok(vec![nu * (beta - gamma) / denom, gamma * (beta - gamma) / denom])
}

/// One-dimensional linear birth model: rate β(x) = x, jump +1, domain x ≥ 0.
///
/// Useful as an exactly solvable reference: the fluid limit is y' = y and
/// the local rate function has the closed form L(x, 1) = x − 1 − log x.
pub fn linear_birth_1d() -> JumpModel {
    let rates = Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0].max(0.0));
    let domain = Arc::new(|x: &[f64]| x[0] >= -DOMAIN_TOL);
    JumpModel::new("oned-birth", vec![vec![1]], rates, domain, f64::INFINITY, 1.0)
        .expect("static model")
        .with_domain_desc(vec![HalfSpace { normal: vec![-1.0], offset: 0.0 }])
}

/// One-dimensional pure death model: rate β(x) = x, jump −1, absorbing at 0.
pub fn pure_death_1d() -> JumpModel {
    let rates = Arc::new(|x: &[f64], out: &mut [f64]| out[0] = x[0].max(0.0));
    let domain = Arc::new(|x: &[f64]| x[0] >= -DOMAIN_TOL);
    JumpModel::new("oned-death", vec![vec![-1]], rates, domain, f64::INFINITY, 1.0)
        .expect("static model")
        .with_domain_desc(vec![HalfSpace { normal: vec![-1.0], offset: 0.0 }])
}

/// One-dimensional constant-rate counting model: rate β ≡ c, jump +1.
///
/// Started from 0 this is a scaled standard Poisson process.
pub fn constant_rate_1d(c: f64) -> Result<JumpModel> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "constant rate must be strictly positive, got {c}"
        )));
    }
    let rates = Arc::new(move |_: &[f64], out: &mut [f64]| out[0] = c);
    let domain = Arc::new(|x: &[f64]| x[0] >= -DOMAIN_TOL);
    Ok(
        JumpModel::new(format!("oned-const(rate={c})"), vec![vec![1]], rates, domain, c, 0.0)
            .expect("static model")
            .with_domain_desc(vec![HalfSpace { normal: vec![-1.0], offset: 0.0 }]),
    )
}

/// One-dimensional linear birth–death model: per-capita birth rate `birth`
/// and death rate `death`, jumps ±1, absorbing at 0.
pub fn birth_death_1d(birth: f64, death: f64) -> Result<JumpModel> {
    if !(birth > 0.0) || !(death > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "birth and death rates must be strictly positive, got {birth}, {death}"
        )));
    }
    let rates = Arc::new(move |x: &[f64], out: &mut [f64]| {
        let n = x[0].max(0.0);
        out[0] = birth * n;
        out[1] = death * n;
    });
    let domain = Arc::new(|x: &[f64]| x[0] >= -DOMAIN_TOL);
    Ok(JumpModel::new(
        format!("birth-death(birth={birth},death={death})"),
        vec![vec![1], vec![-1]],
        rates,
        domain,
        f64::INFINITY,
        birth.max(death),
    )
    .expect("static model")
    .with_domain_desc(vec![HalfSpace { normal: vec![-1.0], offset: 0.0 }]))
}

/// Nearest point of the domain grid A^N = A ∩ (1/N)Z^d to `x`.
///
/// The result has all coordinates integral after scaling by N and lies in
/// the domain. Ties are broken in favor of the candidate obtained by
/// rounding each coordinate half-up and then decrementing the largest
/// coordinate until feasible, then lexicographically.
pub fn grid_snap(model: &JumpModel, x: &[f64], n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Precondition("population size must be at least 1".into()));
    }
    if x.len() != model.dim() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!(
            "grid snap needs a finite state of dimension {}, got {x:?}",
            model.dim()
        )));
    }
    let d = model.dim();
    let nf = n as f64;
    let feasible = |counts: &[i64]| -> bool {
        let z: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
        model.contains(&z)
    };

    // Deterministic candidate: round half-up, then walk the largest
    // coordinate down until the domain accepts it.
    let mut cand: Vec<i64> = x.iter().map(|&xi| (xi * nf + 0.5).floor() as i64).collect();
    let mut budget = cand.iter().map(|&c| c.max(0)).sum::<i64>() + d as i64;
    while !feasible(&cand) && budget > 0 {
        let Some((imax, _)) = cand
            .iter()
            .enumerate()
            .max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i)))
        else {
            break;
        };
        if cand[imax] == 0 {
            break;
        }
        cand[imax] -= 1;
        budget -= 1;
    }
    let cand = if feasible(&cand) { Some(cand) } else { None };

    let dist2 = |counts: &[i64]| -> f64 {
        counts
            .iter()
            .zip(x)
            .map(|(&c, &xi)| {
                let e = c as f64 / nf - xi;
                e * e
            })
            .sum()
    };

    // Exhaustive search over grid boxes of growing radius; any feasible point
    // found caps the radius that can still contain a closer one.
    let base: Vec<i64> = x.iter().map(|&xi| (xi * nf).round() as i64).collect();
    let mut best: Option<(f64, Vec<i64>)> = cand.as_ref().map(|c| (dist2(c), c.clone()));
    let mut radius: i64 = 1;
    loop {
        let mut idx = vec![-radius; d];
        'points: loop {
            let counts: Vec<i64> = base.iter().zip(&idx).map(|(b, o)| b + o).collect();
            if feasible(&counts) {
                let dd = dist2(&counts);
                let better = match &best {
                    None => true,
                    Some((bd, bc)) => {
                        dd < bd - 1e-18 || (dd <= bd + 1e-18 && counts < *bc && Some(bc) != cand.as_ref())
                    }
                };
                if better {
                    best = Some((dd, counts));
                }
            }
            // Odometer over the box [-radius, radius]^d.
            for i in 0..d {
                idx[i] += 1;
                if idx[i] <= radius {
                    continue 'points;
                }
                idx[i] = -radius;
            }
            break;
        }
        let needed = match &best {
            Some((bd, _)) => (bd.sqrt() * nf).ceil() as i64 + 1,
            None => radius + 1,
        };
        if radius >= needed || radius > 4 * n as i64 + 4 {
            break;
        }
        radius = (radius * 2).min(needed);
    }

    match best {
        Some((_, counts)) => Ok(counts.iter().map(|&c| c as f64 / nf).collect()),
        None => Err(Error::SnapFailure(format!(
            "no feasible grid point near {x:?} for N={n}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sirs(beta: f64, gamma: f64, nu: f64) -> JumpModel {
        sirs_model(&SirsParams::new(beta, gamma, nu).unwrap()).unwrap()
    }

    #[test]
    fn sirs_rates_at_symmetric_point() {
        let m = sirs(2.0, 1.0, 1.0);
        let r = m.rates_checked(&[0.25, 0.25]).unwrap();
        assert!((r[0] - 0.25).abs() < 1e-15);
        assert!((r[1] - 0.25).abs() < 1e-15);
        assert!((r[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sirs_rates_vanish_on_boundary() {
        let m = sirs(1.7, 0.9, 0.3);
        let r = m.rates_checked(&[0.0, 0.4]).unwrap();
        assert_eq!(r[0], 0.0);
        assert_eq!(r[1], 0.0);
        let r = m.rates_checked(&[0.4, 0.0]).unwrap();
        assert_eq!(r[2], 0.0);
    }

    #[test]
    fn sirs_rejects_nonpositive_parameters() {
        assert!(SirsParams::new(0.0, 1.0, 1.0).is_err());
        assert!(SirsParams::new(2.0, -1.0, 1.0).is_err());
        assert!(SirsParams::new(2.0, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn drift_vanishes_at_endemic_equilibrium() {
        for (b, g, v) in [(2.0, 1.0, 1.0), (1.5, 1.0, 1.0), (3.0, 0.5, 0.25), (1.01, 1.0, 2.0)] {
            let p = SirsParams::new(b, g, v).unwrap();
            let m = sirs_model(&p).unwrap();
            let xs = endemic_equilibrium(&p).unwrap();
            let drift = m.drift(&xs).unwrap();
            let norm: f64 = drift.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!(norm < 1e-12, "|b(x*)| = {norm} for ({b},{g},{v})");
        }
    }

    #[test]
    fn endemic_equilibrium_values() {
        let p = SirsParams::new(2.0, 1.0, 1.0).unwrap();
        let xs = endemic_equilibrium(&p).unwrap();
        assert!((xs[0] - 0.25).abs() < 1e-15);
        assert!((xs[1] - 0.25).abs() < 1e-15);
        // beta=1.5, gamma=nu=1: x* = (1/6, 1/6).
        let p = SirsParams::new(1.5, 1.0, 1.0).unwrap();
        let xs = endemic_equilibrium(&p).unwrap();
        assert!((xs[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((xs[1] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn no_endemic_equilibrium_at_r0_one() {
        let p = SirsParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(endemic_equilibrium(&p).is_err());
    }

    #[test]
    fn r0_is_beta_over_gamma() {
        assert_eq!(r0(&SirsParams::new(2.0, 1.0, 0.3).unwrap()), 2.0);
        assert_eq!(r0(&SirsParams::new(1.0, 1.0, 9.0).unwrap()), 1.0);
        assert_eq!(r0(&SirsParams::new(0.5, 1.0, 0.1).unwrap()), 0.5);
    }

    #[test]
    fn drift_at_symmetric_equilibrium_and_origin() {
        let m = sirs(2.0, 1.0, 1.0);
        let b = m.drift(&[0.25, 0.25]).unwrap();
        assert!(b[0].abs() < 1e-15 && b[1].abs() < 1e-15);
        let b = m.drift(&[0.0, 0.0]).unwrap();
        assert_eq!(b, vec![0.0, 0.0]);
    }

    #[test]
    fn drift_of_linear_birth() {
        let m = linear_birth_1d();
        let b = m.drift(&[0.3]).unwrap();
        assert!((b[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn drift_rejects_states_outside_domain() {
        let m = sirs(2.0, 1.0, 1.0);
        assert!(m.drift(&[0.7, 0.7]).is_err());
        assert!(m.drift(&[-0.1, 0.2]).is_err());
    }

    #[test]
    fn grid_snap_identity_on_grid() {
        let m = sirs(2.0, 1.0, 1.0);
        let z = grid_snap(&m, &[0.25, 0.25], 4).unwrap();
        assert_eq!(z, vec![0.25, 0.25]);
    }

    #[test]
    fn grid_snap_nearest_interior() {
        let m = sirs(2.0, 1.0, 1.0);
        let z = grid_snap(&m, &[0.26, 0.25], 4).unwrap();
        assert_eq!(z, vec![0.25, 0.25]);
    }

    #[test]
    fn grid_snap_respects_simplex() {
        let m = sirs(2.0, 1.0, 1.0);
        let z = grid_snap(&m, &[0.3, 0.8], 10).unwrap();
        assert!(z[0] + z[1] <= 1.0 + DOMAIN_TOL);
        for zi in &z {
            assert!((zi * 10.0 - (zi * 10.0).round()).abs() < 1e-9);
        }
        // Must match the brute-force nearest feasible grid point.
        let mut best = f64::INFINITY;
        for c1 in 0..=10i64 {
            for c2 in 0..=(10 - c1) {
                let d2 = (c1 as f64 / 10.0 - 0.3).powi(2) + (c2 as f64 / 10.0 - 0.8).powi(2);
                best = best.min(d2);
            }
        }
        let got = (z[0] - 0.3).powi(2) + (z[1] - 0.8).powi(2);
        assert!((got - best).abs() < 1e-12, "got {got}, best {best}");
    }

    #[test]
    fn grid_snap_distance_bound() {
        let m = sirs(2.0, 1.0, 1.0);
        // Interior points: within the half-grid-diagonal bound.
        for (x, n) in [([0.13, 0.41], 7u64), ([0.5001, 0.2], 13), ([0.03, 0.03], 3)] {
            let z = grid_snap(&m, &x, n).unwrap();
            let dist: f64 = z
                .iter()
                .zip(&x)
                .map(|(zi, xi)| (zi - xi) * (zi - xi))
                .sum::<f64>()
                .sqrt();
            assert!(dist <= 2.0f64.sqrt() / (2.0 * n as f64) + 1e-12, "dist = {dist}");
        }
    }

    #[test]
    fn project_within_band() {
        let m = sirs(2.0, 1.0, 1.0);
        let z = m.project_within(&[-1e-10, 0.5], 1e-9).unwrap();
        assert!(m.contains(&z));
        assert!(m.project_within(&[-1e-3, 0.5], 1e-9).is_none());
    }

    #[test]
    fn param_hash_distinguishes_models() {
        let a = sirs(2.0, 1.0, 1.0);
        let b = sirs(2.0, 1.0, 1.0000001);
        assert_eq!(a.param_hash(), sirs(2.0, 1.0, 1.0).param_hash());
        assert_ne!(a.param_hash(), b.param_hash());
    }

    #[test]
    fn rates_nonnegative_on_sampled_grid() {
        let m = sirs(1.5, 1.0, 1.0);
        for i in 0..=20 {
            for j in 0..=(20 - i) {
                let z = [i as f64 / 20.0, j as f64 / 20.0];
                let r = m.rates_checked(&z).unwrap();
                assert!(r.iter().all(|&b| b >= 0.0 && b.is_finite()));
            }
        }
    }

    #[test]
    fn empirical_lipschitz_below_declared() {
        let m = sirs(1.5, 1.0, 1.0);
        let mut worst: f64 = 0.0;
        let pts: Vec<[f64; 2]> = (0..=10)
            .flat_map(|i| (0..=(10 - i)).map(move |j| [i as f64 / 10.0, j as f64 / 10.0]))
            .collect();
        for a in &pts {
            for b in &pts {
                let dx: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt();
                if dx < 1e-12 {
                    continue;
                }
                let ra = m.rates_checked(a).unwrap();
                let rb = m.rates_checked(b).unwrap();
                let dr: f64 = ra
                    .iter()
                    .zip(&rb)
                    .map(|(u, v)| (u - v) * (u - v))
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(dr / dx);
            }
        }
        assert!(worst <= m.lipschitz() + 1e-9, "empirical {worst} > declared {}", m.lipschitz());
    }
}
