//! Drift nonlinearities: one-sided Lipschitz verification and Yosida
//! regularization.
//!
//! A drift `f` with one-sided Lipschitz constant `kappa` decomposes as
//! `f(u) = phi(u) + kappa u` where `phi` is non-increasing. The resolvent
//! `(I - lambda phi)^{-1}` is computed by monotone bracketing, since
//! `v - lambda phi(v)` is strictly increasing and has exactly one sign
//! change against any target.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DriftError {
    #[error("yosida index must be >= 1")]
    BadIndex,
    #[error("resolvent bracket failed to capture a sign change after {doublings} doublings at u = {u}")]
    BracketExpansion { u: f64, doublings: u32 },
    #[error("need at least 2 samples")]
    TooFewSamples,
    #[error("sample range must satisfy a < b")]
    BadRange,
    #[error("odd polynomial needs an odd number of lower-order coefficients")]
    BadPolynomial,
    #[error("drift evaluator returned a non-finite value at u = {0}")]
    NonFinite(f64),
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A drift `f` with its one-sided Lipschitz constant and growth envelope
/// `|f(u)| <= K exp(K |u|^nu)`.
#[derive(Clone)]
pub struct DriftSpec {
    name: String,
    f: ScalarFn,
    kappa: f64,
    growth_k: f64,
    growth_nu: f64,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("DriftSpec")
            .field("name", &self.name)
            .field("kappa", &self.kappa)
            .field("growth_k", &self.growth_k)
            .field("growth_nu", &self.growth_nu)
            .finish()
    }
}

impl DriftSpec {
    pub fn from_fn(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        kappa: f64,
        growth_k: f64,
        growth_nu: f64,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f), kappa, growth_k, growth_nu }
    }

    /// `f(u) = u - u^3`, dissipative double well with kappa = 1.
    pub fn allen_cahn() -> Self {
        Self::from_fn("allen-cahn", |u| u - u * u * u, 1.0, 2.0, 0.5)
    }

    /// `f(u) = -u^3`, kappa = 0.
    pub fn cubic_decay() -> Self {
        Self::from_fn("cubic-decay", |u| -u * u * u, 0.0, 2.0, 0.5)
    }

    /// `f(u) = -u`, kappa = -1; exercises the kappa < 0 branches.
    pub fn linear_decay() -> Self {
        Self::from_fn("linear-decay", |u| -u, -1.0, 1.0, 0.5)
    }

    /// Discontinuous non-increasing step `f(u) = -sign(u)`, kappa = 0.
    /// Not locally Lipschitz; only the resolvent smooths it.
    pub fn step_decay() -> Self {
        Self::from_fn(
            "step-decay",
            |u| {
                if u > 0.0 {
                    -1.0
                } else if u < 0.0 {
                    1.0
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            0.0,
        )
    }

    /// `f(u) = -sinh(u)`: genuinely exponential growth (nu = 1), kappa = -1.
    pub fn sinh_decay() -> Self {
        Self::from_fn("sinh-decay", |u| -u.sinh(), -1.0, 1.0, 1.0)
    }

    /// `f = 0`; the fixed-point map degenerates to the identity.
    pub fn zero() -> Self {
        Self::from_fn("zero", |_| 0.0, 0.0, 1.0, 0.0)
    }

    /// Odd polynomial with negative leading term:
    /// `f(u) = -leading u^(2m+1) + sum_k lower[k] u^k` with
    /// `lower.len() = 2m+1` coefficients for degrees `0..=2m`.
    /// The one-sided constant is `sup f'`, located numerically.
    pub fn odd_polynomial(leading: f64, lower: &[f64]) -> Result<Self, DriftError> {
        if lower.len() % 2 == 0 || !(leading > 0.0) {
            return Err(DriftError::BadPolynomial);
        }
        let deg = lower.len(); // 2m + 1
        let lower: Vec<f64> = lower.to_vec();
        let coeffs = lower.clone();
        let f = move |u: f64| {
            let mut v = -leading * u.powi(deg as i32);
            let mut p = 1.0;
            for &a in &coeffs {
                v += a * p;
                p *= u;
            }
            v
        };
        // f'(u) coefficients: derivative of lower part plus leading term.
        let dlead = -leading * deg as f64;
        let dlower: Vec<f64> = (1..deg).map(|k| lower[k] * k as f64).collect();
        let fp = move |u: f64| {
            let mut v = dlead * u.powi(deg as i32 - 1);
            let mut p = 1.0;
            for &a in &dlower {
                v += a * p;
                p *= u;
            }
            v
        };
        let kappa = sup_by_scan(&fp, cauchy_bound(leading * deg as f64, &lower));
        Ok(Self::from_fn(format!("odd-poly-{deg}"), f, kappa, 2.0 + norm_inf(&lower), 0.5))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn growth_k(&self) -> f64 {
        self.growth_k
    }

    pub fn growth_nu(&self) -> f64 {
        self.growth_nu
    }

    /// Monotone part `phi(u) = f(u) - kappa u`.
    pub fn phi(&self, u: f64) -> f64 {
        self.eval(u) - self.kappa * u
    }

    /// Largest sampled excess of `|f(u)|` over `K exp(K |u|^nu)`.
    pub fn growth_excess(&self, samples: usize, range: (f64, f64), seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(range.0, range.1).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let u: f64 = dist.sample(&mut rng);
            let bound = self.growth_k * (self.growth_k * u.abs().powf(self.growth_nu)).exp();
            worst = worst.max(self.eval(u).abs() - bound);
        }
        worst
    }
}

fn norm_inf(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Cauchy root bound for the derivative polynomial; beyond this radius the
/// negative leading term dominates, so sup f' lies inside.
fn cauchy_bound(lead_abs: f64, lower: &[f64]) -> f64 {
    let m = lower
        .iter()
        .enumerate()
        .map(|(k, a)| (a.abs() * (k.max(1)) as f64) / lead_abs)
        .fold(0.0f64, f64::max);
    2.0 * (1.0 + m)
}

fn sup_by_scan(f: &impl Fn(f64) -> f64, radius: f64) -> f64 {
    let n = 200_001usize;
    let mut best_x = 0.0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let x = -radius + 2.0 * radius * i as f64 / (n - 1) as f64;
        let v = f(x);
        if v > best {
            best = v;
            best_x = x;
        }
    }
    // Golden-section refinement around the best cell.
    let h = 2.0 * radius / (n - 1) as f64;
    let (mut a, mut b) = (best_x - h, best_x + h);
    let inv_phi = 0.618_033_988_749_894_9;
    for _ in 0..80 {
        let c = b - inv_phi * (b - a);
        let d = a + inv_phi * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b))) + 1e-9
}

/// Outcome of the sampled one-sided Lipschitz check.
#[derive(Debug, Clone)]
pub struct OneSidedReport {
    /// max over sampled pairs u1 < u2 of f(u2) - f(u1) - kappa (u2 - u1)
    pub max_violation: f64,
    /// Same quantity through the sign formulation; equal up to rounding.
    pub max_violation_sign_form: f64,
    pub threshold: f64,
    pub pass: bool,
    pub worst_pair: (f64, f64),
}

/// Sample `samples` points in `[a, b]` and bound the dissipativity defect
/// over all ordered pairs (exact on the sample via a prefix-min sweep).
/// A positive violation is a report outcome, not an error.
pub fn verify_one_sided_lipschitz(
    drift: &DriftSpec,
    samples: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<OneSidedReport, DriftError> {
    if samples < 2 {
        return Err(DriftError::TooFewSamples);
    }
    if !(range.0 < range.1) {
        return Err(DriftError::BadRange);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new_inclusive(range.0, range.1).unwrap();
    let mut us: Vec<f64> = (0..samples).map(|_| dist.sample(&mut rng)).collect();
    us.push(range.0);
    us.push(range.1);
    us.sort_by(|a, b| a.partial_cmp(b).unwrap());
    us.dedup();

    let phis: Vec<f64> = us.iter().map(|&u| drift.phi(u)).collect();
    let fscale = us.iter().map(|&u| drift.eval(u).abs()).fold(0.0f64, f64::max);

    // max over i < j of phi(u_j) - phi(u_i) = max_j (phi_j - min_{i<j} phi_i).
    let mut max_violation = f64::NEG_INFINITY;
    let mut worst = (us[0], us[0]);
    let mut run_min = phis[0];
    let mut run_min_at = us[0];
    for j in 1..us.len() {
        let v = phis[j] - run_min;
        if v > max_violation {
            max_violation = v;
            worst = (run_min_at, us[j]);
        }
        if phis[j] < run_min {
            run_min = phis[j];
            run_min_at = us[j];
        }
    }

    // Sign form over adjacent pairs: (f(u1) - f(u2)) sgn(u1 - u2) - kappa |u1 - u2|.
    let mut sign_form = f64::NEG_INFINITY;
    for j in 1..us.len() {
        let (u1, u2) = (us[j], us[j - 1]);
        let v = (drift.eval(u1) - drift.eval(u2)) * (u1 - u2).signum()
            - drift.kappa * (u1 - u2).abs();
        sign_form = sign_form.max(v);
    }

    let threshold = 1e-9 * (1.0 + fscale);
    Ok(OneSidedReport {
        max_violation,
        max_violation_sign_form: sign_form,
        threshold,
        pass: max_violation <= threshold,
        worst_pair: worst,
    })
}

/// Solve `v - lambda phi(v) = u` for non-increasing `phi` and `lambda > 0`.
///
/// The map `g(v) = v - lambda phi(v)` is strictly increasing, so the root is
/// unique; at a jump of `phi` the bracket collapses onto the jump point,
/// which is the maximal monotone selection.
pub fn monotone_resolvent<F: Fn(f64) -> f64>(
    phi: F,
    lambda: f64,
    u: f64,
    tol: f64,
) -> Result<f64, DriftError> {
    let g = |v: f64| v - lambda * phi(v);
    let scale = 1.0 + u.abs();
    let phi_u = phi(u);
    if !phi_u.is_finite() {
        return Err(DriftError::NonFinite(u));
    }
    // u itself is the root whenever phi vanishes there.
    if (lambda * phi_u).abs() <= tol * scale {
        return Ok(u);
    }
    // g has slope >= 1, so u and u + lambda phi(u) straddle the root.
    let shifted = u + lambda * phi_u;
    let (mut lo, mut hi) = if shifted > u { (u, shifted) } else { (shifted, u) };
    // Pathological evaluators may break the straddle; widen around u,
    // giving up after 200 doublings.
    let mut width = lambda * phi_u.abs() + 1.0;
    let mut doublings = 0u32;
    while !(g(lo) <= u && g(hi) >= u) {
        doublings += 1;
        if doublings > 200 {
            return Err(DriftError::BracketExpansion { u, doublings });
        }
        lo = u - width;
        hi = u + width;
        width *= 2.0;
    }
    let mut glo = g(lo) - u;
    let mut ghi = g(hi) - u;
    if glo == 0.0 {
        return Ok(lo);
    }
    if ghi == 0.0 {
        return Ok(hi);
    }
    for iter in 0..300 {
        // Secant candidate, safeguarded by bisection on alternating rounds
        // and whenever it leaves the bracket.
        let mid = 0.5 * (lo + hi);
        let mut x = if iter % 2 == 0 && ghi != glo {
            let s = (lo * ghi - hi * glo) / (ghi - glo);
            if s > lo && s < hi {
                s
            } else {
                mid
            }
        } else {
            mid
        };
        if !(x > lo && x < hi) {
            x = mid;
        }
        let gx = g(x) - u;
        if !gx.is_finite() {
            return Err(DriftError::NonFinite(x));
        }
        if gx.abs() <= tol * scale {
            return Ok(x);
        }
        if gx < 0.0 {
            lo = x;
            glo = gx;
        } else {
            hi = x;
            ghi = gx;
        }
        if hi - lo <= f64::EPSILON * (1.0 + lo.abs().max(hi.abs())) {
            // Bracket exhausted at a jump of phi.
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Yosida regularization of `phi` at index `n`:
/// `phi_n(u) = n ((I - phi/n)^{-1}(u) - u)`, and `f_n = phi_n + kappa u`.
#[derive(Clone, Debug)]
pub struct YosidaApprox {
    base: DriftSpec,
    index: u32,
    root_tol: f64,
}

impl YosidaApprox {
    pub fn new(base: DriftSpec, index: u32) -> Result<Self, DriftError> {
        if index == 0 {
            return Err(DriftError::BadIndex);
        }
        Ok(Self { base, index, root_tol: 1e-12 })
    }

    pub fn with_root_tol(mut self, tol: f64) -> Self {
        self.root_tol = tol;
        self
    }

    pub fn base(&self) -> &DriftSpec {
        &self.base
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// `(I - phi/n)^{-1}(u)`; non-decreasing and 1-Lipschitz in `u`.
    pub fn resolvent(&self, u: f64) -> Result<f64, DriftError> {
        monotone_resolvent(|v| self.base.phi(v), 1.0 / self.index as f64, u, self.root_tol)
    }

    pub fn phi_n(&self, u: f64) -> Result<f64, DriftError> {
        Ok(self.index as f64 * (self.resolvent(u)? - u))
    }

    /// `f_n(u) = phi_n(u) + kappa u`.
    pub fn regularized_drift(&self, u: f64) -> Result<f64, DriftError> {
        Ok(self.phi_n(u)? + self.base.kappa * u)
    }
}
