//! The deterministic fixed-point map: given `z`, solve
//! `u(t,x) = int_0^t S(t-s) f(u(s,.)) ds + z(t,x)`
//! together with its a-priori, Lipschitz, and Gronwall diagnostics.
//!
//! Two drift treatments are available. The explicit scheme steps
//! `v <- S(dt)[v + dt f_n(v + z)]` with the Yosida-regularized drift and is
//! subject to `4 n dt <= 1`; the implicit scheme solves
//! `w - dt f(w) = v + z` through the drift resolvent each step and has no
//! step restriction beyond `dt max(kappa, 0) < 1/2`.

use thiserror::Error;

use crate::drift::{monotone_resolvent, DriftError, DriftSpec, YosidaApprox};
use crate::grid::{
    weighted_sup_norm, FieldRole, GridError, SpaceTimeField, WeightParams,
};
use crate::kernel::HeatSemigroup;

#[derive(Debug, Error)]
pub enum DetmapError {
    #[error("dt * max(kappa, 0) = {0} breaks the implicit-step margin 1/2")]
    UnstableStep(f64),
    #[error("explicit scheme needs 4 n dt <= 1; got n = {n}, dt = {dt}")]
    ExplicitStepTooLarge { n: u32, dt: f64 },
    #[error("solution diverged (non-finite values) at step {0}")]
    Diverged(usize),
    #[error("inputs share no usable difference (z1 = z2 on the grid)")]
    DegeneratePair,
    #[error("config and field disagree on dt: {cfg} vs {field}")]
    DtMismatch { cfg: f64, field: f64 },
    #[error("growth assumption violated at step {step}: rate {lhs} > allowed {rhs}")]
    GronwallAssumption { step: usize, lhs: f64, rhs: f64 },
    #[error("{0}")]
    BadInputs(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Drift(#[from] DriftError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftScheme {
    /// Explicit step with the Yosida-regularized drift.
    ExplicitYosida,
    /// Implicit drift step via the monotone resolvent; unconditionally
    /// stable in the drift, preferred when `n dt` would be large.
    ImplicitResolvent,
}

/// Solver configuration for the fixed-point map.
#[derive(Debug, Clone)]
pub struct MSolverConfig {
    pub drift: DriftSpec,
    pub dt: f64,
    pub scheme: DriftScheme,
    /// Regularization indices for the explicit scheme; the last entry is
    /// the production index, earlier ones feed diagnostics.
    pub yosida_schedule: Vec<u32>,
    /// Extrapolate the last two schedule entries linearly in 1/n.
    pub richardson: bool,
    pub root_tol: f64,
    /// Inputs with sup beyond this trip a growth warning (the weighted
    /// integrand may stop being integrable for fast-growing drifts).
    pub growth_guard: f64,
}

impl MSolverConfig {
    fn validate(drift: &DriftSpec, dt: f64) -> Result<(), DetmapError> {
        let margin = dt * drift.kappa().max(0.0);
        if !(margin < 0.5) {
            return Err(DetmapError::UnstableStep(margin));
        }
        Ok(())
    }

    pub fn explicit(drift: DriftSpec, dt: f64) -> Result<Self, DetmapError> {
        Self::explicit_with_schedule(drift, dt, vec![64])
    }

    pub fn explicit_with_schedule(
        drift: DriftSpec,
        dt: f64,
        schedule: Vec<u32>,
    ) -> Result<Self, DetmapError> {
        Self::validate(&drift, dt)?;
        if schedule.is_empty() {
            return Err(DetmapError::BadInputs("empty yosida schedule".into()));
        }
        for &n in &schedule {
            if n == 0 {
                return Err(DriftError::BadIndex.into());
            }
            if 4.0 * n as f64 * dt > 1.0 {
                return Err(DetmapError::ExplicitStepTooLarge { n, dt });
            }
        }
        Ok(Self {
            drift,
            dt,
            scheme: DriftScheme::ExplicitYosida,
            yosida_schedule: schedule,
            richardson: false,
            root_tol: 1e-12,
            growth_guard: 1e6,
        })
    }

    pub fn implicit(drift: DriftSpec, dt: f64) -> Result<Self, DetmapError> {
        Self::validate(&drift, dt)?;
        Ok(Self {
            drift,
            dt,
            scheme: DriftScheme::ImplicitResolvent,
            yosida_schedule: vec![64],
            richardson: false,
            root_tol: 1e-12,
            growth_guard: 1e6,
        })
    }

    pub fn with_richardson(mut self) -> Self {
        self.richardson = true;
        self
    }

    /// Warning text when the input leaves the growth-safe range; the solve
    /// proceeds regardless.
    pub fn growth_warning(&self, z: &SpaceTimeField) -> Option<String> {
        let sup = z.sup(0..=z.grid().steps());
        if sup <= self.growth_guard {
            return None;
        }
        Some(format!(
            "input sup {sup:.3e} exceeds the growth-safe guard {:.1e}; \
             the drift integrand may not be integrable at this size",
            self.growth_guard
        ))
    }
}

fn solve_single(
    z: &SpaceTimeField,
    cfg: &MSolverConfig,
    semigroup: &HeatSemigroup,
    yosida: Option<&YosidaApprox>,
) -> Result<SpaceTimeField, DetmapError> {
    let grid = z.grid();
    let dt = grid.dt();
    if dt != cfg.dt {
        return Err(DetmapError::DtMismatch { cfg: cfg.dt, field: dt });
    }
    let nodes = grid.node_count();
    let mut u = SpaceTimeField::zero(grid, FieldRole::Solution);
    u.set_slice(0, z.slice(0));
    let mut v = vec![0.0f64; nodes];
    let mut stage = vec![0.0f64; nodes];
    let kappa = cfg.drift.kappa();
    let lambda = dt / (1.0 - dt * kappa);
    for k in 0..grid.steps() {
        let zk = z.slice(k);
        match cfg.scheme {
            DriftScheme::ExplicitYosida => {
                let y = yosida.expect("explicit scheme carries a yosida approximation");
                for i in 0..nodes {
                    let fu = y.regularized_drift(v[i] + zk[i])?;
                    stage[i] = v[i] + dt * fu;
                }
            }
            DriftScheme::ImplicitResolvent => {
                for i in 0..nodes {
                    let rhs = v[i] + zk[i];
                    let w = monotone_resolvent(
                        |x| cfg.drift.phi(x),
                        lambda,
                        rhs / (1.0 - dt * kappa),
                        cfg.root_tol,
                    )?;
                    // w = rhs + dt f(w), so v + dt f(w) = w - z_k exactly.
                    stage[i] = w - zk[i];
                }
            }
        }
        v = semigroup.apply(&stage, dt).map_err(|e| DetmapError::BadInputs(e.to_string()))?;
        if !v.iter().all(|x| x.is_finite()) {
            return Err(DetmapError::Diverged(k + 1));
        }
        let zk1 = z.slice(k + 1);
        let out = u.slice_mut(k + 1);
        for i in 0..nodes {
            out[i] = v[i] + zk1[i];
        }
    }
    Ok(u)
}

/// Solve the fixed-point equation with a caller-provided semigroup
/// (reusing cached multipliers across many solves).
pub fn solve_m_with(
    z: &SpaceTimeField,
    cfg: &MSolverConfig,
    semigroup: &HeatSemigroup,
) -> Result<SpaceTimeField, DetmapError> {
    match cfg.scheme {
        DriftScheme::ImplicitResolvent => solve_single(z, cfg, semigroup, None),
        DriftScheme::ExplicitYosida => {
            let mut solutions = Vec::with_capacity(cfg.yosida_schedule.len());
            for &n in &cfg.yosida_schedule {
                let y = YosidaApprox::new(cfg.drift.clone(), n)?.with_root_tol(cfg.root_tol);
                solutions.push(solve_single(z, cfg, semigroup, Some(&y))?);
            }
            if cfg.richardson && solutions.len() >= 2 {
                let n2 = *cfg.yosida_schedule.last().unwrap() as f64;
                let n1 = cfg.yosida_schedule[cfg.yosida_schedule.len() - 2] as f64;
                let u2 = solutions.pop().unwrap();
                let u1 = solutions.pop().unwrap();
                let vals: Vec<f64> = u2
                    .values()
                    .iter()
                    .zip(u1.values())
                    .map(|(&a, &b)| (n2 * a - n1 * b) / (n2 - n1))
                    .collect();
                return Ok(SpaceTimeField::from_values(z.grid(), FieldRole::Solution, vals)?);
            }
            Ok(solutions.pop().unwrap())
        }
    }
}

/// Solve the fixed-point equation `u = Conv(f(u)) + z`.
pub fn solve_m(z: &SpaceTimeField, cfg: &MSolverConfig) -> Result<SpaceTimeField, DetmapError> {
    let semigroup = HeatSemigroup::new(z.grid());
    solve_m_with(z, cfg, &semigroup)
}

/// Defect of the fixed-point equation against the true drift:
/// `sup_window |u - Conv(f(u)) - z|`.
///
/// For the implicit scheme this is first-order in `dt`; for the explicit
/// scheme it floors at the regularization gap `f_n - f`, while the same
/// residual evaluated through `f_n` is the scheme identity (machine zero).
pub fn consistency_residual(
    u: &SpaceTimeField,
    z: &SpaceTimeField,
    drift: &DriftSpec,
    semigroup: &HeatSemigroup,
) -> Result<f64, DetmapError> {
    let grid = u.grid();
    let source = u.map(|x| drift.eval(x));
    let conv = semigroup.convolve_source(&source);
    let mut worst = 0.0f64;
    let window = grid.window_nodes();
    for k in 0..=grid.steps() {
        let (us, cs, zs) = (u.slice(k), conv.slice(k), z.slice(k));
        for &node in &window {
            worst = worst.max((us[node] - cs[node] - zs[node]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy)]
pub struct AprioriReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// Time-exponential coefficient `(e^{(1+2k)T} - 1) / (1+2k)`, read as `T`
/// at the removable point `kappa = -1/2`.
pub fn apriori_coefficient(kappa: f64, horizon: f64) -> f64 {
    let a = 1.0 + 2.0 * kappa;
    if a.abs() < 1e-10 {
        horizon
    } else {
        (a * horizon).exp_m1() / a
    }
}

/// Check the growth bound
/// `sup |u| <= coef(kappa, T) sup |f(z)| + sup |z|` on the window.
pub fn apriori_check(
    z: &SpaceTimeField,
    u: &SpaceTimeField,
    drift: &DriftSpec,
    horizon: f64,
) -> AprioriReport {
    let steps = u.grid().steps();
    let lhs = u.window_sup(0..=steps);
    let fz = z.map(|x| drift.eval(x));
    let rhs = apriori_coefficient(drift.kappa(), horizon) * fz.window_sup(0..=steps)
        + z.window_sup(0..=steps);
    AprioriReport { lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-3) + 1e-6 }
}

#[derive(Debug, Clone)]
pub struct CenterRatio {
    pub center: [f64; 2],
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct LipschitzReport {
    pub per_center: Vec<CenterRatio>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// Relative spread `(max - min) / mean` across centers.
    pub spread: f64,
}

/// Weighted-norm amplification of the map between two inputs, per center.
pub fn lipschitz_estimate(
    z1: &SpaceTimeField,
    z2: &SpaceTimeField,
    cfg: &MSolverConfig,
    weights: &[WeightParams],
) -> Result<LipschitzReport, DetmapError> {
    let semigroup = HeatSemigroup::new(z1.grid());
    let u1 = solve_m_with(z1, cfg, &semigroup)?;
    let u2 = solve_m_with(z2, cfg, &semigroup)?;
    let du = u1.sub(&u2)?;
    let dz = z1.sub(&z2)?;
    let steps = z1.grid().steps();
    let mut per_center = Vec::with_capacity(weights.len());
    for wp in weights {
        let denom = weighted_sup_norm(&dz, wp, 0..=steps)?;
        if denom < 1e-14 {
            continue; // skipped pair
        }
        let num = weighted_sup_norm(&du, wp, 0..=steps)?;
        per_center.push(CenterRatio { center: wp.center, ratio: num / denom });
    }
    if per_center.is_empty() {
        return Err(DetmapError::DegeneratePair);
    }
    let max_ratio = per_center.iter().map(|c| c.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min_ratio = per_center.iter().map(|c| c.ratio).fold(f64::INFINITY, f64::min);
    let mean = per_center.iter().map(|c| c.ratio).sum::<f64>() / per_center.len() as f64;
    Ok(LipschitzReport { per_center, max_ratio, min_ratio, spread: (max_ratio - min_ratio) / mean })
}

/// Inputs for the fast-transient growth bound: nonnegative sequences
/// sampled on a uniform time mesh with `phi(0) = 0`.
#[derive(Debug, Clone)]
pub struct GronwallInputs {
    pub c1: f64,
    pub c2: f64,
    pub psi: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub dt: f64,
}

impl GronwallInputs {
    pub fn new(
        c1: f64,
        c2: f64,
        psi: Vec<f64>,
        theta: Vec<f64>,
        phi: Vec<f64>,
        dt: f64,
    ) -> Result<Self, DetmapError> {
        if !(dt > 0.0) || c1 < 0.0 || c2 < 0.0 {
            return Err(DetmapError::BadInputs("need dt > 0 and C1, C2 >= 0".into()));
        }
        if psi.len() != phi.len() || theta.len() != phi.len() || phi.is_empty() {
            return Err(DetmapError::BadInputs("sequence lengths disagree".into()));
        }
        if phi[0] != 0.0 {
            return Err(DetmapError::BadInputs("phi(0) must be 0".into()));
        }
        if phi.iter().chain(&psi).chain(&theta).any(|&x| !(x >= 0.0)) {
            return Err(DetmapError::BadInputs("sequences must be nonnegative".into()));
        }
        Ok(Self { c1, c2, psi, theta, phi, dt })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GronwallReport {
    pub sup_phi: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Validate the stepwise growth assumption, then check
/// `sup phi <= (C2 T + sup psi) e^{C1 T}` up to one-step slack.
///
/// The gate term is unconstrained in size: it may only act while
/// `phi < psi`, so it never enters the bound.
pub fn gronwall_check(g: &GronwallInputs, horizon: f64) -> Result<GronwallReport, DetmapError> {
    let steps_wanted = (horizon / g.dt).round() as usize;
    let steps = steps_wanted.min(g.phi.len() - 1);
    if steps == 0 {
        return Err(DetmapError::BadInputs("horizon shorter than one step".into()));
    }
    let scale = g.phi.iter().fold(1.0f64, |m, &x| m.max(x));
    for k in 0..steps {
        let rate = (g.phi[k + 1] - g.phi[k]) / g.dt;
        let gate = if g.phi[k] < g.psi[k] { g.theta[k] } else { 0.0 };
        let allowed = g.c1 * g.phi[k] + g.c2 + gate;
        if rate > allowed + 1e-9 * scale.max(allowed.abs()) {
            return Err(DetmapError::GronwallAssumption { step: k, lhs: rate, rhs: allowed });
        }
    }
    let sup_phi = g.phi[..=steps].iter().fold(0.0f64, |m, &x| m.max(x));
    let sup_psi = g.psi[..=steps].iter().fold(0.0f64, |m, &x| m.max(x));
    let growth = (g.c1 * horizon).exp();
    let bound = (g.c2 * horizon + sup_psi) * growth;
    let pass = sup_phi <= bound * (1.0 + 1e-6) + g.c2 * g.dt * growth;
    Ok(GronwallReport { sup_phi, bound, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn small_grid(horizon: f64, steps: usize) -> GridSpec {
        GridSpec::new(1, 8.0, 64, horizon, steps).unwrap()
    }

    #[test]
    fn zero_drift_is_identity() {
        let grid = small_grid(1.0, 50);
        let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |t, x| (x[0] * 0.3).sin() + t);
        let cfg =
            MSolverConfig::explicit_with_schedule(DriftSpec::zero(), grid.dt(), vec![1]).unwrap();
        let u = solve_m(&z, &cfg).unwrap();
        for (a, b) in u.values().iter().zip(z.values()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn zero_input_with_zero_fixed_point_stays_zero() {
        let grid = small_grid(0.5, 512);
        let z = SpaceTimeField::zero(grid, FieldRole::Input);
        for cfg in [
            MSolverConfig::explicit(DriftSpec::allen_cahn(), grid.dt()).unwrap(),
            MSolverConfig::implicit(DriftSpec::allen_cahn(), grid.dt()).unwrap(),
        ] {
            let u = solve_m(&z, &cfg).unwrap();
            assert!(u.sup(0..=grid.steps()) < 1e-12);
        }
    }

    #[test]
    fn constant_input_reduces_to_ode() {
        // z = 1, f(u) = -u: u(t) = e^{-t}; dt = 1e-3 gives ~2e-4 accuracy.
        let grid = GridSpec::new(1, 8.0, 64, 1.0, 1000).unwrap();
        let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, _| 1.0);
        let cfg = MSolverConfig::explicit(DriftSpec::linear_decay(), grid.dt()).unwrap();
        let u = solve_m(&z, &cfg).unwrap();
        let got = u.slice(grid.steps())[10];
        assert!((got - (-1.0f64).exp()).abs() < 1e-3, "u(1) = {got}");
    }

    #[test]
    fn ode_error_halves_with_dt() {
        let run = |steps: usize| {
            let grid = GridSpec::new(1, 8.0, 64, 1.0, steps).unwrap();
            let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, _| 1.0);
            let cfg = MSolverConfig::explicit(DriftSpec::linear_decay(), grid.dt()).unwrap();
            let u = solve_m(&z, &cfg).unwrap();
            (u.slice(grid.steps())[0] - (-1.0f64).exp()).abs()
        };
        let (coarse, fine) = (run(1000), run(2000));
        assert!(fine <= 0.55 * coarse, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn implicit_and_explicit_agree_to_first_order() {
        let grid = GridSpec::new(1, 8.0, 64, 0.5, 500).unwrap();
        let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |t, x| (0.4 * x[0]).cos() * (1.0 - t));
        let drift = DriftSpec::allen_cahn();
        let ue = solve_m(&z, &MSolverConfig::explicit(drift.clone(), grid.dt()).unwrap()).unwrap();
        let ui = solve_m(&z, &MSolverConfig::implicit(drift, grid.dt()).unwrap()).unwrap();
        let diff = ue.sub(&ui).unwrap().sup(0..=grid.steps());
        assert!(diff < 20.0 * grid.dt(), "schemes disagree by {diff}");
    }

    #[test]
    fn consistency_residual_is_first_order_for_the_implicit_scheme() {
        let solve_res = |steps: usize| {
            let grid = GridSpec::new(1, 8.0, 64, 0.5, steps).unwrap();
            let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |t, x| {
                0.8 * (0.5 * x[0]).sin() + 0.3 * t
            });
            let drift = DriftSpec::allen_cahn();
            let cfg = MSolverConfig::implicit(drift.clone(), grid.dt()).unwrap();
            let s = HeatSemigroup::new(grid);
            let u = solve_m_with(&z, &cfg, &s).unwrap();
            consistency_residual(&u, &z, &drift, &s).unwrap()
        };
        let (coarse, fine) = (solve_res(250), solve_res(500));
        assert!(fine <= 0.62 * coarse, "coarse {coarse}, fine {fine}");
    }

    #[test]
    fn explicit_scheme_is_exact_against_its_regularized_drift() {
        // Through f_n the recursion and the convolution coincide; through
        // the raw f the gap is the regularization error, shrinking in n.
        let grid = GridSpec::new(1, 8.0, 64, 0.25, 1000).unwrap();
        let z =
            SpaceTimeField::from_fn(grid, FieldRole::Input, |_, x| 0.9 * (0.4 * x[0]).sin());
        let drift = DriftSpec::allen_cahn();
        let s = HeatSemigroup::new(grid);
        let residual_for = |n: u32| {
            let cfg =
                MSolverConfig::explicit_with_schedule(drift.clone(), grid.dt(), vec![n]).unwrap();
            let u = solve_m_with(&z, &cfg, &s).unwrap();
            let y = YosidaApprox::new(drift.clone(), n).unwrap();
            let reg = u.map(|x| y.regularized_drift(x).unwrap());
            let conv = s.convolve_source(&reg);
            let mut ident = 0.0f64;
            for k in 0..=grid.steps() {
                for ((a, b), c) in u.slice(k).iter().zip(conv.slice(k)).zip(z.slice(k)) {
                    ident = ident.max((a - b - c).abs());
                }
            }
            (ident, consistency_residual(&u, &z, &drift, &s).unwrap())
        };
        let (ident32, raw32) = residual_for(32);
        let (ident128, raw128) = residual_for(128);
        assert!(ident32 < 1e-11 && ident128 < 1e-11, "{ident32} {ident128}");
        assert!(raw128 < raw32, "regularization gap should shrink: {raw32} -> {raw128}");
    }

    #[test]
    fn yosida_index_stability() {
        let grid = GridSpec::new(1, 8.0, 64, 0.25, 1000).unwrap();
        let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, x| 1.2 * (0.3 * x[0]).cos());
        let drift = DriftSpec::allen_cahn();
        let solve_n = |n: u32| {
            let cfg =
                MSolverConfig::explicit_with_schedule(drift.clone(), grid.dt(), vec![n]).unwrap();
            solve_m(&z, &cfg).unwrap()
        };
        let (u32_, u64_, u128_) = (solve_n(32), solve_n(64), solve_n(128));
        let d_32_64 = u32_.sub(&u64_).unwrap().window_sup(0..=grid.steps());
        let d_64_128 = u64_.sub(&u128_).unwrap().window_sup(0..=grid.steps());
        assert!(d_64_128 < d_32_64, "{d_64_128} !< {d_32_64}");
    }

    #[test]
    fn apriori_trivial_and_fixed_point_cases() {
        let grid = small_grid(1.0, 200);
        // z = 0, f(0) = 0: both sides vanish.
        let z0 = SpaceTimeField::zero(grid, FieldRole::Input);
        let cfg = MSolverConfig::implicit(DriftSpec::allen_cahn(), grid.dt()).unwrap();
        let u0 = solve_m(&z0, &cfg).unwrap();
        let rep = apriori_check(&z0, &u0, &DriftSpec::allen_cahn(), 1.0);
        assert!(rep.pass);
        assert_eq!(rep.lhs, 0.0);
        assert_eq!(rep.rhs, 0.0);

        // z = 1 with f = u - u^3: f(1) = 0, so rhs = 1 and u stays at 1.
        let z1 = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, _| 1.0);
        let u1 = solve_m(&z1, &cfg).unwrap();
        let rep = apriori_check(&z1, &u1, &DriftSpec::allen_cahn(), 1.0);
        assert!(rep.pass, "lhs {} rhs {}", rep.lhs, rep.rhs);
        assert!((rep.lhs - 1.0).abs() < 1e-9);
        assert!((rep.rhs - 1.0).abs() < 1e-9);
    }

    #[test]
    fn apriori_coefficient_special_point() {
        // kappa = -1/2 reads the coefficient as T.
        assert_eq!(apriori_coefficient(-0.5, 0.7), 0.7);
        // kappa = 0: e^T - 1.
        assert!((apriori_coefficient(0.0, 1.0) - (1.0f64.exp() - 1.0)).abs() < 1e-12);
        // Continuity across the removable point.
        let near = apriori_coefficient(-0.5 + 1e-8, 0.7);
        assert!((near - 0.7).abs() < 1e-6);
    }

    #[test]
    fn lipschitz_identity_when_drift_vanishes() {
        let grid = small_grid(0.5, 100);
        let z1 = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, x| (0.2 * x[0]).sin());
        let z2 = SpaceTimeField::from_fn(grid, FieldRole::Input, |t, x| (0.2 * x[0]).cos() + t);
        let cfg =
            MSolverConfig::explicit_with_schedule(DriftSpec::zero(), grid.dt(), vec![1]).unwrap();
        let wps: Vec<WeightParams> = grid
            .center_lattice(3)
            .into_iter()
            .map(|c| WeightParams::new(1.0, c, &grid).unwrap())
            .collect();
        let rep = lipschitz_estimate(&z1, &z2, &cfg, &wps).unwrap();
        for c in &rep.per_center {
            assert!((c.ratio - 1.0).abs() < 1e-12);
        }
        assert!(rep.spread < 1e-12);
    }

    #[test]
    fn lipschitz_constant_shift_linear_drift() {
        // z2 = z1 + c with f = -u: the difference decays like c e^{-t},
        // so every center sees ratio 1 (attained at t = 0).
        let grid = small_grid(0.5, 200);
        let z1 = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, x| (0.3 * x[0]).sin());
        let z2 = z1.map(|v| v + 0.7);
        let cfg = MSolverConfig::implicit(DriftSpec::linear_decay(), grid.dt()).unwrap();
        let wps: Vec<WeightParams> = grid
            .center_lattice(3)
            .into_iter()
            .map(|c| WeightParams::new(1.0, c, &grid).unwrap())
            .collect();
        let rep = lipschitz_estimate(&z1, &z2, &cfg, &wps).unwrap();
        for c in &rep.per_center {
            assert!((c.ratio - 1.0).abs() < 1e-3, "ratio {}", c.ratio);
        }
    }

    #[test]
    fn lipschitz_rejects_identical_inputs() {
        let grid = small_grid(0.5, 50);
        let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, x| x[0]);
        let cfg =
            MSolverConfig::explicit_with_schedule(DriftSpec::zero(), grid.dt(), vec![1]).unwrap();
        let wps = vec![WeightParams::new(1.0, [0.0, 0.0], &grid).unwrap()];
        assert!(matches!(
            lipschitz_estimate(&z, &z.clone(), &cfg, &wps),
            Err(DetmapError::DegeneratePair)
        ));
    }

    #[test]
    fn gronwall_linear_growth_case() {
        // C1 = 0, C2 = 1, psi = theta = 0, phi(t) = t: sup phi = T <= T.
        let dt = 0.01;
        let m = 100;
        let phi: Vec<f64> = (0..=m).map(|k| k as f64 * dt).collect();
        let g = GronwallInputs::new(0.0, 1.0, vec![0.0; m + 1], vec![0.0; m + 1], phi, dt).unwrap();
        let rep = gronwall_check(&g, 1.0).unwrap();
        assert!(rep.pass);
        assert!((rep.sup_phi - 1.0).abs() < 1e-12);
        assert!((rep.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gronwall_gate_does_not_enter_the_bound() {
        // phi jumps to psi = 1 in one step under a huge gate, then is flat.
        let dt = 0.01;
        let m = 50;
        let mut phi = vec![1.0; m + 1];
        phi[0] = 0.0;
        let theta = vec![2.0 / dt; m + 1];
        let g = GronwallInputs::new(0.0, 0.0, vec![1.0; m + 1], theta, phi, dt).unwrap();
        let rep = gronwall_check(&g, 0.5).unwrap();
        assert!(rep.pass, "sup {} bound {}", rep.sup_phi, rep.bound);
        assert!((rep.bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gronwall_zero_sequence_passes() {
        let dt = 0.1;
        let g = GronwallInputs::new(2.0, 3.0, vec![0.5; 11], vec![0.0; 11], vec![0.0; 11], dt)
            .unwrap();
        assert!(gronwall_check(&g, 1.0).unwrap().pass);
    }

    #[test]
    fn gronwall_flags_assumption_violations() {
        // phi grows faster than C1 phi + C2 with no gate active.
        let dt = 0.1;
        let phi: Vec<f64> = (0..=10).map(|k| (k as f64 * dt) * 5.0).collect();
        let g = GronwallInputs::new(0.0, 1.0, vec![0.0; 11], vec![0.0; 11], phi, dt).unwrap();
        match gronwall_check(&g, 1.0) {
            Err(DetmapError::GronwallAssumption { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected assumption violation, got {other:?}"),
        }
    }

    #[test]
    fn config_guards() {
        // kappa dt too large for the implicit margin.
        let fast = DriftSpec::from_fn("stiff-up", |u| 10.0 * u, 10.0, 20.0, 0.5);
        assert!(matches!(
            MSolverConfig::implicit(fast.clone(), 0.06),
            Err(DetmapError::UnstableStep(_))
        ));
        // Explicit step bound 4 n dt <= 1.
        assert!(matches!(
            MSolverConfig::explicit_with_schedule(DriftSpec::allen_cahn(), 0.01, vec![64]),
            Err(DetmapError::ExplicitStepTooLarge { .. })
        ));
        // Growth warning fires only beyond the guard.
        let cfg = MSolverConfig::implicit(DriftSpec::allen_cahn(), 1e-3).unwrap();
        let grid = small_grid(0.1, 100);
        let tame = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, _| 1.0);
        assert!(cfg.growth_warning(&tame).is_none());
        let wild = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, _| 1e7);
        assert!(cfg.growth_warning(&wild).is_some());
    }

    #[test]
    fn linear_growth_bound_fitted_and_validated() {
        // ||M(z)|| <= K (1 + ||z||) in the weighted norm: fit K on one
        // batch of random inputs, then demand fresh inputs stay under it.
        use rand_distr::{Distribution, Uniform};
        let grid = GridSpec::new(1, 8.0, 64, 0.25, 250).unwrap();
        let semigroup = HeatSemigroup::new(grid);
        let wp = WeightParams::new(1.0, [0.0, 0.0], &grid).unwrap();
        for drift in [DriftSpec::allen_cahn(), DriftSpec::cubic_decay()] {
            let cfg = MSolverConfig::implicit(drift, grid.dt()).unwrap();
            let ratio = |stream: u64| {
                let mut rng = crate::par::replica_rng(77, stream);
                let dist = Uniform::new_inclusive(-1.5f64, 1.5).unwrap();
                let rough: Vec<f64> =
                    (0..grid.node_count()).map(|_| dist.sample(&mut rng)).collect();
                let spatial = semigroup.apply(&rough, 0.05).unwrap();
                let mut z = SpaceTimeField::zero(grid, FieldRole::Input);
                for k in 0..=grid.steps() {
                    z.set_slice(k, &spatial);
                }
                let u = solve_m_with(&z, &cfg, &semigroup).unwrap();
                let nu = weighted_sup_norm(&u, &wp, 0..=grid.steps()).unwrap();
                let nz = weighted_sup_norm(&z, &wp, 0..=grid.steps()).unwrap();
                nu / (1.0 + nz)
            };
            let fitted = (0..20).map(ratio).fold(f64::NEG_INFINITY, f64::max) * 1.15;
            for stream in 20..40 {
                let r = ratio(stream);
                assert!(r <= fitted, "fresh input broke the fitted constant: {r} > {fitted}");
            }
        }
    }

    #[test]
    fn two_dimensional_constant_input_reduces_to_ode() {
        let grid = GridSpec::new(2, 8.0, 16, 0.5, 500).unwrap();
        let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, _| 1.0);
        let cfg = MSolverConfig::implicit(DriftSpec::linear_decay(), grid.dt()).unwrap();
        let u = solve_m(&z, &cfg).unwrap();
        let got = u.slice(grid.steps())[7];
        assert!((got - (-0.5f64).exp()).abs() < 1e-3, "u(0.5) = {got}");
    }

    #[test]
    fn richardson_pair_is_closer_to_the_limit() {
        let grid = GridSpec::new(1, 8.0, 64, 0.25, 1000).unwrap();
        let z = SpaceTimeField::from_fn(grid, FieldRole::Input, |_, x| 1.1 * (0.4 * x[0]).cos());
        let drift = DriftSpec::cubic_decay();
        // Reference: implicit solve (exact drift).
        let reference =
            solve_m(&z, &MSolverConfig::implicit(drift.clone(), grid.dt()).unwrap()).unwrap();
        let plain = solve_m(
            &z,
            &MSolverConfig::explicit_with_schedule(drift.clone(), grid.dt(), vec![64]).unwrap(),
        )
        .unwrap();
        let extrap = solve_m(
            &z,
            &MSolverConfig::explicit_with_schedule(drift, grid.dt(), vec![64, 128])
                .unwrap()
                .with_richardson(),
        )
        .unwrap();
        let err_plain = plain.sub(&reference).unwrap().window_sup(0..=grid.steps());
        let err_extrap = extrap.sub(&reference).unwrap().window_sup(0..=grid.steps());
        assert!(err_extrap < err_plain, "richardson {err_extrap} !< plain {err_plain}");
    }
}
