//! Stochastic convolution, weighted moment estimation, and the Picard
//! solver for the mild equation.
//!
//! One noise path is fixed per Picard run and shared across all iterates:
//! the iteration is pathwise, and re-randomizing per iterate would destroy
//! the contraction. The iterate recursion is
//! `Z_{n+1} = Conv( sigma( M(U_0 + Z_n) ) dW )` starting from `Z_0 = 0`,
//! measured in the sup-over-centers weighted norm.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::detmap::{solve_m_with, DetmapError, DriftScheme, MSolverConfig};
use crate::drift::DriftSpec;
use crate::grid::{
    sup_over_centers, FieldRole, GridError, GridSpec, SpaceTimeField,
};
use crate::kernel::HeatSemigroup;
use crate::noise::{NoiseIncrement, NoiseSpec, NoiseSynth};
use crate::par::{replica_map, replica_rng};
use crate::stats::{bootstrap_se, max_center_mean, MomentEstimate};

#[derive(Debug, Error)]
pub enum StochasticError {
    #[error("noise path has {got} increments, grid wants {want}")]
    PathLength { got: usize, want: usize },
    #[error("increment does not match the field grid or step size")]
    IncrementMismatch,
    #[error("need at least {want} replicas, got {got}")]
    TooFewReplicas { got: usize, want: usize },
    #[error("picard iteration failed to contract: ratios {:?}", .state.ratios)]
    NonContraction { state: PicardState },
    #[error(transparent)]
    Detmap(#[from] DetmapError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Noise coefficient `sigma`, globally Lipschitz.
#[derive(Clone)]
pub struct SigmaSpec {
    name: String,
    f: ScalarFn,
    pub lipschitz: f64,
    pub bounded: bool,
}

impl fmt::Debug for SigmaSpec {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        fm.debug_struct("SigmaSpec")
            .field("name", &self.name)
            .field("lipschitz", &self.lipschitz)
            .field("bounded", &self.bounded)
            .finish()
    }
}

impl SigmaSpec {
    pub fn from_fn(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        lipschitz: f64,
        bounded: bool,
    ) -> Self {
        Self { name: name.into(), f: Arc::new(f), lipschitz, bounded }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fn(format!("constant({c})"), move |_| c, 0.0, true)
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn sin() -> Self {
        Self::from_fn("sin", f64::sin, 1.0, true)
    }

    pub fn identity() -> Self {
        Self::from_fn("identity", |u| u, 1.0, false)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, u: f64) -> f64 {
        (self.f)(u)
    }

    /// Largest sampled excess of `|sigma(u) - sigma(v)|` over `L |u - v|`.
    pub fn lipschitz_excess(&self, samples: usize, range: (f64, f64), seed: u64) -> f64 {
        use rand_distr::{Distribution, Uniform};
        let mut rng = replica_rng(seed, 0);
        let dist = Uniform::new_inclusive(range.0, range.1).unwrap();
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..samples {
            let u: f64 = dist.sample(&mut rng);
            let v: f64 = dist.sample(&mut rng);
            worst = worst.max((self.eval(u) - self.eval(v)).abs() - self.lipschitz * (u - v).abs());
        }
        worst
    }
}

/// Stochastic convolution of an adapted coefficient field against the path:
/// `Z_{k+1} = S(dt) [Z_k + sigma_field(t_k) dW_k]`, `Z_0 = 0`.
///
/// Step `k` only reads `sigma_field` at `t_k` and increment `k`, which is
/// what keeps the recursion adapted.
pub fn stochastic_convolution(
    sigma_field: &SpaceTimeField,
    path: &[NoiseIncrement],
    semigroup: &HeatSemigroup,
) -> Result<SpaceTimeField, StochasticError> {
    let grid = sigma_field.grid();
    if path.len() != grid.steps() {
        return Err(StochasticError::PathLength { got: path.len(), want: grid.steps() });
    }
    let dt = grid.dt();
    for inc in path {
        if inc.grid != grid || inc.dt != dt {
            return Err(StochasticError::IncrementMismatch);
        }
    }
    let nodes = grid.node_count();
    let mut out = SpaceTimeField::zero(grid, FieldRole::StochConv);
    let mut z = vec![0.0f64; nodes];
    let mut stage = vec![0.0f64; nodes];
    for (k, inc) in path.iter().enumerate() {
        let sig = sigma_field.slice(k);
        for i in 0..nodes {
            stage[i] = z[i] + sig[i] * inc.values[i];
        }
        z = semigroup
            .apply(&stage, dt)
            .map_err(|e| StochasticError::Detmap(DetmapError::BadInputs(e.to_string())))?;
        out.set_slice(k + 1, &z);
    }
    Ok(out)
}

/// Heat flow of the initial datum, stepped with the cached multiplier so
/// restarted horizons reproduce it bit for bit.
pub fn initial_flow(
    u0: &[f64],
    grid: GridSpec,
    semigroup: &HeatSemigroup,
) -> Result<SpaceTimeField, StochasticError> {
    let mut out = SpaceTimeField::zero(grid, FieldRole::InitialFlow);
    out.set_slice(0, u0);
    let mut cur = u0.to_vec();
    for k in 0..grid.steps() {
        cur = semigroup
            .apply(&cur, grid.dt())
            .map_err(|e| StochasticError::Detmap(DetmapError::BadInputs(e.to_string())))?;
        out.set_slice(k + 1, &cur);
    }
    Ok(out)
}

/// Midpoint quadrature of `int_0^t (4 pi s)^{-1/2} ds` (through the
/// substitution `s = q^2`), the isometry value for the point variance of
/// the unit-coefficient convolution against white noise in d = 1.
pub fn ito_isometry_quadrature(t: f64, panels: usize) -> f64 {
    let qmax = t.sqrt();
    let dq = qmax / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let q = (i as f64 + 0.5) * dq;
        acc += 2.0 * q / (4.0 * std::f64::consts::PI * q * q).sqrt();
    }
    acc * dq
}

#[derive(Debug, Clone)]
pub struct MomentBoundReport {
    pub estimate: MomentEstimate,
    /// `sup_{t,x} |sigma(t,x)|^p` of the deterministic coefficient field.
    pub sigma_sup_moment: f64,
    /// `estimate / sigma_sup_moment`, the measured bound constant.
    pub empirical_constant: f64,
    /// Violated moment/weight hypotheses, if any; estimation proceeds.
    pub hypothesis_warnings: Vec<String>,
}

/// Hypotheses of the weighted moment bound for the convolution.
pub fn moment_hypothesis_warnings(dim: u8, eta: f64, p: f64, theta: f64) -> Vec<String> {
    let d1 = (dim + 1) as f64;
    let mut warnings = Vec::new();
    let p_min = 2.0 * d1 / eta;
    if p <= p_min {
        warnings.push(format!("moment order p = {p} <= 2(d+1)/eta = {p_min:.3}"));
    }
    if p > d1 {
        let theta_min = d1 / (p - d1);
        if theta <= theta_min {
            warnings.push(format!("weight exponent theta = {theta} <= (d+1)/(p-(d+1)) = {theta_min:.3}"));
        }
    }
    warnings
}

/// Monte Carlo estimate of the sup-over-centers weighted p-moment of the
/// stochastic convolution driven by a deterministic coefficient field.
#[allow(clippy::too_many_arguments)]
pub fn moment_bound_estimate(
    noise: &NoiseSpec,
    grid: GridSpec,
    sigma_field: &SpaceTimeField,
    p: f64,
    theta: f64,
    centers: &[[f64; 2]],
    replicas: usize,
    master_seed: u64,
) -> Result<MomentBoundReport, StochasticError> {
    if replicas < 30 {
        return Err(StochasticError::TooFewReplicas { got: replicas, want: 30 });
    }
    let synth = NoiseSynth::new(*noise, grid);
    let semigroup = HeatSemigroup::new(grid);
    let rows: Vec<Vec<f64>> = replica_map(replicas, |i| {
        let mut rng = replica_rng(master_seed, i as u64);
        let path = synth.path(&mut rng);
        let z = stochastic_convolution(sigma_field, &path, &semigroup)
            .expect("replica convolution on a fresh path");
        centers
            .iter()
            .map(|&c| {
                sup_over_centers(&z, theta, &[c], p).expect("norm over a validated center")
            })
            .collect()
    });
    let refs: Vec<&Vec<f64>> = rows.iter().collect();
    let value = max_center_mean(&refs);
    let se = bootstrap_se(&rows, max_center_mean, 200, master_seed ^ 0x9e37_79b9);
    let steps = grid.steps();
    let sigma_sup = sigma_field.sup(0..=steps).powf(p);
    Ok(MomentBoundReport {
        estimate: MomentEstimate {
            order: p,
            value,
            std_error: se,
            replicas,
            horizon: grid.horizon(),
            theta,
            centers: centers.to_vec(),
        },
        sigma_sup_moment: sigma_sup,
        empirical_constant: if sigma_sup > 0.0 { value / sigma_sup } else { f64::NAN },
        hypothesis_warnings: moment_hypothesis_warnings(grid.dim(), noise.eta(), p, theta),
    })
}

/// Monte Carlo point variance of the convolution at the window center at
/// the final time, for isometry cross-checks.
pub fn point_variance_estimate(
    noise: &NoiseSpec,
    grid: GridSpec,
    sigma_field: &SpaceTimeField,
    replicas: usize,
    master_seed: u64,
) -> Result<(f64, f64), StochasticError> {
    if replicas < 30 {
        return Err(StochasticError::TooFewReplicas { got: replicas, want: 30 });
    }
    let synth = NoiseSynth::new(*noise, grid);
    let semigroup = HeatSemigroup::new(grid);
    let node = grid.node_count() / 2;
    let vals: Vec<f64> = replica_map(replicas, |i| {
        let mut rng = replica_rng(master_seed, i as u64);
        let path = synth.path(&mut rng);
        let z = stochastic_convolution(sigma_field, &path, &semigroup)
            .expect("replica convolution on a fresh path");
        z.slice(grid.steps())[node]
    });
    Ok((crate::stats::sample_variance(&vals), crate::stats::variance_se(&vals)))
}

/// Picard iteration settings over one horizon.
#[derive(Debug, Clone)]
pub struct PicardParams {
    pub p: f64,
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub centers: Vec<[f64; 2]>,
    pub scheme: DriftScheme,
}

impl PicardParams {
    pub fn new(grid: &GridSpec, p: f64, theta: f64) -> Self {
        Self {
            p,
            theta,
            tol: 1e-6,
            max_iter: 50,
            centers: grid.center_lattice(3),
            scheme: DriftScheme::ImplicitResolvent,
        }
    }
}

/// Contraction history of one Picard run.
#[derive(Debug, Clone)]
pub struct PicardState {
    /// Sup-over-centers weighted norms of successive iterate differences.
    pub deltas: Vec<f64>,
    /// `deltas[n] / deltas[n-1]`.
    pub ratios: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub p: f64,
    pub theta: f64,
}

#[derive(Debug, Clone)]
pub struct PicardSolution {
    /// Mild solution `u = M(U_0 + Z)`.
    pub solution: SpaceTimeField,
    /// Converged stochastic convolution `Z`.
    pub stoch_conv: SpaceTimeField,
    /// Heat flow `U_0` of the initial datum.
    pub initial_flow: SpaceTimeField,
    pub state: PicardState,
}

/// Assumption checks surfaced as warnings: moment/weight inequalities and
/// the growth-safety constraint `theta * nu < 2`.
pub fn picard_assumption_warnings(
    drift: &DriftSpec,
    noise: &NoiseSpec,
    dim: u8,
    p: f64,
    theta: f64,
) -> Vec<String> {
    let mut warnings = Vec::new();
    let nu = drift.growth_nu();
    if nu > 0.0 && theta * nu >= 2.0 {
        warnings.push(format!(
            "theta * nu = {:.3} >= 2: the drift integrand may not be integrable",
            theta * nu
        ));
    }
    let d1 = (dim + 1) as f64;
    let p_floor = ((1.0 + theta) * d1 / theta).max(2.0 * d1 / noise.eta());
    if p <= p_floor {
        warnings.push(format!("moment order p = {p} <= required floor {p_floor:.3}"));
    }
    warnings
}

/// Picard iteration on a fixed noise path. `z_init` overrides the zero
/// initial iterate (used by the common-noise uniqueness check).
#[allow(clippy::too_many_arguments)]
pub fn picard_solve_on_path(
    u0: &[f64],
    drift: &DriftSpec,
    sigma: &SigmaSpec,
    grid: GridSpec,
    path: &[NoiseIncrement],
    params: &PicardParams,
    z_init: Option<SpaceTimeField>,
    mut warnings: Vec<String>,
) -> Result<PicardSolution, StochasticError> {
    let semigroup = HeatSemigroup::new(grid);
    let cfg = match params.scheme {
        DriftScheme::ImplicitResolvent => MSolverConfig::implicit(drift.clone(), grid.dt())?,
        DriftScheme::ExplicitYosida => MSolverConfig::explicit(drift.clone(), grid.dt())?,
    };
    let u0_flow = initial_flow(u0, grid, &semigroup)?;
    let mut z = z_init.unwrap_or_else(|| SpaceTimeField::zero(grid, FieldRole::StochConv));
    if let Some(w) = cfg.growth_warning(&u0_flow) {
        warnings.push(w);
    }

    let mut deltas = Vec::new();
    let mut ratios = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        let z_total = u0_flow.add(&z)?.with_role(FieldRole::Input);
        let u = solve_m_with(&z_total, &cfg, &semigroup)?;
        let sigma_field = u.map(|x| sigma.eval(x));
        let z_next = stochastic_convolution(&sigma_field, path, &semigroup)?;
        let delta = sup_over_centers(&z_next.sub(&z)?, params.theta, &params.centers, 1.0)?;
        if let Some(&prev) = deltas.last() {
            if prev > 0.0 {
                ratios.push(delta / prev);
            }
        }
        deltas.push(delta);
        z = z_next;
        if delta < params.tol {
            converged = true;
            break;
        }
        if ratios.len() >= 3 && ratios.iter().rev().take(3).all(|&r| r >= 1.0) {
            let state = PicardState {
                deltas,
                ratios,
                iterations,
                converged: false,
                warnings,
                p: params.p,
                theta: params.theta,
            };
            return Err(StochasticError::NonContraction { state });
        }
    }

    let z_total = u0_flow.add(&z)?.with_role(FieldRole::Input);
    let solution = solve_m_with(&z_total, &cfg, &semigroup)?;
    Ok(PicardSolution {
        solution,
        stoch_conv: z,
        initial_flow: u0_flow,
        state: PicardState {
            deltas,
            ratios,
            iterations,
            converged,
            warnings,
            p: params.p,
            theta: params.theta,
        },
    })
}

/// Fix one noise path from `rng` and run the Picard iteration.
pub fn picard_solve<R: Rng + ?Sized>(
    u0: &[f64],
    drift: &DriftSpec,
    sigma: &SigmaSpec,
    noise: &NoiseSpec,
    grid: GridSpec,
    params: &PicardParams,
    rng: &mut R,
) -> Result<PicardSolution, StochasticError> {
    let synth = NoiseSynth::new(*noise, grid);
    let path = synth.path(rng);
    let warnings = picard_assumption_warnings(drift, noise, grid.dim(), params.p, params.theta);
    picard_solve_on_path(u0, drift, sigma, grid, &path, params, None, warnings)
}

/// Residual of the mild equation, recomputed from scratch on the same
/// path: `sup-over-centers || u - [U_0 + Conv(f(u)) + Conv(sigma(u) dW)] ||`.
pub fn mild_residual(
    u: &SpaceTimeField,
    u0: &[f64],
    drift: &DriftSpec,
    sigma: &SigmaSpec,
    path: &[NoiseIncrement],
    theta: f64,
    centers: &[[f64; 2]],
) -> Result<f64, StochasticError> {
    let grid = u.grid();
    let semigroup = HeatSemigroup::new(grid);
    let u0_flow = initial_flow(u0, grid, &semigroup)?;
    let drift_conv = semigroup.convolve_source(&u.map(|x| drift.eval(x)));
    let noise_conv = stochastic_convolution(&u.map(|x| sigma.eval(x)), path, &semigroup)?;
    let rhs = u0_flow.add(&drift_conv)?.add(&noise_conv)?;
    Ok(sup_over_centers(&u.sub(&rhs)?, theta, centers, 1.0)?)
}

/// Solve over `segments` consecutive horizons of `segment_grid`, feeding
/// each terminal slice to the next segment as its initial datum while the
/// noise stream continues. Junction slices coincide bitwise.
#[allow(clippy::too_many_arguments)]
pub fn restart_horizon<R: Rng + ?Sized>(
    u0: &[f64],
    drift: &DriftSpec,
    sigma: &SigmaSpec,
    noise: &NoiseSpec,
    segment_grid: GridSpec,
    segments: usize,
    params: &PicardParams,
    rng: &mut R,
) -> Result<(SpaceTimeField, Vec<PicardState>), StochasticError> {
    let synth = NoiseSynth::new(*noise, segment_grid);
    let m = segment_grid.steps();
    let full_grid = segment_grid
        .with_horizon(segment_grid.horizon() * segments as f64, m * segments)
        .map_err(StochasticError::Grid)?;
    let mut full = SpaceTimeField::zero(full_grid, FieldRole::Solution);
    let mut datum = u0.to_vec();
    let mut states = Vec::with_capacity(segments);
    for seg in 0..segments {
        let path = synth.path(rng);
        let warnings =
            picard_assumption_warnings(drift, noise, segment_grid.dim(), params.p, params.theta);
        let sol =
            picard_solve_on_path(&datum, drift, sigma, segment_grid, &path, params, None, warnings)?;
        let start = if seg == 0 { 0 } else { 1 };
        for k in start..=m {
            full.set_slice(seg * m + k, sol.solution.slice(k));
        }
        datum = sol.solution.slice(m).to_vec();
        states.push(sol.state);
    }
    Ok((full, states))
}

#[derive(Debug, Clone)]
pub struct HorizonSearch {
    /// Largest horizon that contracted, if any.
    pub horizon: Option<f64>,
    /// `(tried horizon, contracted)` in trial order.
    pub trials: Vec<(f64, bool)>,
}

/// Bisect for a working contraction horizon: halve from `t_max` until a
/// run contracts, then push back up between the bracket endpoints.
#[allow(clippy::too_many_arguments)]
pub fn find_contracting_horizon(
    u0: &[f64],
    drift: &DriftSpec,
    sigma: &SigmaSpec,
    noise: &NoiseSpec,
    grid_template: GridSpec,
    p: f64,
    theta: f64,
    t_max: f64,
    master_seed: u64,
) -> Result<HorizonSearch, StochasticError> {
    let dt = grid_template.dt();
    let mut trials = Vec::new();
    let attempt = |t: f64, trials: &mut Vec<(f64, bool)>| -> Result<bool, StochasticError> {
        let steps = (t / dt).round().max(1.0) as usize;
        let grid = grid_template.with_horizon(steps as f64 * dt, steps)?;
        let params = PicardParams::new(&grid, p, theta);
        let mut rng = replica_rng(master_seed, trials.len() as u64);
        let ok = match picard_solve(u0, drift, sigma, noise, grid, &params, &mut rng) {
            Ok(sol) => sol.state.converged && sol.state.ratios.iter().all(|&r| r < 1.0),
            Err(StochasticError::NonContraction { .. }) => false,
            Err(e) => return Err(e),
        };
        trials.push((t, ok));
        Ok(ok)
    };
    // Halve down to a working horizon.
    let mut probe = t_max;
    let mut found = None;
    for _ in 0..12 {
        if attempt(probe, &mut trials)? {
            found = Some(probe);
            break;
        }
        probe /= 2.0;
        if probe < 4.0 * dt {
            break;
        }
    }
    let Some(mut best) = found else {
        return Ok(HorizonSearch { horizon: None, trials });
    };
    // Bisect upward between the working horizon and the last failure.
    let mut lo = best;
    let mut hi = (2.0 * best).min(t_max);
    for _ in 0..4 {
        let mid = 0.5 * (lo + hi);
        if mid - lo < 2.0 * dt {
            break;
        }
        if attempt(mid, &mut trials)? {
            best = mid;
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(HorizonSearch { horizon: Some(best), trials })
}
