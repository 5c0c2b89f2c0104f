//! Spatially homogeneous Gaussian noise, white in time.
//!
//! An increment over a time step is synthesized spectrally on the torus:
//! the discrete mode weights are `g(xi_k) / (2L)^d` where `g` is the
//! spectral density of the correlation, so the sampled field has covariance
//! `dt * Lambda_periodized(x - y)` up to spectral truncation. Periodization
//! error is negligible at lags below `L/4` for the catalog kinds, which is
//! where validation statistics are read.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use thiserror::Error;

use crate::fftutil::FftPair;
use crate::grid::GridSpec;
use crate::stats::mean_se;

#[derive(Debug, Error, PartialEq)]
pub enum NoiseError {
    #[error("space-time white noise violates the strong Dalang condition in d = 2")]
    WhiteInTwoDimensions,
    #[error("riesz exponent must lie in (0, min(d, 2)), got {0}")]
    BadRieszExponent(f64),
    #[error("correlation length must be positive, got {0}")]
    BadCorrelationLength(f64),
    #[error("dalang exponent must lie in (0, 1), got {0}")]
    BadEta(f64),
    #[error("need at least {want} samples, got {got}")]
    TooFewSamples { got: usize, want: usize },
    #[error("increments disagree on grid or time step")]
    MixedSamples,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Space-time white noise; admissible in d = 1 only.
    White,
    /// Gaussian correlation `exp(-r^2 / (2 l^2))`.
    Gaussian { corr_len: f64 },
    /// Riesz correlation `r^(-alpha)` with density `c_{d,alpha} |xi|^(alpha-d)`.
    Riesz { alpha: f64 },
}

/// Noise kind plus the Dalang exponent claimed for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    kind: NoiseKind,
    dim: u8,
    eta: f64,
}

/// ln Gamma via the Lanczos series; used only for the Riesz normalization.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, dim: u8, eta: f64) -> Result<Self, NoiseError> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(NoiseError::BadEta(eta));
        }
        match kind {
            NoiseKind::White if dim == 2 => return Err(NoiseError::WhiteInTwoDimensions),
            NoiseKind::Gaussian { corr_len } if !(corr_len > 0.0) => {
                return Err(NoiseError::BadCorrelationLength(corr_len))
            }
            NoiseKind::Riesz { alpha } => {
                let cap = (dim as f64).min(2.0);
                if !(alpha > 0.0 && alpha < cap) {
                    return Err(NoiseError::BadRieszExponent(alpha));
                }
            }
            _ => {}
        }
        Ok(Self { kind, dim, eta })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Spectral density `g(|xi|)`, nonnegative by construction.
    pub fn spectral_density(&self, xi_norm: f64) -> f64 {
        let d = self.dim as f64;
        match self.kind {
            NoiseKind::White => 1.0,
            NoiseKind::Gaussian { corr_len } => {
                let l2 = corr_len * corr_len;
                (2.0 * std::f64::consts::PI * l2).powf(d / 2.0)
                    * (-l2 * xi_norm * xi_norm / 2.0).exp()
            }
            NoiseKind::Riesz { alpha } => {
                let c = (2.0f64.ln() * (d - alpha)
                    + (std::f64::consts::PI.ln()) * d / 2.0
                    + ln_gamma((d - alpha) / 2.0)
                    - ln_gamma(alpha / 2.0))
                .exp();
                c * xi_norm.powf(alpha - d)
            }
        }
    }

    /// Continuum correlation `Lambda(r)` at spatial distance `r`; the white
    /// kind is a lattice delta, handled by `covariance_target`.
    pub fn correlation(&self, r: f64) -> f64 {
        match self.kind {
            NoiseKind::White => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            NoiseKind::Gaussian { corr_len } => (-r * r / (2.0 * corr_len * corr_len)).exp(),
            NoiseKind::Riesz { alpha } => r.powf(-alpha),
        }
    }

    /// Target covariance (without the `dt` factor) of sampled increments at
    /// a lag of `lag` nodes along the first axis.
    pub fn covariance_target(&self, grid: &GridSpec, lag: usize) -> f64 {
        let r = lag as f64 * grid.dx();
        match self.kind {
            NoiseKind::White => {
                if lag == 0 {
                    1.0 / grid.dx().powi(grid.dim() as i32)
                } else {
                    0.0
                }
            }
            _ => self.correlation(r),
        }
    }

    /// Exact covariance of the discrete synthesis at a lag of `lag` nodes
    /// along the first axis (no `dt` factor): `sum_k c_k cos(xi_k . r)`.
    pub fn lattice_covariance(&self, grid: &GridSpec, lag: usize) -> f64 {
        let weights = mode_weights(self, grid);
        let n = grid.points_per_dim();
        let r = lag as f64 * grid.dx();
        let l = grid.half_width();
        let mut sum = 0.0;
        for node in 0..grid.node_count() {
            let k_axis = if grid.dim() == 1 { node } else { node / n };
            let j = if k_axis < n / 2 { k_axis as f64 } else { k_axis as f64 - n as f64 };
            let xi = std::f64::consts::PI * j / l;
            // weights store sqrt(c_k)/N^(d/2); undo both factors.
            let w = weights[node] * (grid.node_count() as f64).sqrt();
            sum += w * w * (xi * r).cos();
        }
        sum
    }

    /// Asymptotic decay exponent of `g`; `None` means faster than any power.
    pub fn tail_exponent(&self) -> Option<f64> {
        match self.kind {
            NoiseKind::White => Some(0.0),
            NoiseKind::Gaussian { .. } => None,
            NoiseKind::Riesz { alpha } => Some(alpha - self.dim as f64),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DalangReport {
    /// Quadrature of the integrand up to the cutoff radius.
    pub value: f64,
    /// Whether the full integral converges, decided from the tail exponent.
    pub finite: bool,
    pub eta: f64,
    pub cutoff: f64,
}

/// Quadrature of `int_{|xi| <= R} g(xi) / (1 + |xi|^{2(1-eta)}) dxi` plus the
/// analytic verdict on convergence of the full integral.
pub fn dalang_integral(spec: &NoiseSpec, eta: f64, cutoff: f64) -> Result<DalangReport, NoiseError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(NoiseError::BadEta(eta));
    }
    let d = spec.dim() as f64;
    let power = 2.0 * (1.0 - eta);
    let integrand = |r: f64| spec.spectral_density(r) / (1.0 + r.powf(power));
    // Graded midpoint mesh: cells shrink toward the (integrable)
    // singularity of the riesz density at the origin.
    let cells = 4000usize;
    let mut value = 0.0;
    let mut left = 0.0f64;
    for i in 1..=cells {
        let right = cutoff * (i as f64 / cells as f64).powi(4);
        let mid = 0.5 * (left + right);
        let shell = match spec.dim() {
            1 => 2.0, // both half-lines
            _ => 2.0 * std::f64::consts::PI * mid,
        };
        value += integrand(mid) * shell * (right - left);
        left = right;
    }
    let finite = match spec.tail_exponent() {
        None => true,
        Some(decay) => decay - power < -d,
    };
    Ok(DalangReport { value, finite, eta, cutoff })
}

/// One white-in-time increment: a spatial field with law
/// `N(0, dt * Lambda_periodized(x - y))`.
#[derive(Debug, Clone)]
pub struct NoiseIncrement {
    pub grid: GridSpec,
    pub dt: f64,
    pub values: Vec<f64>,
}

fn mode_weights(spec: &NoiseSpec, grid: &GridSpec) -> Vec<f64> {
    let n = grid.points_per_dim();
    let l = grid.half_width();
    let vol = (2.0 * l).powi(grid.dim() as i32);
    let xi_axis: Vec<f64> = (0..n)
        .map(|k| {
            let j = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            std::f64::consts::PI * j / l
        })
        .collect();
    let node_norm = (grid.node_count() as f64).sqrt();
    let density_at = |norm: f64| spec.spectral_density(norm);
    let mut weights: Vec<f64> = match grid.dim() {
        1 => xi_axis.iter().map(|&x| density_at(x.abs())).collect(),
        _ => {
            let mut w = Vec::with_capacity(n * n);
            for i in 0..n {
                for j in 0..n {
                    w.push(density_at((xi_axis[i].powi(2) + xi_axis[j].powi(2)).sqrt()));
                }
            }
            w
        }
    };
    // The riesz density has a removable lattice singularity at xi = 0:
    // use the nearest-neighbor average (all neighbors sit at |xi| = pi/L).
    if matches!(spec.kind(), NoiseKind::Riesz { .. }) {
        weights[0] = density_at(std::f64::consts::PI / l);
    }
    for w in &mut weights {
        debug_assert!(*w >= 0.0, "negative discrete spectral weight");
        *w = (*w / vol).sqrt() / node_norm;
    }
    weights
}

/// Spectral sampler with cached plans and mode weights.
pub struct NoiseSynth {
    spec: NoiseSpec,
    grid: GridSpec,
    weights: Vec<f64>,
    fft: FftPair,
}

impl NoiseSynth {
    pub fn new(spec: NoiseSpec, grid: GridSpec) -> Self {
        let weights = mode_weights(&spec, &grid);
        let fft = FftPair::new(grid.points_per_dim(), grid.dim());
        Self { spec, grid, weights, fft }
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    /// Draw one increment. Exactly `node_count` standard normals are
    /// consumed from `rng` in node order, so streams are easy to audit.
    pub fn increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> NoiseIncrement {
        let nodes = self.grid.node_count();
        let mut buf: Vec<Complex<f64>> = (0..nodes)
            .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
            .collect();
        self.fft.forward(&mut buf);
        let scale = dt.sqrt();
        for (b, &w) in buf.iter_mut().zip(&self.weights) {
            *b *= w * scale;
        }
        self.fft.inverse(&mut buf);
        NoiseIncrement { grid: self.grid, dt, values: buf.iter().map(|c| c.re).collect() }
    }

    /// A full path of `grid.steps()` increments of size `grid.dt()`.
    pub fn path<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<NoiseIncrement> {
        let dt = self.grid.dt();
        (0..self.grid.steps()).map(|_| self.increment(dt, rng)).collect()
    }
}

/// Convenience one-shot sampler matching the module-level operation shape.
pub fn sample_increment<R: Rng + ?Sized>(
    spec: &NoiseSpec,
    grid: &GridSpec,
    dt: f64,
    rng: &mut R,
) -> NoiseIncrement {
    NoiseSynth::new(*spec, *grid).increment(dt, rng)
}

#[derive(Debug, Clone)]
pub struct CovarianceRow {
    /// Lag in nodes along the first axis.
    pub lag: usize,
    pub lag_distance: f64,
    pub empirical: f64,
    pub std_error: f64,
    /// `dt * Lambda(lag)` against the continuum correlation.
    pub target: f64,
    /// `dt *` the exact covariance of the discrete synthesis.
    pub target_lattice: f64,
}

/// Spatially averaged empirical covariance per lag, with standard errors
/// across samples.
pub fn covariance_estimate(
    spec: &NoiseSpec,
    samples: &[NoiseIncrement],
    lags: &[usize],
) -> Result<Vec<CovarianceRow>, NoiseError> {
    if samples.len() < 100 {
        return Err(NoiseError::TooFewSamples { got: samples.len(), want: 100 });
    }
    let grid = samples[0].grid;
    let dt = samples[0].dt;
    if samples.iter().any(|s| s.grid != grid || s.dt != dt) {
        return Err(NoiseError::MixedSamples);
    }
    let n = grid.points_per_dim();
    let nodes = grid.node_count();
    let mut rows = Vec::with_capacity(lags.len());
    for &lag in lags {
        let per_sample: Vec<f64> = samples
            .iter()
            .map(|s| {
                let mut acc = 0.0;
                match grid.dim() {
                    1 => {
                        for i in 0..n {
                            acc += s.values[i] * s.values[(i + lag) % n];
                        }
                    }
                    _ => {
                        for i in 0..n {
                            for j in 0..n {
                                acc += s.values[i * n + j] * s.values[((i + lag) % n) * n + j];
                            }
                        }
                    }
                }
                acc / nodes as f64
            })
            .collect();
        let (emp, se) = mean_se(&per_sample);
        rows.push(CovarianceRow {
            lag,
            lag_distance: lag as f64 * grid.dx(),
            empirical: emp,
            std_error: se,
            target: dt * spec.covariance_target(&grid, lag),
            target_lattice: dt * spec.lattice_covariance(&grid, lag),
        });
    }
    Ok(rows)
}
