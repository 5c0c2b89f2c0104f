//! Weighted growth estimation for generic random fields: ball
//! compactification, moment scans over the weight exponent, and
//! L-doubling stability checks.
//!
//! Finiteness of `E sup_x (|X(x)| / (1 + |x - x0|^theta))^p` cannot be
//! decided from one finite sample; the operational check is stability of
//! the estimate when the domain half-width doubles (samplers extend paths
//! with the same streams, so the comparison is paired) together with a
//! shrinking weighted tail beyond `L/2`.

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use thiserror::Error;

use crate::fftutil::FftPair;
use crate::par::{replica_map, replica_rng};
use crate::stats::{bootstrap_se, max_center_mean, MomentEstimate};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("lattice size must be a power of two >= 8, got {0}")]
    BadLattice(usize),
    #[error("need at least {want} replicas, got {got}")]
    TooFewReplicas { got: usize, want: usize },
    #[error("weight exponent must be positive, got {0}")]
    BadTheta(f64),
    #[error("ball resolution must be >= 2")]
    BadBallResolution,
}

/// Uniform 1-d lattice on `[-L, L]` with `n + 1` nodes (`n` a power of
/// two, so doubling `L` and `n` together extends the node set in place).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice1d {
    pub half_width: f64,
    pub n: usize,
}

impl Lattice1d {
    pub fn new(half_width: f64, n: usize) -> Result<Self, AnalysisError> {
        if n < 8 || !n.is_power_of_two() {
            return Err(AnalysisError::BadLattice(n));
        }
        Ok(Self { half_width, n })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.dx()
    }

    pub fn node_count(&self) -> usize {
        self.n + 1
    }

    /// Same spacing, doubled extent.
    pub fn doubled(&self) -> Self {
        Self { half_width: 2.0 * self.half_width, n: 2 * self.n }
    }
}

/// Moment hypothesis a sampler's paths satisfy:
/// `E|X(x0)|^p <= A` and `E|X(x) - X(y)|^p <= A |x - y|^(p gamma)`.
#[derive(Debug, Clone, Copy)]
pub struct HolderSpec {
    pub moment_const: f64,
    pub order: f64,
    pub space_exponent: f64,
    pub time_exponent: Option<f64>,
    pub anchor: f64,
}

/// Catalog of reproducible random-field generators on 1-d lattices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSampler {
    /// Two-sided Brownian motion anchored at 0; spatial exponent 1/2.
    /// Left and right halves use separate RNG streams so a doubled lattice
    /// extends the same path.
    Brownian,
    /// Stationary Gaussian field with Matern-type spectrum of smoothness
    /// `gamma` (in (0,1]) and unit variance, synthesized on the torus.
    Stationary { gamma: f64, corr_len: f64 },
}

/// Double factorial moment of the standard normal, `E|N|^p` for even `p`.
fn normal_even_moment(p: f64) -> f64 {
    let k = (p / 2.0).round() as u32;
    (1..=k).map(|j| (2 * j - 1) as f64).product()
}

impl FieldSampler {
    pub fn space_exponent(&self) -> f64 {
        match self {
            FieldSampler::Brownian => 0.5,
            FieldSampler::Stationary { gamma, .. } => *gamma,
        }
    }

    pub fn holder_spec(&self, p: f64) -> HolderSpec {
        HolderSpec {
            moment_const: normal_even_moment(p),
            order: p,
            space_exponent: self.space_exponent(),
            time_exponent: None,
            anchor: 0.0,
        }
    }

    /// Admissibility threshold `p gamma / (p - d)` for the weight exponent
    /// (d = 1 here).
    pub fn theta_threshold(&self, p: f64) -> f64 {
        p * self.space_exponent() / (p - 1.0)
    }

    /// Sample one path on the lattice. Streams are derived from
    /// `(master_seed, replica)`; a doubled lattice with the same ids
    /// produces an extension of the same path for the Brownian sampler.
    pub fn sample(&self, lat: &Lattice1d, master_seed: u64, replica: u64) -> Vec<f64> {
        match *self {
            FieldSampler::Brownian => {
                let n = lat.n;
                let step = lat.dx().sqrt();
                let mut vals = vec![0.0; n + 1];
                let mid = n / 2;
                let mut right = replica_rng(master_seed, 2 * replica);
                for i in mid + 1..=n {
                    let z: f64 = StandardNormal.sample(&mut right);
                    vals[i] = vals[i - 1] + step * z;
                }
                let mut left = replica_rng(master_seed, 2 * replica + 1);
                for i in (0..mid).rev() {
                    let z: f64 = StandardNormal.sample(&mut left);
                    vals[i] = vals[i + 1] + step * z;
                }
                vals
            }
            FieldSampler::Stationary { gamma, corr_len } => {
                let n = lat.n;
                let l = lat.half_width;
                let density = |xi: f64| (1.0 + (corr_len * xi).powi(2)).powf(-(gamma + 0.5));
                let mut weights: Vec<f64> = (0..n)
                    .map(|k| {
                        let j = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                        density(std::f64::consts::PI * j / l)
                    })
                    .collect();
                let total: f64 = weights.iter().sum();
                for w in &mut weights {
                    *w = (*w / total).sqrt() / (n as f64).sqrt();
                }
                let mut rng = replica_rng(master_seed, replica);
                let mut buf: Vec<Complex<f64>> = (0..n)
                    .map(|_| Complex::new(StandardNormal.sample(&mut rng), 0.0))
                    .collect();
                let fft = FftPair::new(n, 1);
                fft.forward(&mut buf);
                for (b, &w) in buf.iter_mut().zip(&weights) {
                    *b *= w;
                }
                fft.inverse(&mut buf);
                let mut vals: Vec<f64> = buf.iter().map(|c| c.re).collect();
                vals.push(vals[0]); // periodic wrap at +L
                vals
            }
        }
    }
}

/// The field pulled onto the closed unit ball:
/// `Y(z) = (1 - |z|) X(x0 + z (1 - |z|)^{-1/theta})`, zero on the sphere.
#[derive(Debug, Clone)]
pub struct BallField {
    pub zs: Vec<f64>,
    pub values: Vec<f64>,
    /// Fraction of interior nodes whose preimage left the box and took the
    /// damped boundary value instead.
    pub truncated_fraction: f64,
}

/// Radial part of the compactification map, `t -> t (1 - t)^{-1/theta}`;
/// strictly increasing from 0 to infinity on [0, 1).
pub fn ball_map_radius(t: f64, theta: f64) -> f64 {
    t * (1.0 - t).powf(-1.0 / theta)
}

fn interpolate(values: &[f64], lat: &Lattice1d, x: f64) -> (f64, bool) {
    let l = lat.half_width;
    if x <= -l {
        return (values[0], x < -l);
    }
    if x >= l {
        return (values[lat.n], x > l);
    }
    let s = (x + l) / lat.dx();
    let i = (s.floor() as usize).min(lat.n - 1);
    let frac = s - i as f64;
    (values[i] * (1.0 - frac) + values[i + 1] * frac, false)
}

/// Rescale a sampled 1-d field onto the unit ball grid with `2 bn + 1`
/// nodes. Preimages outside the box contribute their damped boundary
/// value and are tallied in `truncated_fraction`.
pub fn ball_rescale(
    values: &[f64],
    lat: &Lattice1d,
    x0: f64,
    theta: f64,
    bn: usize,
) -> Result<BallField, AnalysisError> {
    if !(theta > 0.0) {
        return Err(AnalysisError::BadTheta(theta));
    }
    if bn < 2 {
        return Err(AnalysisError::BadBallResolution);
    }
    let count = 2 * bn + 1;
    let mut zs = Vec::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut truncated = 0usize;
    let mut interior = 0usize;
    for i in 0..count {
        let z = -1.0 + i as f64 / bn as f64;
        zs.push(z);
        let r = z.abs();
        if r >= 1.0 {
            out.push(0.0);
            continue;
        }
        interior += 1;
        let x = x0 + z.signum() * ball_map_radius(r, theta);
        let (val, was_truncated) = interpolate(values, lat, x);
        if was_truncated {
            truncated += 1;
        }
        out.push((1.0 - r) * val);
    }
    Ok(BallField {
        zs,
        values: out,
        truncated_fraction: truncated as f64 / interior.max(1) as f64,
    })
}

/// `sup_x |X(x)| / (1 + |x - center|^theta)` over the lattice.
pub fn weighted_sup_1d(values: &[f64], lat: &Lattice1d, center: f64, theta: f64) -> f64 {
    let mut sup = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        let w = 1.0 + (lat.coord(i) - center).abs().powf(theta);
        sup = sup.max(v.abs() / w);
    }
    sup
}

/// The same sup restricted to `|x| > L/2`, the tail the weight must beat.
pub fn tail_weighted_sup(values: &[f64], lat: &Lattice1d, center: f64, theta: f64) -> f64 {
    let half = lat.half_width / 2.0;
    let mut sup = 0.0f64;
    for (i, &v) in values.iter().enumerate() {
        let x = lat.coord(i);
        if x.abs() <= half {
            continue;
        }
        let w = 1.0 + (x - center).abs().powf(theta);
        sup = sup.max(v.abs() / w);
    }
    sup
}

/// Monte Carlo estimate of the weighted growth moment
/// `max_centers E (sup_x |X| / weight)^p`, with a threshold warning when
/// `theta` is not admissible for the sampler's exponent.
pub fn weighted_growth_moment(
    sampler: &FieldSampler,
    lat: &Lattice1d,
    theta: f64,
    p: f64,
    centers: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<(MomentEstimate, Vec<String>), AnalysisError> {
    if !(theta > 0.0) {
        return Err(AnalysisError::BadTheta(theta));
    }
    if replicas < 30 {
        return Err(AnalysisError::TooFewReplicas { got: replicas, want: 30 });
    }
    let mut warnings = Vec::new();
    let threshold = sampler.theta_threshold(p);
    if theta <= threshold {
        warnings.push(format!(
            "theta = {theta} is at or below the admissibility threshold {threshold:.4}; \
             the estimate is for threshold exploration only"
        ));
    }
    let rows: Vec<Vec<f64>> = replica_map(replicas, |i| {
        let path = sampler.sample(lat, master_seed, i as u64);
        centers
            .iter()
            .map(|&c| weighted_sup_1d(&path, lat, c, theta).powf(p))
            .collect()
    });
    let refs: Vec<&Vec<f64>> = rows.iter().collect();
    let value = max_center_mean(&refs);
    let se = bootstrap_se(&rows, max_center_mean, 200, master_seed ^ 0xa5a5_5a5a);
    Ok((
        MomentEstimate {
            order: p,
            value,
            std_error: se,
            replicas,
            horizon: 0.0,
            theta,
            centers: centers.iter().map(|&c| [c, 0.0]).collect(),
        },
        warnings,
    ))
}

#[derive(Debug, Clone)]
pub struct ScanRow {
    pub theta: f64,
    pub estimate: f64,
    pub estimate_doubled: f64,
    pub rel_change: f64,
    /// Estimate moved by less than 10% when the domain doubled.
    pub stable: bool,
}

/// Sweep weight exponents and flag which ones hold up under L-doubling;
/// the flagged boundary brackets the analytic threshold.
pub fn threshold_scan(
    sampler: &FieldSampler,
    lat: &Lattice1d,
    p: f64,
    thetas: &[f64],
    centers: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<ScanRow>, AnalysisError> {
    let doubled = lat.doubled();
    let mut rows = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let (small, _) =
            weighted_growth_moment(sampler, lat, theta, p, centers, replicas, master_seed)?;
        let (big, _) =
            weighted_growth_moment(sampler, &doubled, theta, p, centers, replicas, master_seed)?;
        let rel_change = (big.value - small.value).abs() / small.value.max(f64::MIN_POSITIVE);
        rows.push(ScanRow {
            theta,
            estimate: small.value,
            estimate_doubled: big.value,
            rel_change,
            stable: rel_change < 0.10,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lat() -> Lattice1d {
        Lattice1d::new(32.0, 512).unwrap()
    }

    #[test]
    fn lattice_validation_and_geometry() {
        assert!(Lattice1d::new(8.0, 100).is_err());
        let l = lat();
        assert_eq!(l.coord(0), -32.0);
        assert_eq!(l.coord(512), 32.0);
        assert_eq!(l.coord(256), 0.0);
        let d = l.doubled();
        assert_eq!(d.dx(), l.dx());
    }

    #[test]
    fn brownian_paths_extend_under_doubling() {
        let small = lat();
        let big = small.doubled();
        let a = FieldSampler::Brownian.sample(&small, 9, 3);
        let b = FieldSampler::Brownian.sample(&big, 9, 3);
        // The small lattice occupies the middle of the doubled one.
        let off = big.n / 4;
        for i in 0..=small.n {
            assert_eq!(a[i], b[off + i], "mismatch at node {i}");
        }
    }

    #[test]
    fn brownian_anchor_and_scale() {
        let l = lat();
        let path = FieldSampler::Brownian.sample(&l, 11, 0);
        assert_eq!(path[l.n / 2], 0.0);
        // Variance at the endpoint across replicas is near L.
        let vals: Vec<f64> =
            (0..400).map(|i| FieldSampler::Brownian.sample(&l, 11, i)[l.n]).collect();
        let var = crate::stats::sample_variance(&vals);
        let se = crate::stats::variance_se(&vals);
        assert!((var - 32.0).abs() < 3.0 * se, "var {var} (se {se})");
    }

    #[test]
    fn stationary_sampler_unit_variance_and_smoothness() {
        let l = lat();
        let sampler = FieldSampler::Stationary { gamma: 1.0, corr_len: 2.0 };
        let vals: Vec<f64> = (0..600).map(|i| sampler.sample(&l, 13, i)[77]).collect();
        let var = crate::stats::sample_variance(&vals);
        let se = crate::stats::variance_se(&vals);
        assert!((var - 1.0).abs() < 3.0 * se, "var {var} (se {se})");
        // Neighboring nodes are nearly equal for a long correlation length.
        let path = sampler.sample(&l, 13, 0);
        let max_step = path.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0f64, f64::max);
        assert!(max_step < 0.5, "rough path for a smooth sampler: {max_step}");
    }

    #[test]
    fn ball_map_radius_is_strictly_increasing() {
        for theta in [0.4, 1.0, 2.5] {
            let mut prev = -1.0;
            for i in 0..1000 {
                let t = i as f64 / 1000.0;
                let r = ball_map_radius(t, theta);
                assert!(r > prev, "not increasing at t={t}, theta={theta}");
                prev = r;
            }
        }
    }

    #[test]
    fn ball_rescale_center_sphere_and_roundtrip() {
        let l = lat();
        let sampler = FieldSampler::Stationary { gamma: 1.0, corr_len: 4.0 };
        let path = sampler.sample(&l, 17, 2);
        let theta = 1.0;
        let ball = ball_rescale(&path, &l, 0.0, theta, 400).unwrap();
        // Y(0) = X(x0).
        let mid = ball.values.len() / 2;
        assert!((ball.values[mid] - path[l.n / 2]).abs() < 1e-12);
        // Y = 0 on the sphere.
        assert_eq!(ball.values[0], 0.0);
        assert_eq!(*ball.values.last().unwrap(), 0.0);
        // Round trip: un-damp and interpolate back for |z| <= 0.9.
        for (i, &z) in ball.zs.iter().enumerate() {
            let r = z.abs();
            if r > 0.9 || r == 0.0 {
                continue;
            }
            let x = z.signum() * ball_map_radius(r, theta);
            if x.abs() > l.half_width {
                continue;
            }
            let (expect, _) = interpolate(&path, &l, x);
            let got = ball.values[i] / (1.0 - r);
            assert!((got - expect).abs() < 1e-10, "roundtrip at z={z}");
        }
    }

    #[test]
    fn ball_weight_identity() {
        // 1/(1 + |x-x0|^theta) = (1-|z|)/(1-|z|+|z|^theta) at x = rho(z).
        for theta in [0.5, 1.0, 1.7] {
            for i in 1..100 {
                let z = i as f64 / 100.0;
                let x = ball_map_radius(z, theta);
                let lhs = 1.0 / (1.0 + x.powf(theta));
                let rhs = (1.0 - z) / (1.0 - z + z.powf(theta));
                assert!((lhs - rhs).abs() < 1e-12, "theta={theta}, z={z}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn c_theta_infimum() {
        // inf (1 - s + s^theta) over [0,1] is 1 for theta in (0,1),
        // positive always.
        for theta in [0.3, 0.7, 0.99] {
            let inf = (0..=1000)
                .map(|i| {
                    let s = i as f64 / 1000.0;
                    1.0 - s + s.powf(theta)
                })
                .fold(f64::INFINITY, f64::min);
            assert!((inf - 1.0).abs() < 1e-9, "theta={theta}: inf={inf}");
        }
        for theta in [1.5, 2.0, 3.0] {
            let inf = (0..=1000)
                .map(|i| {
                    let s = i as f64 / 1000.0;
                    1.0 - s + s.powf(theta)
                })
                .fold(f64::INFINITY, f64::min);
            assert!(inf > 0.0 && inf < 1.0, "theta={theta}: inf={inf}");
        }
    }

    #[test]
    fn deterministic_zero_sampler_wiring() {
        // Zero field: the estimator returns exactly zero.
        let l = lat();
        let path = vec![0.0; l.node_count()];
        assert_eq!(weighted_sup_1d(&path, &l, 0.0, 1.0), 0.0);
    }

    #[test]
    fn growth_moment_flags_sub_threshold_theta() {
        let l = Lattice1d::new(16.0, 256).unwrap();
        // Brownian threshold at p=8 is 4/7; theta=0.25 is below it.
        let (_, warnings) =
            weighted_growth_moment(&FieldSampler::Brownian, &l, 0.25, 8.0, &[0.0], 30, 3).unwrap();
        assert!(!warnings.is_empty());
        let (_, warnings) =
            weighted_growth_moment(&FieldSampler::Brownian, &l, 0.75, 8.0, &[0.0], 30, 3).unwrap();
        assert!(warnings.is_empty());
    }

    #[test]
    fn brownian_scan_brackets_the_threshold() {
        let l = Lattice1d::new(32.0, 512).unwrap();
        let rows = threshold_scan(
            &FieldSampler::Brownian,
            &l,
            8.0,
            &[0.06, 1.2],
            &[0.0],
            150,
            31,
        )
        .unwrap();
        // Far below threshold: the sup keeps growing with L.
        assert!(!rows[0].stable, "theta=0.06 should be unstable: {:?}", rows[0]);
        // Far above: stable.
        assert!(rows[1].stable, "theta=1.2 should be stable: {:?}", rows[1]);
    }

    #[test]
    fn tail_sup_shrinks_for_admissible_theta() {
        let small = Lattice1d::new(32.0, 512).unwrap();
        let big = small.doubled();
        let theta = 0.75;
        let mut diffs = Vec::new();
        for i in 0..150 {
            let a = FieldSampler::Brownian.sample(&small, 41, i);
            let b = FieldSampler::Brownian.sample(&big, 41, i);
            diffs.push(
                tail_weighted_sup(&b, &big, 0.0, theta) - tail_weighted_sup(&a, &small, 0.0, theta),
            );
        }
        let (m, se) = crate::stats::mean_se(&diffs);
        assert!(m < 3.0 * se, "tail grew under doubling: mean diff {m} (se {se})");
    }

    #[test]
    fn center_uniformity_for_stationary_fields() {
        let l = lat();
        let sampler = FieldSampler::Stationary { gamma: 0.8, corr_len: 1.0 };
        let centers = [-16.0, 0.0, 16.0];
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let path = sampler.sample(&l, 53, i);
                centers.iter().map(|&c| weighted_sup_1d(&path, &l, c, 1.0).powf(4.0)).collect()
            })
            .collect();
        let mut means = Vec::new();
        let mut ses = Vec::new();
        for c in 0..centers.len() {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            let (m, se) = crate::stats::mean_se(&col);
            means.push(m);
            ses.push(se);
        }
        for i in 0..means.len() {
            for j in (i + 1)..means.len() {
                let gap = (means[i] - means[j]).abs();
                let se = ses[i].hypot(ses[j]);
                assert!(gap < 3.0 * se, "centers {i},{j} disagree: {gap} vs 3se {}", 3.0 * se);
            }
        }
    }
}
