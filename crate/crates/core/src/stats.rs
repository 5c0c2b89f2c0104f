//! Small statistics helpers shared by the Monte Carlo estimators.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

/// A Monte Carlo moment estimate with its uncertainty and provenance.
#[derive(Debug, Clone)]
pub struct MomentEstimate {
    /// Moment order p.
    pub order: f64,
    pub value: f64,
    pub std_error: f64,
    pub replicas: usize,
    pub horizon: f64,
    pub theta: f64,
    pub centers: Vec<[f64; 2]>,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Standard error of the sample variance under approximate normality.
pub fn variance_se(xs: &[f64]) -> f64 {
    sample_variance(xs) * (2.0 / (xs.len() as f64 - 1.0)).sqrt()
}

/// Excess-free kurtosis estimate (normal = 3).
pub fn kurtosis(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2)
}

/// Bootstrap standard error for a statistic of per-replica rows.
///
/// `rows[i]` holds replica `i`'s values (for example one entry per weight
/// center); `stat` reduces a resampled set of rows to a scalar. Resampling
/// is seeded so the reported error bars are reproducible.
pub fn bootstrap_se<S>(rows: &[Vec<f64>], stat: S, rounds: usize, seed: u64) -> f64
where
    S: Fn(&[&Vec<f64>]) -> f64,
{
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = Uniform::new(0usize, n).unwrap();
    let mut stats = Vec::with_capacity(rounds);
    let mut pick: Vec<&Vec<f64>> = Vec::with_capacity(n);
    for _ in 0..rounds {
        pick.clear();
        for _ in 0..n {
            pick.push(&rows[idx.sample(&mut rng)]);
        }
        stats.push(stat(&pick));
    }
    let m = mean(&stats);
    (stats.iter().map(|s| (s - m) * (s - m)).sum::<f64>() / (rounds as f64 - 1.0)).sqrt()
}

/// Max-over-centers of the per-center mean; the reduction used by the
/// weighted moment estimators.
pub fn max_center_mean(rows: &[&Vec<f64>]) -> f64 {
    let centers = rows[0].len();
    let mut best = f64::NEG_INFINITY;
    for c in 0..centers {
        let m = rows.iter().map(|r| r[c]).sum::<f64>() / rows.len() as f64;
        best = best.max(m);
    }
    best
}
