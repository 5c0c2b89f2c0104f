//! Heat kernel and semigroup on the periodic box, applied spectrally.
//!
//! The evolution never samples the kernel in physical space: the Fourier
//! multiplier `exp(-|xi|^2 t / 2)` is the exact periodic solution operator,
//! which avoids aliasing at small times. Frequencies per dimension are
//! `xi_j = pi * j / L` for `j = -N/2 .. N/2 - 1`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use thiserror::Error;

use crate::fftutil::FftPair;
use crate::grid::{FieldRole, GridSpec, SpaceTimeField};

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("heat kernel needs t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("negative evolution time {0}")]
    NegativeTime(f64),
    #[error("spatial data has {got} values, grid wants {want}")]
    SizeMismatch { got: usize, want: usize },
}

/// Closed-form Gaussian kernel `(2 pi t)^(-d/2) exp(-|x|^2 / (2t))`.
pub fn heat_kernel_value(t: f64, x: [f64; 2], dim: u8) -> Result<f64, KernelError> {
    if !(t > 0.0) {
        return Err(KernelError::NonPositiveTime(t));
    }
    let r2 = match dim {
        1 => x[0] * x[0],
        _ => x[0] * x[0] + x[1] * x[1],
    };
    let norm = (2.0 * std::f64::consts::PI * t).powf(-(dim as f64) / 2.0);
    Ok(norm * (-r2 / (2.0 * t)).exp())
}

/// Heat semigroup on the periodic lattice with cached Fourier multipliers.
///
/// Immutable after construction; `apply` is pure and safe to call from
/// concurrent replicas (the multiplier cache is internally synchronized).
pub struct HeatSemigroup {
    grid: GridSpec,
    xi_sq: Vec<f64>,
    fft: FftPair,
    cache: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl HeatSemigroup {
    pub fn new(grid: GridSpec) -> Self {
        let n = grid.points_per_dim();
        let l = grid.half_width();
        // Squared frequency per axis index, in DFT order.
        let axis_sq: Vec<f64> = (0..n)
            .map(|k| {
                let j = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                let xi = std::f64::consts::PI * j / l;
                xi * xi
            })
            .collect();
        let xi_sq: Vec<f64> = match grid.dim() {
            1 => axis_sq.clone(),
            _ => {
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        out.push(axis_sq[i] + axis_sq[j]);
                    }
                }
                out
            }
        };
        Self { grid, xi_sq, fft: FftPair::new(n, grid.dim()), cache: Mutex::new(HashMap::new()) }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Multiplier `exp(-|xi|^2 t / 2)` per node, cached by the bits of `t`.
    pub fn multiplier(&self, t: f64) -> Arc<Vec<f64>> {
        let key = t.to_bits();
        if let Some(m) = self.cache.lock().unwrap().get(&key) {
            return Arc::clone(m);
        }
        let m = Arc::new(
            self.xi_sq.iter().map(|&s| (-s * t / 2.0).exp()).collect::<Vec<f64>>(),
        );
        self.cache.lock().unwrap().insert(key, Arc::clone(&m));
        m
    }

    fn apply_multiplier(&self, values: &[f64], mult: &[f64]) -> Vec<f64> {
        let nodes = self.grid.node_count();
        let mut buf: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft.forward(&mut buf);
        for (b, &m) in buf.iter_mut().zip(mult) {
            *b *= m;
        }
        self.fft.inverse(&mut buf);
        let scale = 1.0 / nodes as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    /// Apply `S(t)` to a spatial slice. `t = 0` returns the data unchanged.
    pub fn apply(&self, values: &[f64], t: f64) -> Result<Vec<f64>, KernelError> {
        if t < 0.0 {
            return Err(KernelError::NegativeTime(t));
        }
        let want = self.grid.node_count();
        if values.len() != want {
            return Err(KernelError::SizeMismatch { got: values.len(), want });
        }
        if t == 0.0 {
            return Ok(values.to_vec());
        }
        Ok(self.apply_multiplier(values, &self.multiplier(t)))
    }

    /// Deterministic space-time convolution against the kernel:
    /// `v(t) = int_0^t S(t-s) source(s) ds` by the left-endpoint recursion
    /// `v_{k+1} = S(dt) [v_k + dt * source(t_k)]`, `v_0 = 0`.
    pub fn convolve_source(&self, source: &SpaceTimeField) -> SpaceTimeField {
        let grid = self.grid;
        let dt = grid.dt();
        let mult = self.multiplier(dt);
        let nodes = grid.node_count();
        let mut out = SpaceTimeField::zero(grid, FieldRole::Remainder);
        let mut v = vec![0.0; nodes];
        for k in 0..grid.steps() {
            let src = source.slice(k);
            for (vi, si) in v.iter_mut().zip(src) {
                *vi += dt * si;
            }
            v = self.apply_multiplier(&v, &mult);
            out.set_slice(k + 1, &v);
        }
        out
    }

    /// Lattice quadrature of the free-space kernel mass, `dx^d sum_x G(t,x)`;
    /// close to 1 once the box holds the Gaussian tails.
    pub fn mass_check(&self, t: f64) -> Result<f64, KernelError> {
        if !(t > 0.0) {
            return Err(KernelError::NonPositiveTime(t));
        }
        let g = self.grid;
        let dv = g.dx().powi(g.dim() as i32);
        let mut sum = 0.0;
        for node in 0..g.node_count() {
            sum += heat_kernel_value(t, g.node_coord(node), g.dim())?;
        }
        Ok(sum * dv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn semigroup(l: f64, n: usize) -> HeatSemigroup {
        HeatSemigroup::new(GridSpec::new(1, l, n, 1.0, 10).unwrap())
    }

    #[test]
    fn kernel_closed_form_values() {
        let v = heat_kernel_value(1.0, [0.0, 0.0], 1).unwrap();
        assert!((v - 0.3989422804014327).abs() < 1e-15);
        let v2 = heat_kernel_value(1.0, [0.0, 0.0], 2).unwrap();
        assert!((v2 - 0.15915494309189535).abs() < 1e-15);
        // d=1, t=0.5, x=1: pi^(-1/2) e^(-1).
        let v3 = heat_kernel_value(0.5, [1.0, 0.0], 1).unwrap();
        assert!((v3 - 0.20755374871029735).abs() < 1e-12);
        assert!(heat_kernel_value(0.0, [0.0, 0.0], 1).is_err());
        assert!(heat_kernel_value(-1.0, [0.0, 0.0], 1).is_err());
    }

    #[test]
    fn kernel_value_matches_fourier_inversion() {
        // Cross-check G(0.5, 1) against quadrature of the multiplier:
        // G(t,x) = (1/2pi) int exp(-xi^2 t/2) cos(xi x) dxi.
        let t = 0.5;
        let x = 1.0;
        let (mut sum, m, cap) = (0.0, 400_000, 60.0);
        let dxi = cap / m as f64;
        for i in 0..m {
            let xi = (i as f64 + 0.5) * dxi;
            sum += (-xi * xi * t / 2.0).exp() * (xi * x).cos();
        }
        let numeric = sum * dxi / std::f64::consts::PI;
        let closed = heat_kernel_value(t, [x, 0.0], 1).unwrap();
        assert!((numeric - closed).abs() < 1e-10);
    }

    #[test]
    fn multiplier_at_zero_frequency_is_one() {
        let s = semigroup(10.0, 64);
        assert_eq!(s.multiplier(0.37)[0], 1.0);
        assert!(s.multiplier(0.37).iter().all(|&m| m > 0.0 && m <= 1.0));
    }

    #[test]
    fn constants_are_preserved() {
        let s = semigroup(10.0, 128);
        let f = vec![3.25; 128];
        let g = s.apply(&f, 0.8).unwrap();
        for v in g {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn time_zero_is_identity() {
        let s = semigroup(10.0, 64);
        let f: Vec<f64> = (0..64).map(|i| (i as f64).sin()).collect();
        assert_eq!(s.apply(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn gaussian_bump_variance_adds() {
        // exp(-x^2/(2 s^2)) evolves to s/sqrt(s^2+t) exp(-x^2/(2(s^2+t))).
        let grid = GridSpec::new(1, 32.0, 1024, 1.0, 10).unwrap();
        let s = HeatSemigroup::new(grid);
        let s0: f64 = 1.0;
        let t = 0.5;
        let f: Vec<f64> = (0..grid.node_count())
            .map(|n| {
                let x = grid.node_coord(n)[0];
                (-x * x / (2.0 * s0 * s0)).exp()
            })
            .collect();
        let evolved = s.apply(&f, t).unwrap();
        let var = s0 * s0 + t;
        let amp = s0 / var.sqrt();
        for n in 0..grid.node_count() {
            let x = grid.node_coord(n)[0];
            let expect = amp * (-x * x / (2.0 * var)).exp();
            assert!(
                (evolved[n] - expect).abs() < 1e-8,
                "x={x}: {} vs {}",
                evolved[n],
                expect
            );
        }
    }

    #[test]
    fn semigroup_law() {
        let grid = GridSpec::new(1, 16.0, 256, 1.0, 10).unwrap();
        let s = HeatSemigroup::new(grid);
        let f: Vec<f64> = (0..256).map(|i| (0.3 * i as f64).sin() + 0.2).collect();
        let a = s.apply(&s.apply(&f, 0.3).unwrap(), 0.45).unwrap();
        let b = s.apply(&f, 0.75).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn convolution_of_zero_and_constants() {
        let grid = GridSpec::new(1, 16.0, 128, 1.0, 200).unwrap();
        let s = HeatSemigroup::new(grid);
        let zero = SpaceTimeField::zero(grid, FieldRole::Generic);
        assert!(s.convolve_source(&zero).values().iter().all(|&v| v == 0.0));

        // Constant source 1: v(t) = t up to O(dt).
        let one = SpaceTimeField::from_fn(grid, FieldRole::Generic, |_, _| 1.0);
        let v = s.convolve_source(&one);
        let dt = grid.dt();
        for k in [50, 100, 200] {
            let t = grid.time_value(k);
            let got = v.slice(k)[17];
            assert!((got - t).abs() <= dt * grid.horizon() + 1e-12, "t={t} got={got}");
        }
    }

    #[test]
    fn convolution_of_linear_source() {
        // source(s) = s gives t^2/2 with tolerance 2 dt T.
        let grid = GridSpec::new(1, 16.0, 128, 1.0, 400).unwrap();
        let s = HeatSemigroup::new(grid);
        let src = SpaceTimeField::from_fn(grid, FieldRole::Generic, |t, _| t);
        let v = s.convolve_source(&src);
        let m = grid.steps();
        let t = grid.horizon();
        let got = v.slice(m)[31];
        assert!((got - t * t / 2.0).abs() <= 2.0 * grid.dt() * t);
    }

    #[test]
    fn mass_check_near_one() {
        let grid = GridSpec::new(1, 10.0, 1024, 1.0, 10).unwrap();
        let s = HeatSemigroup::new(grid);
        assert!((s.mass_check(0.1).unwrap() - 1.0).abs() < 1e-8);
        // t = T with L >= 10 sqrt(T).
        assert!((s.mass_check(1.0).unwrap() - 1.0).abs() < 1e-8);
        assert!(s.mass_check(0.0).is_err());
    }

    #[test]
    fn two_dimensional_constants_and_law() {
        let grid = GridSpec::new(2, 8.0, 32, 1.0, 4).unwrap();
        let s = HeatSemigroup::new(grid);
        let f = vec![1.5; grid.node_count()];
        for v in s.apply(&f, 0.4).unwrap() {
            assert!((v - 1.5).abs() < 1e-12);
        }
        let g: Vec<f64> = (0..grid.node_count()).map(|i| ((i % 7) as f64).cos()).collect();
        let a = s.apply(&s.apply(&g, 0.2).unwrap(), 0.3).unwrap();
        let b = s.apply(&g, 0.5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
