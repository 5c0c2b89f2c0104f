//! Space-time lattice on the truncated periodic box and weighted sup norms.
//!
//! The spatial domain is the box `[-L, L]^d` with periodic wraparound; the
//! lattice has `N` nodes per dimension at `x_i = -L + i*dx`, `dx = 2L/N`.
//! Statistics that feed verification are read on the centered window
//! `[-L/2, L/2]^d` so that truncation artifacts near the seam stay
//! quarantined.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("spatial dimension must be 1 or 2, got {0}")]
    BadDimension(u8),
    #[error("points per dimension must be a power of two >= 8, got {0}")]
    BadPointCount(usize),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("time step count must be >= 1")]
    NoTimeSteps,
    #[error("field data has {got} values, grid wants {want}")]
    SizeMismatch { got: usize, want: usize },
    #[error("field contains a non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("weight center lies outside the box")]
    CenterOutsideBox,
    #[error("empty time range")]
    EmptyTimeRange,
    #[error("empty center set")]
    NoCenters,
    #[error("fields live on different grids")]
    GridMismatch,
}

/// Truncated space-time lattice: box `[-L,L]^d`, `N` nodes per dimension,
/// horizon `T` with `M` uniform steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: u8,
    half_width: f64,
    points: usize,
    horizon: f64,
    steps: usize,
}

impl GridSpec {
    pub fn new(
        dim: u8,
        half_width: f64,
        points: usize,
        horizon: f64,
        steps: usize,
    ) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::BadDimension(dim));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(GridError::BadPointCount(points));
        }
        if !(half_width > 0.0) {
            return Err(GridError::NonPositive { name: "half_width", value: half_width });
        }
        if !(horizon > 0.0) {
            return Err(GridError::NonPositive { name: "horizon", value: horizon });
        }
        if steps == 0 {
            return Err(GridError::NoTimeSteps);
        }
        Ok(Self { dim, half_width, points, horizon, steps })
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points_per_dim(&self) -> usize {
        self.points
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// Number of spatial nodes, `N^d`.
    pub fn node_count(&self) -> usize {
        match self.dim {
            1 => self.points,
            _ => self.points * self.points,
        }
    }

    pub fn time_value(&self, step: usize) -> f64 {
        step as f64 * self.dt()
    }

    /// Coordinates of a flat node index. The second component is 0 in d=1.
    pub fn node_coord(&self, node: usize) -> [f64; 2] {
        let dx = self.dx();
        let l = self.half_width;
        match self.dim {
            1 => [-l + node as f64 * dx, 0.0],
            _ => {
                let i = node / self.points;
                let j = node % self.points;
                [-l + i as f64 * dx, -l + j as f64 * dx]
            }
        }
    }

    /// Whether a node lies in the centered observation window `[-L/2, L/2]^d`.
    pub fn in_window(&self, node: usize) -> bool {
        let half = self.half_width / 2.0;
        let c = self.node_coord(node);
        match self.dim {
            1 => c[0].abs() <= half + 1e-12,
            _ => c[0].abs() <= half + 1e-12 && c[1].abs() <= half + 1e-12,
        }
    }

    /// Flat indices of the observation window.
    pub fn window_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.in_window(n)).collect()
    }

    /// Evenly spaced weight centers over the window, `per_dim^d` of them.
    /// A single point per dimension degenerates to the origin.
    pub fn center_lattice(&self, per_dim: usize) -> Vec<[f64; 2]> {
        let half = self.half_width / 2.0;
        let axis: Vec<f64> = if per_dim <= 1 {
            vec![0.0]
        } else {
            (0..per_dim)
                .map(|i| -half + 2.0 * half * i as f64 / (per_dim - 1) as f64)
                .collect()
        };
        match self.dim {
            1 => axis.iter().map(|&x| [x, 0.0]).collect(),
            _ => {
                let mut out = Vec::with_capacity(axis.len() * axis.len());
                for &x in &axis {
                    for &y in &axis {
                        out.push([x, y]);
                    }
                }
                out
            }
        }
    }

    /// Grid with the same box and resolution but a different horizon.
    pub fn with_horizon(&self, horizon: f64, steps: usize) -> Result<Self, GridError> {
        Self::new(self.dim, self.half_width, self.points, horizon, steps)
    }
}

/// What a field stands for; carried through serialization for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    /// Solution u
    Solution,
    /// Drift remainder v = u - z
    Remainder,
    /// Deterministic input z of the fixed-point map
    Input,
    /// Stochastic convolution Z
    StochConv,
    /// Heat flow of the initial datum
    InitialFlow,
    NoiseIncrement,
    Generic,
}

impl FieldRole {
    pub fn tag(self) -> u8 {
        match self {
            FieldRole::Solution => 0,
            FieldRole::Remainder => 1,
            FieldRole::Input => 2,
            FieldRole::StochConv => 3,
            FieldRole::InitialFlow => 4,
            FieldRole::NoiseIncrement => 5,
            FieldRole::Generic => 6,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => FieldRole::Solution,
            1 => FieldRole::Remainder,
            2 => FieldRole::Input,
            3 => FieldRole::StochConv,
            4 => FieldRole::InitialFlow,
            5 => FieldRole::NoiseIncrement,
            6 => FieldRole::Generic,
            _ => return None,
        })
    }
}

/// Scalar field on the space-time lattice: `steps + 1` time slices of
/// `node_count` values, row-major in space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: GridSpec,
    role: FieldRole,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zero(grid: GridSpec, role: FieldRole) -> Self {
        let len = (grid.steps + 1) * grid.node_count();
        Self { grid, role, values: vec![0.0; len] }
    }

    pub fn from_fn(grid: GridSpec, role: FieldRole, f: impl Fn(f64, [f64; 2]) -> f64) -> Self {
        let nodes = grid.node_count();
        let mut values = Vec::with_capacity((grid.steps + 1) * nodes);
        for k in 0..=grid.steps {
            let t = grid.time_value(k);
            for node in 0..nodes {
                values.push(f(t, grid.node_coord(node)));
            }
        }
        Self { grid, role, values }
    }

    pub fn from_values(
        grid: GridSpec,
        role: FieldRole,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        let want = (grid.steps + 1) * grid.node_count();
        if values.len() != want {
            return Err(GridError::SizeMismatch { got: values.len(), want });
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(bad));
        }
        Ok(Self { grid, role, values })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn role(&self) -> FieldRole {
        self.role
    }

    pub fn with_role(mut self, role: FieldRole) -> Self {
        self.role = role;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Spatial slice at a time step.
    pub fn slice(&self, step: usize) -> &[f64] {
        let n = self.grid.node_count();
        &self.values[step * n..(step + 1) * n]
    }

    pub fn slice_mut(&mut self, step: usize) -> &mut [f64] {
        let n = self.grid.node_count();
        &mut self.values[step * n..(step + 1) * n]
    }

    pub fn set_slice(&mut self, step: usize, data: &[f64]) {
        self.slice_mut(step).copy_from_slice(data);
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map, preserving grid and role.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            role: self.role,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise sum on a common grid.
    pub fn add(&self, other: &Self) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            role: FieldRole::Generic,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// Pointwise difference on a common grid.
    pub fn sub(&self, other: &Self) -> Result<Self, GridError> {
        if self.grid != other.grid {
            return Err(GridError::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            role: FieldRole::Generic,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    /// Plain sup over the window for a time range.
    pub fn window_sup(&self, time_range: std::ops::RangeInclusive<usize>) -> f64 {
        let window = self.grid.window_nodes();
        let mut sup = 0.0f64;
        for k in time_range {
            let slice = self.slice(k);
            for &node in &window {
                sup = sup.max(slice[node].abs());
            }
        }
        sup
    }

    /// Plain sup over the full lattice for a time range.
    pub fn sup(&self, time_range: std::ops::RangeInclusive<usize>) -> f64 {
        let mut sup = 0.0f64;
        for k in time_range {
            for &v in self.slice(k) {
                sup = sup.max(v.abs());
            }
        }
        sup
    }
}

/// Polynomial weight `1 + |x - x0|^theta`, or its smooth variant
/// `(1 + |x - x0|^2)^(theta/2)` used for equivalence checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    pub theta: f64,
    pub center: [f64; 2],
    pub smooth: bool,
}

impl WeightParams {
    pub fn new(theta: f64, center: [f64; 2], grid: &GridSpec) -> Result<Self, GridError> {
        if !(theta > 0.0) {
            return Err(GridError::NonPositive { name: "theta", value: theta });
        }
        let l = grid.half_width();
        let inside = match grid.dim() {
            1 => center[0].abs() <= l,
            _ => center[0].abs() <= l && center[1].abs() <= l,
        };
        if !inside {
            return Err(GridError::CenterOutsideBox);
        }
        Ok(Self { theta, center, smooth: false })
    }

    pub fn smooth(mut self) -> Self {
        self.smooth = true;
        self
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

/// Weight value at a point; always >= 1, equal to 1 exactly at the center.
pub fn weight(wp: &WeightParams, x: [f64; 2]) -> f64 {
    let r = dist(x, wp.center);
    if wp.smooth {
        (1.0 + r * r).powf(wp.theta / 2.0)
    } else {
        1.0 + r.powf(wp.theta)
    }
}

/// `sup_t sup_x |f(t,x)| / weight(x)` over the lattice for the time range.
pub fn weighted_sup_norm(
    field: &SpaceTimeField,
    wp: &WeightParams,
    time_range: std::ops::RangeInclusive<usize>,
) -> Result<f64, GridError> {
    if time_range.is_empty() {
        return Err(GridError::EmptyTimeRange);
    }
    let grid = field.grid();
    let inv_weights: Vec<f64> = (0..grid.node_count())
        .map(|node| 1.0 / weight(wp, grid.node_coord(node)))
        .collect();
    let mut sup = 0.0f64;
    for k in time_range {
        let slice = field.slice(k);
        for (v, iw) in slice.iter().zip(&inv_weights) {
            sup = sup.max(v.abs() * iw);
        }
    }
    Ok(sup)
}

/// `max` over centers of the weighted sup norm raised to `p`.
pub fn sup_over_centers(
    field: &SpaceTimeField,
    theta: f64,
    centers: &[[f64; 2]],
    p: f64,
) -> Result<f64, GridError> {
    if centers.is_empty() {
        return Err(GridError::NoCenters);
    }
    let grid = field.grid();
    let range = 0..=grid.steps();
    let mut best = 0.0f64;
    for &c in centers {
        let wp = WeightParams::new(theta, c, &grid)?;
        let norm = weighted_sup_norm(field, &wp, range.clone())?;
        best = best.max(norm.powf(p));
    }
    Ok(best)
}
