//! Uniform symmetric grids on `[-X, X]` and fields sampled on them.

use crate::error::{Error, Result};

/// Uniform grid `x_i = -X + i dx`, `i = 0..=M`, with `M` even so the origin is a node.
///
/// Node coordinates are computed as `(i - M/2) dx`, which is the same set of
/// points but makes `x_{M-i} = -x_i` hold bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    intervals: usize,
    dx: f64,
}

impl Grid {
    pub fn new(half_width: f64, intervals: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if intervals == 0 || intervals % 2 != 0 {
            return Err(Error::InvalidSpec(format!(
                "grid interval count must be even and positive, got {intervals}"
            )));
        }
        Ok(Grid {
            half_width,
            intervals,
            dx: 2.0 * half_width / intervals as f64,
        })
    }

    /// Grid with spacing `dx` covering `[-half_width, half_width]`; `half_width / dx` must be
    /// (numerically) an integer.
    pub fn with_spacing(half_width: f64, dx: f64) -> Result<Self> {
        if !(dx.is_finite() && dx > 0.0) {
            return Err(Error::InvalidSpec(format!("grid spacing must be positive, got {dx}")));
        }
        let half = half_width / dx;
        let rounded = half.round();
        if (half - rounded).abs() > 1e-8 * half.max(1.0) || rounded < 1.0 {
            return Err(Error::InvalidSpec(format!(
                "half-width {half_width} is not a whole number of spacings {dx}"
            )));
        }
        Grid::new(half_width, 2 * rounded as usize)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Interval count `M`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Node count `M + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn center(&self) -> usize {
        self.intervals / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.dx
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.x(i))
    }

    /// Trapezoid weight of node `i` (1/2 at both ends, 1 elsewhere).
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.intervals {
            0.5
        } else {
            1.0
        }
    }

    /// `dx * sum_i w_i g_i`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let inner: f64 = values.iter().sum::<f64>();
        let ends = 0.5 * (values[0] + values[self.intervals]);
        self.dx * (inner - ends)
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.intervals == other.intervals && same_spacing(self.dx, other.dx)
    }
}

pub(crate) fn same_spacing(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// A profile on a grid at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    time: f64,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Field { grid, values, time })
    }

    pub fn zeros(grid: Grid) -> Self {
        Field { grid, values: vec![0.0; grid.len()], time: 0.0 }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Field { grid, values: vec![value; grid.len()], time: 0.0 }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().map(f).collect();
        Field { grid, values, time: 0.0 }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn center_value(&self) -> f64 {
        self.values[self.grid.center()]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Shift by whole nodes (positive moves mass right); vacated nodes become 0.
    pub fn shifted(&self, nodes: isize) -> Field {
        let n = self.values.len() as isize;
        let values = (0..n)
            .map(|i| {
                let src = i - nodes;
                if (0..n).contains(&src) {
                    self.values[src as usize]
                } else {
                    0.0
                }
            })
            .collect();
        Field { grid: self.grid, values, time: self.time }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
