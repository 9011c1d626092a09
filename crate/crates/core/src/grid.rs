//! Time and space grids and the functions that live on them.

use crate::error::{bail, Result};
use crate::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// `m` equal cells on `[a, b]`.
    pub fn uniform(a: f64, b: f64, m: usize) -> Result<Self> {
        if m == 0 {
            bail!(Domain, "grid needs at least one cell");
        }
        if !(a < b && a.is_finite() && b.is_finite()) {
            bail!(Domain, "grid interval [{a}, {b}] is empty");
        }
        let mut nodes: Vec<f64> = (0..=m).map(|i| a + (b - a) * i as f64 / m as f64).collect();
        nodes[m] = b;
        Ok(TimeGrid { nodes })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            bail!(Domain, "grid needs at least two nodes");
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes.iter().any(|x| !x.is_finite()) {
            bail!(Domain, "grid nodes must be finite and strictly increasing");
        }
        Ok(TimeGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Number of nodes, `M + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of cells `M`.
    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.b() - self.a()
    }

    /// Trapezoidal weights, `∫ hat_j`.
    pub fn trap_weights(&self) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n)
            .map(|j| {
                let left = if j > 0 { self.nodes[j] - self.nodes[j - 1] } else { 0.0 };
                let right = if j + 1 < n { self.nodes[j + 1] - self.nodes[j] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect()
    }

    /// Cell index `j` with `t ∈ [τ_j, τ_{j+1}]` and the weight of node `j+1`.
    /// Values outside the grid clamp to the end cells.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let m = self.cells();
        if t <= self.nodes[0] {
            return (0, 0.0);
        }
        if t >= self.nodes[m] {
            return (m - 1, 1.0);
        }
        let j = self.nodes.partition_point(|&x| x <= t) - 1;
        let j = j.min(m - 1);
        let w = (t - self.nodes[j]) / (self.nodes[j + 1] - self.nodes[j]);
        (j, w)
    }

    /// Index of a node equal to `t` up to rounding.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.span();
        let (j, w) = self.locate(t);
        if (self.nodes[j] - t).abs() <= tol {
            Some(j)
        } else if (self.nodes[j + 1] - t).abs() <= tol {
            Some(j + 1)
        } else {
            let _ = w;
            None
        }
    }
}

/// Spatial discretisation.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceGrid {
    /// A single point; the spatial operator is a number.
    Scalar,
    /// States `0..n` of a finite chain.
    Sites(usize),
    /// Points of a one-dimensional grid.
    Line(Vec<f64>),
}

impl SpaceGrid {
    pub fn len(&self) -> usize {
        match self {
            SpaceGrid::Scalar => 1,
            SpaceGrid::Sites(n) => *n,
            SpaceGrid::Line(x) => x.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of node `k` (site index for chains).
    pub fn coord(&self, k: usize) -> f64 {
        match self {
            SpaceGrid::Scalar => 0.0,
            SpaceGrid::Sites(_) => k as f64,
            SpaceGrid::Line(x) => x[k],
        }
    }

    /// `n` equally spaced points on `[lo, hi)` (periodic) or `[lo, hi]`.
    pub fn line(lo: f64, hi: f64, n: usize, periodic: bool) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            bail!(Domain, "line grid needs n ≥ 2 and hi > lo");
        }
        let dx = if periodic { (hi - lo) / n as f64 } else { (hi - lo) / (n - 1) as f64 };
        Ok(SpaceGrid::Line((0..n).map(|k| lo + dx * k as f64).collect()))
    }
}

/// Values on a time grid times a space grid, stored time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub time: TimeGrid,
    pub space: SpaceGrid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(time: TimeGrid, space: SpaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != time.len() * space.len() {
            bail!(
                Domain,
                "{} values do not match a {}×{} grid",
                values.len(),
                time.len(),
                space.len()
            );
        }
        if values.iter().any(|v| !v.is_finite()) {
            bail!(Domain, "grid function has non-finite values");
        }
        Ok(GridFunction { time, space, values })
    }

    pub fn constant(time: &TimeGrid, space: &SpaceGrid, c: f64) -> Self {
        GridFunction {
            values: vec![c; time.len() * space.len()],
            time: time.clone(),
            space: space.clone(),
        }
    }

    pub fn zeros(time: &TimeGrid, space: &SpaceGrid) -> Self {
        Self::constant(time, space, 0.0)
    }

    /// Scalar-space function of time.
    pub fn from_time_fn<F: Fn(f64) -> f64>(time: &TimeGrid, f: F) -> Self {
        GridFunction {
            values: time.nodes().iter().map(|&t| f(t)).collect(),
            time: time.clone(),
            space: SpaceGrid::Scalar,
        }
    }

    /// `f(t, x_k)` with `x_k = space.coord(k)`.
    pub fn from_fn<F: Fn(f64, f64) -> f64>(time: &TimeGrid, space: &SpaceGrid, f: F) -> Self {
        let mut values = Vec::with_capacity(time.len() * space.len());
        for &t in time.nodes() {
            for k in 0..space.len() {
                values.push(f(t, space.coord(k)));
            }
        }
        GridFunction { values, time: time.clone(), space: space.clone() }
    }

    pub fn width(&self) -> usize {
        self.space.len()
    }

    pub fn at(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.width() + k]
    }

    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        let w = self.width();
        self.values[i * w + k] = v;
    }

    pub fn slice(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    /// Column `k` as a function of time.
    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.time.len()).map(|i| self.at(i, k)).collect()
    }

    /// Linear interpolation in time at space node `k`.
    pub fn interp_time(&self, t: f64, k: usize) -> f64 {
        let (j, w) = self.time.locate(t);
        (1.0 - w) * self.at(j, k) + w * self.at(j + 1, k)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn same_shape(&self, other: &GridFunction) -> bool {
        self.time == other.time && self.space == other.space
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
            time: self.time.clone(),
            space: self.space.clone(),
        }
    }

    /// `α·self + other`.
    pub fn axpy(&self, alpha: f64, other: &GridFunction) -> Result<Self> {
        if !self.same_shape(other) {
            bail!(Domain, "grid functions live on different grids");
        }
        Ok(GridFunction {
            values: self.values.iter().zip(&other.values).map(|(a, b)| alpha * a + b).collect(),
            time: self.time.clone(),
            space: self.space.clone(),
        })
    }

    /// `sup |self − other|`.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }
}
