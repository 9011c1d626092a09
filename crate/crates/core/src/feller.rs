//! Spatial generators and the Markov processes they drive.
//!
//! A [`BoundedGenerator`] is a square matrix on a spatial grid. It feeds the
//! series engines directly and, through [`semigroup_apply`], the Monte Carlo
//! solvers. Unbounded operators such as the Laplacian enter as their
//! finite-difference matrix on a box.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{bail, Result};
use crate::grid::SpaceGrid;
use crate::prelude::*;
use crate::special::ln_gamma;

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

/// Poisson tail mass left out by uniformization.
pub const UNIFORMIZATION_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Wrap around the box.
    Periodic,
    /// Moves out of the box are suppressed.
    Reflecting,
    /// Moves out of the box kill the process.
    Absorbing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundedGenerator {
    matrix: DMatrix<f64>,
    norm: f64,
    conservative: bool,
    grid: SpaceGrid,
}

impl BoundedGenerator {
    pub fn from_matrix(matrix: DMatrix<f64>, grid: SpaceGrid) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            bail!(Domain, "generator must be a non-empty square matrix");
        }
        if grid.len() != matrix.nrows() {
            bail!(Domain, "grid has {} points, matrix has {} rows", grid.len(), matrix.nrows());
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            bail!(Domain, "generator has non-finite entries");
        }
        let n = matrix.nrows();
        let mut norm: f64 = 0.0;
        let mut worst_sum: f64 = 0.0;
        for i in 0..n {
            let row = matrix.row(i);
            norm = norm.max(row.iter().map(|v| v.abs()).sum());
            worst_sum = worst_sum.max(row.iter().sum::<f64>().abs());
        }
        let conservative = worst_sum <= 1e-10 * norm.max(f64::MIN_POSITIVE);
        Ok(BoundedGenerator { matrix, norm, conservative, grid })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            bail!(Domain, "generator rows must all have length {n}");
        }
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        let grid = if n == 1 { SpaceGrid::Scalar } else { SpaceGrid::Sites(n) };
        Self::from_matrix(m, grid)
    }

    /// The 1×1 generator `λ`.
    pub fn scalar(lambda: f64) -> Result<Self> {
        Self::from_matrix(DMatrix::from_element(1, 1, lambda), SpaceGrid::Scalar)
    }

    pub fn zero(grid: SpaceGrid) -> Result<Self> {
        let n = grid.len();
        Self::from_matrix(DMatrix::zeros(n, n), grid)
    }

    /// Two-state chain with jump rates `q12` and `q21`.
    pub fn two_state(q12: f64, q21: f64) -> Result<Self> {
        if !(q12 >= 0.0 && q21 >= 0.0) {
            bail!(Domain, "jump rates must be non-negative");
        }
        Self::from_rows(&[vec![-q12, q12], vec![q21, -q21]])
    }

    /// `½σ²` times the second difference on `n` points of `[lo, hi]`
    /// (`[lo, hi)` when periodic).
    pub fn laplacian_1d(sigma: f64, lo: f64, hi: f64, n: usize, boundary: Boundary) -> Result<Self> {
        if !(sigma > 0.0) {
            bail!(Domain, "σ must be positive");
        }
        let periodic = boundary == Boundary::Periodic;
        let grid = SpaceGrid::line(lo, hi, n, periodic)?;
        let dx = grid.coord(1) - grid.coord(0);
        let c = 0.5 * sigma * sigma / (dx * dx);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in [i as isize - 1, i as isize + 1] {
                let target = if j < 0 || j >= n as isize {
                    match boundary {
                        Boundary::Periodic => Some(j.rem_euclid(n as isize) as usize),
                        Boundary::Reflecting => None,
                        Boundary::Absorbing => {
                            m[(i, i)] -= c;
                            None
                        }
                    }
                } else {
                    Some(j as usize)
                };
                if let Some(j) = target {
                    m[(i, j)] += c;
                    m[(i, i)] -= c;
                }
            }
        }
        Self::from_matrix(m, grid)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    /// Max absolute row sum.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_conservative(&self) -> bool {
        self.conservative
    }

    /// Off-diagonal entries non-negative and row sums at most zero.
    pub fn is_subgenerator(&self) -> bool {
        let n = self.dim();
        let tol = 1e-10 * self.norm.max(f64::MIN_POSITIVE);
        (0..n).all(|i| {
            let row = self.matrix.row(i);
            (0..n).all(|j| i == j || row[j] >= 0.0) && row.iter().sum::<f64>() <= tol
        })
    }

    /// Generator of a finite Markov chain.
    pub fn is_ctmc(&self) -> bool {
        self.conservative && self.is_subgenerator()
    }

    pub fn is_symmetric(&self) -> bool {
        let tol = 1e-12 * self.norm.max(1.0);
        let n = self.dim();
        (0..n).all(|i| (0..i).all(|j| (self.matrix[(i, j)] - self.matrix[(j, i)]).abs() <= tol))
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(v);
        (&self.matrix * x).iter().cloned().collect()
    }

    /// The 1×1 value, if scalar.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.dim() == 1).then(|| self.matrix[(0, 0)])
    }
}

fn uniformized(a: &BoundedGenerator, s: f64, phi: &[f64]) -> Vec<f64> {
    let n = a.dim();
    let q = (0..n).map(|i| -a.matrix[(i, i)]).fold(0.0f64, f64::max);
    if q == 0.0 {
        return phi.to_vec();
    }
    let p = DMatrix::identity(n, n) + &a.matrix / q;
    let mean = q * s;
    let kmax = (mean + 12.0 * mean.sqrt() + 40.0).ceil() as usize;
    let mut v = DVector::from_column_slice(phi);
    let mut acc = DVector::zeros(n);
    let mut mass = 0.0;
    for k in 0..=kmax {
        let w = (-mean + k as f64 * mean.ln() - ln_gamma(k as f64 + 1.0)).exp();
        let w = if mean == 0.0 && k == 0 { 1.0 } else { w };
        acc += &v * w;
        mass += w;
        if k as f64 > mean && 1.0 - mass < UNIFORMIZATION_TAIL {
            break;
        }
        v = &p * v;
    }
    acc.iter().cloned().collect()
}

/// `e^{sA} φ`.
pub fn semigroup_apply(a: &BoundedGenerator, s: f64, phi: &[f64]) -> Result<Vec<f64>> {
    if !(s >= 0.0) {
        bail!(Domain, "semigroup time {s} must be non-negative");
    }
    if phi.len() != a.dim() {
        bail!(Domain, "vector length {} does not match generator size {}", phi.len(), a.dim());
    }
    if s == 0.0 {
        return Ok(phi.to_vec());
    }
    if let Some(l) = a.as_scalar() {
        return Ok(vec![(l * s).exp() * phi[0]]);
    }
    if a.is_subgenerator() {
        return Ok(uniformized(a, s, phi));
    }
    let e = expm(&(&a.matrix * s));
    Ok((e * DVector::from_column_slice(phi)).iter().cloned().collect())
}

/// Matrix exponential by scaling and squaring of a degree-18 Taylor
/// polynomial, with the scaled norm at most 1/2.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = m * scale;
    let mut term = DMatrix::identity(n, n);
    let mut acc = DMatrix::identity(n, n);
    for k in 1..=18 {
        term = &term * &x / k as f64;
        acc += &term;
    }
    for _ in 0..squarings {
        acc = &acc * &acc;
    }
    acc
}

/// The Yosida approximation `A_λ = λ²(λ − A)⁻¹ − λ`.
pub fn yosida_transform(a: &BoundedGenerator, lambda: f64) -> Result<BoundedGenerator> {
    if !(lambda > 0.0) {
        bail!(Domain, "Yosida parameter {lambda} must be positive");
    }
    let n = a.dim();
    let shifted = DMatrix::identity(n, n) * lambda - &a.matrix;
    let Some(inv) = shifted.lu().try_inverse() else {
        bail!(LinearSolve, "λ − A is singular at λ = {lambda}");
    };
    let mut al = inv * (lambda * lambda) - DMatrix::identity(n, n) * lambda;
    if a.is_symmetric() {
        al = (&al + al.transpose()) * 0.5;
    }
    // Row sums of a conservative generator stay zero; clean the rounding.
    if a.is_conservative() {
        for i in 0..n {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| al[(i, j)]).sum();
            al[(i, i)] = -off;
        }
    }
    BoundedGenerator::from_matrix(al, a.grid.clone())
}

/// Cached evaluator of `s ↦ e^{sA}` for repeated use.
#[derive(Debug, Clone)]
pub enum Semigroup {
    /// `A = V diag(μ) Vᵀ`.
    Eigen { vectors: DMatrix<f64>, values: Vec<f64> },
    Dense { generator: BoundedGenerator },
}

impl Semigroup {
    pub fn new(a: &BoundedGenerator) -> Self {
        if a.is_symmetric() {
            let e = SymmetricEigen::new(a.matrix.clone());
            Semigroup::Eigen {
                vectors: e.eigenvectors,
                values: e.eigenvalues.iter().cloned().collect(),
            }
        } else {
            Semigroup::Dense { generator: a.clone() }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Semigroup::Eigen { values, .. } => values.len(),
            Semigroup::Dense { generator } => generator.dim(),
        }
    }

    /// Coordinates of `φ` in the cached basis.
    pub fn project(&self, phi: &[f64]) -> Vec<f64> {
        match self {
            Semigroup::Eigen { vectors, .. } => {
                (vectors.transpose() * DVector::from_column_slice(phi)).iter().cloned().collect()
            }
            Semigroup::Dense { .. } => phi.to_vec(),
        }
    }

    /// `(e^{sA} φ)(x_k)` for all `k`, from projected coordinates.
    pub fn apply_projected(&self, coeffs: &[f64], s: f64) -> Result<Vec<f64>> {
        self.combine(coeffs, |mu| (mu * s).exp(), s)
    }

    /// `(∫_{s0}^{s1} e^{uA} du) φ` from projected coordinates.
    pub fn integral_projected(&self, coeffs: &[f64], s0: f64, s1: f64) -> Result<Vec<f64>> {
        match self {
            Semigroup::Eigen { .. } => self.combine(
                coeffs,
                |mu| {
                    let d = s1 - s0;
                    if (mu * d).abs() < 1e-8 {
                        (mu * s0).exp() * d * (1.0 + 0.5 * mu * d)
                    } else {
                        (mu * s0).exp() * (mu * d).exp_m1() / mu
                    }
                },
                s0,
            ),
            Semigroup::Dense { generator } => {
                // 5-point Gauss-Legendre on the interval.
                const X: [f64; 5] = [-0.906179845938664, -0.538469310105683, 0.0, 0.538469310105683, 0.906179845938664];
                const W: [f64; 5] = [0.236926885056189, 0.478628670499366, 0.568888888888889, 0.478628670499366, 0.236926885056189];
                let c = 0.5 * (s0 + s1);
                let hw = 0.5 * (s1 - s0);
                let mut out = vec![0.0; coeffs.len()];
                for (x, w) in X.iter().zip(W.iter()) {
                    let v = semigroup_apply(generator, c + hw * x, coeffs)?;
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o += w * hw * vi;
                    }
                }
                Ok(out)
            }
        }
    }

    fn combine<F: Fn(f64) -> f64>(&self, coeffs: &[f64], factor: F, s: f64) -> Result<Vec<f64>> {
        match self {
            Semigroup::Eigen { vectors, values } => {
                let scaled = DVector::from_iterator(
                    values.len(),
                    values.iter().zip(coeffs).map(|(&mu, &c)| factor(mu) * c),
                );
                Ok((vectors * scaled).iter().cloned().collect())
            }
            Semigroup::Dense { generator } => semigroup_apply(generator, s, coeffs),
        }
    }
}

/// Point of a spatial state space.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceState {
    Scalar,
    Site(usize),
    Point(Vec<f64>),
}

impl SpaceState {
    /// First coordinate (site index for chains).
    pub fn coord(&self) -> f64 {
        match self {
            SpaceState::Scalar => 0.0,
            SpaceState::Site(i) => *i as f64,
            SpaceState::Point(x) => x.first().copied().unwrap_or(0.0),
        }
    }
}

/// Uniformization table of a chain: rate and cumulative jump rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTable {
    pub rate: f64,
    rows: Vec<Vec<(usize, f64)>>,
}

impl ChainTable {
    pub fn new(a: &BoundedGenerator) -> Result<Self> {
        if !a.is_ctmc() {
            bail!(Domain, "generator is not a conservative Markov chain generator");
        }
        let n = a.dim();
        let q = (0..n).map(|i| -a.matrix[(i, i)]).fold(0.0f64, f64::max);
        let rows = (0..n)
            .map(|i| {
                let mut cum = 0.0;
                let mut row = Vec::new();
                for j in 0..n {
                    let p = if i == j { 1.0 + a.matrix[(i, i)] / q } else { a.matrix[(i, j)] / q };
                    if p > 0.0 {
                        cum += p;
                        row.push((j, cum));
                    }
                }
                row
            })
            .collect();
        Ok(ChainTable { rate: q, rows })
    }

    /// One uniformized step from state `i`.
    pub fn step<R: rand::Rng + ?Sized>(&self, i: usize, rng: &mut R) -> usize {
        let row = &self.rows[i];
        let total = row.last().map(|x| x.1).unwrap_or(1.0);
        let u = rng.random::<f64>() * total;
        for &(j, c) in row {
            if u < c {
                return j;
            }
        }
        row.last().map(|x| x.0).unwrap_or(i)
    }
}

/// A samplable spatial Markov process.
#[derive(Debug, Clone, PartialEq)]
pub enum FellerSampler {
    Brownian { sigma: f64, dim: usize },
    /// The process stays put and contributes the weight `e^{λ s}`.
    Scalar { lambda: f64 },
    Ctmc { generator: BoundedGenerator, table: ChainTable },
    /// Poisson jumps at `rate` with independent normal coordinates.
    CompoundPoisson { rate: f64, jump_mean: f64, jump_sd: f64, dim: usize },
}

impl FellerSampler {
    pub fn brownian(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0) || dim == 0 {
            bail!(Domain, "Brownian motion needs σ > 0 and d ≥ 1");
        }
        Ok(FellerSampler::Brownian { sigma, dim })
    }

    pub fn ctmc(generator: BoundedGenerator) -> Result<Self> {
        let table = ChainTable::new(&generator)?;
        Ok(FellerSampler::Ctmc { generator, table })
    }

    pub fn compound_poisson(rate: f64, jump_mean: f64, jump_sd: f64, dim: usize) -> Result<Self> {
        if !(rate >= 0.0 && jump_sd >= 0.0) || dim == 0 {
            bail!(Domain, "compound Poisson needs rate ≥ 0, sd ≥ 0, d ≥ 1");
        }
        Ok(FellerSampler::CompoundPoisson { rate, jump_mean, jump_sd, dim })
    }

    /// `λ` of the multiplicative weight `e^{λ s}`; zero for genuine motions.
    pub fn weight_rate(&self) -> f64 {
        match self {
            FellerSampler::Scalar { lambda } => *lambda,
            _ => 0.0,
        }
    }

    pub fn check_state(&self, x: &SpaceState) -> Result<()> {
        let ok = match (self, x) {
            (FellerSampler::Scalar { .. }, SpaceState::Scalar) => true,
            (FellerSampler::Ctmc { generator, .. }, SpaceState::Site(i)) => *i < generator.dim(),
            (FellerSampler::Brownian { dim, .. }, SpaceState::Point(p))
            | (FellerSampler::CompoundPoisson { dim, .. }, SpaceState::Point(p)) => p.len() == *dim,
            _ => false,
        };
        if !ok {
            bail!(Domain, "state {x:?} does not belong to this process");
        }
        Ok(())
    }

    /// Advances `x` by process time `s` in place.
    pub fn advance<R: rand::Rng + ?Sized>(&self, x: &mut SpaceState, s: f64, rng: &mut R) {
        if s <= 0.0 {
            return;
        }
        match (self, x) {
            (FellerSampler::Brownian { sigma, .. }, SpaceState::Point(p)) => {
                let sd = sigma * s.sqrt();
                for c in p.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *c += sd * z;
                }
            }
            (FellerSampler::Ctmc { table, .. }, SpaceState::Site(i)) => {
                let mut left = s;
                loop {
                    let e = -(1.0 - rng.random::<f64>()).ln() / table.rate;
                    if !(e < left) {
                        break;
                    }
                    left -= e;
                    *i = table.step(*i, rng);
                }
            }
            (FellerSampler::CompoundPoisson { rate, jump_mean, jump_sd, .. }, SpaceState::Point(p)) => {
                if *rate == 0.0 {
                    return;
                }
                let mut left = s;
                loop {
                    let e = -(1.0 - rng.random::<f64>()).ln() / rate;
                    if !(e < left) {
                        break;
                    }
                    left -= e;
                    for c in p.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *c += jump_mean + jump_sd * z;
                    }
                }
            }
            _ => {}
        }
    }
}

/// `X^{x}(s)` for the given sampler.
pub fn sample_feller<R: rand::Rng + ?Sized>(sampler: &FellerSampler, x: &SpaceState, s: f64, rng: &mut R) -> Result<SpaceState> {
    if !(s >= 0.0) {
        bail!(Domain, "process time {s} must be non-negative");
    }
    sampler.check_state(x)?;
    let mut y = x.clone();
    sampler.advance(&mut y, s, rng);
    Ok(y)
}
