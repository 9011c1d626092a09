//! Mittag-Leffler functions and series solutions with bounded generators.
//!
//! The generalised Mittag-Leffler function is `Σ_n Aⁿφ · I^{(ν),n}1` and the
//! RL solution is `Σ_n (I^(ν) A)ⁿ I^(ν) g`. Both are computed on a time grid
//! through the matrix form of `I^(ν)` supplied by a [`Backend`].
//!
//! When the terms are small enough to be summed in double precision the
//! series is accumulated term by term. For stiff generators (large `‖A‖`)
//! the partial sums pass through astronomically large intermediate values;
//! the sum of the discrete series is then obtained directly by forward
//! substitution of the equivalent lower-triangular system, time node by
//! time node.

use nalgebra::{DMatrix, DVector};

use crate::error::{bail, Error, Result};
use crate::feller::BoundedGenerator;
use crate::fracint::{iteration_bound_scaled, Backend};
use crate::grid::{GridFunction, SpaceGrid, TimeGrid};
use crate::kernels::{classical_constant, KernelSpec, PowerLawWitness};
use crate::prelude::*;
use crate::special::{gamma, ln_gamma};
use crate::stats::KahanSum;

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

/// Largest `|z|` accepted by [`mittag_leffler`].
pub const SERIES_RADIUS: f64 = 50.0;
const MAX_TERMS: usize = 100_000;
const MAX_RECURSION_TERMS: usize = 1000;

/// Value of `E_β(z)` with bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlValue {
    pub value: f64,
    pub terms: usize,
    /// Bound on the neglected tail.
    pub remainder: f64,
}

/// `E_β(z) = Σ zⁿ/Γ(βn+1)` for `β ∈ (0, 1]`, `|z| ≤ 50`.
pub fn mittag_leffler(beta: f64, z: f64, tol: f64) -> Result<f64> {
    Ok(mittag_leffler_detail(beta, z, tol)?.value)
}

pub fn mittag_leffler_detail(beta: f64, z: f64, tol: f64) -> Result<MlValue> {
    if !(beta > 0.0 && beta <= 1.0) {
        bail!(Domain, "order {beta} outside (0, 1]");
    }
    if !(tol > 0.0) {
        bail!(Domain, "tolerance must be positive");
    }
    if !(z.abs() <= SERIES_RADIUS) {
        bail!(Range, "|z| = {} beyond the series regime {SERIES_RADIUS}", z.abs());
    }
    if z == 0.0 {
        return Ok(MlValue { value: 1.0, terms: 1, remainder: 0.0 });
    }
    let lz = z.abs().ln();
    let neg = z < 0.0;
    let term = |n: usize| -> f64 {
        let arg = beta * n as f64 + 1.0;
        let mag = if arg < 170.0 && n < 180 {
            z.abs().powi(n as i32) / gamma(arg)
        } else {
            (n as f64 * lz - ln_gamma(arg)).exp()
        };
        if neg && n % 2 == 1 {
            -mag
        } else {
            mag
        }
    };
    let ratio = |n: usize| -> f64 {
        (lz + ln_gamma(beta * n as f64 + 1.0) - ln_gamma(beta * (n + 1) as f64 + 1.0)).exp()
    };
    let mut sum = KahanSum::new();
    let mut largest: f64 = 0.0;
    let mut n = 0;
    loop {
        // Pairs of consecutive terms are combined before accumulation.
        let t0 = term(n);
        let t1 = term(n + 1);
        largest = largest.max(t0.abs()).max(t1.abs());
        sum.add(t0 + t1);
        n += 2;
        let r = ratio(n);
        if r < 1.0 && ratio(n + 1) <= r {
            let next = term(n).abs();
            let rem = next / (1.0 - ratio(n + 1).max(r));
            if rem < tol {
                let value = sum.value();
                if !value.is_finite() {
                    bail!(Range, "E_{beta}({z}) overflows");
                }
                if 2.0 * largest * f64::EPSILON > tol.max(1e-8 * value.abs().max(1.0)) {
                    bail!(Range, "cancellation in E_{beta}({z}) exceeds double precision");
                }
                return Ok(MlValue { value, terms: n, remainder: rem });
            }
        }
        if n > MAX_TERMS {
            bail!(Range, "E_{beta}({z}) did not converge in {MAX_TERMS} terms");
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    Rl,
    Caputo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMethod {
    /// Partial sums of the series.
    Terms,
    /// Closed-form sum of the discrete series by forward substitution.
    Resolvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult {
    pub value: GridFunction,
    pub terms_used: usize,
    /// A-priori bound on the neglected terms.
    pub tail_bound: f64,
    pub method: SeriesMethod,
}

/// A matrix backend together with the power-law witness that certifies the
/// iteration bound.
#[derive(Debug, Clone)]
pub struct SeriesEngine {
    backend: Backend,
    witness: PowerLawWitness,
}

impl SeriesEngine {
    /// Certifies `kernel` on its domain and converts the backend to matrix form.
    pub fn new(backend: &Backend, kernel: &KernelSpec) -> Result<Self> {
        let Some(witness) = kernel.default_witness() else {
            return Err(Error::Precondition(
                "kernel has no power-law lower bound; the series is not certified".into(),
            ));
        };
        Ok(SeriesEngine { backend: backend.to_matrix()?, witness })
    }

    /// Exact classical integration of order `beta` on `grid`.
    pub fn classical(beta: f64, grid: &TimeGrid) -> Result<Self> {
        Ok(SeriesEngine {
            backend: Backend::exact_beta(beta, grid)?,
            witness: PowerLawWitness { constant: classical_constant(beta), beta },
        })
    }

    pub fn with_witness(backend: &Backend, witness: PowerLawWitness) -> Result<Self> {
        Ok(SeriesEngine { backend: backend.to_matrix()?, witness })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.backend.grid()
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn witness(&self) -> PowerLawWitness {
        self.witness
    }

    fn kappa(&self) -> f64 {
        1.0 / self.witness.relative_scale()
    }

    /// Bound on the `n`-th term `|(I A)ⁿ I^k f|` class: `‖A‖ⁿ sup · bound(n + shift)`.
    fn term_bound(&self, norm_a: f64, sup: f64, n: usize, shift: usize) -> f64 {
        let span = self.grid().span();
        let b = iteration_bound_scaled(self.witness.beta, span, n + shift, sup, self.kappa()).exact;
        b * norm_a.powi(n as i32)
    }

    fn ln_bound(&self, norm_a: f64, sup: f64, n: usize, shift: usize) -> f64 {
        let m = (n + shift) as f64;
        let step = self.kappa().ln() + self.witness.beta * self.grid().span().ln();
        let ln_a = if n == 0 {
            0.0
        } else if norm_a > 0.0 {
            n as f64 * norm_a.ln()
        } else {
            f64::NEG_INFINITY
        };
        sup.ln() + m * step - ln_gamma(m * self.witness.beta + 1.0) + ln_a
    }

    /// `Σ_{k≥n} term_bound(k)`, infinite while the bounds are not yet
    /// decreasing with decreasing ratios.
    fn tail_from(&self, norm_a: f64, sup: f64, n: usize, shift: usize) -> f64 {
        if sup == 0.0 || (norm_a == 0.0 && n > 0) {
            return 0.0;
        }
        let l0 = self.ln_bound(norm_a, sup, n, shift);
        let l1 = self.ln_bound(norm_a, sup, n + 1, shift);
        let l2 = self.ln_bound(norm_a, sup, n + 2, shift);
        let r = (l1 - l0).exp();
        if r < 1.0 && l2 - l1 <= l1 - l0 + 1e-15 {
            l0.exp() / (1.0 - r)
        } else {
            f64::INFINITY
        }
    }

    /// A-priori term count for `tol` and the largest log term bound.
    fn truncation(&self, norm_a: f64, sup: f64, shift: usize, tol: f64) -> (usize, f64) {
        if sup == 0.0 {
            return (1, f64::NEG_INFINITY);
        }
        let mut log_max = f64::NEG_INFINITY;
        for n in 0..MAX_TERMS {
            log_max = log_max.max(self.ln_bound(norm_a, sup, n, shift));
            if n >= 1 && self.tail_from(norm_a, sup, n, shift) < tol {
                return (n, log_max);
            }
        }
        (MAX_TERMS, log_max)
    }

    /// Sums `first + Σ_{n≥1} (W A)ⁿ first`. The discrete iterates drift
    /// above the continuous bound for large `n`, so the tail is scaled by the
    /// largest observed ratio of term to bound. Returns `None` when that
    /// needs more than twice the a-priori number of terms, or when a term
    /// within the a-priori count leaves its bound by more than 1.1ⁿ.
    fn sum_terms(
        &self,
        a: &BoundedGenerator,
        first: GridFunction,
        sup: f64,
        shift: usize,
        tol: f64,
        apriori: usize,
    ) -> Result<Option<(GridFunction, usize, f64)>> {
        let norm_a = a.norm();
        let ratio = |t: &GridFunction, n: usize| -> f64 {
            let b = self.term_bound(norm_a, sup, n, shift);
            if b > 0.0 { t.sup_norm() / b } else { 0.0 }
        };
        let mut rho = ratio(&first, 0).max(1.0);
        let mut acc: Vec<KahanSum> = first
            .values
            .iter()
            .map(|&v| {
                let mut s = KahanSum::new();
                s.add(v);
                s
            })
            .collect();
        let mut last = first.sup_norm();
        let mut q: f64 = 0.0;
        let mut term = first;
        let mut n = 1;
        loop {
            // Geometric tail from the observed decay, for when the discrete
            // iterates fall behind the continuous bound.
            let geometric = if q < 1.0 { last * q / (1.0 - q) } else { f64::INFINITY };
            let tail = (2.0 * rho * self.tail_from(norm_a, sup, n, shift)).max(geometric);
            if tail < tol {
                let mut value = term;
                value.values = acc.iter().map(|s| s.value()).collect();
                return Ok(Some((value, n, tail)));
            }
            if n > 2 * apriori + 10 {
                return Ok(None);
            }
            term = self.apply_ia(a, &term);
            // Coarse grids: the discrete iterates decay only geometrically.
            if n <= apriori && self.exceeds_bound(&term, norm_a, sup, n, shift) {
                return Ok(None);
            }
            rho = rho.max(ratio(&term, n));
            let size = term.sup_norm();
            q = if last > 0.0 { size / last } else { 0.0 };
            last = size;
            for (s, &v) in acc.iter_mut().zip(&term.values) {
                s.add(v);
            }
            n += 1;
        }
    }

    fn weights(&self) -> &[f64] {
        self.backend.matrix_weights().expect("engine backend is a matrix")
    }

    /// `W (A f)` on the time × space grid.
    fn apply_ia(&self, a: &BoundedGenerator, f: &GridFunction) -> GridFunction {
        let w = self.weights();
        let n = f.time.len();
        let s = f.width();
        let af: Vec<Vec<f64>> = (0..n).map(|i| a.apply(f.slice(i))).collect();
        let mut out = GridFunction::zeros(&f.time, &f.space);
        for i in 0..n {
            for k in 0..s {
                let mut acc = KahanSum::new();
                for j in 0..=i {
                    let wij = w[i * n + j];
                    if wij != 0.0 {
                        acc.add(wij * af[j][k]);
                    }
                }
                out.set(i, k, acc.value());
            }
        }
        out
    }

    fn apply_i(&self, f: &GridFunction) -> GridFunction {
        let w = self.weights();
        let n = f.time.len();
        let mut out = GridFunction::zeros(&f.time, &f.space);
        for i in 0..n {
            for k in 0..f.width() {
                let mut acc = KahanSum::new();
                for j in 0..=i {
                    let wij = w[i * n + j];
                    if wij != 0.0 {
                        acc.add(wij * f.at(j, k));
                    }
                }
                out.set(i, k, acc.value());
            }
        }
        out
    }

    /// Solves `(I − w_ii A) u_i = rhs_i + Σ_{j<i} w_ij A u_j` node by node,
    /// with `rhs` given per node.
    fn forward_substitution<F: Fn(usize) -> Vec<f64>>(&self, a: &BoundedGenerator, space: &SpaceGrid, rhs: F) -> Result<GridFunction> {
        let grid = self.grid().clone();
        let w = self.weights();
        let n = grid.len();
        let s = a.dim();
        let mut out = GridFunction::zeros(&grid, space);
        let mut au: Vec<DVector<f64>> = Vec::with_capacity(n);
        let mut last: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;
        for i in 0..n {
            let mut b = DVector::from_vec(rhs(i));
            for (j, avj) in au.iter().enumerate() {
                let wij = w[i * n + j];
                if wij != 0.0 {
                    b.axpy(wij, avj, 1.0);
                }
            }
            let wii = w[i * n + i];
            let u = if wii == 0.0 {
                b
            } else {
                let reuse = matches!(&last, Some((x, _)) if *x == wii);
                if !reuse {
                    let m = DMatrix::identity(s, s) - a.matrix() * wii;
                    last = Some((wii, m.lu()));
                }
                let lu = &last.as_ref().unwrap().1;
                lu.solve(&b).ok_or_else(|| Error::LinearSolve(alloc::format!("singular step matrix at node {i}")))?
            };
            for k in 0..s {
                out.set(i, k, u[k]);
            }
            au.push(a.matrix() * u);
        }
        Ok(out)
    }

    fn pick_method(&self, log_max_term: f64, terms: usize, tol: f64) -> SeriesMethod {
        let rounding = (log_max_term + f64::EPSILON.ln()).exp();
        if terms <= MAX_RECURSION_TERMS && rounding < 0.1 * tol {
            SeriesMethod::Terms
        } else {
            SeriesMethod::Resolvent
        }
    }

    /// `Σ_n Aⁿφ · I^{(ν),n}1` on the grid.
    pub fn generalized_ml(&self, a: &BoundedGenerator, phi: &[f64], tol: f64) -> Result<SeriesResult> {
        if phi.len() != a.dim() {
            bail!(Domain, "φ has {} entries, generator has {}", phi.len(), a.dim());
        }
        if !(tol > 0.0) {
            bail!(Domain, "tolerance must be positive");
        }
        let grid = self.grid().clone();
        let space = a.grid().clone();
        let sup = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let (terms, log_max) = self.truncation(a.norm(), sup, 0, tol);
        let method = self.pick_method(log_max, terms, tol);
        let mut phi_grid = GridFunction::zeros(&grid, &space);
        for i in 0..grid.len() {
            for (k, &v) in phi.iter().enumerate() {
                phi_grid.set(i, k, v);
            }
        }
        match method {
            SeriesMethod::Terms => {
                if let Some((value, terms_used, tail_bound)) = self.sum_terms(a, phi_grid, sup, 0, tol, terms)? {
                    return Ok(SeriesResult { value, terms_used, tail_bound, method });
                }
            }
            SeriesMethod::Resolvent => {}
        }
        let value = self.forward_substitution(a, &space, |_| phi.to_vec())?;
        Ok(SeriesResult { value, terms_used: terms, tail_bound: 0.0, method: SeriesMethod::Resolvent })
    }

    /// `Σ_n (I^(ν) A)ⁿ I^(ν) g` on the grid.
    pub fn rl_series(&self, a: &BoundedGenerator, g: &GridFunction, tol: f64) -> Result<SeriesResult> {
        if &g.time != self.grid() || g.width() != a.dim() {
            bail!(Domain, "g does not live on the engine grid × generator grid");
        }
        if !(tol > 0.0) {
            bail!(Domain, "tolerance must be positive");
        }
        let sup = g.sup_norm();
        let (terms, log_max) = self.truncation(a.norm(), sup, 1, tol);
        let method = self.pick_method(log_max, terms, tol);
        match method {
            SeriesMethod::Terms => {
                if let Some((value, terms_used, tail_bound)) = self.sum_terms(a, self.apply_i(g), sup, 1, tol, terms)? {
                    return Ok(SeriesResult { value, terms_used, tail_bound, method });
                }
            }
            SeriesMethod::Resolvent => {}
        }
        let ig = self.apply_i(g);
        // u = I g + I A u, written node by node.
        let value = self.forward_substitution(a, &g.space, |i| ig.slice(i).to_vec())?;
        Ok(SeriesResult { value, terms_used: terms, tail_bound: 0.0, method: SeriesMethod::Resolvent })
    }

    fn exceeds_bound(&self, term: &GridFunction, norm_a: f64, sup: f64, n: usize, shift: usize) -> bool {
        let bound = self.term_bound(norm_a, sup, n, shift);
        let allowance = 1.1f64.powi(n as i32 + shift as i32);
        term.sup_norm() > bound * allowance + 1e-12 * sup.max(1.0)
    }

    /// RL or Caputo series solution; Caputo splits `tol` evenly.
    pub fn series_solution(&self, a: &BoundedGenerator, g: &GridFunction, phi: &[f64], mode: SeriesMode, tol: f64) -> Result<SeriesResult> {
        match mode {
            SeriesMode::Rl => self.rl_series(a, g, tol),
            SeriesMode::Caputo => {
                let ml = self.generalized_ml(a, phi, 0.5 * tol)?;
                if g.values.iter().all(|&v| v == 0.0) {
                    return Ok(ml);
                }
                let rl = self.rl_series(a, g, 0.5 * tol)?;
                let value = ml.value.axpy(1.0, &rl.value)?;
                let method = if ml.method == SeriesMethod::Resolvent || rl.method == SeriesMethod::Resolvent {
                    SeriesMethod::Resolvent
                } else {
                    SeriesMethod::Terms
                };
                Ok(SeriesResult {
                    value,
                    terms_used: ml.terms_used.max(rl.terms_used),
                    tail_bound: ml.tail_bound + rl.tail_bound,
                    method,
                })
            }
        }
    }
}

/// Free-function form of [`SeriesEngine::generalized_ml`].
pub fn generalized_ml(a: &BoundedGenerator, phi: &[f64], engine: &SeriesEngine, tol: f64) -> Result<SeriesResult> {
    engine.generalized_ml(a, phi, tol)
}

/// Free-function form of [`SeriesEngine::series_solution`].
pub fn series_solution(
    a: &BoundedGenerator,
    g: &GridFunction,
    phi: &[f64],
    mode: SeriesMode,
    engine: &SeriesEngine,
    tol: f64,
) -> Result<SeriesResult> {
    engine.series_solution(a, g, phi, mode, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feller::Boundary;
    use crate::special::erfc;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ml_half(z: f64) -> f64 {
        (z * z).exp() * erfc(-z)
    }

    #[test]
    fn ml_special_values() {
        assert_eq!(mittag_leffler(0.3, 0.0, 1e-14).unwrap(), 1.0);
        assert_relative_eq!(mittag_leffler(1.0, 1.0, 1e-15).unwrap(), core::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(mittag_leffler(0.5, 1.0, 1e-14).unwrap(), 5.0089800808, epsilon = 1e-9);
        assert_relative_eq!(mittag_leffler(0.5, -1.0, 1e-14).unwrap(), 0.4275836, epsilon = 1e-7);
        for &z in &[-4.0, -2.0, -0.5, 0.3, 2.0, 3.5] {
            assert_relative_eq!(mittag_leffler(0.5, z, 1e-14).unwrap(), ml_half(z), epsilon = 1e-9, max_relative = 1e-11);
        }
        assert!(matches!(mittag_leffler(0.5, 51.0, 1e-10), Err(Error::Range(_))));
    }

    #[test]
    fn exp_agreement() {
        for i in -50..=50 {
            let z = i as f64 / 10.0;
            assert_relative_eq!(mittag_leffler(1.0, z, 1e-14).unwrap(), z.exp(), max_relative = 1e-10);
        }
    }

    fn scalar_engine(m: usize) -> SeriesEngine {
        SeriesEngine::classical(0.5, &TimeGrid::uniform(0.0, 1.0, m).unwrap()).unwrap()
    }

    #[test]
    fn zero_generator_returns_phi() {
        let e = scalar_engine(32);
        let a = BoundedGenerator::zero(SpaceGrid::Sites(3)).unwrap();
        let r = e.generalized_ml(&a, &[1.0, -2.0, 0.5], 1e-10).unwrap();
        for i in 0..33 {
            assert_eq!(r.value.slice(i), &[1.0, -2.0, 0.5]);
        }
        assert!(r.terms_used >= 1);
    }

    #[test]
    fn scalar_generalized_ml_matches_mittag_leffler() {
        let e = scalar_engine(256);
        for &lam in &[-1.0, 1.0] {
            let a = BoundedGenerator::scalar(lam).unwrap();
            let r = e.generalized_ml(&a, &[1.0], 1e-10).unwrap();
            let want = mittag_leffler(0.5, lam, 1e-14).unwrap();
            assert!((r.value.at(256, 0) - want).abs() < 1e-3, "{lam}: {}", r.value.at(256, 0));
        }
    }

    #[test]
    fn caputo_reduces_to_rl_integral_of_one() {
        let e = scalar_engine(64);
        let g = e.grid().clone();
        let a = BoundedGenerator::scalar(0.0).unwrap();
        let one = GridFunction::constant(&g, &SpaceGrid::Scalar, 1.0);
        let r = e.series_solution(&a, &one, &[0.0], SeriesMode::Caputo, 1e-10).unwrap();
        assert_relative_eq!(r.value.at(64, 0), 1.0 / gamma(1.5), max_relative = 1e-12);
        let zero = GridFunction::zeros(&g, &SpaceGrid::Scalar);
        let a = BoundedGenerator::scalar(-1.0).unwrap();
        let c = e.series_solution(&a, &zero, &[1.0], SeriesMode::Caputo, 1e-10).unwrap();
        let m = e.generalized_ml(&a, &[1.0], 0.5e-10).unwrap();
        assert_eq!(c.value, m.value);
    }

    #[test]
    fn resolvent_and_terms_agree() {
        let e = scalar_engine(64);
        let a = BoundedGenerator::laplacian_1d(0.1, -1.0, 1.0, 8, Boundary::Periodic).unwrap();
        let phi: Vec<f64> = (0..8).map(|k| (k as f64).cos()).collect();
        let r = e.generalized_ml(&a, &phi, 1e-11).unwrap();
        assert_eq!(r.method, SeriesMethod::Terms);
        let res = e.forward_substitution(&a, a.grid(), |_| phi.clone()).unwrap();
        assert!(r.value.sup_distance(&res) < 1e-9);
        let g = GridFunction::from_fn(e.grid(), a.grid(), |t, x| t * x.sin());
        let rl = e.rl_series(&a, &g, 1e-11).unwrap();
        let ig = e.apply_i(&g);
        let rres = e.forward_substitution(&a, a.grid(), |i| ig.slice(i).to_vec()).unwrap();
        assert!(rl.value.sup_distance(&rres) < 1e-9);
    }

    #[test]
    fn stiff_generator_uses_resolvent() {
        let e = scalar_engine(64);
        let a = BoundedGenerator::laplacian_1d(1.0, -3.0, 3.0, 40, Boundary::Periodic).unwrap();
        let phi: Vec<f64> = (0..40).map(|k| a.grid().coord(k).cos()).collect();
        let r = e.generalized_ml(&a, &phi, 1e-8).unwrap();
        assert_eq!(r.method, SeriesMethod::Resolvent);
        assert!(r.value.sup_norm() <= 1.0 + 1e-9);
    }

    #[test]
    fn uncertified_kernel_is_rejected() {
        let zero = KernelSpec::new(
            crate::kernels::KernelFamily::Custom(crate::kernels::CustomKernel {
                density: Arc::new(|_, _| 0.0),
                envelope: None,
                homogeneous: true,
                label: "zero".into(),
            }),
            0.0,
            1.0,
        )
        .unwrap();
        let b = Backend::exact_beta(0.5, &TimeGrid::uniform(0.0, 1.0, 4).unwrap()).unwrap();
        assert!(matches!(SeriesEngine::new(&b, &zero), Err(Error::Precondition(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(96))]
        #[test]
        fn terms_respect_bound_and_tail_is_honest(lam in -3.0f64..3.0, beta in 0.3f64..0.95) {
            let e = SeriesEngine::classical(beta, &TimeGrid::uniform(0.0, 1.0, 32).unwrap()).unwrap();
            let a = BoundedGenerator::scalar(lam).unwrap();
            let coarse = e.generalized_ml(&a, &[1.0], 1e-6).unwrap();
            let fine = e.generalized_ml(&a, &[1.0], 1e-7).unwrap();
            prop_assert!(coarse.value.sup_distance(&fine.value) <= coarse.tail_bound + 1e-13 * fine.value.sup_norm().max(1.0),
                "{:?} {:?} {} {} {}", coarse.method, fine.method, coarse.terms_used, coarse.tail_bound, coarse.value.sup_distance(&fine.value));
        }
    }
}
