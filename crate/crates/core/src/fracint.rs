//! The generalised fractional integral `I^(ν) f(t) = E ∫_0^τ f(X(s)) ds`.
//!
//! Three backends evaluate it on a [`TimeGrid`]:
//!
//! - exact product integration against `(t − y)^{β−1}/Γ(β)` for classical
//!   kernels;
//! - a potential-kernel matrix estimated once from simulated occupation times;
//! - direct Monte Carlo per start node.
//!
//! Functions are treated as piecewise linear between nodes throughout, so
//! every backend is a matrix acting on nodal values. Occupation is recorded
//! by integrating the hat basis along each path, which keeps row sums equal to
//! the mean exit time. Paths use the absorbed convention; nothing below the
//! level `a` is ever deposited.

use crate::error::{bail, Error, Result};
use crate::grid::{GridFunction, TimeGrid};
use crate::kernels::KernelSpec;
use crate::par;
use crate::prelude::*;
use crate::processes::{McConfig, PathSample, Simulator};
use crate::special::{beta as beta_fn, gamma, ln_gamma};
use crate::stats::Moments;

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

/// Lower-triangular product-integration weights `W[i][j] = ∫ hat_j(y)
/// (τ_i − y)^{β−1}/Γ(β) dy`, row-major.
pub fn rl_weights(beta: f64, grid: &TimeGrid) -> Result<Vec<f64>> {
    if !(beta > 0.0 && beta < 1.0) {
        bail!(Domain, "order {beta} outside (0, 1)");
    }
    let x = grid.nodes();
    let n = x.len();
    let g = gamma(beta);
    let mut w = vec![0.0; n * n];
    for i in 1..n {
        let ti = x[i];
        for c in 0..i {
            let (l, r) = (x[c], x[c + 1]);
            let len = r - l;
            let p0 = ti - r;
            let p1 = ti - l;
            let d0 = p1.powf(beta) - p0.powf(beta);
            let i0 = d0 / beta;
            let i1 = p1 * d0 / beta - (p1.powf(beta + 1.0) - p0.powf(beta + 1.0)) / (beta + 1.0);
            w[i * n + c] += (i0 - i1 / len) / g;
            w[i * n + c + 1] += i1 / len / g;
        }
    }
    Ok(w)
}

fn apply_lower(w: &[f64], n: usize, f: &GridFunction) -> GridFunction {
    let k = f.width();
    let mut out = GridFunction::zeros(&f.time, &f.space);
    for i in 0..n {
        for col in 0..k {
            let mut acc = crate::stats::KahanSum::new();
            for j in 0..=i {
                let wij = w[i * n + j];
                if wij != 0.0 {
                    acc.add(wij * f.at(j, col));
                }
            }
            out.set(i, col, acc.value());
        }
    }
    out
}

/// `I^β f` on the grid of `f` by product integration.
pub fn rl_integral_exact(beta: f64, f: &GridFunction) -> Result<GridFunction> {
    let w = rl_weights(beta, &f.time)?;
    Ok(apply_lower(&w, f.time.len(), f))
}

/// Occupation of the hat basis along one path, added into `row`.
pub fn deposit_occupation(path: &PathSample, grid: &TimeGrid, row: &mut [f64]) {
    for seg in &path.segments {
        let x0 = seg.state;
        let x1 = seg.end_state();
        if x0 - x1 <= 1e-14 * (1.0 + x0.abs()) {
            let (j, w) = grid.locate(x0);
            row[j] += seg.dwell * (1.0 - w);
            row[j + 1] += seg.dwell * w;
        } else {
            // Uniform speed: occupation = dwell/(x0 − x1) · ∫_{x1}^{x0} hat_j.
            let scale = seg.dwell / (x0 - x1);
            hat_integrals(grid, x1, x0, |j, v| row[j] += scale * v);
        }
    }
}

/// Calls `emit(j, ∫_{lo}^{hi} hat_j)` for the hats meeting `[lo, hi]`.
fn hat_integrals<F: FnMut(usize, f64)>(grid: &TimeGrid, lo: f64, hi: f64, mut emit: F) {
    let x = grid.nodes();
    let (mut c, _) = grid.locate(lo);
    while c + 1 < x.len() && x[c] < hi {
        let l = lo.max(x[c]);
        let r = hi.min(x[c + 1]);
        if r > l {
            let len = x[c + 1] - x[c];
            // ∫_l^r (y − x_c)/len dy and its complement.
            let up = ((r - x[c]).powi(2) - (l - x[c]).powi(2)) / (2.0 * len);
            emit(c, (r - l) - up);
            emit(c + 1, up);
        }
        c += 1;
    }
}

/// Monte Carlo estimate of the potential measure on a grid.
///
/// `G[i][j]` is the hat-weighted average density of occupation near `τ_j`
/// for paths started at `τ_i`; `Σ_j G[i][j]·trap_j·f_j` applies it to `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialKernel {
    pub grid: TimeGrid,
    /// Row-major `(M+1)²` densities.
    pub density: Vec<f64>,
    /// Per-row standard error of the mean exit time.
    pub row_se: Vec<f64>,
    pub h: f64,
    pub n: u64,
    pub seed: u64,
}

impl PotentialKernel {
    pub fn size(&self) -> usize {
        self.grid.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.size() + j]
    }

    /// Occupation weights `G[i][j]·trap_j`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.size();
        let trap = self.grid.trap_weights();
        let mut w = self.density.clone();
        for i in 0..n {
            for j in 0..n {
                w[i * n + j] *= trap[j];
            }
        }
        w
    }

    /// `Σ_j G[i][j]·trap_j`, the estimated mean exit time from `τ_i`.
    pub fn row_mass(&self, i: usize) -> f64 {
        let n = self.size();
        let trap = self.grid.trap_weights();
        (0..n).map(|j| self.get(i, j) * trap[j]).sum()
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        if f.time != self.grid {
            bail!(Domain, "function grid differs from the kernel grid");
        }
        Ok(apply_lower(&self.weights(), self.size(), f))
    }
}

/// Simulates `cfg.n` paths from every grid node and records their
/// occupation of the hat basis.
pub fn estimate_potential_kernel(kernel: &KernelSpec, grid: &TimeGrid, cfg: &McConfig) -> Result<PotentialKernel> {
    cfg.validate()?;
    let a = grid.a();
    let sim = Simulator::new(kernel, a, cfg)?;
    let n = grid.len();
    let trap = grid.trap_weights();
    let rows = par::try_map_indexed(n, |i| -> Result<(Vec<f64>, f64)> {
        if i == 0 {
            return Ok((vec![0.0; n], 0.0));
        }
        let t0 = grid.nodes()[i];
        let parts = sim.fold_chunks(
            t0,
            i as u64,
            || (vec![0.0; n], Moments::default()),
            |acc, p, _| {
                deposit_occupation(p, grid, &mut acc.0);
                acc.1.push(p.exit_time);
                Ok(())
            },
        )?;
        let mut row = vec![0.0; n];
        let mut m = Moments::default();
        for (r, mm) in &parts {
            for (x, y) in row.iter_mut().zip(r) {
                *x += y;
            }
            m.merge(mm);
        }
        for (j, x) in row.iter_mut().enumerate() {
            *x /= cfg.n as f64 * trap[j];
        }
        Ok((row, m.se()))
    })?;
    let mut density = Vec::with_capacity(n * n);
    let mut row_se = Vec::with_capacity(n);
    for (r, se) in rows {
        density.extend(r);
        row_se.push(se);
    }
    Ok(PotentialKernel {
        grid: grid.clone(),
        density,
        row_se,
        h: cfg.h,
        n: cfg.n,
        seed: cfg.seed,
    })
}

#[derive(Debug, Clone)]
pub enum Backend {
    ExactRl {
        beta: f64,
        grid: TimeGrid,
        weights: Vec<f64>,
    },
    KernelMatrix {
        kernel: PotentialKernel,
        weights: Vec<f64>,
    },
    MonteCarlo {
        kernel: KernelSpec,
        grid: TimeGrid,
        cfg: McConfig,
    },
}

impl Backend {
    /// Exact integration; requires a classical kernel.
    pub fn exact_rl(kernel: &KernelSpec, grid: &TimeGrid) -> Result<Self> {
        let Some(beta) = kernel.classical_beta() else {
            return Err(Error::BackendMismatch(
                "exact RL integration needs a classical kernel".into(),
            ));
        };
        Self::exact_beta(beta, grid)
    }

    pub fn exact_beta(beta: f64, grid: &TimeGrid) -> Result<Self> {
        Ok(Backend::ExactRl {
            beta,
            grid: grid.clone(),
            weights: rl_weights(beta, grid)?,
        })
    }

    pub fn kernel_matrix(kernel: PotentialKernel) -> Self {
        let weights = kernel.weights();
        Backend::KernelMatrix { kernel, weights }
    }

    pub fn monte_carlo(kernel: &KernelSpec, grid: &TimeGrid, cfg: &McConfig) -> Self {
        Backend::MonteCarlo {
            kernel: kernel.clone(),
            grid: grid.clone(),
            cfg: *cfg,
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        match self {
            Backend::ExactRl { grid, .. } | Backend::MonteCarlo { grid, .. } => grid,
            Backend::KernelMatrix { kernel, .. } => &kernel.grid,
        }
    }

    /// Matrix form; the Monte Carlo backend estimates a kernel first.
    pub fn to_matrix(&self) -> Result<Backend> {
        match self {
            Backend::MonteCarlo { kernel, grid, cfg } => {
                Ok(Backend::kernel_matrix(estimate_potential_kernel(kernel, grid, cfg)?))
            }
            other => Ok(other.clone()),
        }
    }

    /// Row-major weights, when available without simulation.
    pub fn matrix_weights(&self) -> Option<&[f64]> {
        match self {
            Backend::ExactRl { weights, .. } | Backend::KernelMatrix { weights, .. } => Some(weights),
            Backend::MonteCarlo { .. } => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::ExactRl { .. } => "exact-rl",
            Backend::KernelMatrix { .. } => "kernel-matrix",
            Backend::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

/// Monte Carlo `I^(ν) f` at every node with per-node standard errors.
pub fn gfi_monte_carlo(kernel: &KernelSpec, f: &GridFunction, cfg: &McConfig) -> Result<(GridFunction, GridFunction)> {
    cfg.validate()?;
    let grid = &f.time;
    let sim = Simulator::new(kernel, grid.a(), cfg)?;
    let n = grid.len();
    let width = f.width();
    let per_node = par::try_map_indexed(n, |i| -> Result<Vec<Moments>> {
        if i == 0 {
            return Ok(vec![Moments { n: cfg.n, mean: 0.0, m2: 0.0 }; width]);
        }
        let parts = sim.fold_chunks(
            grid.nodes()[i],
            i as u64,
            || (vec![Moments::default(); width], vec![0.0; n]),
            |acc, p, _| {
                acc.1.iter_mut().for_each(|x| *x = 0.0);
                deposit_occupation(p, grid, &mut acc.1);
                for col in 0..width {
                    let v: f64 = (0..n).map(|j| acc.1[j] * f.at(j, col)).sum();
                    acc.0[col].push(v);
                }
                Ok(())
            },
        )?;
        let mut out = vec![Moments::default(); width];
        for (ms, _) in &parts {
            for (o, m) in out.iter_mut().zip(ms) {
                o.merge(m);
            }
        }
        Ok(out)
    })?;
    let mut mean = GridFunction::zeros(grid, &f.space);
    let mut se = GridFunction::zeros(grid, &f.space);
    for (i, ms) in per_node.iter().enumerate() {
        for (col, m) in ms.iter().enumerate() {
            mean.set(i, col, m.mean);
            se.set(i, col, m.se());
        }
    }
    Ok((mean, se))
}

/// `I^(ν) f` with the given backend.
pub fn gfi_apply(backend: &Backend, f: &GridFunction) -> Result<GridFunction> {
    if &f.time != backend.grid() {
        bail!(Domain, "function grid differs from the backend grid");
    }
    match backend {
        Backend::ExactRl { weights, grid, .. } | Backend::KernelMatrix { weights, kernel: PotentialKernel { grid, .. } } => {
            Ok(apply_lower(weights, grid.len(), f))
        }
        Backend::MonteCarlo { kernel, cfg, .. } => Ok(gfi_monte_carlo(kernel, f, cfg)?.0),
    }
}

/// `n`-fold application; the Monte Carlo backend reuses one estimated kernel.
pub fn iterate_gfi(backend: &Backend, f: &GridFunction, n: usize) -> Result<GridFunction> {
    if n == 0 {
        return Ok(f.clone());
    }
    let b = backend.to_matrix()?;
    let mut out = f.clone();
    for _ in 0..n {
        out = gfi_apply(&b, &out)?;
    }
    Ok(out)
}

/// Both forms of the a-priori bound on `|I^{(ν),n} f|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationBound {
    /// `sup_f κⁿ span^{nβ} Π_{k<n} B(kβ+1, β) / Γ(β)ⁿ = sup_f κⁿ span^{nβ}/Γ(nβ+1)`.
    pub exact: f64,
    /// `sup_f (κ span^β/(β² Γ(β+1)))ⁿ / n!`.
    pub simplified: f64,
}

/// Bound for a kernel dominating the classical kernel of order `beta`
/// (`κ = 1`).
pub fn iteration_bound(beta: f64, span: f64, n: usize, sup_f: f64) -> IterationBound {
    iteration_bound_scaled(beta, span, n, sup_f, 1.0)
}

/// Bound for `ν ≥ C r^{−1−β}`, where `κ = 1/(C |Γ(−β)|)` is the slow-down of
/// the dominating classical process.
pub fn iteration_bound_scaled(beta: f64, span: f64, n: usize, sup_f: f64, kappa: f64) -> IterationBound {
    if n == 0 {
        return IterationBound { exact: sup_f, simplified: sup_f };
    }
    let nf = n as f64;
    let mut log_prod = 0.0;
    for k in 0..n {
        log_prod += beta_fn(k as f64 * beta + 1.0, beta).ln();
    }
    let log_common = sup_f.ln() + nf * kappa.ln() + nf * beta * span.ln();
    let exact = (log_common + log_prod - nf * ln_gamma(beta)).exp();
    let simplified = (log_common - nf * (2.0 * beta.ln() + ln_gamma(beta + 1.0)) - ln_gamma(nf + 1.0)).exp();
    IterationBound { exact, simplified }
}

#[cfg(test)]
// Seven-digit reference values are compared as written.
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::grid::SpaceGrid;
    use crate::processes::McConfig;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn one(grid: &TimeGrid) -> GridFunction {
        GridFunction::constant(grid, &SpaceGrid::Scalar, 1.0)
    }

    #[test]
    fn exact_backend_on_constants() {
        let g = TimeGrid::uniform(0.0, 1.0, 64).unwrap();
        let u = rl_integral_exact(0.5, &one(&g)).unwrap();
        assert_relative_eq!(u.at(64, 0), 1.0 / gamma(1.5), max_relative = 1e-13);
        assert!(u.at(0, 0) == 0.0);
        let z = rl_integral_exact(0.5, &GridFunction::zeros(&g, &SpaceGrid::Scalar)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert!(rl_integral_exact(1.0, &one(&g)).is_err());
    }

    #[test]
    fn exact_backend_on_linear_functions_is_exact() {
        // I^β y = y^{β+1}/Γ(β+2)
        let g = TimeGrid::uniform(0.0, 1.0, 16).unwrap();
        let f = GridFunction::from_time_fn(&g, |t| t);
        let u = rl_integral_exact(0.3, &f).unwrap();
        for (i, &t) in g.nodes().iter().enumerate() {
            assert!((u.at(i, 0) - t.powf(1.3) / gamma(2.3)).abs() < 1e-13);
        }
    }

    #[test]
    fn power_rule_converges_at_second_order() {
        // I^½ y^½ = Γ(1.5)/Γ(2) y = √π/2 at y = 1
        let want = core::f64::consts::PI.sqrt() / 2.0;
        let mut errs = Vec::new();
        for &m in &[64usize, 128, 256] {
            let g = TimeGrid::uniform(0.0, 1.0, m).unwrap();
            let f = GridFunction::from_time_fn(&g, |t| t.sqrt());
            errs.push((rl_integral_exact(0.5, &f).unwrap().at(m, 0) - want).abs());
        }
        // The y^½ singularity at the origin limits the local order to 1.5.
        assert!(errs[0] / errs[1] > 2.5 && errs[1] / errs[2] > 2.5, "{errs:?}");
        // Smooth data: second order.
        let smooth_want = |t: f64| 2.0 * t.powf(2.5) / gamma(3.5);
        let mut e2 = Vec::new();
        for &m in &[32usize, 64, 128] {
            let g = TimeGrid::uniform(0.0, 1.0, m).unwrap();
            let f = GridFunction::from_time_fn(&g, |t| t * t);
            e2.push((rl_integral_exact(0.5, &f).unwrap().at(m, 0) - smooth_want(1.0)).abs());
        }
        assert!(e2[0] / e2[1] > 3.5 && e2[1] / e2[2] > 3.5, "{e2:?}");
    }

    #[test]
    fn nfold_identity() {
        let g = TimeGrid::uniform(0.0, 1.0, 256).unwrap();
        let k = KernelSpec::classical(0.5, 0.0, 1.0).unwrap();
        let b = Backend::exact_rl(&k, &g).unwrap();
        assert_eq!(iterate_gfi(&b, &one(&g), 0).unwrap(), one(&g));
        let u2 = iterate_gfi(&b, &one(&g), 2).unwrap();
        assert!((u2.at(256, 0) - 1.0).abs() < 1e-3);
        let u4 = iterate_gfi(&b, &one(&g), 4).unwrap();
        assert!((u4.at(256, 0) - 0.5).abs() < 1e-3);
        let tempered = KernelSpec::tempered(0.5, 1.0, 0.0, 1.0).unwrap();
        assert!(matches!(Backend::exact_rl(&tempered, &g), Err(Error::BackendMismatch(_))));
    }

    #[test]
    fn bound_examples() {
        let b0 = iteration_bound(0.5, 1.0, 0, 2.5);
        assert_eq!(b0.exact, 2.5);
        let b1 = iteration_bound(0.5, 1.0, 1, 1.0);
        assert_relative_eq!(b1.exact, 1.0 / gamma(1.5), max_relative = 1e-12);
        assert_relative_eq!(b1.exact, 1.1283792, epsilon = 1e-7);
        let b2 = iteration_bound(0.5, 1.0, 2, 1.0);
        assert_relative_eq!(b2.exact, 1.0, max_relative = 1e-12);
        for n in 1..=6 {
            let b = iteration_bound(0.5, 1.0, n, 1.0);
            assert!(b.exact <= b.simplified);
            assert_relative_eq!(b.exact, 1.0 / gamma(n as f64 * 0.5 + 1.0), max_relative = 1e-11);
        }
    }

    #[test]
    fn simplified_bound_is_not_an_upper_bound_for_large_n() {
        // The gamma inequality behind the simplified form fails once n is large.
        let b = iteration_bound(0.5, 1.0, 40, 1.0);
        assert!(b.exact > b.simplified);
    }

    #[test]
    fn bound_series_converges() {
        for &beta in &[0.2, 0.5, 0.9] {
            let terms: Vec<f64> = (0..200).map(|n| iteration_bound(beta, 2.0, n, 1.0).exact).collect();
            let tail: f64 = terms[150..].iter().sum();
            assert!(tail < 1e-12);
            // eventually ratio < 1
            assert!(terms[101] / terms[100] < 1.0);
        }
    }

    #[test]
    fn hat_deposits_sum_to_dwell() {
        let g = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let p = PathSample {
            segments: vec![
                crate::processes::Segment { state: 0.93, dwell: 0.4, drift: 0.5 },
                crate::processes::Segment { state: 0.55, dwell: 0.2, drift: 0.0 },
            ],
            exit_time: 0.6,
            absorbed: true,
            final_state: 0.0,
            killed: false,
        };
        let mut row = vec![0.0; 11];
        deposit_occupation(&p, &g, &mut row);
        assert!((row.iter().sum::<f64>() - 0.6).abs() < 1e-14);
    }

    #[test]
    fn kernel_matrix_matches_density_and_exit_times() {
        let g = TimeGrid::uniform(0.0, 1.0, 16).unwrap();
        let k = KernelSpec::classical(0.5, 0.0, 1.0).unwrap();
        let cfg = McConfig::new(1e-3, 20_000, 3);
        let pk = estimate_potential_kernel(&k, &g, &cfg).unwrap();
        let exact = rl_weights(0.5, &g).unwrap();
        let trap = g.trap_weights();
        let n = g.len();
        for i in 0..n {
            for j in (i + 1)..n {
                assert_eq!(pk.get(i, j), 0.0);
            }
            assert!(pk.density[i * n..(i + 1) * n].iter().all(|&v| v >= 0.0));
        }
        let i = 16;
        for j in 1..12 {
            let want = exact[i * n + j] / trap[j];
            assert!((pk.get(i, j) - want).abs() < 0.05 * want, "j {j}: {} vs {want}", pk.get(i, j));
        }
        let mean = 1.0 / gamma(1.5);
        assert!((pk.row_mass(16) - mean).abs() < (3.0 * pk.row_se[16]).max(0.02 * mean));
        let b = Backend::kernel_matrix(pk);
        let u = gfi_apply(&b, &one(&g)).unwrap();
        assert!((u.at(16, 0) - mean).abs() < 0.05 * mean);
    }

    #[test]
    fn monte_carlo_backend_agrees_with_exact() {
        let g = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
        let k = KernelSpec::classical(0.5, 0.0, 1.0).unwrap();
        let cfg = McConfig::new(1e-3, 10_000, 17);
        let f = GridFunction::from_time_fn(&g, |t| 1.0 + t);
        let (mc, se) = gfi_monte_carlo(&k, &f, &cfg).unwrap();
        let ex = rl_integral_exact(0.5, &f).unwrap();
        for i in 1..g.len() {
            let tol = (3.0 * se.at(i, 0)).max(0.02 * ex.at(i, 0));
            assert!((mc.at(i, 0) - ex.at(i, 0)).abs() < tol);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn matrix_backends_are_linear(alpha in -3.0f64..3.0, seed in 0u64..1000) {
            let g = TimeGrid::uniform(0.0, 2.0, 12).unwrap();
            let b = Backend::exact_beta(0.4, &g).unwrap();
            let f = GridFunction::from_time_fn(&g, |t| (t * 7.0 + seed as f64).sin());
            let h = GridFunction::from_time_fn(&g, |t| (t * 3.0 - seed as f64).cos());
            let lhs = gfi_apply(&b, &f.axpy(alpha, &h).unwrap()).unwrap();
            let rhs = gfi_apply(&b, &f).unwrap().axpy(alpha, &gfi_apply(&b, &h).unwrap()).unwrap();
            prop_assert!(lhs.sup_distance(&rhs) < 1e-12);
        }

        #[test]
        fn nfold_respects_bound(beta in 0.1f64..0.9, n in 1usize..=6, seed in 0u64..100) {
            let g = TimeGrid::uniform(0.0, 1.5, 48).unwrap();
            let b = Backend::exact_beta(beta, &g).unwrap();
            let f = GridFunction::from_time_fn(&g, |t| (t * 5.0 + seed as f64).sin());
            let u = iterate_gfi(&b, &f, n).unwrap();
            // Discretisation error of the scheme on f ≡ 1 is the backend tolerance.
            let ones = iterate_gfi(&b, &one(&g), n).unwrap();
            for (i, &t) in g.nodes().iter().enumerate() {
                let sup = (0..=i).map(|j| f.at(j, 0).abs()).fold(0.0f64, f64::max);
                let bound = iteration_bound(beta, t - g.a(), n, sup).exact;
                let tol = sup * (ones.at(i, 0) - iteration_bound(beta, t - g.a(), n, 1.0).exact).abs();
                prop_assert!(u.at(i, 0).abs() <= bound + tol + 1e-12, "{} > {}", u.at(i, 0).abs(), bound);
            }
        }
    }
}
