//! Picard iteration for the nonlinear Caputo problem.
//!
//! The map
//!
//! `Ψu(t,x) = E (e^{τA} φ_a)(x) + E ∫₀^τ (e^{sA} F(u)(X(s), ·))(x) ds`,
//! `F(u)(t, y) = f(t, y, u(t, y))`,
//!
//! is evaluated on a frozen ensemble of time paths, so it is a fixed
//! deterministic map on grid functions. The ensemble is condensed once into
//! the tensor `T[i][j][k] = E Σ_seg hat_j(mid) ∫_seg e^{μ_k s} ds` over the
//! eigenbasis of `A`; each sweep is then a small linear-algebra update.

use nalgebra::SymmetricEigen;
use rand::{Rng as _, SeedableRng};

use crate::error::{bail, Error, Result};
use crate::feller::BoundedGenerator;
use crate::grid::{GridFunction, SpaceGrid, TimeGrid};
use crate::kernels::{classical_constant, KernelSpec};
use crate::par;
use crate::prelude::*;
use crate::processes::{Convention, McConfig, Simulator};
use crate::solver_linear::Initial;
use crate::special::{gamma, ln_gamma};
use crate::stats::{KahanSum, Moments};
use crate::stream::{stream, tag};

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

pub type ReactionFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

const SPOT_CHECKS: usize = 256;

#[derive(Clone)]
pub struct NonlinearProblem {
    pub kernel: KernelSpec,
    pub generator: BoundedGenerator,
    pub phi_a: Initial,
    pub f: ReactionFn,
    pub lipschitz: f64,
    pub f_max: f64,
}

impl core::fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("NonlinearProblem")
            .field("kernel", &self.kernel)
            .field("generator", &self.generator)
            .field("phi_a", &self.phi_a)
            .field("lipschitz", &self.lipschitz)
            .field("f_max", &self.f_max)
            .finish()
    }
}

impl NonlinearProblem {
    /// Validates the problem. `f` is spot-checked for the Lipschitz bound
    /// on random triples and for `|f| ≤ f_max` with `|u| ≤ u_range`.
    pub fn new(
        kernel: KernelSpec,
        generator: BoundedGenerator,
        phi_a: Initial,
        f: ReactionFn,
        lipschitz: f64,
        f_max: f64,
        u_range: f64,
    ) -> Result<Self> {
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            bail!(Domain, "Lipschitz constant must be positive and finite");
        }
        if !(f_max >= 0.0) || !(u_range > 0.0) {
            bail!(Domain, "f_max must be non-negative and u_range positive");
        }
        if !generator.is_subgenerator() {
            bail!(Precondition, "the spatial generator must generate a contraction semigroup");
        }
        if !generator.is_symmetric() {
            bail!(Config, "the nonlinear solver needs a symmetric generator");
        }
        phi_a.on_grid(generator.grid())?;
        let space = generator.grid();
        let mut rng = stream(0x5eed, tag::GENERIC, 0);
        for _ in 0..SPOT_CHECKS {
            let t = kernel.a() + (kernel.b() - kernel.a()) * rng.random::<f64>();
            let x = space.coord(rng.random_range(0..space.len()));
            let u1 = u_range * (2.0 * rng.random::<f64>() - 1.0);
            let u2 = u_range * (2.0 * rng.random::<f64>() - 1.0);
            let (f1, f2) = (f(t, x, u1), f(t, x, u2));
            if !(f1.is_finite() && f2.is_finite()) {
                bail!(Domain, "f is not finite at ({t}, {x}, {u1})");
            }
            if (f1 - f2).abs() > lipschitz * (u1 - u2).abs() * (1.0 + 1e-9) + 1e-14 {
                bail!(Precondition, "f violates the Lipschitz bound {lipschitz} at ({t}, {x})");
            }
            if f1.abs() > f_max * (1.0 + 1e-9) + 1e-14 {
                bail!(Precondition, "|f| = {} exceeds f_max = {f_max} at ({t}, {x}, {u1})", f1.abs());
            }
        }
        Ok(NonlinearProblem { kernel, generator, phi_a, f, lipschitz, f_max })
    }
}

/// Weissinger constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alpha {
    /// `(L span^β/(β²Γ(β+1)))ⁿ/n!`.
    pub simplified: f64,
    /// `Lⁿ κⁿ span^{nβ}/Γ(nβ+1)`.
    pub sharp: f64,
}

impl Alpha {
    /// Termwise larger constant. The simplified form is not an upper bound
    /// of the sharp one for large `n`.
    pub fn bound(&self) -> f64 {
        self.simplified.max(self.sharp)
    }
}

pub fn weissinger_alpha(beta: f64, span: f64, lipschitz: f64, n: usize) -> Alpha {
    weissinger_alpha_scaled(beta, span, lipschitz, n, 1.0)
}

/// `κ` rescales the time operator for kernels dominating `κ⁻¹` times the
/// classical one.
pub fn weissinger_alpha_scaled(beta: f64, span: f64, lipschitz: f64, n: usize, kappa: f64) -> Alpha {
    if n == 0 {
        return Alpha { simplified: 1.0, sharp: 1.0 };
    }
    let nf = n as f64;
    let lq = (kappa * lipschitz).ln() + beta * span.ln();
    let simplified = (nf * (lq - 2.0 * beta.ln() - gamma(beta + 1.0).ln()) - ln_gamma(nf + 1.0)).exp();
    let sharp = (nf * lq - ln_gamma(nf * beta + 1.0)).exp();
    Alpha { simplified, sharp }
}

/// `Σ_{n≥k} αₙ` with `αₙ = max(simplified, sharp)`; summed until the terms
/// are negligible.
pub fn weissinger_tail(beta: f64, span: f64, lipschitz: f64, kappa: f64, k: usize) -> f64 {
    let mut s = KahanSum::new();
    let mut n = k;
    loop {
        let t = weissinger_alpha_scaled(beta, span, lipschitz, n, kappa).bound();
        s.add(t);
        let next = weissinger_alpha_scaled(beta, span, lipschitz, n + 1, kappa).bound();
        if n > k + 5 && next < t && next < 1e-18 * s.value().max(1e-300) {
            return s.value();
        }
        if n > k + 100_000 {
            return f64::INFINITY;
        }
        n += 1;
    }
}

/// Smallest `k` with `Σ_{n≥k} αₙ · d0 < tol`.
pub fn weissinger_iterations(beta: f64, span: f64, lipschitz: f64, kappa: f64, d0: f64, tol: f64) -> usize {
    if d0 == 0.0 {
        return 1;
    }
    let mut k = 1;
    while weissinger_tail(beta, span, lipschitz, kappa, k) * d0 >= tol {
        k += 1;
        if k > 100_000 {
            break;
        }
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCriterion {
    Residual,
    APriori,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointReport {
    pub iterations: usize,
    /// `‖u_k − u_{k−1}‖` for `k = 1..=iterations`.
    pub residuals: Vec<f64>,
    /// `Σ_{n≥k} αₙ ‖u₁ − u₀‖` at the last iteration.
    pub apriori_bound: f64,
    /// Iteration count after which the a-priori bound drops below `tol`.
    pub apriori_iterations: usize,
    pub converged: bool,
    pub criterion: StopCriterion,
    /// Monte Carlo standard error of `Ψu` at the returned `u`.
    pub se: GridFunction,
}

/// The frozen-ensemble map `Ψ`.
#[derive(Debug, Clone)]
pub struct FrozenEnsemble {
    grid: TimeGrid,
    space: SpaceGrid,
    vectors: Vec<f64>,
    mu: Vec<f64>,
    /// `T[i][j][k]`, flat.
    tensor: Vec<f64>,
    /// `E e^{μ_k τ_i}`.
    decay: Vec<f64>,
    phi_coeffs: Vec<f64>,
    kernel: KernelSpec,
    cfg: McConfig,
}

impl FrozenEnsemble {
    pub fn build(p: &NonlinearProblem, grid: &TimeGrid, cfg: &McConfig) -> Result<Self> {
        cfg.validate()?;
        if (grid.a() - p.kernel.a()).abs() > 1e-12 || grid.b() > p.kernel.b() + 1e-12 {
            bail!(Domain, "time grid must start at a and stay inside [a, b]");
        }
        let s = p.generator.dim();
        let eig = SymmetricEigen::new(p.generator.matrix().clone());
        let vectors: Vec<f64> = (0..s * s).map(|idx| eig.eigenvectors[(idx / s, idx % s)]).collect();
        let mu: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        let phi = p.phi_a.on_grid(p.generator.grid())?;
        let phi_coeffs = project(&vectors, s, &phi);
        let mut cfg = *cfg;
        cfg.convention = Convention::Caputo;
        let sim = Simulator::new(&p.kernel, p.kernel.a(), &cfg)?;
        let m = grid.len();
        let n = cfg.n as f64;
        let rows = par::try_map_indexed(m, |i| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut row = vec![0.0; m * s];
            let mut dec = vec![0.0; s];
            if i == 0 {
                dec.iter_mut().for_each(|d| *d = 1.0);
                return Ok((row, dec));
            }
            let parts = sim.fold_chunks(
                grid.nodes()[i],
                i as u64,
                || (vec![0.0; m * s], vec![0.0; s]),
                |acc, path, _| {
                    for (s0, seg) in path.timed_segments() {
                        if seg.dwell <= 0.0 {
                            continue;
                        }
                        let (j, w) = grid.locate(seg.midpoint());
                        for k in 0..s {
                            let om = segment_weight(mu[k], s0, seg.dwell);
                            acc.0[j * s + k] += (1.0 - w) * om;
                            acc.0[(j + 1) * s + k] += w * om;
                        }
                    }
                    for k in 0..s {
                        acc.1[k] += (mu[k] * path.exit_time).exp();
                    }
                    Ok(())
                },
            )?;
            for (r, d) in parts {
                row.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
                dec.iter_mut().zip(&d).for_each(|(x, y)| *x += y);
            }
            row.iter_mut().for_each(|x| *x /= n);
            dec.iter_mut().for_each(|x| *x /= n);
            Ok((row, dec))
        })?;
        let mut tensor = Vec::with_capacity(m * m * s);
        let mut decay = Vec::with_capacity(m * s);
        for (r, d) in rows {
            tensor.extend(r);
            decay.extend(d);
        }
        Ok(FrozenEnsemble {
            grid: grid.clone(),
            space: p.generator.grid().clone(),
            vectors,
            mu,
            tensor,
            decay,
            phi_coeffs,
            kernel: p.kernel.clone(),
            cfg,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn space(&self) -> &SpaceGrid {
        &self.space
    }

    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let s = self.dim();
        (0..s)
            .map(|x| (0..s).map(|k| self.vectors[x * s + k] * coeffs[k]).sum())
            .collect()
    }

    /// The `φ_a` term, `u₀`.
    pub fn phi_term(&self) -> GridFunction {
        let s = self.dim();
        let mut out = GridFunction::zeros(&self.grid, &self.space);
        for i in 0..self.grid.len() {
            let c: Vec<f64> = (0..s).map(|k| self.decay[i * s + k] * self.phi_coeffs[k]).collect();
            for (x, v) in self.synthesize(&c).into_iter().enumerate() {
                out.set(i, x, v);
            }
        }
        out
    }

    fn reaction_coeffs(&self, f: &ReactionFn, u: &GridFunction) -> Vec<Vec<f64>> {
        let s = self.dim();
        (0..self.grid.len())
            .map(|j| {
                let t = self.grid.nodes()[j];
                let fj: Vec<f64> = (0..s).map(|x| f(t, self.space.coord(x), u.at(j, x))).collect();
                project(&self.vectors, s, &fj)
            })
            .collect()
    }

    /// `Ψu` on the grid.
    pub fn apply(&self, f: &ReactionFn, u: &GridFunction) -> Result<GridFunction> {
        if u.time != self.grid || u.space != self.space {
            bail!(Domain, "u does not live on the ensemble grid");
        }
        let s = self.dim();
        let m = self.grid.len();
        let fc = self.reaction_coeffs(f, u);
        let rows = par::map_indexed(m, |i| {
            let mut c = vec![0.0; s];
            for k in 0..s {
                let mut acc = KahanSum::new();
                acc.add(self.decay[i * s + k] * self.phi_coeffs[k]);
                for (j, fj) in fc.iter().enumerate() {
                    let tw = self.tensor[(i * m + j) * s + k];
                    if tw != 0.0 {
                        acc.add(tw * fj[k]);
                    }
                }
                c[k] = acc.value();
            }
            self.synthesize(&c)
        });
        let mut out = GridFunction::zeros(&self.grid, &self.space);
        for (i, r) in rows.into_iter().enumerate() {
            for (x, v) in r.into_iter().enumerate() {
                out.set(i, x, v);
            }
        }
        Ok(out)
    }

    /// Standard error of the per-path samples of `Ψu`, re-simulating the
    /// frozen paths.
    pub fn standard_error(&self, f: &ReactionFn, u: &GridFunction) -> Result<GridFunction> {
        let s = self.dim();
        let m = self.grid.len();
        let fc = self.reaction_coeffs(f, u);
        let sim = Simulator::new(&self.kernel, self.kernel.a(), &self.cfg)?;
        let rows = par::try_map_indexed(m, |i| -> Result<Vec<f64>> {
            if i == 0 {
                return Ok(vec![0.0; s]);
            }
            let parts = sim.fold_chunks(
                self.grid.nodes()[i],
                i as u64,
                || vec![Moments::default(); s],
                |acc, path, _| {
                    let mut c: Vec<f64> = (0..s)
                        .map(|k| (self.mu[k] * path.exit_time).exp() * self.phi_coeffs[k])
                        .collect();
                    for (s0, seg) in path.timed_segments() {
                        if seg.dwell <= 0.0 {
                            continue;
                        }
                        let (j, w) = self.grid.locate(seg.midpoint());
                        for k in 0..s {
                            let om = segment_weight(self.mu[k], s0, seg.dwell);
                            c[k] += om * ((1.0 - w) * fc[j][k] + w * fc[j + 1][k]);
                        }
                    }
                    for (mom, v) in acc.iter_mut().zip(self.synthesize(&c)) {
                        mom.push(v);
                    }
                    Ok(())
                },
            )?;
            let mut all = vec![Moments::default(); s];
            for part in &parts {
                all.iter_mut().zip(part).for_each(|(a, b)| a.merge(b));
            }
            Ok(all.iter().map(|mm| mm.se()).collect())
        })?;
        let mut out = GridFunction::zeros(&self.grid, &self.space);
        for (i, r) in rows.into_iter().enumerate() {
            for (x, v) in r.into_iter().enumerate() {
                out.set(i, x, v);
            }
        }
        Ok(out)
    }
}

fn segment_weight(mu: f64, s0: f64, d: f64) -> f64 {
    if mu == 0.0 {
        d
    } else if (mu * d).abs() < 1e-8 {
        (mu * s0).exp() * d * (1.0 + 0.5 * mu * d)
    } else {
        (mu * s0).exp() * (mu * d).exp_m1() / mu
    }
}

/// `Vᵀ v` for row-major `V`.
fn project(vectors: &[f64], s: usize, v: &[f64]) -> Vec<f64> {
    (0..s).map(|k| (0..s).map(|x| vectors[x * s + k] * v[x]).sum()).collect()
}

/// `κ` of the problem's kernel from its power-law witness.
fn kappa_of(kernel: &KernelSpec) -> Result<(f64, f64)> {
    let w = kernel.default_witness().ok_or_else(|| {
        Error::Precondition("kernel has no power-law lower bound; the a-priori bound is not certified".into())
    })?;
    Ok((w.beta, classical_constant(w.beta) / w.constant))
}

/// Picard iteration `u_{k+1} = Ψu_k` from `u₀ = ` the `φ_a` term.
pub fn solve_nonlinear(
    p: &NonlinearProblem,
    grid: &TimeGrid,
    tol: f64,
    max_iter: usize,
    cfg: &McConfig,
) -> Result<(GridFunction, FixedPointReport)> {
    let ens = FrozenEnsemble::build(p, grid, cfg)?;
    solve_on_ensemble(p, &ens, tol, max_iter)
}

/// [`solve_nonlinear`] on a prebuilt ensemble.
pub fn solve_on_ensemble(
    p: &NonlinearProblem,
    ens: &FrozenEnsemble,
    tol: f64,
    max_iter: usize,
) -> Result<(GridFunction, FixedPointReport)> {
    if !(tol > 0.0) || max_iter == 0 {
        bail!(Domain, "tolerance must be positive and max_iter at least 1");
    }
    let (beta, kappa) = kappa_of(&p.kernel)?;
    let span = ens.grid().span();
    let mut u = ens.phi_term();
    let mut residuals = Vec::new();
    let mut d0 = 0.0;
    let mut apriori_iterations = 1;
    let mut apriori_bound = f64::INFINITY;
    let mut criterion = StopCriterion::MaxIterations;
    for k in 1..=max_iter {
        let next = ens.apply(&p.f, &u)?;
        let r = next.sup_distance(&u);
        u = next;
        residuals.push(r);
        if k == 1 {
            d0 = r;
            apriori_iterations = weissinger_iterations(beta, span, p.lipschitz, kappa, d0, tol);
        }
        apriori_bound = if d0 == 0.0 { 0.0 } else { weissinger_tail(beta, span, p.lipschitz, kappa, k) * d0 };
        if r < tol {
            criterion = StopCriterion::Residual;
            break;
        }
        if apriori_bound < tol {
            criterion = StopCriterion::APriori;
            break;
        }
    }
    let converged = criterion != StopCriterion::MaxIterations;
    let se = ens.standard_error(&p.f, &u)?;
    let report = FixedPointReport {
        iterations: residuals.len(),
        residuals,
        apriori_bound,
        apriori_iterations,
        converged,
        criterion,
        se,
    };
    Ok((u, report))
}

/// Largest `‖Ψu − Ψv‖/‖u − v‖` over `pairs` random pairs with values in
/// `[−range, range]`, and the bound `α₁`.
pub fn contraction_check(p: &NonlinearProblem, ens: &FrozenEnsemble, pairs: usize, range: f64, seed: u64) -> Result<(f64, f64)> {
    let (beta, kappa) = kappa_of(&p.kernel)?;
    let alpha1 = weissinger_alpha_scaled(beta, ens.grid().span(), p.lipschitz, 1, kappa).sharp;
    let mut rng = crate::stream::Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let mut u = GridFunction::zeros(ens.grid(), ens.space());
        let mut v = u.clone();
        for x in u.values.iter_mut().chain(v.values.iter_mut()) {
            *x = range * (2.0 * rng.random::<f64>() - 1.0);
        }
        let d = u.sup_distance(&v);
        if d == 0.0 {
            continue;
        }
        let gap = ens.apply(&p.f, &u)?.sup_distance(&ens.apply(&p.f, &v)?);
        worst = worst.max(gap / d);
    }
    Ok((worst, alpha1))
}
