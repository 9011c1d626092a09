//! Monte Carlo solvers for the linear RL and Caputo problems.
//!
//! With a matrix generator the spatial expectation is taken exactly through
//! the semigroup, so only the time process is sampled. With a sampler the
//! spatial path is drawn jointly, one spatial path per time path, from a
//! stream disjoint from the time stream.

use crate::error::{bail, Result};
use crate::feller::{BoundedGenerator, FellerSampler, Semigroup, SpaceState};
use crate::fracint::Backend;
use crate::grid::{GridFunction, SpaceGrid, TimeGrid};
use crate::kernels::KernelSpec;
use crate::mittag_series::{SeriesEngine, SeriesMode};
use crate::processes::{Convention, McConfig, PathSample, Simulator};
use crate::prelude::*;
use crate::stats::{KahanSum, Moments};
use crate::stream::{substream, tag};

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Nodes used to tabulate a source callback for the matrix path.
const SOURCE_TABLE: usize = 256;

/// Space-time source `g(t, x)`. Callbacks see the first spatial coordinate.
#[derive(Clone)]
pub enum Source {
    Zero,
    Grid(GridFunction),
    Func(SourceFn),
}

impl core::fmt::Debug for Source {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Source::Zero => f.write_str("Zero"),
            Source::Grid(g) => f.debug_tuple("Grid").field(&g.values.len()).finish(),
            Source::Func(_) => f.write_str("Func"),
        }
    }
}

/// Initial datum `φ_a(x)`.
#[derive(Clone)]
pub enum Initial {
    Zero,
    /// Values on the generator grid.
    Grid(Vec<f64>),
    Func(SpaceFn),
}

impl core::fmt::Debug for Initial {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Initial::Zero => f.write_str("Zero"),
            Initial::Grid(v) => f.debug_tuple("Grid").field(v).finish(),
            Initial::Func(_) => f.write_str("Func"),
        }
    }
}

fn interp_space(space: &SpaceGrid, values: &[f64], x: f64) -> f64 {
    match space {
        SpaceGrid::Scalar => values[0],
        SpaceGrid::Sites(n) => values[(x.round().max(0.0) as usize).min(n - 1)],
        SpaceGrid::Line(xs) => {
            let n = xs.len();
            if x <= xs[0] {
                return values[0];
            }
            if x >= xs[n - 1] {
                return values[n - 1];
            }
            let j = xs.partition_point(|&p| p <= x) - 1;
            let w = (x - xs[j]) / (xs[j + 1] - xs[j]);
            (1.0 - w) * values[j] + w * values[j + 1]
        }
    }
}

fn first_coord(x: &SpaceState) -> f64 {
    x.coord()
}

impl Source {
    pub fn is_zero(&self) -> bool {
        match self {
            Source::Zero => true,
            Source::Grid(g) => g.values.iter().all(|&v| v == 0.0),
            Source::Func(_) => false,
        }
    }

    /// `g(t, x)`, linear in `t` between grid nodes.
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Source::Zero => 0.0,
            Source::Func(f) => f(t, x),
            Source::Grid(g) => {
                let (j, w) = g.time.locate(t);
                let lo = interp_space(&g.space, g.slice(j), x);
                let hi = interp_space(&g.space, g.slice(j + 1), x);
                (1.0 - w) * lo + w * hi
            }
        }
    }

    /// The source on `time × space`.
    pub fn tabulate(&self, time: &TimeGrid, space: &SpaceGrid) -> GridFunction {
        match self {
            Source::Grid(g) if &g.time == time && &g.space == space => g.clone(),
            _ => GridFunction::from_fn(time, space, |t, x| self.eval(t, x)),
        }
    }
}

impl Initial {
    pub fn is_zero(&self) -> bool {
        match self {
            Initial::Zero => true,
            Initial::Grid(v) => v.iter().all(|&x| x == 0.0),
            Initial::Func(_) => false,
        }
    }

    pub fn eval_at(&self, space: &SpaceGrid, x: f64) -> f64 {
        match self {
            Initial::Zero => 0.0,
            Initial::Grid(v) => interp_space(space, v, x),
            Initial::Func(f) => f(x),
        }
    }

    /// Values on the nodes of `space`.
    pub fn on_grid(&self, space: &SpaceGrid) -> Result<Vec<f64>> {
        match self {
            Initial::Zero => Ok(vec![0.0; space.len()]),
            Initial::Grid(v) => {
                if v.len() != space.len() {
                    bail!(Domain, "φ_a has {} values, grid has {}", v.len(), space.len());
                }
                Ok(v.clone())
            }
            Initial::Func(f) => Ok((0..space.len()).map(|k| f(space.coord(k))).collect()),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Spatial {
    Generator(BoundedGenerator),
    Sampler(FellerSampler),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rl,
    Caputo,
}

#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub kernel: KernelSpec,
    pub spatial: Spatial,
    pub g: Source,
    pub phi_a: Initial,
    pub mode: Mode,
}

/// Grid check of `Aφ_a = −g(a, ·)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compatibility {
    pub residual: f64,
    pub holds: bool,
}

impl LinearProblem {
    pub fn new(kernel: KernelSpec, spatial: Spatial, g: Source, phi_a: Initial, mode: Mode) -> Result<Self> {
        if mode == Mode::Rl && !phi_a.is_zero() {
            bail!(Config, "the RL problem has no initial datum; φ_a must be zero");
        }
        if let (Spatial::Generator(a), Initial::Grid(v)) = (&spatial, &phi_a) {
            if v.len() != a.dim() {
                bail!(Domain, "φ_a has {} values, generator has {}", v.len(), a.dim());
            }
        }
        if let (Spatial::Generator(a), Source::Grid(g)) = (&spatial, &g) {
            if &g.space != a.grid() {
                bail!(Domain, "g lives on a different spatial grid than the generator");
            }
        }
        Ok(LinearProblem { kernel, spatial, g, phi_a, mode })
    }

    pub fn rl(kernel: KernelSpec, spatial: Spatial, g: Source) -> Result<Self> {
        Self::new(kernel, spatial, g, Initial::Zero, Mode::Rl)
    }

    pub fn caputo(kernel: KernelSpec, spatial: Spatial, phi_a: Initial, g: Source) -> Result<Self> {
        Self::new(kernel, spatial, g, phi_a, Mode::Caputo)
    }

    pub fn a(&self) -> f64 {
        self.kernel.a()
    }

    /// Reports whether `Aφ_a + g(a, ·)` vanishes on the grid. Only available
    /// for matrix generators; the solvers do not require it.
    pub fn compatibility(&self) -> Option<Compatibility> {
        let Spatial::Generator(a) = &self.spatial else {
            return None;
        };
        let phi = self.phi_a.on_grid(a.grid()).ok()?;
        let aphi = a.apply(&phi);
        let mut residual: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for (k, v) in aphi.iter().enumerate() {
            let g = self.g.eval(self.a(), a.grid().coord(k));
            residual = residual.max((v + g).abs());
            scale = scale.max(v.abs()).max(g.abs());
        }
        Some(Compatibility { residual, holds: residual <= 1e-8 * scale })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub t: f64,
    pub x: f64,
    pub mean: f64,
    pub se: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSolution {
    pub points: Vec<PointEstimate>,
}

impl McSolution {
    pub fn max_se(&self) -> f64 {
        self.points.iter().fold(0.0f64, |m, p| m.max(p.se))
    }
}

/// Per-point evaluator turning a time path into one sample.
trait PathValue: Sync + Send {
    fn value(&self, path: &PathSample, global: u64) -> Result<f64>;
}

/// Spectral evaluator: `(e^{sA} v)(x) = Σ_k V[x,k] e^{μ_k s} (Vᵀv)_k`.
///
/// The per-path modal weights do not depend on `x`, so every row shares them.
struct SpectralValue<'a> {
    rows: Vec<Vec<f64>>,
    mu: &'a [f64],
    source: Option<(&'a TimeGrid, &'a [Vec<f64>])>,
    phi: Option<Vec<f64>>,
}

impl SpectralValue<'_> {
    fn values(&self, path: &PathSample, out: &mut [f64]) {
        let s_dim = self.mu.len();
        let mut weights = vec![0.0; s_dim];
        if let Some((grid, coeffs)) = self.source {
            for (s0, seg) in path.timed_segments() {
                if seg.dwell <= 0.0 {
                    continue;
                }
                let (j, w) = grid.locate(seg.midpoint());
                let (lo, hi) = (&coeffs[j], &coeffs[j + 1]);
                for k in 0..s_dim {
                    let mu = self.mu[k];
                    let d = seg.dwell;
                    let int = if (mu * d).abs() < 1e-8 {
                        (mu * s0).exp() * d * (1.0 + 0.5 * mu * d)
                    } else {
                        (mu * s0).exp() * (mu * d).exp_m1() / mu
                    };
                    weights[k] += int * ((1.0 - w) * lo[k] + w * hi[k]);
                }
            }
        }
        let decay: Option<Vec<f64>> = self
            .phi
            .as_ref()
            .map(|c| (0..s_dim).map(|k| (self.mu[k] * path.exit_time).exp() * c[k]).collect());
        for (row, slot) in self.rows.iter().zip(out.iter_mut()) {
            let mut acc = KahanSum::new();
            if self.source.is_some() {
                for k in 0..s_dim {
                    acc.add(row[k] * weights[k]);
                }
            }
            if let Some(d) = &decay {
                for k in 0..s_dim {
                    acc.add(row[k] * d[k]);
                }
            }
            *slot = acc.value();
        }
    }
}

/// Dense evaluator for non-symmetric generators.
struct DenseValue<'a> {
    semigroup: &'a Semigroup,
    index: usize,
    source: Option<(&'a TimeGrid, &'a GridFunction)>,
    phi: Option<Vec<f64>>,
}

impl PathValue for DenseValue<'_> {
    fn value(&self, path: &PathSample, _: u64) -> Result<f64> {
        let mut acc = KahanSum::new();
        if let Some((grid, g)) = self.source {
            for (s0, seg) in path.timed_segments() {
                if seg.dwell <= 0.0 {
                    continue;
                }
                let (j, w) = grid.locate(seg.midpoint());
                let v: Vec<f64> = g.slice(j).iter().zip(g.slice(j + 1)).map(|(a, b)| (1.0 - w) * a + w * b).collect();
                let out = self.semigroup.integral_projected(&v, s0, s0 + seg.dwell)?;
                acc.add(out[self.index]);
            }
        }
        if let Some(phi) = &self.phi {
            acc.add(self.semigroup.apply_projected(phi, path.exit_time)?[self.index]);
        }
        Ok(acc.value())
    }
}

/// Joint sampler evaluator.
struct JointValue<'a> {
    sampler: &'a FellerSampler,
    start: SpaceState,
    source: &'a Source,
    phi: &'a Initial,
    phi_grid: SpaceGrid,
    seed: u64,
    stream_index: u64,
}

impl PathValue for JointValue<'_> {
    fn value(&self, path: &PathSample, global: u64) -> Result<f64> {
        let mut rng = substream(self.seed, tag::SPACE, self.stream_index, global);
        let lam = self.sampler.weight_rate();
        let mut x = self.start.clone();
        let mut acc = KahanSum::new();
        let with_source = !self.source.is_zero();
        for (s0, seg) in path.timed_segments() {
            if seg.dwell <= 0.0 {
                continue;
            }
            if with_source {
                self.sampler.advance(&mut x, 0.5 * seg.dwell, &mut rng);
                let weight = if lam == 0.0 {
                    seg.dwell
                } else if (lam * seg.dwell).abs() < 1e-8 {
                    (lam * s0).exp() * seg.dwell * (1.0 + 0.5 * lam * seg.dwell)
                } else {
                    (lam * s0).exp() * (lam * seg.dwell).exp_m1() / lam
                };
                acc.add(weight * self.source.eval(seg.midpoint(), first_coord(&x)));
                self.sampler.advance(&mut x, 0.5 * seg.dwell, &mut rng);
            } else {
                self.sampler.advance(&mut x, seg.dwell, &mut rng);
            }
        }
        if !self.phi.is_zero() {
            acc.add((lam * path.exit_time).exp() * self.phi.eval_at(&self.phi_grid, first_coord(&x)));
        }
        Ok(acc.value())
    }
}

fn start_state(sampler: &FellerSampler, x: f64) -> Result<SpaceState> {
    let s = match sampler {
        FellerSampler::Scalar { .. } => SpaceState::Scalar,
        FellerSampler::Ctmc { .. } => {
            if !(x >= 0.0) || x.fract() != 0.0 {
                bail!(Domain, "chain state {x} is not a site index");
            }
            SpaceState::Site(x as usize)
        }
        FellerSampler::Brownian { dim, .. } | FellerSampler::CompoundPoisson { dim, .. } => {
            let mut p = vec![0.0; *dim];
            p[0] = x;
            SpaceState::Point(p)
        }
    };
    sampler.check_state(&s)?;
    Ok(s)
}

/// Index of the grid node nearest to `x`.
pub fn nearest_node(space: &SpaceGrid, x: f64) -> usize {
    (0..space.len())
        .min_by(|&i, &j| {
            let di = (space.coord(i) - x).abs();
            let dj = (space.coord(j) - x).abs();
            di.partial_cmp(&dj).unwrap_or(core::cmp::Ordering::Equal)
        })
        .unwrap_or(0)
}

fn estimate<V: PathValue>(sim: &Simulator<'_>, t: f64, x: f64, v: &V) -> Result<PointEstimate> {
    // Stream 0 for every point: evaluation points share common random numbers.
    let parts = sim.fold_chunks(t, 0, Moments::default, |m, p, idx| {
        m.push(v.value(p, idx)?);
        Ok(())
    })?;
    let mut all = Moments::default();
    parts.iter().for_each(|m| all.merge(m));
    let s = all.summary();
    Ok(PointEstimate { t, x, mean: s.mean, se: s.se, n: s.n })
}

/// Like [`estimate`] for several values computed from the same path.
fn estimate_many<F>(sim: &Simulator<'_>, t: f64, width: usize, f: F) -> Result<Vec<crate::stats::Summary>>
where
    F: Fn(&PathSample, &mut [f64]) -> Result<()> + Sync + Send,
{
    let parts = sim.fold_chunks(
        t,
        0,
        || (vec![Moments::default(); width], vec![0.0; width]),
        |(m, buf), p, _| {
            f(p, buf)?;
            for (mk, &v) in m.iter_mut().zip(buf.iter()) {
                mk.push(v);
            }
            Ok(())
        },
    )?;
    let mut all = vec![Moments::default(); width];
    for (m, _) in &parts {
        for (a, b) in all.iter_mut().zip(m) {
            a.merge(b);
        }
    }
    Ok(all.iter().map(|m| m.summary()).collect())
}

fn solve_mc(p: &LinearProblem, points: &[(f64, f64)], cfg: &McConfig) -> Result<McSolution> {
    cfg.validate()?;
    let a = p.a();
    let convention = match p.mode {
        Mode::Rl => Convention::Rl,
        Mode::Caputo => Convention::Caputo,
    };
    let mut cfg = *cfg;
    cfg.convention = convention;
    let sim = Simulator::new(&p.kernel, a, &cfg)?;
    for &(t, _) in points {
        if !(t >= a && t <= p.kernel.b()) {
            bail!(Domain, "evaluation time {t} outside [{a}, {}]", p.kernel.b());
        }
    }
    let mut out = Vec::with_capacity(points.len());
    match &p.spatial {
        Spatial::Generator(gen) => {
            let space = gen.grid().clone();
            let t_max = points.iter().fold(a, |m, &(t, _)| m.max(t));
            let table_grid = match &p.g {
                Source::Grid(g) => g.time.clone(),
                _ => TimeGrid::uniform(a, t_max.max(a + 1e-12), SOURCE_TABLE)?,
            };
            let g_tab = (!p.g.is_zero()).then(|| p.g.tabulate(&table_grid, &space));
            let phi = (!p.phi_a.is_zero()).then(|| p.phi_a.on_grid(&space)).transpose()?;
            let semigroup = Semigroup::new(gen);
            match &semigroup {
                Semigroup::Eigen { vectors, values } => {
                    let coeffs: Option<Vec<Vec<f64>>> = g_tab
                        .as_ref()
                        .map(|g| (0..table_grid.len()).map(|i| semigroup.project(g.slice(i))).collect());
                    let phi_c = phi.as_ref().map(|v| semigroup.project(v));
                    let nodes: Vec<usize> = points.iter().map(|&(_, x)| nearest_node(&space, x)).collect();
                    let mut done = vec![None; points.len()];
                    for i in 0..points.len() {
                        if done[i].is_some() {
                            continue;
                        }
                        let t = points[i].0;
                        let group: Vec<usize> = (i..points.len()).filter(|&j| points[j].0 == t && done[j].is_none()).collect();
                        let v = SpectralValue {
                            rows: group
                                .iter()
                                .map(|&j| (0..values.len()).map(|m| vectors[(nodes[j], m)]).collect())
                                .collect(),
                            mu: values,
                            source: coeffs.as_ref().map(|c| (&table_grid, c.as_slice())),
                            phi: phi_c.clone(),
                        };
                        let stats = estimate_many(&sim, t, group.len(), |p, out| {
                            v.values(p, out);
                            Ok(())
                        })?;
                        for (&j, s) in group.iter().zip(stats) {
                            done[j] = Some(PointEstimate { t, x: space.coord(nodes[j]), mean: s.mean, se: s.se, n: s.n });
                        }
                    }
                    out.extend(done.into_iter().flatten());
                }
                Semigroup::Dense { .. } => {
                    for &(t, x) in points {
                        let k = nearest_node(&space, x);
                        let v = DenseValue {
                            semigroup: &semigroup,
                            index: k,
                            source: g_tab.as_ref().map(|g| (&table_grid, g)),
                            phi: phi.clone(),
                        };
                        out.push(estimate(&sim, t, space.coord(k), &v)?);
                    }
                }
            }
        }
        Spatial::Sampler(sampler) => {
            let phi_grid = match (sampler, &p.g) {
                (FellerSampler::Ctmc { generator, .. }, _) => generator.grid().clone(),
                (_, Source::Grid(g)) => g.space.clone(),
                _ => SpaceGrid::Scalar,
            };
            for &(t, x) in points {
                let v = JointValue {
                    sampler,
                    start: start_state(sampler, x)?,
                    source: &p.g,
                    phi: &p.phi_a,
                    phi_grid: phi_grid.clone(),
                    seed: cfg.seed,
                    stream_index: 0,
                };
                out.push(estimate(&sim, t, x, &v)?);
            }
        }
    }
    Ok(McSolution { points: out })
}

/// `u(t,x) = E ∫₀^τ (e^{sA} g(X(s), ·))(x) ds` at each `(t, x)`.
pub fn solve_rl_mc(p: &LinearProblem, points: &[(f64, f64)], cfg: &McConfig) -> Result<McSolution> {
    if p.mode != Mode::Rl {
        bail!(Config, "solve_rl_mc needs an RL problem");
    }
    solve_mc(p, points, cfg)
}

/// `u(t,x) = E φ_a(Y^x(τ)) + E ∫₀^τ g(X(s), Y^x(s)) ds` at each `(t, x)`.
pub fn solve_caputo_mc(p: &LinearProblem, points: &[(f64, f64)], cfg: &McConfig) -> Result<McSolution> {
    if p.mode != Mode::Caputo {
        bail!(Config, "solve_caputo_mc needs a Caputo problem");
    }
    solve_mc(p, points, cfg)
}

/// One row of the Yosida table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YosidaRow {
    pub lambda: f64,
    pub sup_gap: f64,
    /// Largest Monte Carlo standard error over the points.
    pub se: f64,
}

fn engine_for(kernel: &KernelSpec, grid: &TimeGrid, cfg: &McConfig) -> Result<SeriesEngine> {
    match kernel.classical_beta() {
        Some(beta) => SeriesEngine::classical(beta, grid),
        None => {
            let backend = Backend::monte_carlo(kernel, grid, cfg).to_matrix()?;
            SeriesEngine::new(&backend, kernel)
        }
    }
}

/// Series solutions with `A_λ` against the Monte Carlo solution with `A`.
///
/// Evaluation times are snapped to a uniform grid of `m` cells on
/// `[a, max t]`.
pub fn yosida_convergence_experiment(
    a: &BoundedGenerator,
    lambdas: &[f64],
    p: &LinearProblem,
    points: &[(f64, f64)],
    m: usize,
    cfg: &McConfig,
    tol: f64,
) -> Result<Vec<YosidaRow>> {
    if lambdas.windows(2).any(|w| !(w[1] > w[0])) || lambdas.iter().any(|&l| !(l > 0.0)) {
        bail!(Domain, "λ values must be positive and increasing");
    }
    if points.is_empty() {
        bail!(Domain, "no evaluation points");
    }
    let t0 = p.a();
    let t_max = points.iter().fold(t0, |acc, &(t, _)| acc.max(t));
    if !(t_max > t0) {
        bail!(Domain, "evaluation times must exceed a");
    }
    let grid = TimeGrid::uniform(t0, t_max, m)?;
    let snapped: Vec<(usize, usize)> = points
        .iter()
        .map(|&(t, x)| {
            let (j, w) = grid.locate(t);
            (if w < 0.5 { j } else { j + 1 }, nearest_node(a.grid(), x))
        })
        .collect();
    let eval: Vec<(f64, f64)> = snapped.iter().map(|&(i, k)| (grid.nodes()[i], a.grid().coord(k))).collect();
    let reference = {
        let mut q = p.clone();
        q.spatial = Spatial::Generator(a.clone());
        solve_mc(&q, &eval, cfg)?
    };
    let se = reference.max_se();
    let engine = engine_for(&p.kernel, &grid, cfg)?;
    let g = p.g.tabulate(&grid, a.grid());
    let phi = p.phi_a.on_grid(a.grid())?;
    let mode = match p.mode {
        Mode::Rl => SeriesMode::Rl,
        Mode::Caputo => SeriesMode::Caputo,
    };
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let al = crate::feller::yosida_transform(a, lambda)?;
        let series = engine.series_solution(&al, &g, &phi, mode, tol)?;
        let mut gap: f64 = 0.0;
        for (pt, &(i, k)) in reference.points.iter().zip(&snapped) {
            gap = gap.max((series.value.at(i, k) - pt.mean).abs());
        }
        rows.push(YosidaRow { lambda, sup_gap: gap, se });
    }
    Ok(rows)
}

/// Convenience: evaluation at every grid node and space node.
pub fn full_grid_points(time: &TimeGrid, space: &SpaceGrid) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(time.len() * space.len());
    for &t in time.nodes() {
        for k in 0..space.len() {
            out.push((t, space.coord(k)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feller::Boundary;
    use crate::oracles::{caputo_linear_ode, closed_form_identities, ml_half_closed};

    fn kernel() -> KernelSpec {
        KernelSpec::classical(0.5, 0.0, 1.0).unwrap()
    }

    fn cfg(n: u64) -> McConfig {
        McConfig::new(1e-3, n, 11)
    }

    fn close(e: &PointEstimate, want: f64) -> bool {
        (e.mean - want).abs() <= (3.0 * e.se).max(0.02 * want.abs())
    }

    #[test]
    fn zero_source_gives_zero() {
        let p = LinearProblem::rl(kernel(), Spatial::Generator(BoundedGenerator::scalar(-1.0).unwrap()), Source::Zero).unwrap();
        let s = solve_rl_mc(&p, &[(1.0, 0.0)], &cfg(2000)).unwrap();
        assert_eq!((s.points[0].mean, s.points[0].se), (0.0, 0.0));
    }

    #[test]
    fn rl_with_zero_generator_is_mean_exit() {
        let sp = Spatial::Generator(BoundedGenerator::scalar(0.0).unwrap());
        let p = LinearProblem::rl(kernel(), sp, Source::Func(Arc::new(|_, _| 1.0))).unwrap();
        let s = solve_rl_mc(&p, &[(1.0, 0.0)], &cfg(20_000)).unwrap();
        let want = closed_form_identities(0.5, 0.0, 1.0, 1).unwrap().mean_exit;
        assert!(close(&s.points[0], want), "{:?}", s.points[0]);
    }

    #[test]
    fn caputo_scalar_matches_mittag_leffler() {
        for sp in [
            Spatial::Generator(BoundedGenerator::scalar(-1.0).unwrap()),
            Spatial::Sampler(FellerSampler::Scalar { lambda: -1.0 }),
        ] {
            let p = LinearProblem::caputo(kernel(), sp, Initial::Func(Arc::new(|_| 1.0)), Source::Zero).unwrap();
            let s = solve_caputo_mc(&p, &[(1.0, 0.0)], &cfg(20_000)).unwrap();
            assert!(close(&s.points[0], ml_half_closed(-1.0)), "{:?}", s.points[0]);
        }
    }

    #[test]
    fn caputo_with_source_matches_quadrature() {
        let want = caputo_linear_ode(0.5, -1.0, 1.0, |_| 1.0, 1.0, 0.0, 1e-12).unwrap();
        for sp in [
            Spatial::Generator(BoundedGenerator::scalar(-1.0).unwrap()),
            Spatial::Sampler(FellerSampler::Scalar { lambda: -1.0 }),
        ] {
            let p = LinearProblem::caputo(kernel(), sp, Initial::Func(Arc::new(|_| 1.0)), Source::Func(Arc::new(|_, _| 1.0))).unwrap();
            let s = solve_caputo_mc(&p, &[(1.0, 0.0)], &cfg(20_000)).unwrap();
            assert!(close(&s.points[0], want), "{:?} vs {want}", s.points[0]);
        }
    }

    #[test]
    fn frozen_space_returns_phi() {
        let sp = Spatial::Generator(BoundedGenerator::zero(SpaceGrid::Sites(3)).unwrap());
        let p = LinearProblem::caputo(kernel(), sp, Initial::Grid(vec![0.2, -1.0, 3.0]), Source::Zero).unwrap();
        let s = solve_caputo_mc(&p, &[(1.0, 0.0), (0.5, 1.0), (1.0, 2.0)], &cfg(1000)).unwrap();
        let want = [0.2, -1.0, 3.0];
        for (e, w) in s.points.iter().zip(want) {
            assert!((e.mean - w).abs() < 1e-12);
        }
    }

    #[test]
    fn brownian_cosine_reduces_to_mittag_leffler() {
        let p = LinearProblem::caputo(
            kernel(),
            Spatial::Sampler(FellerSampler::brownian(1.0, 1).unwrap()),
            Initial::Func(Arc::new(libm::cos)),
            Source::Zero,
        )
        .unwrap();
        let s = solve_caputo_mc(&p, &[(1.0, 0.0)], &cfg(20_000)).unwrap();
        assert!(close(&s.points[0], ml_half_closed(-0.5)), "{:?}", s.points[0]);
    }

    #[test]
    fn rl_and_caputo_agree_without_initial_datum() {
        let a = BoundedGenerator::laplacian_1d(0.5, -1.0, 1.0, 6, Boundary::Reflecting).unwrap();
        let g = Source::Func(Arc::new(|t, x| 1.0 + t * x));
        let rl = LinearProblem::rl(kernel(), Spatial::Generator(a.clone()), g.clone()).unwrap();
        let cap = LinearProblem::caputo(kernel(), Spatial::Generator(a.clone()), Initial::Zero, g).unwrap();
        let pts = [(1.0, -1.0), (0.6, 0.2), (0.3, 1.0)];
        let r = solve_rl_mc(&rl, &pts, &cfg(4000)).unwrap();
        let c = solve_caputo_mc(&cap, &pts, &cfg(4000)).unwrap();
        for (x, y) in r.points.iter().zip(&c.points) {
            assert!((x.mean - y.mean).abs() <= 3.0 * (x.se * x.se + y.se * y.se).sqrt() + 1e-12);
        }
    }

    #[test]
    fn maximum_principle_and_monotonicity() {
        let a = BoundedGenerator::two_state(1.0, 2.0).unwrap();
        let g = Source::Func(Arc::new(|t, _| t.sin().abs()));
        let p = LinearProblem::caputo(kernel(), Spatial::Generator(a), Initial::Grid(vec![0.5, 1.0]), g).unwrap();
        let pts = [(0.2, 0.0), (0.6, 0.0), (1.0, 1.0)];
        let s = solve_caputo_mc(&p, &pts, &cfg(4000)).unwrap();
        for e in &s.points {
            let tau = closed_form_identities(0.5, 0.0, e.t, 1).unwrap().mean_exit;
            assert!(e.mean >= -3.0 * e.se && e.mean <= 1.0 + tau + 3.0 * e.se);
        }
        let sp = Spatial::Generator(BoundedGenerator::scalar(0.0).unwrap());
        let p = LinearProblem::rl(kernel(), sp, Source::Func(Arc::new(|_, _| 1.0))).unwrap();
        let s = solve_rl_mc(&p, &[(0.2, 0.0), (0.5, 0.0), (0.9, 0.0)], &cfg(3000)).unwrap();
        assert!(s.points.windows(2).all(|w| w[1].mean > w[0].mean));
    }

    #[test]
    fn ctmc_joint_sampling_matches_generator() {
        let a = BoundedGenerator::two_state(1.0, 1.0).unwrap();
        let phi = Initial::Grid(vec![1.0, 0.0]);
        let g = Source::Func(Arc::new(|_, x| x));
        let gen = LinearProblem::caputo(kernel(), Spatial::Generator(a.clone()), phi.clone(), g.clone()).unwrap();
        let smp = LinearProblem::caputo(kernel(), Spatial::Sampler(FellerSampler::ctmc(a).unwrap()), phi, g).unwrap();
        let x = solve_caputo_mc(&gen, &[(1.0, 0.0)], &cfg(20_000)).unwrap().points[0];
        let y = solve_caputo_mc(&smp, &[(1.0, 0.0)], &cfg(20_000)).unwrap().points[0];
        assert!((x.mean - y.mean).abs() <= 3.0 * (x.se * x.se + y.se * y.se).sqrt(), "{x:?} {y:?}");
    }

    #[test]
    fn compatibility_report() {
        let a = BoundedGenerator::scalar(-2.0).unwrap();
        let p = LinearProblem::caputo(kernel(), Spatial::Generator(a), Initial::Grid(vec![1.0]), Source::Func(Arc::new(|_, _| 2.0))).unwrap();
        assert!(p.compatibility().unwrap().holds);
        assert!(LinearProblem::new(kernel(), Spatial::Generator(BoundedGenerator::scalar(1.0).unwrap()), Source::Zero, Initial::Grid(vec![1.0]), Mode::Rl).is_err());
    }

    #[test]
    fn yosida_bounded_case_and_zero_source() {
        let a = BoundedGenerator::scalar(-1.0).unwrap();
        let p = LinearProblem::rl(kernel(), Spatial::Generator(a.clone()), Source::Zero).unwrap();
        let rows = yosida_convergence_experiment(&a, &[10.0, 100.0], &p, &[(1.0, 0.0)], 64, &cfg(500), 1e-8).unwrap();
        assert!(rows.iter().all(|r| r.sup_gap == 0.0));
        let p = LinearProblem::caputo(kernel(), Spatial::Generator(a.clone()), Initial::Grid(vec![1.0]), Source::Zero).unwrap();
        let rows = yosida_convergence_experiment(&a, &[10.0, 100.0, 1000.0], &p, &[(1.0, 0.0)], 128, &cfg(20_000), 1e-8).unwrap();
        let last = rows.last().unwrap();
        assert!(last.sup_gap <= 3.0 * last.se + 2e-3, "{rows:?}");
    }
}
