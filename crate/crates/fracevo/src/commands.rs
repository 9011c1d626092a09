//! Subcommand bodies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use fracevo_core::fracint::{estimate_potential_kernel, iterate_gfi};
use fracevo_core::mittag_series::{mittag_leffler, mittag_leffler_detail, SeriesEngine, SeriesMode};
use fracevo_core::oracles::{caputo_linear_ode, closed_form_identities, ml_half_closed, LevyHalf};
use fracevo_core::processes::exit_time_stats;
use fracevo_core::solver_linear::{
    full_grid_points, nearest_node, solve_caputo_mc, solve_rl_mc, yosida_convergence_experiment, LinearProblem, McSolution, Mode, Spatial,
};
use fracevo_core::solver_nonlinear::{solve_nonlinear, NonlinearProblem, ReactionFn};
use fracevo_core::{Backend, BoundedGenerator, GridFunction, KernelSpec, McConfig, TimeGrid};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::*;
use crate::output::{num, Manifest, Output};

/// A subcommand whose resolved arguments are recorded in the manifest.
pub trait Runnable: Serialize + DeserializeOwned + Sync {
    const NAME: &'static str;
    fn config_path(&self) -> Option<&Path>;
    fn run_args(&mut self) -> &mut RunArgs;
    fn execute(&self, out: &mut Output) -> Result<Value>;
}

/// Applies the config overlay, resolves defaults and runs.
pub fn invoke<T: Runnable>(cli: T) -> Result<PathBuf> {
    let mut args = overlay(&cli, cli.config_path())?;
    args.run_args().resolve_out_dir();
    run_resolved(args)
}

fn run_resolved<T: Runnable>(mut args: T) -> Result<PathBuf> {
    let run = args.run_args().clone();
    let dir = run.out_dir.clone().expect("output directory resolved");
    let pool = rayon::ThreadPoolBuilder::new().num_threads(run.workers).build()?;
    let mut out = Output::create(&dir)?;
    let summary = pool.install(|| args.execute(&mut out))?;
    let manifest = Manifest {
        command: T::NAME.into(),
        config: serde_json::to_value(&args)?,
        version: env!("CARGO_PKG_VERSION").into(),
        workers: pool.current_num_threads(),
        outputs: out.files().to_vec(),
        summary,
        build: None,
    };
    manifest.write(out.dir())
}

fn rerun_as<T: Runnable>(config: Value, origin: &str, out_dir: Option<PathBuf>) -> Result<PathBuf> {
    let mut args: T = from_value(config, origin)?;
    if out_dir.is_some() {
        args.run_args().out_dir = out_dir;
    }
    args.run_args().resolve_out_dir();
    run_resolved(args)
}

pub fn rerun(r: &RerunArgs) -> Result<PathBuf> {
    let origin = r.manifest.display().to_string();
    let m: Manifest = from_value(read_json(&r.manifest)?, &origin)?;
    let out = r.out_dir.clone();
    match m.command.as_str() {
        ExitTimeArgs::NAME => rerun_as::<ExitTimeArgs>(m.config, &origin, out),
        PotentialArgs::NAME => rerun_as::<PotentialArgs>(m.config, &origin, out),
        SolveLinearArgs::NAME => rerun_as::<SolveLinearArgs>(m.config, &origin, out),
        SolveNonlinearArgs::NAME => rerun_as::<SolveNonlinearArgs>(m.config, &origin, out),
        MittagLefflerArgs::NAME => rerun_as::<MittagLefflerArgs>(m.config, &origin, out),
        YosidaArgs::NAME => rerun_as::<YosidaArgs>(m.config, &origin, out),
        ValidateArgs::NAME => rerun_as::<ValidateArgs>(m.config, &origin, out),
        other => Err(ConfigError(anyhow!("{origin}: unknown command `{other}`")).into()),
    }
}

macro_rules! runnable_plumbing {
    ($name:literal) => {
        const NAME: &'static str = $name;
        fn config_path(&self) -> Option<&Path> {
            self.config.as_deref()
        }
        fn run_args(&mut self) -> &mut RunArgs {
            &mut self.run
        }
    };
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl Runnable for ExitTimeArgs {
    runnable_plumbing!("exit-time");

    fn execute(&self, out: &mut Output) -> Result<Value> {
        let kernel = self.kernel.dto().build(self.a, self.t)?;
        let cfg = self.mc.config(self.t - self.a)?;
        let oracle = kernel
            .classical_beta()
            .map(|beta| closed_form_identities(beta, self.a, self.t, 1).map(|c| c.mean_exit))
            .transpose()?;
        let mut runs = vec![(cfg.h, exit_time_stats(&kernel, self.t, self.a, &cfg)?.summary)];
        if !self.no_richardson {
            let half = McConfig { h: 0.5 * cfg.h, ..cfg };
            runs.push((half.h, exit_time_stats(&kernel, self.t, self.a, &half)?.summary));
        }
        out.csv(
            "exit_time.csv",
            &["t", "a", "h", "n", "mean", "se", "oracle"],
            runs.iter().map(|(h, s)| vec![num(self.t), num(self.a), num(*h), s.n.to_string(), num(s.mean), num(s.se), opt(oracle)]),
        )?;
        let s = runs[0].1;
        println!("mean exit time {} ± {} (h = {})", s.mean, s.se, runs[0].0);
        let shift = runs.get(1).map(|(_, s2)| s2.mean - s.mean);
        if let Some(d) = shift {
            println!("change at h/2: {d}");
        }
        let within = oracle.map(|o| (s.mean - o).abs() <= (3.0 * s.se).max(0.02 * o));
        if let Some(o) = oracle {
            println!("closed form {o}");
        }
        Ok(json!({ "mean": s.mean, "se": s.se, "h_half_shift": shift, "oracle": oracle, "within_allowance": within }))
    }
}

impl Runnable for PotentialArgs {
    runnable_plumbing!("potential");

    fn execute(&self, out: &mut Output) -> Result<Value> {
        let kernel = self.kernel.dto().build(self.a, self.b)?;
        let cfg = self.mc.config(self.b - self.a)?;
        let grid = TimeGrid::uniform(self.a, self.b, self.m)?;
        let pk = estimate_potential_kernel(&kernel, &grid, &cfg)?;
        let t = grid.nodes();
        let n = pk.size();
        out.csv(
            "potential.csv",
            &["t_i", "t_j", "density"],
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| vec![num(t[i]), num(t[j]), num(pk.get(i, j))]),
        )?;
        let beta = kernel.classical_beta();
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let exact = beta.map(|b| closed_form_identities(b, self.a, t[i], 1).map(|c| c.mean_exit)).transpose()?;
            rows.push(vec![num(t[i]), num(pk.row_mass(i)), num(pk.row_se[i]), opt(exact)]);
        }
        out.csv("row_mass.csv", &["t", "row_mass", "se", "oracle"], rows)?;
        println!("potential kernel on {} nodes, row mass at b = {}", n, pk.row_mass(n - 1));
        Ok(json!({ "nodes": n, "row_mass_at_b": pk.row_mass(n - 1) }))
    }
}

fn series_engine(kernel: &KernelSpec, grid: &TimeGrid, cfg: &McConfig) -> Result<SeriesEngine> {
    Ok(match kernel.classical_beta() {
        Some(beta) => SeriesEngine::classical(beta, grid)?,
        None => SeriesEngine::new(&Backend::monte_carlo(kernel, grid, cfg).to_matrix()?, kernel)?,
    })
}

fn mode_of(m: ModeArg) -> Mode {
    match m {
        ModeArg::Rl => Mode::Rl,
        ModeArg::Caputo => Mode::Caputo,
    }
}

fn solve_mc(p: &LinearProblem, points: &[(f64, f64)], cfg: &McConfig) -> Result<McSolution> {
    Ok(match p.mode {
        Mode::Rl => solve_rl_mc(p, points, cfg)?,
        Mode::Caputo => solve_caputo_mc(p, points, cfg)?,
    })
}

impl Runnable for SolveLinearArgs {
    runnable_plumbing!("solve-linear");

    fn execute(&self, out: &mut Output) -> Result<Value> {
        let kernel = self.kernel.dto().build(self.a, self.b)?;
        let cfg = self.mc.config(self.b - self.a)?;
        let pr = &self.problem;
        let space = pr.generator.space()?;
        let p = LinearProblem::new(kernel.clone(), pr.generator.spatial()?, pr.g.source()?, pr.phi.initial()?, mode_of(pr.mode))?;
        let grid = TimeGrid::uniform(self.a, self.b, self.m)?;
        let points = if self.points.is_empty() { full_grid_points(&grid, &space) } else { self.points.clone() };
        let mc = (self.method != MethodArg::Series).then(|| solve_mc(&p, &points, &cfg)).transpose()?;
        let series = if self.method != MethodArg::Mc {
            let Spatial::Generator(a) = &p.spatial else {
                return Err(ConfigError(anyhow!("the series method needs a matrix generator")).into());
            };
            let engine = series_engine(&kernel, &grid, &cfg)?;
            let g = p.g.tabulate(&grid, a.grid());
            let phi = p.phi_a.on_grid(a.grid())?;
            let mode = if p.mode == Mode::Rl { SeriesMode::Rl } else { SeriesMode::Caputo };
            Some(engine.series_solution(a, &g, &phi, mode, self.tol)?)
        } else {
            None
        };
        let at = |v: &GridFunction, t: f64, x: f64| v.interp_time(t, nearest_node(&space, x));
        let mut rows = Vec::with_capacity(points.len());
        let mut gap: Option<f64> = None;
        for (i, &(t, x)) in points.iter().enumerate() {
            let m = mc.as_ref().map(|s| s.points[i]);
            let s = series.as_ref().map(|r| at(&r.value, t, x));
            let d = m.zip(s).map(|(m, s)| (m.mean - s).abs());
            if let Some(d) = d {
                gap = Some(gap.unwrap_or(0.0).max(d));
            }
            rows.push(vec![num(t), num(x), opt(m.map(|m| m.mean)), opt(m.map(|m| m.se)), opt(s), opt(d)]);
        }
        out.csv("solution.csv", &["t", "x", "mc_mean", "mc_se", "series", "abs_gap"], rows)?;
        let max_se = mc.as_ref().map(|m| m.max_se());
        if let (Some(g), Some(se)) = (gap, max_se) {
            println!("max |MC − series| = {g}, 3·max SE = {}", 3.0 * se);
        }
        let compat = p.compatibility();
        Ok(json!({
            "points": points.len(),
            "max_gap": gap,
            "max_se": max_se,
            "series_method": series.as_ref().map(|s| format!("{:?}", s.method).to_lowercase()),
            "series_terms": series.as_ref().map(|s| s.terms_used),
            "series_tail_bound": series.as_ref().map(|s| s.tail_bound),
            "compatibility_residual": compat.map(|c| c.residual),
        }))
    }
}

fn reaction(r: ReactionDto, u_range: f64) -> (ReactionFn, f64, f64) {
    match r {
        ReactionDto::Sin(k) => (Arc::new(move |_, _, u: f64| k * u.sin()), k.abs(), k.abs()),
        ReactionDto::Tanh(k) => (Arc::new(move |_, _, u: f64| k * u.tanh()), k.abs(), k.abs()),
        ReactionDto::Linear(l) => (Arc::new(move |_, _, u: f64| l * u), l.abs(), l.abs() * u_range),
    }
}

impl Runnable for SolveNonlinearArgs {
    runnable_plumbing!("solve-nonlinear");

    fn execute(&self, out: &mut Output) -> Result<Value> {
        let kernel = self.kernel.dto().build(self.a, self.b)?;
        let cfg = self.mc.config(self.b - self.a)?;
        let gen: BoundedGenerator = self.generator.matrix()?;
        let (f, lip, fmax) = reaction(self.reaction, self.u_range);
        let p = NonlinearProblem::new(kernel, gen, self.phi.initial()?, f, lip, fmax, self.u_range)?;
        let grid = TimeGrid::uniform(self.a, self.b, self.m)?;
        let (u, rep) = solve_nonlinear(&p, &grid, self.tol, self.max_iter, &cfg)?;
        let space = u.space.clone();
        let mut rows = Vec::new();
        for (i, &t) in grid.nodes().iter().enumerate() {
            for k in 0..space.len() {
                rows.push(vec![num(t), num(space.coord(k)), num(u.at(i, k)), num(rep.se.at(i, k))]);
            }
        }
        out.csv("solution.csv", &["t", "x", "u", "se"], rows)?;
        out.csv(
            "iterations.csv",
            &["k", "residual"],
            rep.residuals.iter().enumerate().map(|(k, r)| vec![(k + 1).to_string(), num(*r)]),
        )?;
        println!(
            "{} iterations ({:?}), a-priori count {}, last residual {}",
            rep.iterations,
            rep.criterion,
            rep.apriori_iterations,
            rep.residuals.last().copied().unwrap_or(0.0)
        );
        if !rep.converged {
            eprintln!("warning: no convergence within {} iterations", self.max_iter);
        }
        Ok(json!({
            "iterations": rep.iterations,
            "converged": rep.converged,
            "criterion": format!("{:?}", rep.criterion).to_lowercase(),
            "apriori_iterations": rep.apriori_iterations,
            "apriori_bound": rep.apriori_bound,
            "final_residual": rep.residuals.last(),
            "max_se": rep.se.sup_norm(),
        }))
    }
}

impl Runnable for MittagLefflerArgs {
    runnable_plumbing!("mittag-leffler");

    fn execute(&self, out: &mut Output) -> Result<Value> {
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for &z in &self.z {
            let v = mittag_leffler_detail(self.beta, z, self.tol)?;
            println!("{}", v.value);
            values.push(v.value);
            rows.push(vec![num(self.beta), num(z), num(v.value), v.terms.to_string(), num(v.remainder)]);
        }
        out.csv("mittag_leffler.csv", &["beta", "z", "value", "terms", "remainder"], rows)?;
        Ok(json!({ "values": values }))
    }
}

impl Runnable for YosidaArgs {
    runnable_plumbing!("yosida");

    fn execute(&self, out: &mut Output) -> Result<Value> {
        let kernel = self.kernel.dto().build(self.a, self.b)?;
        let cfg = self.mc.config(self.b - self.a)?;
        let a = BoundedGenerator::laplacian_1d(self.sigma, self.lo, self.hi, self.nodes, self.boundary.into())?;
        let p = LinearProblem::new(kernel, Spatial::Generator(a.clone()), self.g.source()?, self.phi.initial()?, mode_of(self.mode))?;
        let grid = TimeGrid::uniform(self.a, self.b, self.m)?;
        let points = if self.points.is_empty() { full_grid_points(&grid, a.grid()) } else { self.points.clone() };
        let rows = yosida_convergence_experiment(&a, &self.lambdas, &p, &points, self.m, &cfg, self.tol)?;
        out.csv(
            "yosida.csv",
            &["lambda", "sup_gap", "se"],
            rows.iter().map(|r| vec![num(r.lambda), num(r.sup_gap), num(r.se)]),
        )?;
        for r in &rows {
            println!("λ = {:>8}: sup gap {:.6e} (3·SE {:.3e})", r.lambda, r.sup_gap, 3.0 * r.se);
        }
        let last = rows.last().expect("at least one λ");
        Ok(json!({
            "gaps": rows.iter().map(|r| r.sup_gap).collect::<Vec<_>>(),
            "se": last.se,
            "floor_reached": last.sup_gap <= 3.0 * last.se,
        }))
    }
}

struct Check {
    name: String,
    value: f64,
    reference: f64,
    allowance: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, reference: f64, allowance: f64) -> Self {
        Check { name: name.into(), value, reference, allowance }
    }

    fn pass(&self) -> bool {
        (self.value - self.reference).abs() <= self.allowance
    }
}

impl Runnable for ValidateArgs {
    runnable_plumbing!("validate");

    fn execute(&self, out: &mut Output) -> Result<Value> {
        let mut checks = Vec::new();
        let half = ml_half_closed;
        for &z in &[-1.0, -0.5, 1.0, 2.0] {
            checks.push(Check::new(format!("series E_0.5({z}) vs erfc form"), mittag_leffler(0.5, z, 1e-13)?, half(z), 1e-10));
        }
        for &z in &[-5.0, 1.0, 5.0] {
            checks.push(Check::new(format!("series E_1({z}) vs exp"), mittag_leffler(1.0, z, 1e-14)?, z.exp(), 1e-10 * z.exp().max(1.0)));
        }
        let ode = caputo_linear_ode(0.5, -1.0, 1.0, |_| 0.0, 1.0, 0.0, 1e-12)?;
        checks.push(Check::new("Caputo ODE quadrature, g = 0", ode, half(-1.0), 1e-9));
        let ode = caputo_linear_ode(0.5, -1.0, 1.0, |_| 1.0, 1.0, 0.0, 1e-12)?;
        checks.push(Check::new("Caputo ODE quadrature, g = 1", ode, 1.0, 1e-9));
        let levy = LevyHalf::new()?;
        checks.push(Check::new("order-1/2 density mass", 1.0 + levy.mass_error, 1.0, 1e-8));
        checks.push(Check::new("order-1/2 potential", levy.potential_error, 0.0, 1e-6));
        let grid = TimeGrid::uniform(0.0, 1.0, 256)?;
        let ones = GridFunction::constant(&grid, &fracevo_core::SpaceGrid::Scalar, 1.0);
        for n in 1..=4 {
            let v = iterate_gfi(&Backend::exact_beta(0.5, &grid)?, &ones, n)?;
            let c = closed_form_identities(0.5, 0.0, 1.0, n as u32)?.rl_power;
            checks.push(Check::new(format!("exact RL I^{n} 1 at b"), v.at(256, 0), c, 1e-3 * c));
        }

        let kernel = self.kernel.dto().build(0.0, self.b)?;
        let cfg = self.mc.config(self.b)?;
        if let Some(beta) = kernel.classical_beta() {
            let s = exit_time_stats(&kernel, self.b, 0.0, &cfg)?.summary;
            let c = closed_form_identities(beta, 0.0, self.b, 1)?.mean_exit;
            checks.push(Check::new("Monte Carlo mean exit time", s.mean, c, (3.0 * s.se).max(0.02 * c)));
        }
        let t_grid: Vec<f64> = (0..=16).map(|i| self.b * i as f64 / 16.0).collect();
        let r_grid: Vec<f64> = (0..=40).map(|i| 10f64.powf(-4.0 + 0.2 * i as f64)).collect();
        let report = kernel.verify_assumptions(&t_grid, &r_grid)?;

        let mut failed = 0;
        println!("{:<40} {:>16} {:>16} {:>10}  result", "check", "value", "reference", "error");
        for c in &checks {
            let ok = c.pass();
            failed += usize::from(!ok);
            println!(
                "{:<40} {:>16.10} {:>16.10} {:>10.2e}  {}",
                c.name,
                c.value,
                c.reference,
                (c.value - c.reference).abs(),
                if ok { "pass" } else { "FAIL" }
            );
        }
        println!("kernel moment sup {:.6e}, finite: {}", report.moment_sup, report.moment_finite);
        println!("continuity on grid: {} (max change {:.3e})", report.continuous_on_grid, report.max_adjacent_change);
        println!("near-origin bound: {} (min density {:.3e})", report.h1a, report.h1a_min);
        match report.h1b {
            Some(w) => println!("power-law witness: ν ≥ {:.6e}·r^(-1-{})", w.constant, w.beta),
            None => println!("power-law witness: none found"),
        }
        out.csv(
            "validate.csv",
            &["check", "value", "reference", "allowance", "pass"],
            checks.iter().map(|c| vec![c.name.clone(), num(c.value), num(c.reference), num(c.allowance), c.pass().to_string()]),
        )?;
        let summary = json!({
            "checks": checks.len(),
            "failed": failed,
            "assumptions_pass": report.all_pass(),
            "witness": report.h1b.map(|w| json!({ "constant": w.constant, "beta": w.beta })),
        });
        if failed > 0 {
            bail!("{failed} oracle self-tests failed");
        }
        Ok(summary)
    }
}
