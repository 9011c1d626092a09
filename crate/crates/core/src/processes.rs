//! The decreasing jump process generated by a truncated kernel.
//!
//! Jumps of size at least `h` arrive as a compound Poisson stream with
//! state-dependent rate `Λ(x, h)`, simulated by thinning a constant-rate
//! candidate stream. By default the removed jumps below `h` are replaced by
//! their mean effect, a deterministic drift `∫_0^h r ν(x, r) dr`, so that a
//! path is piecewise linear between jumps.

use rand::Rng as _;

use crate::error::{bail, Error, Result};
use crate::kernels::KernelSpec;
use crate::par;
use crate::prelude::*;
use crate::stats::{Moments, Summary};
use crate::stream::{self, tag, Rng};

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

/// Maximum number of candidate events per path.
pub const STEP_BUDGET: u64 = 10_000_000;
/// Number of t-nodes used to bound the jump rate from above.
pub const RATE_GRID: usize = 1024;
/// Safety factor applied to the grid maximum of the jump rate.
pub const RATE_SAFETY: f64 = 1.05;

/// Treatment of the jumps below the truncation level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallJumps {
    /// Replace them by their mean drift.
    #[default]
    Drift,
    /// Discard them.
    Drop,
}

/// What happens to the path at the boundary `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// Stop at `a` (absorbed).
    #[default]
    Caputo,
    /// Kill the path when it leaves `(a, b]`; the final state records the overshoot.
    Rl,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub h: f64,
    pub n: u64,
    pub seed: u64,
    pub chunk_size: u64,
    pub small_jumps: SmallJumps,
    pub convention: Convention,
}

impl McConfig {
    pub fn new(h: f64, n: u64, seed: u64) -> Self {
        McConfig {
            h,
            n,
            seed,
            chunk_size: 4096,
            small_jumps: SmallJumps::Drift,
            convention: Convention::Caputo,
        }
    }

    /// Truncation `10⁻³ (b − a)`.
    pub fn for_span(span: f64, n: u64, seed: u64) -> Self {
        Self::new(1e-3 * span, n, seed)
    }

    pub fn with_chunk_size(mut self, chunk: u64) -> Self {
        self.chunk_size = chunk;
        self
    }

    pub fn with_small_jumps(mut self, mode: SmallJumps) -> Self {
        self.small_jumps = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n(mut self, n: u64) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            bail!(Config, "truncation h = {} must be positive", self.h);
        }
        if self.n == 0 {
            bail!(Config, "sample count must be at least 1");
        }
        if self.chunk_size == 0 {
            bail!(Config, "chunk size must be at least 1");
        }
        Ok(())
    }

    pub(crate) fn chunks(&self) -> Vec<(u64, u64)> {
        par::chunks(self.n, self.chunk_size)
    }
}

/// One linear piece of a path: the level at its start, how long it lasts
/// and the downward speed during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub state: f64,
    pub dwell: f64,
    pub drift: f64,
}

impl Segment {
    pub fn end_state(&self) -> f64 {
        self.state - self.drift * self.dwell
    }

    pub fn midpoint(&self) -> f64 {
        self.state - 0.5 * self.drift * self.dwell
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub segments: Vec<Segment>,
    pub exit_time: f64,
    /// The path reached a level `≤ a`.
    pub absorbed: bool,
    /// Level after the exit: `a` under the Caputo convention, the
    /// overshoot under the RL convention.
    pub final_state: f64,
    /// Set under the RL convention once the path has left `(a, b]`.
    pub killed: bool,
}

impl PathSample {
    pub fn states(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().map(|s| s.state)
    }

    pub fn dwells(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().map(|s| s.dwell)
    }

    /// Segments with their starting process time.
    pub fn timed_segments(&self) -> impl Iterator<Item = (f64, Segment)> + '_ {
        let mut clock = 0.0;
        self.segments.iter().map(move |seg| {
            let s0 = clock;
            clock += seg.dwell;
            (s0, *seg)
        })
    }

    /// The level at process time `s`.
    pub fn state_at(&self, s: f64) -> f64 {
        if s >= self.exit_time {
            return self.final_state;
        }
        let mut clock = 0.0;
        for seg in &self.segments {
            if s < clock + seg.dwell {
                return seg.state - seg.drift * (s - clock);
            }
            clock += seg.dwell;
        }
        self.final_state
    }
}

/// Precomputed rate data for one kernel on `[a, b]`.
pub struct Simulator<'k> {
    kernel: &'k KernelSpec,
    a: f64,
    cfg: McConfig,
    rate_bar: f64,
    homogeneous: bool,
    rate_const: f64,
    drift_const: f64,
}

impl<'k> Simulator<'k> {
    pub fn new(kernel: &'k KernelSpec, a: f64, cfg: &McConfig) -> Result<Self> {
        cfg.validate()?;
        let b = kernel.b();
        let slack = 1e-12 * (b - kernel.a());
        if !(a >= kernel.a() - slack && a < b) {
            bail!(Domain, "absorption level {a} outside [{}, {b})", kernel.a());
        }
        let a_eval = a.max(kernel.a());
        let homogeneous = kernel.is_homogeneous();
        let (rate_bar, rate_const, drift_const) = if homogeneous {
            let lam = kernel.tail_mass(a_eval, cfg.h)?;
            let d = match cfg.small_jumps {
                SmallJumps::Drift => kernel.small_jump_drift(a_eval, cfg.h)?,
                SmallJumps::Drop => 0.0,
            };
            (RATE_SAFETY * lam, lam, d)
        } else {
            let mut max: f64 = 0.0;
            for i in 0..RATE_GRID {
                let t = a_eval + (b - a_eval) * i as f64 / (RATE_GRID - 1) as f64;
                max = max.max(kernel.tail_mass(t, cfg.h)?);
            }
            (RATE_SAFETY * max, f64::NAN, f64::NAN)
        };
        if !rate_bar.is_finite() {
            bail!(Config, "jump rate bound is not finite at h = {}", cfg.h);
        }
        let drift_zero = cfg.small_jumps == SmallJumps::Drop || (homogeneous && drift_const == 0.0);
        if rate_bar <= 0.0 && drift_zero {
            bail!(Config, "kernel has no jumps above h = {} and no drift", cfg.h);
        }
        Ok(Simulator {
            kernel,
            a,
            cfg: *cfg,
            rate_bar,
            homogeneous,
            rate_const,
            drift_const,
        })
    }

    pub fn config(&self) -> &McConfig {
        &self.cfg
    }

    pub fn rate_bound(&self) -> f64 {
        self.rate_bar
    }

    fn rate(&self, x: f64) -> Result<f64> {
        if self.homogeneous {
            Ok(self.rate_const)
        } else {
            self.kernel.tail_mass(x.max(self.kernel.a()), self.cfg.h)
        }
    }

    fn drift(&self, x: f64) -> Result<f64> {
        match self.cfg.small_jumps {
            SmallJumps::Drop => Ok(0.0),
            SmallJumps::Drift if self.homogeneous => Ok(self.drift_const),
            SmallJumps::Drift => self.kernel.small_jump_drift(x.max(self.kernel.a()), self.cfg.h),
        }
    }

    /// Runs one path from `t0` until it leaves `(a, b]`.
    pub fn path(&self, t0: f64, rng: &mut Rng) -> Result<PathSample> {
        let a = self.a;
        if !(t0 <= self.kernel.b() * (1.0 + 1e-12) + 1e-300) {
            bail!(Domain, "start {t0} beyond the kernel domain end {}", self.kernel.b());
        }
        if t0 <= a {
            return Ok(PathSample {
                segments: Vec::new(),
                exit_time: 0.0,
                absorbed: true,
                final_state: if self.cfg.convention == Convention::Caputo { a } else { t0 },
                killed: self.cfg.convention == Convention::Rl,
            });
        }
        let mut segments = Vec::new();
        let mut x = t0;
        let mut seg_state = x;
        let mut seg_dwell = 0.0;
        let mut d = self.drift(x)?;
        let mut clock = 0.0;
        let mut events: u64 = 0;
        let finish = |segments: Vec<Segment>, clock: f64, level: f64| -> PathSample {
            let (final_state, killed) = match self.cfg.convention {
                Convention::Caputo => (a, false),
                Convention::Rl => (level, true),
            };
            PathSample {
                segments,
                exit_time: clock,
                absorbed: true,
                final_state,
                killed,
            }
        };
        loop {
            events += 1;
            if events > STEP_BUDGET {
                return Err(Error::Budget(STEP_BUDGET));
            }
            let dt = if self.rate_bar > 0.0 {
                let mut e = 0.0;
                while e == 0.0 {
                    e = -(1.0 - rng.random::<f64>()).ln();
                }
                e / self.rate_bar
            } else {
                f64::INFINITY
            };
            if d > 0.0 && x - d * dt <= a {
                let hit = (x - a) / d;
                seg_dwell += hit;
                clock += hit;
                segments.push(Segment { state: seg_state, dwell: seg_dwell, drift: d });
                return Ok(finish(segments, clock, a));
            }
            if !dt.is_finite() {
                bail!(Config, "path from {t0} never leaves (a, b]");
            }
            x -= d * dt;
            seg_dwell += dt;
            clock += dt;
            let lam = self.rate(x)?;
            if lam > self.rate_bar {
                bail!(Config, "jump rate {lam} at {x} exceeds the thinning bound {}", self.rate_bar);
            }
            if rng.random::<f64>() * self.rate_bar >= lam {
                if !self.homogeneous && d > 0.0 {
                    segments.push(Segment { state: seg_state, dwell: seg_dwell, drift: d });
                    seg_state = x;
                    seg_dwell = 0.0;
                    d = self.drift(x)?;
                }
                continue;
            }
            let r = self.kernel.sample_jump(x.max(self.kernel.a()), self.cfg.h, rng)?;
            segments.push(Segment { state: seg_state, dwell: seg_dwell, drift: d });
            let next = x - r;
            if next <= a {
                return Ok(finish(segments, clock, next));
            }
            x = next;
            seg_state = x;
            seg_dwell = 0.0;
            d = self.drift(x)?;
        }
    }

    /// Runs `cfg.n` paths in fixed chunks and folds each with `f` into an
    /// accumulator; accumulators are returned in chunk order.
    pub fn fold_chunks<T, I, F>(&self, t0: f64, stream_index: u64, init: I, f: F) -> Result<Vec<T>>
    where
        T: Send,
        I: Fn() -> T + Sync + Send,
        F: Fn(&mut T, &PathSample, u64) -> Result<()> + Sync + Send,
    {
        let chunks = self.cfg.chunks();
        par::try_map_indexed(chunks.len(), |ci| {
            let (idx, len) = chunks[ci];
            let mut rng = stream::substream(self.cfg.seed, tag::TIME, stream_index, idx);
            let mut acc = init();
            for k in 0..len {
                let p = self.path(t0, &mut rng)?;
                f(&mut acc, &p, idx * self.cfg.chunk_size + k)?;
            }
            Ok(acc)
        })
    }
}

/// One path of the truncated process started at `t0`.
pub fn simulate_path(kernel: &KernelSpec, t0: f64, a: f64, cfg: &McConfig, rng: &mut Rng) -> Result<PathSample> {
    Simulator::new(kernel, a, cfg)?.path(t0, rng)
}

/// Exit-time statistics over `cfg.n` paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitStats {
    pub summary: Summary,
    pub h: f64,
}

pub fn exit_time_stats(kernel: &KernelSpec, t0: f64, a: f64, cfg: &McConfig) -> Result<ExitStats> {
    cfg.validate()?;
    if t0 <= a {
        return Ok(ExitStats {
            summary: Summary { mean: 0.0, variance: 0.0, se: 0.0, n: cfg.n },
            h: cfg.h,
        });
    }
    let sim = Simulator::new(kernel, a, cfg)?;
    let parts = sim.fold_chunks(t0, 0, Moments::default, |m, p, _| {
        m.push(p.exit_time);
        Ok(())
    })?;
    let mut all = Moments::default();
    for m in &parts {
        all.merge(m);
    }
    Ok(ExitStats { summary: all.summary(), h: cfg.h })
}

/// `∫_0^τ f(X(s)) ds` along a path, with `f` evaluated at segment midpoints
/// (exact for paths without drift).
pub fn occupation_functional<F: Fn(f64) -> f64>(path: &PathSample, f: F) -> f64 {
    let mut s = crate::stats::KahanSum::new();
    for seg in &path.segments {
        s.add(f(seg.midpoint()) * seg.dwell);
    }
    s.value()
}

/// Mean of an occupation functional over `cfg.n` paths.
pub fn occupation_stats<F>(kernel: &KernelSpec, t0: f64, a: f64, cfg: &McConfig, f: F) -> Result<Summary>
where
    F: Fn(f64) -> f64 + Sync + Send,
{
    let sim = Simulator::new(kernel, a, cfg)?;
    let parts = sim.fold_chunks(t0, 0, Moments::default, |m, p, _| {
        m.push(occupation_functional(p, &f));
        Ok(())
    })?;
    let mut all = Moments::default();
    parts.iter().for_each(|m| all.merge(m));
    Ok(all.summary())
}

/// Fraction of paths above `y` at process time `s`, with binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Survival {
    pub p: f64,
    pub se: f64,
    pub n: u64,
}

pub fn survival_probability(kernel: &KernelSpec, t0: f64, y: f64, s: f64, a: f64, cfg: &McConfig) -> Result<Survival> {
    let out = survival_curve(kernel, t0, &[(s, y)], a, cfg)?;
    Ok(out[0])
}

/// Survival at several `(s, y)` probes from one shared ensemble.
pub fn survival_curve(kernel: &KernelSpec, t0: f64, probes: &[(f64, f64)], a: f64, cfg: &McConfig) -> Result<Vec<Survival>> {
    for &(s, y) in probes {
        if !(s >= 0.0) {
            bail!(Domain, "process time {s} must be non-negative");
        }
        if !(y >= a && y < t0) {
            bail!(Domain, "level {y} outside [{a}, {t0})");
        }
    }
    let sim = Simulator::new(kernel, a, cfg)?;
    let parts = sim.fold_chunks(
        t0,
        0,
        || vec![0u64; probes.len()],
        |acc, p, _| {
            for (k, &(s, y)) in probes.iter().enumerate() {
                let above = if s == 0.0 { t0 > y } else { p.state_at(s) > y };
                if above {
                    acc[k] += 1;
                }
            }
            Ok(())
        },
    )?;
    let n = cfg.n;
    Ok((0..probes.len())
        .map(|k| {
            let hits: u64 = parts.iter().map(|c| c[k]).sum();
            let p = hits as f64 / n as f64;
            Survival { p, se: (p * (1.0 - p) / n as f64).sqrt(), n }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma;
    use proptest::prelude::*;

    fn classical(beta: f64) -> KernelSpec {
        KernelSpec::classical(beta, 0.0, 4.0).unwrap()
    }

    #[test]
    fn start_at_level_is_empty() {
        let k = classical(0.5);
        let cfg = McConfig::new(1e-3, 10, 1);
        let mut rng = stream::stream(1, tag::TIME, 0);
        let p = simulate_path(&k, 0.0, 0.0, &cfg, &mut rng).unwrap();
        assert!(p.segments.is_empty());
        assert_eq!(p.exit_time, 0.0);
        let st = exit_time_stats(&k, 0.0, 0.0, &cfg).unwrap();
        assert_eq!(st.summary.mean, 0.0);
        assert_eq!(st.summary.variance, 0.0);
    }

    #[test]
    fn paths_decrease_and_dwells_sum_to_exit() {
        for mode in [SmallJumps::Drift, SmallJumps::Drop] {
            let k = classical(0.6);
            let cfg = McConfig::new(1e-2, 1, 9).with_small_jumps(mode);
            let mut rng = stream::stream(9, tag::TIME, 0);
            for _ in 0..200 {
                let p = simulate_path(&k, 1.5, 0.0, &cfg, &mut rng).unwrap();
                assert!(p.absorbed);
                assert_eq!(p.final_state, 0.0);
                let st: Vec<f64> = p.states().collect();
                assert!(st.windows(2).all(|w| w[1] < w[0]));
                assert!(p.dwells().all(|d| d > 0.0));
                let total: f64 = p.dwells().sum();
                assert!((total - p.exit_time).abs() <= 1e-12 * p.exit_time.max(1.0));
                assert!((occupation_functional(&p, |_| 1.0) - total).abs() <= 1e-12 * total.max(1.0));
                assert_eq!(occupation_functional(&p, |_| 0.0), 0.0);
            }
        }
    }

    #[test]
    fn mean_exit_time_law() {
        let k = classical(0.5);
        let cfg = McConfig::new(1e-3, 20_000, 7);
        let want = 1.0 / gamma(1.5);
        let st = exit_time_stats(&k, 1.0, 0.0, &cfg).unwrap();
        let tol = (3.0 * st.summary.se).max(0.02 * want);
        assert!((st.summary.mean - want).abs() < tol, "{} vs {want}", st.summary.mean);
        let st4 = exit_time_stats(&k, 4.0, 0.0, &cfg).unwrap();
        let tol = (3.0 * st4.summary.se).max(0.02 * 2.0 * want);
        assert!((st4.summary.mean - 2.0 * want).abs() < tol);
    }

    #[test]
    fn conventions_agree_above_level() {
        let k = classical(0.5);
        let mut cfg = McConfig::new(1e-3, 1, 3);
        let mut r1 = stream::stream(3, tag::TIME, 0);
        let mut r2 = stream::stream(3, tag::TIME, 0);
        let p1 = simulate_path(&k, 1.0, 0.0, &cfg, &mut r1).unwrap();
        cfg.convention = Convention::Rl;
        let p2 = simulate_path(&k, 1.0, 0.0, &cfg, &mut r2).unwrap();
        assert_eq!(p1.segments, p2.segments);
        assert_eq!(p1.exit_time, p2.exit_time);
        assert_eq!(p1.final_state, 0.0);
        assert!(p2.killed && p2.final_state <= 0.0);
    }

    #[test]
    fn survival_edges() {
        let k = classical(0.5);
        let cfg = McConfig::new(1e-3, 2_000, 5);
        let s = survival_curve(&k, 1.0, &[(0.0, 0.5), (1e6, 0.0)], 0.0, &cfg).unwrap();
        assert_eq!(s[0].p, 1.0);
        assert_eq!(s[1].p, 0.0);
        assert!(survival_probability(&k, 1.0, 1.5, 0.1, 0.0, &cfg).is_err());
    }

    #[test]
    fn time_above_level_matches_potential_density() {
        // E ∫ 1{X > y} ds = ∫_y^t (t − z)^{β−1}/Γ(β) dz = (t − y)^β/Γ(β+1)
        let k = classical(0.5);
        let cfg = McConfig::new(1e-3, 20_000, 21);
        let y = 0.4;
        let st = occupation_stats(&k, 1.0, 0.0, &cfg, |x| if x > y { 1.0 } else { 0.0 }).unwrap();
        let (want, _) = crate::quad::integrate(
            |w: f64| w.powf(-0.5) / gamma(0.5),
            0.0,
            1.0 - y,
            crate::quad::QuadOpts::rel(1e-10),
        )
        .unwrap();
        assert!((st.mean - want).abs() < (3.0 * st.se).max(0.02 * want), "{} vs {want}", st.mean);
    }

    #[test]
    fn statistics_are_reproducible() {
        let k = classical(0.3);
        let cfg = McConfig::new(1e-2, 3_000, 99).with_chunk_size(512);
        let a = exit_time_stats(&k, 1.0, 0.0, &cfg).unwrap();
        let b = exit_time_stats(&k, 1.0, 0.0, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn variable_order_runs_with_thinning() {
        let k = KernelSpec::new(
            crate::kernels::KernelFamily::VariableOrder { times: vec![0.0, 1.0], betas: vec![0.5, 0.5] },
            0.0,
            1.0,
        )
        .unwrap();
        let varying = KernelSpec::new(
            crate::kernels::KernelFamily::VariableOrder { times: vec![0.0, 1.0], betas: vec![0.4, 0.6] },
            0.0,
            1.0,
        )
        .unwrap();
        let cfg = McConfig::new(1e-3, 5_000, 2);
        let m = exit_time_stats(&k, 1.0, 0.0, &cfg).unwrap().summary;
        let want = 1.0 / gamma(1.5);
        assert!((m.mean - want).abs() < (3.0 * m.se).max(0.02 * want));
        let v = exit_time_stats(&varying, 1.0, 0.0, &cfg).unwrap().summary;
        assert!(v.mean > 0.0 && v.mean.is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn monotone_coupling(seed in 0u64..1000, t0 in 0.2f64..2.0, extra in 0.01f64..1.0) {
            let k = classical(0.5);
            let cfg = McConfig::new(1e-2, 1, seed);
            let mut r1 = stream::stream(seed, tag::TIME, 0);
            let mut r2 = stream::stream(seed, tag::TIME, 0);
            let p1 = simulate_path(&k, t0, 0.0, &cfg, &mut r1).unwrap();
            let p2 = simulate_path(&k, t0 + extra, 0.0, &cfg, &mut r2).unwrap();
            prop_assert!(p2.exit_time >= p1.exit_time);
        }

        #[test]
        fn chunking_does_not_change_sample_count(chunk in 1u64..700) {
            let k = classical(0.5);
            let cfg = McConfig::new(5e-2, 1_000, 4).with_chunk_size(chunk);
            let st = exit_time_stats(&k, 1.0, 0.0, &cfg).unwrap();
            prop_assert_eq!(st.summary.n, 1_000);
        }
    }

    #[test]
    fn truncation_monotone_in_h_without_drift() {
        let k = classical(0.5);
        let mut means = Vec::new();
        for &h in &[1e-1, 1e-2, 1e-3] {
            let cfg = McConfig::new(h, 20_000, 13).with_small_jumps(SmallJumps::Drop);
            means.push(exit_time_stats(&k, 1.0, 0.0, &cfg).unwrap().summary);
        }
        for w in means.windows(2) {
            assert!(w[1].mean <= w[0].mean + 3.0 * (w[0].se.hypot(w[1].se)));
        }
    }
}
