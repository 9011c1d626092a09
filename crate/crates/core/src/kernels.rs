//! Lévy kernels `ν(t, r)` for the generalised Caputo and RL operators.
//!
//! A kernel supplies its density, the tail mass `Λ(t, h) = ∫_h^∞ ν(t, r) dr`
//! of the truncated jump measure, the compensating drift
//! `∫_0^h r ν(t, r) dr` of the removed small jumps, and an exact sampler for
//! jumps of size at least `h`.

use core::fmt;


use crate::error::{bail, Error, Result};
use crate::prelude::*;
use crate::quad::{integrate, QuadOpts};
use crate::special::{gamma, gamma_p, upper_gamma};

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

/// Density callback `(t, r) -> ν(t, r)`.
pub type DensityFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Upper bound `ν(t, r) ≤ scale · r^{−1−beta}` used for rejection sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub scale: f64,
    pub beta: f64,
}

/// User-supplied kernel with numerically integrated tail.
#[derive(Clone)]
pub struct CustomKernel {
    pub density: DensityFn,
    pub envelope: Option<Envelope>,
    /// Set when `ν` does not depend on `t`; enables rate caching.
    pub homogeneous: bool,
    pub label: String,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomKernel")
            .field("label", &self.label)
            .field("envelope", &self.envelope)
            .field("homogeneous", &self.homogeneous)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    Classical { beta: f64 },
    /// `e^{−λ r}` times the classical density. `lambda = 0` is allowed and
    /// reduces to the classical kernel.
    Tempered { beta: f64, lambda: f64 },
    /// Order `β(t)` tabulated at `times` and interpolated linearly.
    VariableOrder { times: Vec<f64>, betas: Vec<f64> },
    /// Finite mixture `Σ wᵢ r^{−1−βᵢ}/|Γ(−βᵢ)|`, stored as `(wᵢ, βᵢ)`.
    DistributedOrder { components: Vec<(f64, f64)> },
    Custom(CustomKernel),
}

/// A kernel together with its time domain `[a, b]`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    family: KernelFamily,
    a: f64,
    b: f64,
}

const T_SLACK: f64 = 1e-12;
const REJECTION_BUDGET: u32 = 1_000_000;

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        bail!(Domain, "order {beta} outside (0, 1)");
    }
    Ok(())
}

/// `1/|Γ(−β)|`, the classical normalising constant.
pub fn classical_constant(beta: f64) -> f64 {
    1.0 / gamma(-beta).abs()
}

fn classical_density(beta: f64, r: f64) -> f64 {
    r.powf(-1.0 - beta) * classical_constant(beta)
}

fn classical_tail(beta: f64, h: f64) -> f64 {
    h.powf(-beta) / gamma(1.0 - beta)
}

fn classical_drift(beta: f64, h: f64) -> f64 {
    h.powf(1.0 - beta) * classical_constant(beta) / (1.0 - beta)
}

/// Inverse tail CDF of the classical jump law on `[h, ∞)`: `h · u^{−1/β}`.
pub fn classical_inverse_cdf(beta: f64, h: f64, u: f64) -> f64 {
    h * u.powf(-1.0 / beta)
}

fn pareto<R: rand::Rng + ?Sized>(beta: f64, h: f64, rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1].
    let u = 1.0 - rand::Rng::random::<f64>(rng);
    classical_inverse_cdf(beta, h, u)
}

impl KernelSpec {
    pub fn new(family: KernelFamily, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            bail!(Domain, "time domain [{a}, {b}] is empty or not finite");
        }
        match &family {
            KernelFamily::Classical { beta } => check_beta(*beta)?,
            KernelFamily::Tempered { beta, lambda } => {
                check_beta(*beta)?;
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    bail!(Domain, "tempering rate {lambda} must be non-negative");
                }
            }
            KernelFamily::VariableOrder { times, betas } => {
                if times.is_empty() || times.len() != betas.len() {
                    bail!(Domain, "variable order table needs matching non-empty columns");
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    bail!(Domain, "variable order times must be strictly increasing");
                }
                for &bt in betas {
                    check_beta(bt)?;
                }
            }
            KernelFamily::DistributedOrder { components } => {
                if components.is_empty() {
                    bail!(Domain, "distributed order needs at least one component");
                }
                let mut total = 0.0;
                for &(w, bt) in components {
                    check_beta(bt)?;
                    if !(w >= 0.0 && w.is_finite()) {
                        bail!(Domain, "mixture weight {w} must be non-negative");
                    }
                    total += w;
                }
                if total <= 0.0 {
                    bail!(Domain, "mixture weights sum to zero");
                }
            }
            KernelFamily::Custom(c) => {
                if let Some(env) = c.envelope {
                    check_beta(env.beta)?;
                    if !(env.scale > 0.0 && env.scale.is_finite()) {
                        bail!(Domain, "envelope scale must be positive");
                    }
                }
            }
        }
        Ok(KernelSpec { family, a, b })
    }

    pub fn classical(beta: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(KernelFamily::Classical { beta }, a, b)
    }

    pub fn tempered(beta: f64, lambda: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(KernelFamily::Tempered { beta, lambda }, a, b)
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Same family on a different time domain.
    pub fn with_domain(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.family.clone(), a, b)
    }

    /// The order when the kernel is exactly classical.
    pub fn classical_beta(&self) -> Option<f64> {
        match self.family {
            KernelFamily::Classical { beta } => Some(beta),
            KernelFamily::Tempered { beta, lambda: 0.0 } => Some(beta),
            _ => None,
        }
    }

    /// True when `ν` does not depend on `t`.
    pub fn is_homogeneous(&self) -> bool {
        match &self.family {
            KernelFamily::VariableOrder { betas, .. } => betas.windows(2).all(|w| w[0] == w[1]),
            KernelFamily::Custom(c) => c.homogeneous,
            _ => true,
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let slack = T_SLACK * (self.b - self.a);
        if !(t >= self.a - slack && t <= self.b + slack) {
            bail!(Domain, "time {t} outside [{}, {}]", self.a, self.b);
        }
        Ok(())
    }

    /// Local order `β(t)` of the variable order table.
    fn order_at(times: &[f64], betas: &[f64], t: f64) -> f64 {
        if t <= times[0] {
            return betas[0];
        }
        let last = times.len() - 1;
        if t >= times[last] {
            return betas[last];
        }
        let j = times.partition_point(|&x| x <= t);
        let (t0, t1) = (times[j - 1], times[j]);
        let w = (t - t0) / (t1 - t0);
        betas[j - 1] * (1.0 - w) + betas[j] * w
    }

    /// The density `ν(t, r)`.
    pub fn evaluate(&self, t: f64, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            bail!(Domain, "jump size {r} must be positive");
        }
        self.check_t(t)?;
        Ok(self.density_unchecked(t, r))
    }

    fn density_unchecked(&self, t: f64, r: f64) -> f64 {
        match &self.family {
            KernelFamily::Classical { beta } => classical_density(*beta, r),
            KernelFamily::Tempered { beta, lambda } => (-lambda * r).exp() * classical_density(*beta, r),
            KernelFamily::VariableOrder { times, betas } => {
                classical_density(Self::order_at(times, betas, t), r)
            }
            KernelFamily::DistributedOrder { components } => components
                .iter()
                .map(|&(w, bt)| w * classical_density(bt, r))
                .sum(),
            KernelFamily::Custom(c) => (c.density)(t, r),
        }
    }

    /// Tail mass `Λ(t, h) = ∫_h^∞ ν(t, r) dr`.
    pub fn tail_mass(&self, t: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            bail!(Domain, "truncation {h} must be positive");
        }
        self.check_t(t)?;
        if h == f64::INFINITY {
            return Ok(0.0);
        }
        match &self.family {
            KernelFamily::Classical { beta } => Ok(classical_tail(*beta, h)),
            KernelFamily::Tempered { beta, lambda } => {
                let (beta, lambda) = (*beta, *lambda);
                if lambda == 0.0 {
                    return Ok(classical_tail(beta, h));
                }
                // λ^β Γ(−β, λh) / |Γ(−β)|
                Ok(lambda.powf(beta) * upper_gamma(-beta, lambda * h) * classical_constant(beta))
            }
            KernelFamily::VariableOrder { times, betas } => {
                Ok(classical_tail(Self::order_at(times, betas, t), h))
            }
            KernelFamily::DistributedOrder { components } => Ok(components
                .iter()
                .map(|&(w, bt)| w * classical_tail(bt, h))
                .sum()),
            KernelFamily::Custom(c) => {
                // r = h/u maps [h, ∞) onto (0, 1].
                let (v, _) = integrate(
                    |u| {
                        if u <= 0.0 {
                            return 0.0;
                        }
                        let r = h / u;
                        (c.density)(t, r) * h / (u * u)
                    },
                    0.0,
                    1.0,
                    QuadOpts::rel(1e-10),
                )?;
                if !(v >= 0.0 && v.is_finite()) {
                    bail!(Integration, "custom tail evaluates to {v}");
                }
                Ok(v)
            }
        }
    }

    /// Mean speed `∫_0^h r ν(t, r) dr` of the jumps below `h`.
    pub fn small_jump_drift(&self, t: f64, h: f64) -> Result<f64> {
        if !(h > 0.0) {
            bail!(Domain, "truncation {h} must be positive");
        }
        self.check_t(t)?;
        match &self.family {
            KernelFamily::Classical { beta } => Ok(classical_drift(*beta, h)),
            KernelFamily::Tempered { beta, lambda } => {
                let (beta, lambda) = (*beta, *lambda);
                if lambda == 0.0 {
                    return Ok(classical_drift(beta, h));
                }
                // λ^{β−1} γ(1−β, λh) / |Γ(−β)|
                let lower = gamma(1.0 - beta) * gamma_p(1.0 - beta, lambda * h);
                Ok(lambda.powf(beta - 1.0) * lower * classical_constant(beta))
            }
            KernelFamily::VariableOrder { times, betas } => {
                Ok(classical_drift(Self::order_at(times, betas, t), h))
            }
            KernelFamily::DistributedOrder { components } => Ok(components
                .iter()
                .map(|&(w, bt)| w * classical_drift(bt, h))
                .sum()),
            KernelFamily::Custom(c) => {
                // r = h u^p with p = 2/(1−β) makes r ν(r) dr smooth at 0
                // for densities growing like r^{−1−β}.
                let be = c.envelope.map(|e| e.beta).unwrap_or(0.9);
                let p = 2.0 / (1.0 - be);
                let (v, _) = integrate(
                    |u| {
                        if u <= 0.0 {
                            return 0.0;
                        }
                        let r = h * u.powf(p);
                        r * (c.density)(t, r) * h * p * u.powf(p - 1.0)
                    },
                    0.0,
                    1.0,
                    QuadOpts::rel(1e-10),
                )?;
                if !(v >= 0.0 && v.is_finite()) {
                    bail!(Integration, "custom small-jump integral evaluates to {v}");
                }
                Ok(v)
            }
        }
    }

    /// Draws a jump from `ν(t, r) dr / Λ(t, h)` on `[h, ∞)`.
    pub fn sample_jump<R: rand::Rng + ?Sized>(&self, t: f64, h: f64, rng: &mut R) -> Result<f64> {
        match &self.family {
            KernelFamily::Classical { beta } => Ok(pareto(*beta, h, rng)),
            KernelFamily::Tempered { beta, lambda } => {
                for _ in 0..REJECTION_BUDGET {
                    let r = pareto(*beta, h, rng);
                    if rand::Rng::random::<f64>(rng) < (-lambda * (r - h)).exp() {
                        return Ok(r);
                    }
                }
                Err(Error::Sampling("tempered rejection budget exhausted".into()))
            }
            KernelFamily::VariableOrder { times, betas } => {
                Ok(pareto(Self::order_at(times, betas, t), h, rng))
            }
            KernelFamily::DistributedOrder { components } => {
                let masses: Vec<f64> = components
                    .iter()
                    .map(|&(w, bt)| w * classical_tail(bt, h))
                    .collect();
                let total: f64 = masses.iter().sum();
                if !(total > 0.0) {
                    bail!(Sampling, "zero tail mass at h = {h}");
                }
                let mut target = rand::Rng::random::<f64>(rng) * total;
                let mut pick = components.len() - 1;
                for (i, m) in masses.iter().enumerate() {
                    if target < *m {
                        pick = i;
                        break;
                    }
                    target -= m;
                }
                Ok(pareto(components[pick].1, h, rng))
            }
            KernelFamily::Custom(c) => {
                let Some(env) = c.envelope else {
                    bail!(Sampling, "custom kernel '{}' has no sampling envelope", c.label);
                };
                if !(self.tail_mass(t, h)? > 0.0) {
                    bail!(Sampling, "zero tail mass at h = {h}");
                }
                for _ in 0..REJECTION_BUDGET {
                    let r = pareto(env.beta, h, rng);
                    let bound = env.scale * r.powf(-1.0 - env.beta);
                    let f = (c.density)(t, r);
                    if f > bound * (1.0 + 1e-9) {
                        bail!(Sampling, "density exceeds its envelope at r = {r}");
                    }
                    if rand::Rng::random::<f64>(rng) * bound < f {
                        return Ok(r);
                    }
                }
                Err(Error::Sampling("custom rejection budget exhausted".into()))
            }
        }
    }

    /// Exponent used for the lower power-law witness.
    fn natural_order(&self) -> f64 {
        match &self.family {
            KernelFamily::Classical { beta } | KernelFamily::Tempered { beta, .. } => *beta,
            KernelFamily::VariableOrder { betas, .. } => betas.iter().cloned().fold(f64::INFINITY, f64::min),
            KernelFamily::DistributedOrder { components } => components
                .iter()
                .filter(|c| c.0 > 0.0)
                .map(|c| c.1)
                .fold(f64::INFINITY, f64::min),
            KernelFamily::Custom(c) => c.envelope.map(|e| e.beta).unwrap_or(0.5),
        }
    }

    /// Numeric checks of the standing assumptions on the given grids.
    pub fn verify_assumptions(&self, t_grid: &[f64], r_grid: &[f64]) -> Result<AssumptionReport> {
        if t_grid.is_empty() || r_grid.is_empty() {
            bail!(Domain, "assumption grids must be non-empty");
        }
        for &t in t_grid {
            self.check_t(t)?;
        }
        if r_grid.iter().any(|&r| !(r > 0.0)) {
            bail!(Domain, "jump grid must be positive");
        }
        let mut report = AssumptionReport::default();

        // sup_t ∫ min(1, r) ν(t, r) dr = drift(t, 1) + Λ(t, 1).
        let mut sup_int: f64 = 0.0;
        let mut int_ok = true;
        for &t in t_grid {
            match (self.small_jump_drift(t, 1.0), self.tail_mass(t, 1.0)) {
                (Ok(d), Ok(l)) if (d + l).is_finite() => sup_int = sup_int.max(d + l),
                _ => int_ok = false,
            }
        }
        report.moment_sup = if int_ok { sup_int } else { f64::INFINITY };
        report.moment_finite = int_ok;

        // Grid-level continuity in t.
        let mut max_jump: f64 = 0.0;
        let mut finite = true;
        for &r in r_grid {
            let vals: Vec<f64> = t_grid.iter().map(|&t| self.density_unchecked(t, r)).collect();
            if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
                finite = false;
            }
            for w in vals.windows(2) {
                let scale = w[0].abs().max(w[1].abs());
                if scale > 0.0 {
                    max_jump = max_jump.max((w[1] - w[0]).abs() / scale);
                }
            }
        }
        report.nonnegative_finite = finite;
        report.max_adjacent_change = max_jump;
        report.continuous_on_grid = finite && max_jump < CONTINUITY_TOL;

        // Lower bound near the origin.
        let eps = H1A_EPS;
        let small: Vec<f64> = r_grid.iter().cloned().filter(|&r| r < eps).collect();
        let small = if small.is_empty() { r_grid.to_vec() } else { small };
        let mut h1a_min = f64::INFINITY;
        for &t in t_grid {
            for &r in &small {
                h1a_min = h1a_min.min(self.density_unchecked(t, r));
            }
        }
        report.h1a_min = h1a_min;
        report.h1a = h1a_min > 0.0 && h1a_min.is_finite();

        // Power-law witness ν ≥ C r^{−1−β}.
        let beta = self.natural_order();
        let mut c = f64::INFINITY;
        for &t in t_grid {
            for &r in r_grid {
                c = c.min(self.density_unchecked(t, r) * r.powf(1.0 + beta));
            }
        }
        report.h1b = if c > 0.0 && c.is_finite() && beta > 0.0 && beta < 1.0 {
            Some(PowerLawWitness { constant: c, beta })
        } else {
            None
        };
        Ok(report)
    }

    /// Witness on a default grid covering `[a, b] × [1e−4, 1]·(b − a)`.
    ///
    /// The constant is lowered further until the tail mass beyond `t − a`
    /// also dominates `C (t − a)^{−β}/β`. Every jump longer than `t − a`
    /// ends the path, so together with the density bound this orders the
    /// rates of jumping below each level, which is what the comparison with
    /// the slowed classical process uses.
    pub fn default_witness(&self) -> Option<PowerLawWitness> {
        let span = self.b - self.a;
        let ts: Vec<f64> = (0..=32)
            .map(|i| self.a + span * i as f64 / 32.0)
            .collect();
        let rs: Vec<f64> = (0..=40).map(|i| span * 10f64.powf(-4.0 + 0.1 * i as f64)).collect();
        let w = self.verify_assumptions(&ts, &rs).ok().and_then(|r| r.h1b)?;
        let mut c = w.constant;
        for &t in &ts[1..] {
            let r = t - self.a;
            let tail = self.tail_mass(t, r).ok()?;
            c = c.min(w.beta * r.powf(w.beta) * tail);
        }
        (c > 0.0 && c.is_finite()).then_some(PowerLawWitness { constant: c, beta: w.beta })
    }
}

/// Relative change between adjacent t-nodes treated as a discontinuity.
pub const CONTINUITY_TOL: f64 = 0.25;
/// Radius of the neighbourhood of zero probed for the near-origin bound.
pub const H1A_EPS: f64 = 1.0;

/// `ν(t, r) ≥ constant · r^{−1−beta}` on the checked grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawWitness {
    pub constant: f64,
    pub beta: f64,
}

impl PowerLawWitness {
    /// Ratio of the witness to the classical kernel of the same order; the
    /// process is then at least as fast as a classical one slowed by this
    /// factor.
    pub fn relative_scale(&self) -> f64 {
        self.constant / classical_constant(self.beta)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssumptionReport {
    /// `sup_t ∫ min(1, r) ν(t, r) dr`.
    pub moment_sup: f64,
    pub moment_finite: bool,
    pub nonnegative_finite: bool,
    pub max_adjacent_change: f64,
    pub continuous_on_grid: bool,
    /// Smallest density value seen for `r < H1A_EPS`.
    pub h1a_min: f64,
    pub h1a: bool,
    pub h1b: Option<PowerLawWitness>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.moment_finite && self.continuous_on_grid && self.h1a && self.h1b.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{stream, tag};
    use approx::assert_relative_eq;
    use core::f64::consts::PI;
    use proptest::prelude::*;

    fn classical(beta: f64) -> KernelSpec {
        KernelSpec::classical(beta, 0.0, 10.0).unwrap()
    }

    #[test]
    fn classical_density_at_one() {
        let k = classical(0.5);
        assert_relative_eq!(k.evaluate(1.0, 1.0).unwrap(), 1.0 / (2.0 * PI.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(k.evaluate(1.0, 1.0).unwrap(), 0.2820948, epsilon = 1e-7);
    }

    #[test]
    fn degenerate_tempering_and_single_mixture_are_classical() {
        let c = classical(0.5);
        let t = KernelSpec::tempered(0.5, 0.0, 0.0, 10.0).unwrap();
        let d = KernelSpec::new(
            KernelFamily::DistributedOrder { components: vec![(1.0, 0.5)] },
            0.0,
            10.0,
        )
        .unwrap();
        for &r in &[0.001, 0.3, 1.0, 7.0] {
            let want = c.evaluate(2.0, r).unwrap();
            assert_eq!(t.evaluate(2.0, r).unwrap(), want);
            assert_relative_eq!(d.evaluate(2.0, r).unwrap(), want, max_relative = 1e-15);
        }
    }

    #[test]
    fn domain_errors() {
        let k = classical(0.5);
        assert!(matches!(k.evaluate(1.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(k.evaluate(11.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(k.tail_mass(1.0, -1.0), Err(Error::Domain(_))));
        assert!(KernelSpec::classical(1.0, 0.0, 1.0).is_err());
        assert!(KernelSpec::classical(0.5, 1.0, 1.0).is_err());
        assert!(KernelSpec::tempered(0.5, -1.0, 0.0, 1.0).is_err());
        assert!(KernelSpec::new(KernelFamily::DistributedOrder { components: vec![(0.0, 0.5)] }, 0.0, 1.0).is_err());
    }

    #[test]
    fn classical_tail_values() {
        let k = classical(0.5);
        assert_relative_eq!(k.tail_mass(0.0, 0.01).unwrap(), 10.0 / PI.sqrt(), max_relative = 1e-14);
        assert_eq!(k.tail_mass(0.0, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn tempered_tail_matches_quadrature() {
        let k = KernelSpec::tempered(0.5, 1.0, 0.0, 1.0).unwrap();
        let h = 0.01;
        let (q, _) = crate::quad::integrate(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let r = h / u;
                (-r).exp() * r.powf(-1.5) / (2.0 * PI.sqrt()) * h / (u * u)
            },
            0.0,
            1.0,
            QuadOpts::rel(1e-12),
        )
        .unwrap();
        let tail = k.tail_mass(0.5, h).unwrap();
        assert_relative_eq!(tail, q, max_relative = 1e-10);
        assert!(tail <= 10.0 / PI.sqrt());
        // drift ∫_0^h r^{-1/2} e^{-r} dr / (2√π)
        let (qd, _) = crate::quad::integrate(
            |r: f64| (-r).exp() * r.powf(-0.5) / (2.0 * PI.sqrt()),
            0.0,
            h,
            QuadOpts::rel(1e-10),
        )
        .unwrap();
        assert_relative_eq!(k.small_jump_drift(0.5, h).unwrap(), qd, max_relative = 1e-8);
    }

    #[test]
    fn classical_inverse_cdf_examples() {
        assert_eq!(classical_inverse_cdf(0.5, 0.01, 1.0), 0.01);
        assert_relative_eq!(classical_inverse_cdf(0.5, 0.01, 0.25), 0.16, max_relative = 1e-14);
    }

    #[test]
    fn classical_jump_tail_frequency() {
        let k = classical(0.5);
        let mut rng = stream(11, tag::GENERIC, 0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| k.sample_jump(0.0, 0.01, &mut rng).unwrap() > 0.04)
            .count();
        let p = hits as f64 / n as f64;
        let se = (0.25f64 / n as f64).sqrt();
        assert!((p - 0.5).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn classical_jump_ks_distance() {
        let k = classical(0.5);
        let h = 0.01;
        let mut rng = stream(5, tag::GENERIC, 1);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n).map(|_| k.sample_jump(0.0, h, &mut rng).unwrap()).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lam = k.tail_mass(0.0, h).unwrap();
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let cdf = 1.0 - k.tail_mass(0.0, x).unwrap() / lam;
            d = d.max((cdf - i as f64 / n as f64).abs()).max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn tempered_and_mixture_samples_follow_tail() {
        let h = 0.05;
        let kernels = [
            KernelSpec::tempered(0.5, 1.0, 0.0, 1.0).unwrap(),
            KernelSpec::new(
                KernelFamily::DistributedOrder { components: vec![(0.3, 0.2), (0.7, 0.8)] },
                0.0,
                1.0,
            )
            .unwrap(),
        ];
        for (j, k) in kernels.iter().enumerate() {
            let mut rng = stream(3, tag::GENERIC, j as u64);
            let n = 40_000;
            let x = 0.3;
            let hits = (0..n).filter(|_| k.sample_jump(0.5, h, &mut rng).unwrap() > x).count();
            let p = hits as f64 / n as f64;
            let want = k.tail_mass(0.5, x).unwrap() / k.tail_mass(0.5, h).unwrap();
            let se = (want * (1.0 - want) / n as f64).sqrt();
            assert!((p - want).abs() < 4.0 * se, "kernel {j}: {p} vs {want}");
        }
    }

    #[test]
    fn custom_kernel_matches_classical() {
        let beta = 0.4;
        let c = classical_constant(beta);
        let custom = KernelSpec::new(
            KernelFamily::Custom(CustomKernel {
                density: Arc::new(move |_, r| c * r.powf(-1.0 - beta)),
                envelope: Some(Envelope { scale: c, beta }),
                homogeneous: true,
                label: "power".into(),
            }),
            0.0,
            1.0,
        )
        .unwrap();
        let cl = KernelSpec::classical(beta, 0.0, 1.0).unwrap();
        for &h in &[1e-3, 0.1, 2.0] {
            assert_relative_eq!(custom.tail_mass(0.2, h).unwrap(), cl.tail_mass(0.2, h).unwrap(), max_relative = 1e-9);
            assert_relative_eq!(
                custom.small_jump_drift(0.2, h).unwrap(),
                cl.small_jump_drift(0.2, h).unwrap(),
                max_relative = 1e-9
            );
        }
        let mut rng = stream(1, tag::GENERIC, 0);
        assert!(custom.sample_jump(0.2, 0.1, &mut rng).unwrap() >= 0.1);
    }

    #[test]
    fn zero_kernel_fails_checks_and_sampling() {
        let zero = KernelSpec::new(
            KernelFamily::Custom(CustomKernel {
                density: Arc::new(|_, _| 0.0),
                envelope: Some(Envelope { scale: 1.0, beta: 0.5 }),
                homogeneous: true,
                label: "zero".into(),
            }),
            0.0,
            1.0,
        )
        .unwrap();
        let rep = zero.verify_assumptions(&[0.0, 0.5, 1.0], &[0.01, 0.1, 1.0]).unwrap();
        assert!(!rep.h1a);
        assert!(rep.h1b.is_none());
        let mut rng = stream(1, tag::GENERIC, 0);
        assert!(matches!(zero.sample_jump(0.5, 0.1, &mut rng), Err(Error::Sampling(_))));
    }

    #[test]
    fn witnesses() {
        let ts = [0.0, 0.5, 1.0];
        let rs: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let rep = KernelSpec::classical(0.5, 0.0, 1.0).unwrap().verify_assumptions(&ts, &rs).unwrap();
        let w = rep.h1b.unwrap();
        assert_eq!(w.beta, 0.5);
        assert_relative_eq!(w.constant, 1.0 / (2.0 * PI.sqrt()), max_relative = 1e-12);
        assert!(rep.all_pass());
        let rep = KernelSpec::tempered(0.5, 1.0, 0.0, 1.0).unwrap().verify_assumptions(&ts, &rs).unwrap();
        let w = rep.h1b.unwrap();
        assert_relative_eq!(w.constant, (-1.0f64).exp() / (2.0 * PI.sqrt()), max_relative = 1e-12);
    }

    #[test]
    fn variable_order_interpolates_and_reports_continuity() {
        let k = KernelSpec::new(
            KernelFamily::VariableOrder { times: vec![0.0, 1.0], betas: vec![0.3, 0.7] },
            0.0,
            1.0,
        )
        .unwrap();
        let mid = KernelSpec::classical(0.5, 0.0, 1.0).unwrap();
        assert_relative_eq!(k.evaluate(0.5, 0.2).unwrap(), mid.evaluate(0.5, 0.2).unwrap(), max_relative = 1e-14);
        let ts: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let rep = k.verify_assumptions(&ts, &[0.01, 0.1, 0.5]).unwrap();
        assert!(rep.continuous_on_grid);
        assert_eq!(rep.h1b.unwrap().beta, 0.3);
    }

    proptest! {
        #[test]
        fn classical_tail_identity(beta in 0.01f64..0.99, t in 0.0f64..10.0, h in 1e-6f64..1e3) {
            let k = KernelSpec::classical(beta, 0.0, 10.0).unwrap();
            let v = k.tail_mass(t, h).unwrap() * gamma(1.0 - beta) * h.powf(beta);
            prop_assert!((v - 1.0).abs() < 1e-12);
        }

        #[test]
        fn tail_non_increasing_in_h(beta in 0.05f64..0.95, lambda in 0.0f64..5.0, h in 1e-4f64..10.0, f in 1.0f64..3.0) {
            let k = KernelSpec::tempered(beta, lambda, 0.0, 1.0).unwrap();
            let lo = k.tail_mass(0.5, h).unwrap();
            let hi = k.tail_mass(0.5, h * f).unwrap();
            prop_assert!(hi <= lo * (1.0 + 1e-12));
            // continuity: a tiny step in h changes the tail by a tiny amount
            let near = k.tail_mass(0.5, h * (1.0 + 1e-7)).unwrap();
            prop_assert!((near - lo).abs() <= 1e-5 * lo);
        }

        #[test]
        fn tempered_below_classical(beta in 0.05f64..0.95, lambda in 0.0f64..5.0, r in 1e-4f64..50.0) {
            let t = KernelSpec::tempered(beta, lambda, 0.0, 1.0).unwrap();
            let c = KernelSpec::classical(beta, 0.0, 1.0).unwrap();
            prop_assert!(t.evaluate(0.3, r).unwrap() <= c.evaluate(0.3, r).unwrap());
            prop_assert!(t.evaluate(0.3, r).unwrap() >= 0.0);
        }
    }
}
