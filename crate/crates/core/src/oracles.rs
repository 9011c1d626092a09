//! Closed-form and quadrature references.
//!
//! Nothing here depends on the simulation, fractional integral or solver
//! modules, so these values can be used to check them.

use crate::error::{bail, Result};
use crate::quad::{integrate, integrate_to_inf, QuadOpts};

#[cfg(not(feature = "std"))]
use crate::prelude::Float;

const SQRT_PI: f64 = 1.772_453_850_905_516;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    /// `(t−a)^{nβ}/Γ(nβ+1)`, the n-fold RL integral of 1.
    pub rl_power: f64,
    /// `(t−a)^β/Γ(β+1)`, the mean exit time of the classical process.
    pub mean_exit: f64,
}

pub fn closed_form_identities(beta: f64, a: f64, t: f64, n: u32) -> Result<ClosedForm> {
    if !(beta > 0.0 && beta < 1.0) {
        bail!(Domain, "order {beta} outside (0, 1)");
    }
    if n == 0 {
        bail!(Domain, "fold count must be at least 1");
    }
    if !(t >= a) {
        bail!(Domain, "t = {t} precedes a = {a}");
    }
    if t == a {
        return Ok(ClosedForm { rl_power: 0.0, mean_exit: 0.0 });
    }
    let l = (t - a).ln();
    let nb = n as f64 * beta;
    Ok(ClosedForm {
        rl_power: (nb * l - libm::lgamma(nb + 1.0)).exp(),
        mean_exit: (beta * l - libm::lgamma(beta + 1.0)).exp(),
    })
}

/// Two-parameter Mittag-Leffler `E_{α,γ}(z) = Σ zⁿ/Γ(αn+γ)` by straight
/// summation. Used for moderate `|z|` only.
pub fn ml_direct(alpha: f64, gamma_shift: f64, z: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut n = 0u32;
    loop {
        let arg = alpha * n as f64 + gamma_shift;
        let term = if arg < 170.0 {
            z.powi(n as i32) / libm::tgamma(arg)
        } else {
            let mag = (n as f64 * z.abs().ln() - libm::lgamma(arg)).exp();
            if z < 0.0 && n % 2 == 1 {
                -mag
            } else {
                mag
            }
        };
        // Kahan-Babuska step.
        let s = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - s) + term;
        } else {
            comp += (term - s) + sum;
        }
        sum = s;
        n += 1;
        let scale = (sum + comp).abs().max(1.0);
        if n > 20 && term.abs() < 1e-18 * scale && (alpha * n as f64) > z.abs().powf(1.0 / alpha) {
            return sum + comp;
        }
        if n > 5000 {
            return f64::NAN;
        }
    }
}

/// `E_{1/2}(z) = e^{z²} erfc(−z)`.
pub fn ml_half_closed(z: f64) -> f64 {
    (z * z).exp() * libm::erfc(-z)
}

/// Scalar Caputo problem `D^β u = λu + g` with `u(a) = φ`, by quadrature of
/// `u(t) = φ E_β(λ(t−a)^β) + ∫₀^{t−a} g(t−y) y^{β−1} E_{β,β}(λy^β) dy`.
///
/// The substitution `y = (t−a) w^{1/β}` removes the endpoint singularity.
pub fn caputo_linear_ode<G: Fn(f64) -> f64>(beta: f64, lambda: f64, phi: f64, g: G, t: f64, a: f64, tol: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        bail!(Domain, "order {beta} outside (0, 1)");
    }
    if !(t >= a) {
        bail!(Domain, "t = {t} precedes a = {a}");
    }
    if t == a {
        return Ok(phi);
    }
    let span = t - a;
    let sb = span.powf(beta);
    let head = phi * ml_direct(beta, 1.0, lambda * sb);
    let (integral, _) = integrate(
        |w| {
            let y = span * w.powf(1.0 / beta);
            g(t - y) * ml_direct(beta, beta, lambda * sb * w)
        },
        0.0,
        1.0,
        QuadOpts::rel(tol),
    )?;
    Ok(head + integral * sb / beta)
}

/// Transition density of the order-1/2 stable subordinator with Laplace
/// exponent `√k`, in the potential normalisation
/// `∫₀^∞ p_s(z) ds = z^{−1/2}/Γ(1/2)`.
#[derive(Debug, Clone, Copy)]
pub struct LevyHalf {
    /// Worst deviation from unit mass over the checked `s`.
    pub mass_error: f64,
    /// Deviation of the potential integral at unit distance.
    pub potential_error: f64,
}

impl LevyHalf {
    pub fn new() -> Result<Self> {
        let opts = QuadOpts { abs_tol: 1e-13, rel_tol: 1e-12, max_pieces: 4000 };
        let mut mass_error: f64 = 0.0;
        for &s in &[0.1f64, 1.0, 10.0] {
            // z = e^v; the integrand decays like e^{−v/2} on the right.
            let c = (s * s).ln();
            let (m, _) = integrate(|v| Self::raw(s, v.exp()) * v.exp(), c - 12.0, c + 80.0, opts)?;
            mass_error = mass_error.max((m - 1.0).abs());
        }
        let (pot, _) = integrate_to_inf(|s| Self::raw(s, 1.0), 0.0, opts)?;
        let potential_error = (pot - 1.0 / SQRT_PI).abs();
        if mass_error > 1e-8 || potential_error > 1e-6 {
            bail!(Consistency, "order-1/2 density fails its self-checks ({mass_error:e}, {potential_error:e})");
        }
        Ok(LevyHalf { mass_error, potential_error })
    }

    fn raw(s: f64, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        s / (2.0 * SQRT_PI) * z.powf(-1.5) * (-s * s / (4.0 * z)).exp()
    }

    /// Density at `y` of the process started at `t` after operational time `s`.
    pub fn density(&self, s: f64, t: f64, y: f64) -> Result<f64> {
        if !(y > t) {
            bail!(Domain, "y = {y} must exceed t = {t}");
        }
        if !(s > 0.0) {
            bail!(Domain, "operational time must be positive");
        }
        Ok(Self::raw(s, y - t))
    }
}

/// Convenience wrapper constructing [`LevyHalf`] on each call.
pub fn levy_half_oracle(s: f64, t: f64, y: f64) -> Result<f64> {
    LevyHalf::new()?.density(s, t, y)
}
