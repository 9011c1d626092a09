#![allow(clippy::excessive_precision)]
//! Adaptive Gauss-Kronrod quadrature.

use crate::error::{bail, Result};
use crate::prelude::*;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = hw * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Piece {
        a,
        b,
        value: kron * hw,
        err: ((kron - gauss) * hw).abs(),
    }
}

/// Tolerances and subdivision limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_pieces: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_pieces: 4000,
        }
    }
}

impl QuadOpts {
    pub fn rel(rel_tol: f64) -> Self {
        QuadOpts {
            rel_tol,
            ..Self::default()
        }
    }
}

/// Integrates `f` over `[a, b]`, splitting the worst piece until the summed
/// error estimate meets the tolerance. Returns `(value, error estimate)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadOpts) -> Result<(f64, f64)> {
    if a == b {
        return Ok((0.0, 0.0));
    }
    let mut pieces: Vec<Piece> = vec![gk15(&mut f, a, b)];
    loop {
        let total: f64 = pieces.iter().map(|p| p.value).sum();
        let err: f64 = pieces.iter().map(|p| p.err).sum();
        if !total.is_finite() || !err.is_finite() {
            bail!(Integration, "non-finite integrand on [{a}, {b}]");
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return Ok((total, err));
        }
        if pieces.len() >= opts.max_pieces {
            bail!(
                Integration,
                "no convergence on [{a}, {b}]: estimate {total:e}, error {err:e}"
            );
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.err > acc.1 { (i, p.err) } else { acc });
        let p = pieces.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            bail!(Integration, "interval collapsed near {mid}");
        }
        pieces.push(gk15(&mut f, p.a, mid));
        pieces.push(gk15(&mut f, mid, p.b));
    }
}

/// Integrates `f` over `[a, ∞)` via `x = a + u/(1−u)`.
pub fn integrate_to_inf<F: FnMut(f64) -> f64>(mut f: F, a: f64, opts: QuadOpts) -> Result<(f64, f64)> {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[cfg(not(feature = "std"))]
    use crate::prelude::Float;

    #[test]
    fn polynomial_and_exp() {
        let (v, _) = integrate(|x| x * x, 0.0, 3.0, QuadOpts::default()).unwrap();
        assert_relative_eq!(v, 9.0, max_relative = 1e-14);
        let (v, _) = integrate(|x: f64| x.exp(), 0.0, 1.0, QuadOpts::default()).unwrap();
        assert_relative_eq!(v, core::f64::consts::E - 1.0, max_relative = 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫_0^1 x^{-1/2} dx = 2
        let (v, _) = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, QuadOpts::rel(1e-9)).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn semi_infinite() {
        let (v, _) = integrate_to_inf(|x: f64| (-x).exp(), 0.0, QuadOpts::default()).unwrap();
        assert_relative_eq!(v, 1.0, max_relative = 1e-11);
    }

    #[test]
    fn divergent_reports_error() {
        assert!(integrate(|x: f64| 1.0 / x, 0.0, 1.0, QuadOpts::default()).is_err());
    }
}
