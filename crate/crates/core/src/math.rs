//! Scalar special functions used by the gate implementations.
//!
//! `erf` is evaluated in-crate (Maclaurin series below the crossover point,
//! Lentz continued fraction for the complement above it) so the library
//! carries no external math dependency. Accuracy is a few ulp across the
//! whole real line; the test suite pins it against an independent
//! Gauss-Legendre quadrature of the defining integral.

use std::f64::consts::FRAC_2_SQRT_PI;

/// Series/continued-fraction crossover. Below this the alternating series
/// has negligible cancellation; above it the erfc fraction converges fast.
const ERF_CROSSOVER: f64 = 1.25;

/// erfc underflows past the point where `1 - erfc` still rounds to 1.
const ERF_SATURATION: f64 = 6.5;

/// Numerically stable logistic sigmoid 1 / (1 + exp(-z)).
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Error function erf(x) = 2/sqrt(pi) * integral of exp(-t^2) over [0, x].
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return x;
    }
    let a = x.abs();
    let magnitude = if a >= ERF_SATURATION {
        1.0
    } else if a < ERF_CROSSOVER {
        erf_series(a)
    } else {
        1.0 - erfc_fraction(a)
    };
    magnitude.copysign(x)
}

/// Alternating Maclaurin series with compensated summation.
fn erf_series(x: f64) -> f64 {
    let xx = x * x;
    // term_n = (-1)^n x^(2n+1) / n!; each contribution divides by (2n+1).
    let mut term = x;
    let mut sum = x;
    let mut comp = 0.0;
    let mut n = 1.0;
    loop {
        term *= -xx / n;
        let contrib = term / (2.0 * n + 1.0);
        // Kahan update.
        let y = contrib - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if contrib.abs() <= sum.abs() * 1e-17 {
            break;
        }
        n += 1.0;
        debug_assert!(n < 200.0, "erf series failed to converge at x = {x}");
    }
    FRAC_2_SQRT_PI * sum
}

/// erfc(x) for x > 0 via the classical continued fraction
/// sqrt(pi) exp(x^2) erfc(x) = 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
/// evaluated with the modified Lentz algorithm.
fn erfc_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = TINY;
    let mut d = 0.0;
    for n in 1..400 {
        let a = if n == 1 { 1.0 } else { (n as f64 - 1.0) / 2.0 };
        d = x + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = x + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-17 {
            break;
        }
    }
    (-x * x).exp() * (FRAC_2_SQRT_PI / 2.0) * f
}
