//! Scalar special functions shared by the catalog, the gradients and the
//! stochastic helpers.

use std::f64::consts::{PI, SQRT_2};

/// Logistic sigmoid, evaluated without overflow on either tail.
#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)`, stable for large |x|.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Standard normal CDF. Uses `erfc` so the lower tail keeps full relative
/// precision.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn sech(x: f64) -> f64 {
    // 1/cosh overflows gracefully to 0 for |x| > ~710.
    1.0 / x.cosh()
}

/// Low-discrepancy points in `[lo, hi)` from the golden-ratio Weyl sequence.
pub fn quasi_random(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    const G: f64 = 0.618_033_988_749_894_9;
    (0..n)
        .map(|i| {
            let u = (0.5 + G * i as f64).fract();
            lo + (hi - lo) * u
        })
        .collect()
}

/// Golden-section search for the minimiser of a unimodal `f` on `[a, b]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
