//! Standard normal distribution function and tail-accurate interval masses.

use std::f64::consts::SQRT_2;

/// `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `Q(x) = 1 − Φ(x)`, accurate in the upper tail.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `P(lo < Z < hi)` for standard normal `Z`, computed from whichever tail
/// avoids cancellation.
pub fn normal_interval(lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let p = if lo >= 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else if hi <= 0.0 {
        normal_cdf(hi) - normal_cdf(lo)
    } else {
        1.0 - normal_cdf(lo) - normal_sf(hi)
    };
    p.clamp(0.0, 1.0)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q > 0.0 { -q * q.log2() } else { 0.0 };
    term(p) + term(1.0 - p)
}
