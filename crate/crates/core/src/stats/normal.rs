use std::f64::consts::SQRT_2;

use statrs::function::erf::erfc_inv;

/// Φ(x), the standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Φ⁻¹(p) for `p` in (0, 1).
pub fn std_normal_quantile(p: f64) -> f64 {
    let x = -SQRT_2 * erfc_inv(2.0 * p);
    if !x.is_finite() {
        return x;
    }
    // one Halley step against the accurate CDF
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density == 0.0 {
        return x;
    }
    let r = (std_normal_cdf(x) - p) / density;
    x - r / (1.0 + 0.5 * x * r)
}
