//! Small special-function helpers on top of (or missing from) `statrs`.

use statrs::distribution::{ContinuousCDF, Normal};

/// The standard-normal quantile z such that a central interval of
/// half-width z standard deviations has the given coverage level.
pub fn central_interval_z(level: f64) -> f64 {
    assert!((0.0..1.0).contains(&level), "level must be in (0, 1), got {level}");
    Normal::standard().inverse_cdf(0.5 + level / 2.0)
}

/// Trigamma function psi'(x) for x > 0.
///
/// Uses the recurrence psi'(x) = psi'(x+1) + 1/x^2 to shift the argument
/// above 10, then the standard asymptotic series in Bernoulli numbers.
/// Absolute accuracy is better than 1e-12 over the positive axis.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma requires x > 0, got {x}");
    let mut acc = 0.0;
    let mut z = x;
    while z < 10.0 {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    // psi'(z) ~ 1/z + 1/(2 z^2) + sum_k B_{2k} / z^{2k+1}
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let tail = inv
        * (1.0
            + inv * (0.5
                + inv * (1.0 / 6.0
                    + inv2 * (-1.0 / 30.0
                        + inv2 * (1.0 / 42.0 + inv2 * (-1.0 / 30.0 + inv2 * (5.0 / 66.0)))))));
    acc + tail
}
