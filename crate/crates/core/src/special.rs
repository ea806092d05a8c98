//! Special functions needed by the closed-form vacuum transforms.

use std::f64::consts::PI;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `exp(-x²) + √π·x·erfc(-x)`, i.e. `√π` times the first repeated integral of
/// `erfc` evaluated at `-x`.
///
/// For large negative `x` the two terms cancel to leading order, so that
/// branch goes through the Laplace continued fraction of `erfc` instead.
pub fn gaussian_ramp(x: f64) -> f64 {
    if x >= -2.0 {
        (-x * x).exp() + PI.sqrt() * x * erfc(-x)
    } else {
        let y = -x;
        // erfc(y) = exp(-y²)/√π · 1/(y + R),  R = (1/2)/(y + (2/2)/(y + (3/2)/(y + …)))
        // so exp(-y²) - √π·y·erfc(y) = exp(-y²)·R/(y + R).
        let mut tail = 0.0;
        for n in (1..=CF_DEPTH).rev() {
            tail = (n as f64 / 2.0) / (y + tail);
        }
        (-y * y).exp() * tail / (y + tail)
    }
}

const CF_DEPTH: usize = 400;

#[cfg(test)]
mod tests {
    use super::*;

    // exp(-y²) - √π·y·erfc(y), 50-digit reference values
    const REFERENCE: &[(f64, f64)] = &[
        (0.1, 0.8327379815166837209),
        (0.5, 0.35385486403143930335),
        (1.0, 0.089073855890780345096),
        (1.5, 0.015283629078293479323),
        (1.999, 0.0017418095368506392802),
        (2.0, 0.0017335001273888455673),
        (2.5, 0.00012719496009249371806),
        (3.0, 5.9466446660010219027e-6),
        (5.0, 2.62561198732153578e-13),
        (10.0, 1.8328115612557042706e-46),
        (20.0, 2.3850402613913981464e-177),
        (26.0, 1.9274909751069167092e-297),
    ];

    #[test]
    fn ramp_matches_high_precision_reference() {
        for &(y, expected) in REFERENCE {
            let got = gaussian_ramp(-y);
            let rel = (got - expected).abs() / expected;
            assert!(rel < 1e-13, "y = {y}: got {got:e}, want {expected:e}, rel {rel:e}");
        }
    }

    #[test]
    fn ramp_positive_branch_has_no_cancellation() {
        // for x ≫ 1 the ramp approaches 2√π·x
        let x = 12.0;
        assert!((gaussian_ramp(x) / (2.0 * PI.sqrt() * x) - 1.0).abs() < 1e-15);
        assert!((gaussian_ramp(0.0) - 1.0).abs() < 1e-15);
    }
}
