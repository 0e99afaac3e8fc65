//! Truncated-exponential input model under peak and average intensity
//! constraints.
//!
//! Each LED input lives on `[-A, A]` with density proportional to
//! `exp(-mu * (x + A) / (2A))`. The rate parameter `mu` is fixed by the
//! normalized mean `alpha = (E + A) / (2A)` through
//! `g(mu) = 1/mu - e^{-mu} / (1 - e^{-mu}) = alpha`.
//!
//! Every closed form here is rewritten through the Langevin function
//! `L(x) = coth(x) - 1/x`, which is odd and has a convergent series at zero:
//!
//! * `g(mu) = 1/2 - L(mu/2) / 2`
//! * `p = 2A^2 / (pi e) * exp(-2 beta mu) * sinhc(mu/2)^2`
//! * `v = A^2 * (4 alpha (1 - alpha) - 2 L(mu/2) / (mu/2))`
//!
//! with `beta = alpha - 1/2`. Both `p` and `v` are even under
//! `(alpha, mu) -> (1 - alpha, -mu)`.

use std::f64::consts::{E, PI};

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Default tolerance on `|g(mu) - alpha|` used by [`build_profile`].
pub const MU_TOLERANCE: f64 = 1e-12;

/// Below this magnitude of `x = mu/2` the Langevin function is summed from
/// its Taylor series.
const SERIES_THRESHOLD: f64 = 0.5;

/// Taylor coefficients `c_n = 2^{2n} B_{2n} / (2n)!` of
/// `L(x) = sum_n c_n x^{2n-1}`.
const LANGEVIN_SERIES: [f64; 10] = [
    1.0 / 3.0,
    -1.0 / 45.0,
    2.0 / 945.0,
    -1.0 / 4725.0,
    2.0 / 93555.0,
    -1382.0 / 638512875.0,
    4.0 / 18243225.0,
    -65536.0 * 3617.0 / (510.0 * 20922789888000.0),
    262144.0 * 43867.0 / (798.0 * 6402373705728000.0),
    -1048576.0 * 174611.0 / (330.0 * 2432902008176640000.0),
];

/// `L(x) / x`, finite at zero (limit 1/3).
fn langevin_over_x(x: f64) -> f64 {
    if x.abs() < SERIES_THRESHOLD {
        let x2 = x * x;
        LANGEVIN_SERIES
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * x2 + c)
    } else {
        (1.0 / x.tanh() - 1.0 / x) / x
    }
}

fn langevin(x: f64) -> f64 {
    if x.abs() < SERIES_THRESHOLD {
        x * langevin_over_x(x)
    } else {
        1.0 / x.tanh() - 1.0 / x
    }
}

/// `L'(x) = 1/x^2 - 1/sinh(x)^2`.
fn langevin_derivative(x: f64) -> f64 {
    if x.abs() < SERIES_THRESHOLD {
        let x2 = x * x;
        let mut acc = 0.0;
        for (n, &c) in LANGEVIN_SERIES.iter().enumerate().rev() {
            acc = acc * x2 + (2 * n + 1) as f64 * c;
        }
        acc
    } else {
        let s = x.sinh();
        1.0 / (x * x) - 1.0 / (s * s)
    }
}

/// `ln(sinh(x) / x)`.
fn ln_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else if a > 20.0 {
        a - std::f64::consts::LN_2 - a.ln() + (-(-2.0 * a).exp()).ln_1p()
    } else {
        (a.sinh() / a).ln()
    }
}

/// Mean of the normalized truncated exponential on `[0, 1]` with rate `mu`.
///
/// Strictly decreasing from 1 (at `-inf`) through 1/2 (at 0) to 0 (at `+inf`).
pub fn mean_map(mu: f64) -> f64 {
    0.5 - 0.5 * langevin(0.5 * mu)
}

/// Derivative of [`mean_map`].
pub fn mean_map_derivative(mu: f64) -> f64 {
    -0.25 * langevin_derivative(0.5 * mu)
}

/// Normalized means must lie strictly inside (0, 1).
pub fn check_alpha(index: usize, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaDomain { index, value })
    }
}

/// Solves `g(mu) = alpha_i` for the truncated-exponential rate parameter.
///
/// Returns exactly zero at `alpha_i = 1/2`. Otherwise the root is bracketed
/// by geometric expansion of `[-1, 1]`, bisected, and polished with one
/// Newton step.
pub fn solve_mu(alpha_i: f64, tol: f64) -> Result<f64> {
    check_alpha(0, alpha_i)?;
    if !(tol > 0.0) {
        return Err(Error::Tolerance(tol));
    }
    if alpha_i == 0.5 {
        return Ok(0.0);
    }
    if alpha_i > 0.5 {
        // g(-mu) = 1 - g(mu)
        return solve_mu(1.0 - alpha_i, tol).map(|mu| -mu);
    }

    // alpha < 1/2 puts the root on the positive axis.
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while mean_map(hi) > alpha_i {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 1100 || !hi.is_finite() {
            return Err(Error::AlphaDomain {
                index: 0,
                value: alpha_i,
            });
        }
    }

    let mut mu = 0.5 * (lo + hi);
    for _ in 0..400 {
        mu = 0.5 * (lo + hi);
        let r = mean_map(mu) - alpha_i;
        if r.abs() <= 1e-3 * tol {
            break;
        }
        if r > 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }

    let r = mean_map(mu) - alpha_i;
    let slope = mean_map_derivative(mu);
    if slope != 0.0 {
        let polished = mu - r / slope;
        if polished > 0.0 && (mean_map(polished) - alpha_i).abs() < r.abs() {
            mu = polished;
        }
    }
    Ok(mu)
}

/// Entropy power `e^{2h(X_i)} / (2 pi e)` of one truncated-exponential input.
pub fn entropy_power_coeff(amplitude: f64, alpha_i: f64, mu_i: f64) -> f64 {
    let beta = alpha_i - 0.5;
    let log_shape = 2.0 * beta * mu_i + 2.0 * ln_sinhc(0.5 * mu_i);
    2.0 * amplitude * amplitude / (PI * E) * log_shape.exp()
}

/// Variance of one truncated-exponential input.
pub fn variance_coeff(amplitude: f64, alpha_i: f64, mu_i: f64) -> f64 {
    let spread = 4.0 * alpha_i * (1.0 - alpha_i) - 2.0 * langevin_over_x(0.5 * mu_i);
    amplitude * amplitude * spread
}

/// Per-LED input statistics entering the closed-form rates.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityProfile {
    pub amplitude: f64,
    pub alpha: DVector<f64>,
    pub mu: DVector<f64>,
    /// `alpha - 1/2`
    pub beta: DVector<f64>,
    /// Entropy powers.
    pub p: DVector<f64>,
    /// Variances.
    pub v: DVector<f64>,
}

impl IntensityProfile {
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    /// Profile restricted to the given LED indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> IntensityProfile {
        let pick = |x: &DVector<f64>| DVector::from_iterator(indices.len(), indices.iter().map(|&i| x[i]));
        IntensityProfile {
            amplitude: self.amplitude,
            alpha: pick(&self.alpha),
            mu: pick(&self.mu),
            beta: pick(&self.beta),
            p: pick(&self.p),
            v: pick(&self.v),
        }
    }
}

/// Builds the profile for peak amplitude `amplitude` and normalized means `alpha`.
pub fn build_profile(amplitude: f64, alpha: &[f64]) -> Result<IntensityProfile> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(Error::Amplitude(amplitude));
    }
    let n = alpha.len();
    let mut mu = DVector::zeros(n);
    for (i, &a) in alpha.iter().enumerate() {
        check_alpha(i, a)?;
        mu[i] = solve_mu(a, MU_TOLERANCE).map_err(|_| Error::AlphaDomain { index: i, value: a })?;
    }
    let alpha = DVector::from_column_slice(alpha);
    let beta = alpha.map(|a| a - 0.5);
    let p = DVector::from_fn(n, |i, _| entropy_power_coeff(amplitude, alpha[i], mu[i]));
    let v = DVector::from_fn(n, |i, _| variance_coeff(amplitude, alpha[i], mu[i]));
    Ok(IntensityProfile {
        amplitude,
        alpha,
        mu,
        beta,
        p,
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle;
    use proptest::prelude::*;

    const UNIFORM_P: f64 = 2.0 / (PI * E);

    #[test]
    fn uniform_limit_is_exact_zero() {
        assert_eq!(solve_mu(0.5, 1e-12).unwrap(), 0.0);
        assert!((entropy_power_coeff(1.0, 0.5, 0.0) - UNIFORM_P).abs() < 1e-15);
        assert!((variance_coeff(1.0, 0.5, 0.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((UNIFORM_P - 0.23420).abs() < 1e-5);
    }

    #[test]
    fn mu_matches_bisection_oracle() {
        let mu = solve_mu(0.2, 1e-12).unwrap();
        let expected = oracle::bisect_mu(0.2);
        assert!((mu - expected).abs() < 1e-9, "{mu} vs {expected}");
        assert!((oracle::mean_of_mu(mu) - 0.2).abs() <= 1e-12);

        let mirrored = solve_mu(0.8, 1e-12).unwrap();
        assert!((mirrored + mu).abs() < 1e-10);
        assert!((mirrored - oracle::bisect_mu(0.8)).abs() < 1e-9);
    }

    #[test]
    fn rejects_alpha_outside_open_interval() {
        for bad in [0.0, 1.0, -0.1, 1.2, f64::NAN] {
            assert!(matches!(solve_mu(bad, 1e-12), Err(Error::AlphaDomain { .. })));
        }
        let err = build_profile(1.0, &[0.3, 1.0]).unwrap_err();
        assert_eq!(err, Error::AlphaDomain { index: 1, value: 1.0 });
        assert!(matches!(build_profile(0.0, &[0.5]), Err(Error::Amplitude(_))));
    }

    #[test]
    fn amplitude_scales_quadratically() {
        let mu = solve_mu(0.3, 1e-12).unwrap();
        let a = 3.7;
        let p1 = entropy_power_coeff(1.0, 0.3, mu);
        let v1 = variance_coeff(1.0, 0.3, mu);
        assert!((entropy_power_coeff(a, 0.3, mu) - a * a * p1).abs() < 1e-12 * a * a);
        assert!((variance_coeff(a, 0.3, mu) - a * a * v1).abs() < 1e-12 * a * a);

        let prof = build_profile(2.0, &[0.5]).unwrap();
        assert!((prof.p[0] - 4.0 * UNIFORM_P).abs() < 1e-14);
        assert!((prof.v[0] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn profile_examples() {
        let prof = build_profile(1.0, &[0.5, 0.5]).unwrap();
        for i in 0..2 {
            assert!((prof.p[i] - UNIFORM_P).abs() < 1e-12);
            assert!((prof.v[i] - 1.0 / 3.0).abs() < 1e-12);
        }
        let prof = build_profile(1.0, &[0.3, 0.7]).unwrap();
        assert!((prof.p[0] - prof.p[1]).abs() < 1e-12);
        assert!((prof.v[0] - prof.v[1]).abs() < 1e-12);
        assert!((prof.p[0] - oracle::entropy_power_by_quadrature(1.0, 0.3)).abs() < 1e-7);
        assert!((prof.v[1] - oracle::variance_by_quadrature(1.0, 0.7)).abs() < 1e-7);
        assert!((prof.beta[0] + 0.2).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for alpha in [0.1, 0.25, 0.3, 0.4, 0.5, 0.6, 0.9] {
            let mu = solve_mu(alpha, 1e-12).unwrap();
            let p = entropy_power_coeff(1.0, alpha, mu);
            let v = variance_coeff(1.0, alpha, mu);
            let pq = oracle::entropy_power_by_quadrature(1.0, alpha);
            let vq = oracle::variance_by_quadrature(1.0, alpha);
            assert!(((p - pq) / pq).abs() < 1e-6, "p alpha={alpha}: {p} vs {pq}");
            assert!(((v - vq) / vq).abs() < 1e-6, "v alpha={alpha}: {v} vs {vq}");
        }
    }

    #[test]
    fn series_and_direct_branches_agree_at_threshold() {
        for x in [SERIES_THRESHOLD * (1.0 - 1e-12), SERIES_THRESHOLD * (1.0 + 1e-12)] {
            let direct = 1.0 / x.tanh() - 1.0 / x;
            assert!((langevin(x) - direct).abs() < 1e-15);
        }
        let x: f64 = 0.49;
        let s = x.sinh();
        let direct = 1.0 / (x * x) - 1.0 / (s * s);
        assert!((langevin_derivative(x) - direct).abs() < 1e-13);
    }

    #[test]
    fn mean_map_derivative_matches_finite_difference() {
        for mu in [-30.0, -2.0, -0.3, 0.0, 0.7, 1.5, 12.0] {
            let h = 1e-5;
            let fd = (mean_map(mu + h) - mean_map(mu - h)) / (2.0 * h);
            assert!((mean_map_derivative(mu) - fd).abs() < 1e-8, "mu={mu}");
        }
    }

    proptest! {
        #[test]
        fn mean_map_is_strictly_decreasing(a in -50.0f64..50.0, d in 1e-3f64..5.0) {
            prop_assert!(mean_map(a + d) < mean_map(a));
        }

        #[test]
        fn profile_bounds_and_symmetry(alpha in 0.01f64..0.99, amp in 0.1f64..100.0) {
            let prof = build_profile(amp, &[alpha, 1.0 - alpha]).unwrap();
            let a2 = amp * amp;
            for i in 0..2 {
                prop_assert!(prof.p[i] > 0.0);
                prop_assert!(prof.p[i] <= prof.v[i]);
                prop_assert!(prof.v[i] <= a2);
            }
            prop_assert!(((prof.p[0] - prof.p[1]) / a2).abs() < 1e-10);
            prop_assert!(((prof.v[0] - prof.v[1]) / a2).abs() < 1e-10);
            prop_assert!((mean_map(prof.mu[0]) - alpha).abs() <= MU_TOLERANCE);
            prop_assert!(prof.mu[0].signum() == (0.5 - alpha).signum() || alpha == 0.5);
        }
    }
}
