//! Inner problem of the first dominant system of random band selection with two
//! users and two bands: for a fixed probability `g21` that user 1 picks band 2,
//! choose the probability `g22` that user 2 picks band 2 to maximize
//!
//! ```text
//!     (g22 * k1 - k2) / (d + c * g22)    subject to    lambda_s2 - d <= g22 * c,  0 <= g22 <= 1
//! ```
//!
//! The denominator is user 2's service rate with user 1 saturated. The derivative has the
//! sign of `k2 * c + d * k1` everywhere, so the optimum sits at one end of the feasible interval.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalCoeffs {
    pub k1: f64,
    pub k2: f64,
    pub c: f64,
    pub d: f64,
    pub lambda_s2: f64,
    pub gamma21: f64,
}

impl FractionalCoeffs {
    /// Coefficients for service rates `mu = [[mu11, mu12], [mu21, mu22]]`
    /// (`mu[band][user]`), user 2's arrival rate and a fixed `gamma21`.
    pub fn from_rates(mu: &[[f64; 2]; 2], lambda_s2: f64, gamma21: f64) -> Self {
        let [[mu11, mu12], [mu21, mu22]] = *mu;
        let g21_bar = 1.0 - gamma21;
        FractionalCoeffs {
            k1: g21_bar * mu11 - gamma21 * mu21,
            k2: g21_bar * mu11,
            c: g21_bar * mu22 - gamma21 * mu12,
            d: gamma21 * mu12,
            lambda_s2,
            gamma21,
        }
    }

    /// Sign-carrying numerator of the objective's derivative.
    pub fn derivative_numerator(&self) -> f64 {
        self.k2 * self.c + self.d * self.k1
    }

    /// Whether `g22` satisfies the service constraint `lambda_s2 <= d + c * g22`.
    pub fn is_feasible(&self, g22: f64) -> bool {
        (0.0..=1.0).contains(&g22) && self.lambda_s2 - self.d <= g22 * self.c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionalOutcome {
    Optimal { gamma22: f64 },
    Infeasible,
}

impl FractionalOutcome {
    pub fn gamma22(self) -> Option<f64> {
        match self {
            FractionalOutcome::Optimal { gamma22 } => Some(gamma22),
            FractionalOutcome::Infeasible => None,
        }
    }
}

pub fn fractional_objective(coeffs: &FractionalCoeffs, gamma22: f64) -> f64 {
    (gamma22 * coeffs.k1 - coeffs.k2) / (coeffs.d + coeffs.c * gamma22)
}

/// Case analysis on the derivative sign, `c` and `lambda_s2 - d`.
///
/// Combinations the analysis leaves open (zero derivative, `c == 0`, or
/// `lambda_s2 == d` with `c < 0`) are resolved by the same end-point logic: a flat
/// objective takes the lowest feasible `g22`.
pub fn maximize_fractional_1d(coeffs: &FractionalCoeffs) -> FractionalOutcome {
    use FractionalOutcome::{Infeasible, Optimal};

    let slack = coeffs.lambda_s2 - coeffs.d;
    let c = coeffs.c;
    let increasing = coeffs.derivative_numerator() > 0.0;

    if c > 0.0 {
        let bound = slack / c;
        if bound > 1.0 {
            return Infeasible;
        }
        let gamma22 = if increasing { 1.0 } else { bound.max(0.0) };
        Optimal { gamma22 }
    } else if c < 0.0 {
        if slack > 0.0 {
            return Infeasible;
        }
        // g22 <= slack / c, which is non-negative here.
        let gamma22 = if increasing { (slack / c).min(1.0) } else { 0.0 };
        Optimal { gamma22 }
    } else {
        if slack > 0.0 {
            return Infeasible;
        }
        Optimal {
            gamma22: if increasing { 1.0 } else { 0.0 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const FIG3: [[f64; 2]; 2] = [[0.175, 0.2125], [0.7, 0.7875]];

    #[test]
    fn figure3_hand_evaluation() {
        let coeffs = FractionalCoeffs::from_rates(&FIG3, 0.3, 0.6);
        assert_abs_diff_eq!(coeffs.c, 0.1875, epsilon = 1e-12);
        assert_abs_diff_eq!(coeffs.derivative_numerator(), -0.0315, epsilon = 1e-12);
        let g22 = maximize_fractional_1d(&coeffs).gamma22().unwrap();
        assert_abs_diff_eq!(g22, 0.92, epsilon = 1e-12);
    }

    #[test]
    fn zero_competing_load_takes_lowest_end() {
        // derivative negative, c > 0, lambda_s2 = 0 -> max(-d / c, 0) = 0
        let coeffs = FractionalCoeffs::from_rates(&FIG3, 0.0, 0.6);
        assert!(coeffs.derivative_numerator() < 0.0 && coeffs.c > 0.0);
        assert_eq!(maximize_fractional_1d(&coeffs), FractionalOutcome::Optimal { gamma22: 0.0 });
    }

    #[test]
    fn positive_c_with_unreachable_load_is_infeasible() {
        let coeffs = FractionalCoeffs::from_rates(&FIG3, 0.7, 0.6);
        assert!(coeffs.c > 0.0 && (coeffs.lambda_s2 - coeffs.d) / coeffs.c > 1.0);
        assert_eq!(maximize_fractional_1d(&coeffs), FractionalOutcome::Infeasible);
    }

    #[test]
    fn negative_c_branches() {
        // gamma21 = 0.9: c = 0.1*0.7875 - 0.9*0.2125 < 0
        let coeffs = FractionalCoeffs::from_rates(&FIG3, 0.1, 0.9);
        assert!(coeffs.c < 0.0 && coeffs.lambda_s2 < coeffs.d);
        let g = maximize_fractional_1d(&coeffs).gamma22().unwrap();
        assert!(coeffs.is_feasible(g));
        let over = FractionalCoeffs::from_rates(&FIG3, 0.5, 0.9);
        assert_eq!(maximize_fractional_1d(&over), FractionalOutcome::Infeasible);
    }

    #[test]
    fn matches_dense_scan() {
        // Hand-picked instances covering both derivative signs and both signs of c.
        let cases = [
            ([[0.3, 0.5], [0.6, 0.2]], 0.1, 0.3),
            ([[0.9, 0.1], [0.2, 0.8]], 0.2, 0.7),
            ([[0.4, 0.4], [0.4, 0.4]], 0.05, 0.5),
            ([[0.8, 0.6], [0.1, 0.3]], 0.25, 0.2),
        ];
        for (mu, lam, g21) in cases {
            let coeffs = FractionalCoeffs::from_rates(&mu, lam, g21);
            let mut best: Option<(f64, f64)> = None;
            for i in 0..=10_000 {
                let g = i as f64 / 10_000.0;
                if !coeffs.is_feasible(g) {
                    continue;
                }
                let v = fractional_objective(&coeffs, g);
                if best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            match (maximize_fractional_1d(&coeffs), best) {
                (FractionalOutcome::Optimal { gamma22 }, Some((_, bv))) => {
                    assert!(fractional_objective(&coeffs, gamma22) >= bv - 1e-9);
                }
                (FractionalOutcome::Infeasible, None) => {}
                (got, scan) => panic!("{got:?} vs {scan:?}"),
            }
        }
    }
}
