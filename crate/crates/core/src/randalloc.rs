//! Random band selection: each backlogged user independently picks band `j` with
//! probability `gamma[j][k]`, and a band chosen by two backlogged users carries no packet.
//!
//! Exact regions are only available for two users, through dominant systems in which one
//! user keeps transmitting even with an empty queue. The union of the two dominant
//! regions is the stability region.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RateMatrix;
use crate::optim::{fractional_objective, maximize_fractional_1d, FractionalCoeffs};

/// Margin applied to strict region inequalities.
pub const STRICT_MARGIN: f64 = 1e-9;
const GAMMA_STEP: f64 = 1e-3;
const GOLDEN_ITERS: usize = 60;
const INVERSE_ITERS: usize = 60;

/// `gamma[j][k]`: probability user `k` picks band `j`. Leftover column mass is the
/// probability of staying silent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMatrix {
    gamma: Vec<Vec<f64>>,
}

impl SelectionMatrix {
    pub fn new(gamma: Vec<Vec<f64>>) -> Result<Self> {
        let n_users = gamma.first().map_or(0, Vec::len);
        if gamma.is_empty() || n_users == 0 || gamma.iter().any(|r| r.len() != n_users) {
            return Err(Error::dimension("selection matrix must be a non-empty rectangle"));
        }
        if gamma.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("selection probabilities must lie in [0, 1]"));
        }
        for k in 0..n_users {
            let col: f64 = gamma.iter().map(|r| r[k]).sum();
            if col > 1.0 + STRICT_MARGIN {
                return Err(Error::input(format!(
                    "selection probabilities of user {} sum to {col}",
                    k + 1
                )));
            }
        }
        Ok(SelectionMatrix { gamma })
    }

    fn from_2x2(g: [[f64; 2]; 2]) -> Self {
        SelectionMatrix {
            gamma: g.iter().map(|r| r.iter().map(|v| v.clamp(0.0, 1.0)).collect()).collect(),
        }
    }

    fn first_rows(mut self, n: usize) -> Self {
        self.gamma.truncate(n);
        self
    }

    pub fn n_bands(&self) -> usize {
        self.gamma.len()
    }

    pub fn n_users(&self) -> usize {
        self.gamma[0].len()
    }

    pub fn get(&self, band: usize, user: usize) -> f64 {
        self.gamma[band][user]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.gamma
    }

    /// Band chosen by user `k` for one slot (0-based), `None` for silence. One draw.
    pub fn sample_band<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Option<usize> {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (j, row) in self.gamma.iter().enumerate() {
            acc += row[k];
            if u < acc {
                return Some(j);
            }
        }
        None
    }
}

/// Mean service rate of backlogged user `k` when the users in `nonempty` are backlogged
/// too: it must pick a band that is idle and that no other backlogged user picks.
pub fn conditional_service_rate(
    gamma: &SelectionMatrix,
    nonempty: &[usize],
    rates: &RateMatrix,
    k: usize,
) -> Result<f64> {
    if gamma.n_bands() != rates.n_bands() || gamma.n_users() != rates.n_users() {
        return Err(Error::dimension("selection matrix and rate matrix differ in shape"));
    }
    if k >= rates.n_users() || nonempty.iter().any(|&v| v >= rates.n_users()) {
        return Err(Error::dimension("user index out of range"));
    }
    if !nonempty.contains(&k) {
        return Err(Error::input(format!("user {} is not in the backlogged set", k + 1)));
    }
    Ok((0..rates.n_bands())
        .map(|j| {
            let clear: f64 = nonempty
                .iter()
                .filter(|&&v| v != k)
                .map(|&v| 1.0 - gamma.get(j, v))
                .product();
            rates.mu[j][k] * gamma.get(j, k) * clear
        })
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dominant {
    /// User 1 always transmits.
    First,
    /// User 2 always transmits.
    Second,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantEnvelopePoint {
    pub fixed_lambda: f64,
    pub max_lambda: f64,
    pub gamma_star: SelectionMatrix,
    pub dominant: Dominant,
}

/// User 1's rate achievable in the first dominant system for given `gamma21`, or
/// `None` if user 2 cannot be served at `lambda_s2` for that `gamma21`.
fn dominant1_member(mu: &[[f64; 2]; 2], lambda_s2: f64, g21: f64) -> Option<(f64, f64)> {
    let coeffs = FractionalCoeffs::from_rates(mu, lambda_s2, g21);
    let g22 = maximize_fractional_1d(&coeffs).gamma22()?;
    let base = (1.0 - g21) * mu[0][0] + g21 * mu[1][0];
    let lambda = if lambda_s2 == 0.0 {
        base
    } else {
        base + lambda_s2 * fractional_objective(&coeffs, g22)
    };
    lambda.is_finite().then_some((lambda.max(0.0), g22))
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximum stable rate of user 1 in the first dominant system with user 2 at
/// `lambda_s2`. `Ok(None)` when no selection probabilities serve user 2 at that rate.
pub fn dominant1_envelope_2x2(mu: &[[f64; 2]; 2], lambda_s2: f64) -> Result<Option<DominantEnvelopePoint>> {
    check_2x2(mu)?;
    if !(lambda_s2.is_finite() && lambda_s2 >= 0.0) {
        return Err(Error::input("arrival rate must be non-negative"));
    }
    if lambda_s2 > mu[0][1].max(mu[1][1]) {
        return Ok(None);
    }
    let steps = (1.0 / GAMMA_STEP).round() as usize;
    let mut best: Option<(f64, f64, f64)> = None; // (lambda, g21, g22)
    for i in 0..=steps {
        let g21 = i as f64 / steps as f64;
        if let Some((lambda, g22)) = dominant1_member(mu, lambda_s2, g21) {
            if best.is_none_or(|b| lambda > b.0) {
                best = Some((lambda, g21, g22));
            }
        }
    }
    let Some(mut best) = best else {
        return Ok(None);
    };
    let lo = (best.1 - GAMMA_STEP).max(0.0);
    let hi = (best.1 + GAMMA_STEP).min(1.0);
    let value = |g: f64| dominant1_member(mu, lambda_s2, g).map_or(f64::NEG_INFINITY, |v| v.0);
    let (g21, lambda) = golden_max(value, lo, hi);
    if lambda > best.0 {
        if let Some((lambda, g22)) = dominant1_member(mu, lambda_s2, g21) {
            best = (lambda, g21, g22);
        }
    }
    let (lambda, g21, g22) = best;
    Ok(Some(DominantEnvelopePoint {
        fixed_lambda: lambda_s2,
        max_lambda: lambda,
        gamma_star: SelectionMatrix::from_2x2([[1.0 - g21, 1.0 - g22], [g21, g22]]),
        dominant: Dominant::First,
    }))
}

fn swap_users(mu: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[mu[0][1], mu[0][0]], [mu[1][1], mu[1][0]]]
}

/// Maximum stable rate of user 2 in the second dominant system with user 1 at
/// `lambda_s1`; the mirror image of [`dominant1_envelope_2x2`].
pub fn dominant2_envelope_2x2(mu: &[[f64; 2]; 2], lambda_s1: f64) -> Result<Option<DominantEnvelopePoint>> {
    Ok(dominant1_envelope_2x2(&swap_users(mu), lambda_s1)?.map(|p| {
        let g = &p.gamma_star;
        DominantEnvelopePoint {
            gamma_star: SelectionMatrix::from_2x2([
                [g.get(0, 1), g.get(0, 0)],
                [g.get(1, 1), g.get(1, 0)],
            ]),
            dominant: Dominant::Second,
            ..p
        }
    }))
}

fn check_2x2(mu: &[[f64; 2]; 2]) -> Result<()> {
    if mu.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::input("service rates must lie in [0, 1]"));
    }
    Ok(())
}

/// Largest `x` in `[0, hi]` with `g(x) >= target`, for nonincreasing `g`.
fn invert_nonincreasing<G: Fn(f64) -> Result<Option<f64>>>(g: G, target: f64, hi: f64) -> Result<Option<f64>> {
    let meets = |x: f64| -> Result<bool> { Ok(g(x)?.is_some_and(|v| v >= target)) };
    if !meets(0.0)? {
        return Ok(None);
    }
    if meets(hi)? {
        return Ok(Some(hi));
    }
    let (mut lo, mut up) = (0.0, hi);
    for _ in 0..INVERSE_ITERS {
        let mid = 0.5 * (lo + up);
        if meets(mid)? {
            lo = mid;
        } else {
            up = mid;
        }
    }
    Ok(Some(lo))
}

/// Envelope of the union of both dominant regions: maximum rate of user `free` (0 or 1)
/// with the other user at `fixed`. The reported selection matrix belongs to whichever
/// dominant system attains the maximum.
pub fn envelope_2x2(mu: &[[f64; 2]; 2], free: usize, fixed: f64) -> Result<Option<DominantEnvelopePoint>> {
    let (own, other): (
        fn(&[[f64; 2]; 2], f64) -> Result<Option<DominantEnvelopePoint>>,
        fn(&[[f64; 2]; 2], f64) -> Result<Option<DominantEnvelopePoint>>,
    ) = match free {
        0 => (dominant1_envelope_2x2, dominant2_envelope_2x2),
        1 => (dominant2_envelope_2x2, dominant1_envelope_2x2),
        _ => return Err(Error::dimension(format!("free user index {free} out of range"))),
    };
    let direct = own(mu, fixed)?;
    let cap = mu[0][free].max(mu[1][free]);
    let inverse = invert_nonincreasing(|x| Ok(other(mu, x)?.map(|p| p.max_lambda)), fixed, cap)?;
    let via_other = match inverse {
        Some(x) => other(mu, x)?.map(|p| DominantEnvelopePoint {
            fixed_lambda: fixed,
            max_lambda: x,
            ..p
        }),
        None => None,
    };
    Ok(match (direct, via_other) {
        (Some(a), Some(b)) => Some(if b.max_lambda > a.max_lambda { b } else { a }),
        (a, b) => a.or(b),
    })
}

/// Strict membership in the two-user, two-band random-selection region.
pub fn region_2x2_check(mu: &[[f64; 2]; 2], lambdas: (f64, f64)) -> Result<bool> {
    let (l1, l2) = lambdas;
    if let Some(p) = dominant1_envelope_2x2(mu, l2)? {
        if l1 < p.max_lambda - STRICT_MARGIN {
            return Ok(true);
        }
    }
    if let Some(p) = dominant2_envelope_2x2(mu, l1)? {
        if l2 < p.max_lambda - STRICT_MARGIN {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Relative headroom of rate pair `lambdas` under `gamma`, judged through both dominant
/// systems: the larger of the two systems' smallest service-to-arrival ratios, minus one.
pub fn dominant_headroom(gamma: &SelectionMatrix, rates: &RateMatrix, lambdas: (f64, f64)) -> Result<f64> {
    if rates.n_users() != 2 {
        return Err(Error::dimension("headroom is defined for two users"));
    }
    let ratio = |service: f64, lambda: f64| if lambda > 0.0 { service / lambda } else { f64::INFINITY };
    let mut best = f64::NEG_INFINITY;
    for (sat, other) in [(0usize, 1usize), (1, 0)] {
        let l_sat = if sat == 0 { lambdas.0 } else { lambdas.1 };
        let l_other = if other == 0 { lambdas.0 } else { lambdas.1 };
        let crowded_other = conditional_service_rate(gamma, &[0, 1], rates, other)?;
        let p_busy = if l_other > 0.0 {
            if crowded_other > 0.0 {
                (l_other / crowded_other).min(1.0)
            } else {
                1.0
            }
        } else {
            0.0
        };
        let alone = conditional_service_rate(gamma, &[sat], rates, sat)?;
        let crowded = conditional_service_rate(gamma, &[0, 1], rates, sat)?;
        let sat_max = (1.0 - p_busy) * alone + p_busy * crowded;
        best = best.max(ratio(crowded_other, l_other).min(ratio(sat_max, l_sat)));
    }
    Ok(best - 1.0)
}

/// Selection probabilities with the largest [`dominant_headroom`] on a grid of step
/// `step`, for two users on one or two bands. Every user always picks some band.
pub fn balanced_selection(rates: &RateMatrix, lambdas: (f64, f64), step: f64) -> Result<(f64, SelectionMatrix)> {
    if rates.n_users() != 2 || rates.n_bands() > 2 {
        return Err(Error::Unsupported("analytic envelope unsupported; use simulate".into()));
    }
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::input("grid step must lie in (0, 1]"));
    }
    let n = (1.0 / step).round() as usize;
    let mut best: Option<(f64, SelectionMatrix)> = None;
    for a in 0..=n {
        for b in 0..=n {
            let (x, y) = (a as f64 / n as f64, b as f64 / n as f64);
            let gamma = if rates.n_bands() == 1 {
                SelectionMatrix::from_2x2([[x, y], [0.0, 0.0]]).first_rows(1)
            } else {
                SelectionMatrix::from_2x2([[x, y], [1.0 - x, 1.0 - y]])
            };
            let head = dominant_headroom(&gamma, rates, lambdas)?;
            if best.as_ref().is_none_or(|(h, _)| head > *h) {
                best = Some((head, gamma));
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Best selection probabilities on a single band (band 2 never idle) for user 1 when
/// user 2 runs at `lambda_s2`: user 1 backs off just enough to keep user 2 stable.
pub fn one_band_gamma_opt(_mu11: f64, mu12: f64, lambda_s2: f64) -> Option<SelectionMatrix> {
    if lambda_s2 > mu12 || lambda_s2 < 0.0 {
        return None;
    }
    let g11 = if mu12 > 0.0 {
        1.0 - (lambda_s2 / mu12).sqrt().min(1.0)
    } else {
        1.0
    };
    Some(SelectionMatrix::from_2x2([[g11, 1.0], [1.0 - g11, 0.0]]))
}

/// User 1's maximum rate on a single band, by evaluating the first dominant system at the
/// optimal selection probabilities.
pub fn one_band_boundary(mu11: f64, mu12: f64, lambda_s2: f64) -> Option<f64> {
    let gamma = one_band_gamma_opt(mu11, mu12, lambda_s2)?;
    let g11 = gamma.get(0, 0);
    if lambda_s2 == 0.0 {
        return Some(mu11 * g11);
    }
    let served = mu12 * (1.0 - g11);
    if served <= 0.0 {
        return Some(0.0);
    }
    Some((mu11 * g11 * (1.0 - lambda_s2 / served)).max(0.0))
}

/// Closed-form single-band boundary `mu11 * (1 - sqrt(lambda_s2 / mu12))^2`.
pub fn one_band_boundary_closed(mu11: f64, mu12: f64, lambda_s2: f64) -> Option<f64> {
    if lambda_s2 > mu12 || lambda_s2 < 0.0 {
        return None;
    }
    if mu12 == 0.0 {
        return Some(mu11);
    }
    Some(mu11 * (1.0 - (lambda_s2 / mu12).sqrt()).powi(2))
}

/// Single-band envelope for user `free` (0 or 1) with the other user at `fixed`.
pub fn one_band_envelope(mu11: f64, mu12: f64, free: usize, fixed: f64) -> Option<f64> {
    match free {
        0 => one_band_boundary(mu11, mu12, fixed),
        _ => one_band_boundary(mu12, mu11, fixed),
    }
}

/// Strict membership in the single-band region `sqrt(l1/mu11) + sqrt(l2/mu12) < 1`.
pub fn one_band_region_check(mu11: f64, mu12: f64, lambdas: (f64, f64)) -> bool {
    let term = |l: f64, mu: f64| {
        if l <= 0.0 {
            0.0
        } else if mu <= 0.0 {
            f64::INFINITY
        } else {
            (l / mu).sqrt()
        }
    };
    term(lambdas.0, mu11) + term(lambdas.1, mu12) < 1.0 - STRICT_MARGIN
}
