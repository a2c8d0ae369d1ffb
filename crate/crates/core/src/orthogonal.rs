//! Orthogonal probabilistic band allocation: every slot a controller draws a one-to-one
//! assignment of users to bands, so users never collide. The long-run fraction of slots
//! band `j` is given to user `k` is `omega[j][k]`, and the region envelope is a linear
//! program in those fractions. Closed forms for the special cases live alongside it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RateMatrix;
use crate::optim::{solve_lp, LpProblem, LpStatus, FEASIBILITY_TOL};

/// Long-run assignment fractions, `omega[j][k]` for band `j` and user `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMatrix {
    omega: Vec<Vec<f64>>,
}

impl AssignmentMatrix {
    /// Checks shape and non-negativity only; see [`AssignmentMatrix::check_fractions`].
    pub fn new(omega: Vec<Vec<f64>>) -> Result<Self> {
        let n_users = omega.first().map_or(0, Vec::len);
        if omega.is_empty() || n_users == 0 || omega.iter().any(|r| r.len() != n_users) {
            return Err(Error::dimension("assignment matrix must be a non-empty rectangle"));
        }
        if omega.iter().flatten().any(|v| !v.is_finite() || *v < -FEASIBILITY_TOL) {
            return Err(Error::input("assignment fractions must be non-negative"));
        }
        Ok(AssignmentMatrix { omega })
    }

    pub fn zeros(n_bands: usize, n_users: usize) -> Self {
        AssignmentMatrix {
            omega: vec![vec![0.0; n_users]; n_bands],
        }
    }

    pub fn n_bands(&self) -> usize {
        self.omega.len()
    }

    pub fn n_users(&self) -> usize {
        self.omega[0].len()
    }

    pub fn get(&self, band: usize, user: usize) -> f64 {
        self.omega[band][user]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.omega
    }

    pub fn band_load(&self, band: usize) -> f64 {
        self.omega[band].iter().sum()
    }

    pub fn user_load(&self, user: usize) -> f64 {
        self.omega.iter().map(|r| r[user]).sum()
    }

    /// Every band is handed out at most once per slot and every user holds at most one band.
    pub fn check_fractions(&self, tol: f64) -> Result<()> {
        for j in 0..self.n_bands() {
            if self.band_load(j) > 1.0 + tol {
                return Err(Error::input(format!(
                    "band {} is assigned {} of the time",
                    j + 1,
                    self.band_load(j)
                )));
            }
        }
        for k in 0..self.n_users() {
            if self.user_load(k) > 1.0 + tol {
                return Err(Error::input(format!(
                    "user {} holds bands {} of the time",
                    k + 1,
                    self.user_load(k)
                )));
            }
        }
        if self.omega.iter().flatten().any(|&v| v < -tol) {
            return Err(Error::input("negative assignment fraction"));
        }
        Ok(())
    }

    pub fn service_rates(&self, rates: &RateMatrix) -> Vec<f64> {
        (0..self.n_users())
            .map(|k| (0..self.n_bands()).map(|j| self.omega[j][k] * rates.mu[j][k]).sum())
            .collect()
    }
}

/// Largest supportable rate of one user while the others hold fixed rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub fixed_rates: Vec<f64>,
    pub free_user: usize,
    pub max_rate: f64,
    pub omega_star: AssignmentMatrix,
}

fn check_profile(rates: &RateMatrix, fixed: &[f64], k: usize) -> Result<()> {
    rates.validate()?;
    if fixed.len() != rates.n_users() {
        return Err(Error::dimension(format!(
            "{} fixed rates for {} users",
            fixed.len(),
            rates.n_users()
        )));
    }
    if k >= rates.n_users() {
        return Err(Error::dimension(format!("free user index {k} out of range")));
    }
    if fixed.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::input("fixed rates must be non-negative"));
    }
    Ok(())
}

/// Builds the assignment-fraction LP. Variable `j * n_users + h` is `omega[j][h]`.
fn envelope_lp(rates: &RateMatrix, fixed: &[f64], k: usize) -> LpProblem {
    let (nb, nu) = (rates.n_bands(), rates.n_users());
    let idx = |j: usize, h: usize| j * nu + h;
    let mut lp = LpProblem::new(nb * nu);
    lp.bounds = vec![(0.0, 1.0); nb * nu];
    for j in 0..nb {
        lp.objective[idx(j, k)] = rates.mu[j][k];
    }
    for j in 0..nb {
        let mut row = vec![0.0; nb * nu];
        for h in 0..nu {
            row[idx(j, h)] = 1.0;
        }
        lp.add_le(row, 1.0);
    }
    for h in 0..nu {
        let mut row = vec![0.0; nb * nu];
        for j in 0..nb {
            row[idx(j, h)] = 1.0;
        }
        lp.add_le(row, 1.0);
    }
    for (l, &lambda) in fixed.iter().enumerate() {
        if l == k {
            continue;
        }
        let mut row = vec![0.0; nb * nu];
        for j in 0..nb {
            row[idx(j, l)] = rates.mu[j][l];
        }
        lp.add_ge(row, lambda);
    }
    lp
}

fn unpack(point: &[f64], nb: usize, nu: usize) -> AssignmentMatrix {
    let omega = (0..nb)
        .map(|j| (0..nu).map(|h| point[j * nu + h].max(0.0)).collect())
        .collect();
    AssignmentMatrix { omega }
}

/// Maximum stable rate of user `k` given the rates of the other users (`fixed[k]` is
/// ignored). `Ok(None)` means the fixed rates cannot all be supported.
pub fn envelope_point(rates: &RateMatrix, fixed: &[f64], k: usize) -> Result<Option<EnvelopePoint>> {
    check_profile(rates, fixed, k)?;
    let lp = envelope_lp(rates, fixed, k);
    let sol = solve_lp(&lp)?;
    match sol.status {
        LpStatus::Optimal => Ok(Some(EnvelopePoint {
            fixed_rates: fixed.to_vec(),
            free_user: k,
            max_rate: sol.value.max(0.0),
            omega_star: unpack(&sol.point, rates.n_bands(), rates.n_users()),
        })),
        LpStatus::Infeasible => Ok(None),
        LpStatus::Unbounded => Err(Error::Solver("envelope program reported unbounded".into())),
        LpStatus::SolverFailure => Err(Error::Solver("numerical breakdown in envelope program".into())),
    }
}

/// Assignment giving every user the largest common relative headroom: maximizes `t`
/// subject to `service_k >= lambda_k * (1 + t)`. A rate tuple is strictly inside the
/// region when `t > 0`; for tuples outside, the returned assignment is the least
/// overloaded one. Users with zero rate are unconstrained.
pub fn balanced_assignment(rates: &RateMatrix, lambdas: &[f64]) -> Result<(f64, AssignmentMatrix)> {
    check_profile(rates, lambdas, 0)?;
    let (nb, nu) = (rates.n_bands(), rates.n_users());
    let nv = nb * nu;
    let mut lp = envelope_lp(rates, &vec![0.0; nu], 0);
    // Drop the objective and the zero-rate rows of the plain envelope; rebuild with t.
    lp.constraints.truncate(nb + nu);
    lp.rhs.truncate(nb + nu);
    for row in lp.constraints.iter_mut() {
        row.push(0.0);
    }
    lp.objective = vec![0.0; nv + 1];
    lp.objective[nv] = 1.0;
    lp.bounds.push((-1.0, 1.0e3));
    for (l, &lambda) in lambdas.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        // lambda * t - sum_j mu_jl omega_jl <= -lambda
        let mut row = vec![0.0; nv + 1];
        for j in 0..nb {
            row[j * nu + l] = -rates.mu[j][l];
        }
        row[nv] = lambda;
        lp.add_le(row, -lambda);
    }
    if lambdas.iter().all(|&l| l <= 0.0) {
        // No loaded user: any maximal assignment works; use the sum-rate optimum.
        let mut sum = envelope_lp(rates, &vec![0.0; nu], 0);
        for j in 0..nb {
            for h in 0..nu {
                sum.objective[j * nu + h] = rates.mu[j][h];
            }
        }
        let sol = solve_lp(&sum)?;
        if !sol.is_optimal() {
            return Err(Error::Solver("sum-rate program failed".into()));
        }
        return Ok((f64::INFINITY, unpack(&sol.point, nb, nu)));
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("headroom program ended with {:?}", sol.status)));
    }
    Ok((sol.point[nv], unpack(&sol.point[..nv], nb, nu)))
}

/// Closed-form optimum for two users on two bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoByTwoOptimum {
    /// Fraction of slots user 2 holds band 1 (equivalently user 1 holds band 2).
    pub epsilon: f64,
    pub lambda_s2_max: f64,
}

/// Two users, two bands, user 1 at `lambda_s1`: optimal swap fraction and the
/// resulting maximum rate of user 2. `mu` is `[[mu11, mu12], [mu21, mu22]]`.
///
/// Parameter combinations outside the enumerated cases are solved with the LP.
pub fn two_by_two_closed_form(mu: &[[f64; 2]; 2], lambda_s1: f64) -> Result<Option<TwoByTwoOptimum>> {
    let [[mu11, mu12], [mu21, mu22]] = *mu;
    let value = |eps: f64| TwoByTwoOptimum {
        epsilon: eps,
        lambda_s2_max: eps * mu12 + (1.0 - eps) * mu22,
    };
    let ratio = || (lambda_s1 - mu11) / (mu21 - mu11);

    if (mu21 < mu11 && lambda_s1 > mu11) || (mu21 > mu11 && lambda_s1 > mu21) {
        return Ok(None);
    }
    if mu12 > mu22 {
        if mu21 < mu11 && lambda_s1 < mu11 {
            return Ok(Some(value(ratio().min(1.0))));
        }
        if mu21 >= mu11 && lambda_s1 <= mu21 {
            return Ok(Some(value(1.0)));
        }
    } else if mu12 < mu22 {
        if mu21 > mu11 {
            return Ok(Some(value(ratio().max(0.0))));
        }
        if mu21 < mu11 && lambda_s1 <= mu11 {
            return Ok(Some(value(0.0)));
        }
    } else {
        // Flat objective: report the smallest feasible swap fraction.
        if mu21 > mu11 {
            return Ok(Some(value(ratio().max(0.0))));
        }
        if lambda_s1 <= mu11 {
            return Ok(Some(value(0.0)));
        }
    }

    let rates = RateMatrix::from_service(vec![vec![mu11, mu12], vec![mu21, mu22]])?;
    Ok(envelope_point(&rates, &[lambda_s1, 0.0], 1)?.map(|p| TwoByTwoOptimum {
        epsilon: p.omega_star.get(0, 1),
        lambda_s2_max: p.max_rate,
    }))
}

/// Envelope when a single band is ever idle: the users time-share it, fixed user `h`
/// holding it `lambda_h / mu_1h` of the time and user `k` the rest.
pub fn one_band_envelope(mu_row: &[f64], fixed: &[f64], k: usize) -> Result<Option<EnvelopePoint>> {
    let rates = RateMatrix::from_service(vec![mu_row.to_vec()])?;
    check_profile(&rates, fixed, k)?;
    let mut share = vec![0.0; mu_row.len()];
    let mut used = 0.0;
    for (h, (&lambda, &mu)) in fixed.iter().zip(mu_row).enumerate() {
        if h == k || lambda == 0.0 {
            continue;
        }
        if mu <= 0.0 {
            return Ok(None);
        }
        share[h] = lambda / mu;
        used += share[h];
    }
    if used > 1.0 + FEASIBILITY_TOL {
        return Ok(None);
    }
    share[k] = (1.0 - used).max(0.0);
    Ok(Some(EnvelopePoint {
        fixed_rates: fixed.to_vec(),
        free_user: k,
        max_rate: mu_row[k] * share[k],
        omega_star: AssignmentMatrix { omega: vec![share] },
    }))
}

/// Identical users (`g[j]` is every user's rate on band `j`): they share the best
/// `min(M_p, M_s)` bands equally. Returns the common maximum rate and per-band shares.
pub fn symmetric_su_max(g: &[f64], n_users: usize) -> (f64, Vec<f64>) {
    if g.is_empty() || n_users == 0 {
        return (0.0, vec![0.0; g.len()]);
    }
    let mut order: Vec<usize> = (0..g.len()).collect();
    order.sort_by(|&a, &b| g[b].total_cmp(&g[a]));
    let top = g.len().min(n_users);
    let mut theta = vec![0.0; g.len()];
    for &j in &order[..top] {
        theta[j] = 1.0 / n_users as f64;
    }
    let lambda = theta.iter().zip(g).map(|(t, v)| t * v).sum();
    (lambda, theta)
}

/// Identical bands (`beta[k]` is user `k`'s rate on any band): strict membership in the
/// stability region.
pub fn symmetric_band_region_check(beta: &[f64], n_bands: usize, lambdas: &[f64]) -> bool {
    if beta.len() != lambdas.len() {
        return false;
    }
    let per_user = lambdas.iter().zip(beta).all(|(l, b)| l < b);
    if n_bands >= beta.len() {
        return per_user;
    }
    let load: f64 = lambdas.iter().zip(beta).map(|(l, b)| l / b).sum();
    per_user && load < n_bands as f64
}

/// Identical bands: maximum rate of user `k` given the others.
pub fn symmetric_band_max(beta: &[f64], n_bands: usize, fixed: &[f64], k: usize) -> Option<f64> {
    let mut load = 0.0;
    for (l, (&lambda, &b)) in fixed.iter().zip(beta).enumerate() {
        if l == k || lambda == 0.0 {
            continue;
        }
        if lambda > b {
            return None;
        }
        load += lambda / b;
    }
    let room = n_bands as f64 - load;
    if room < -FEASIBILITY_TOL {
        return None;
    }
    Some(beta[k] * room.clamp(0.0, 1.0))
}

/// Identical users on identical bands.
pub fn fully_symmetric_max(n_bands: usize, n_users: usize, beta: f64) -> f64 {
    (n_bands as f64 / n_users as f64).min(1.0) * beta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Rate of the swept user.
    pub rate: f64,
    /// `None` where the fixed rates cannot be supported.
    pub envelope: Option<EnvelopePoint>,
}

/// Envelope of user `free` while user `swept` walks through `grid`; the other users
/// keep the rates in `others`.
pub fn sweep_envelope(
    rates: &RateMatrix,
    free: usize,
    swept: usize,
    grid: &[f64],
    others: &[f64],
) -> Result<Vec<SweepPoint>> {
    if free == swept {
        return Err(Error::input("swept and free user must differ"));
    }
    if swept >= rates.n_users() {
        return Err(Error::dimension(format!("swept user index {swept} out of range")));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::input("sweep grid must be ascending"));
    }
    grid.iter()
        .map(|&rate| {
            let mut fixed = others.to_vec();
            if swept < fixed.len() {
                fixed[swept] = rate;
            }
            Ok(SweepPoint {
                rate,
                envelope: envelope_point(rates, &fixed, free)?,
            })
        })
        .collect()
}
