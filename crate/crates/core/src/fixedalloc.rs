//! Fixed assignments: every user keeps one band for good, so each mapping yields an
//! axis-aligned box of supportable rates and the system region is the union of boxes.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::RateMatrix;

/// Enumeration limit on the number of users.
pub const MAX_USERS: usize = 8;

/// `bands[k]` is the 0-based band permanently given to user `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedMapping {
    pub bands: Vec<usize>,
}

impl FixedMapping {
    pub fn new(bands: Vec<usize>, n_bands: usize) -> Result<Self> {
        if bands.len() > n_bands {
            return Err(Error::Unsupported(format!(
                "{} users cannot hold distinct bands out of {n_bands}",
                bands.len()
            )));
        }
        if bands.iter().any(|&b| b >= n_bands) {
            return Err(Error::dimension("mapping refers to a band that does not exist"));
        }
        if bands.iter().duplicates().next().is_some() {
            return Err(Error::input("mapping gives one band to two users"));
        }
        Ok(FixedMapping { bands })
    }

    /// Service rate of each user under this mapping.
    pub fn rates(&self, rates: &RateMatrix) -> Vec<f64> {
        self.bands.iter().enumerate().map(|(k, &j)| rates.mu[j][k]).collect()
    }

    /// 1-based band tuple, the form used by schedules and reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.bands.iter().map(|b| b + 1).collect()
    }
}

fn check_sizes(rates: &RateMatrix) -> Result<()> {
    rates.validate()?;
    let (nb, nu) = (rates.n_bands(), rates.n_users());
    if nb < nu {
        return Err(Error::Unsupported(format!(
            "fixed assignment needs at least as many bands as users ({nb} < {nu})"
        )));
    }
    if nu > MAX_USERS {
        return Err(Error::Unsupported(format!(
            "fixed-assignment enumeration is limited to {MAX_USERS} users, got {nu}"
        )));
    }
    Ok(())
}

/// All one-to-one mappings in lexicographic order.
pub fn all_mappings(rates: &RateMatrix) -> Result<Vec<FixedMapping>> {
    check_sizes(rates)?;
    Ok((0..rates.n_bands())
        .permutations(rates.n_users())
        .map(|bands| FixedMapping { bands })
        .collect())
}

/// Strict membership in the box of mapping `d`.
pub fn region_for_mapping(d: &FixedMapping, rates: &RateMatrix, lambdas: &[f64]) -> Result<bool> {
    check_sizes(rates)?;
    if d.bands.len() != rates.n_users() || lambdas.len() != rates.n_users() {
        return Err(Error::dimension("mapping, rates and arrival vector disagree in size"));
    }
    if d.bands.iter().any(|&b| b >= rates.n_bands()) {
        return Err(Error::dimension("mapping refers to a band that does not exist"));
    }
    Ok(d.rates(rates).iter().zip(lambdas).all(|(mu, l)| l < mu))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedEnvelopePoint {
    pub max_rate: f64,
    pub mapping: FixedMapping,
}

/// Maximum rate of user `k` over all mappings that carry the other users' rates.
/// Boxes are taken closed (`lambda <= mu`), matching the closure used for the other
/// envelopes; ties go to the lexicographically first mapping.
pub fn best_fixed_max(rates: &RateMatrix, fixed: &[f64], k: usize) -> Result<Option<FixedEnvelopePoint>> {
    check_sizes(rates)?;
    if fixed.len() != rates.n_users() || k >= rates.n_users() {
        return Err(Error::dimension("fixed rates or free user index do not match the rate matrix"));
    }
    let mut best: Option<FixedEnvelopePoint> = None;
    for bands in (0..rates.n_bands()).permutations(rates.n_users()) {
        let carried = bands
            .iter()
            .enumerate()
            .all(|(l, &j)| l == k || fixed[l] <= rates.mu[j][l]);
        if !carried {
            continue;
        }
        let value = rates.mu[bands[k]][k];
        if best.as_ref().is_none_or(|b| value > b.max_rate) {
            best = Some(FixedEnvelopePoint {
                max_rate: value,
                mapping: FixedMapping { bands },
            });
        }
    }
    Ok(best)
}

/// Envelope of user `k` for one specific mapping: its rate if the others fit, else `None`.
pub fn mapping_max(d: &FixedMapping, rates: &RateMatrix, fixed: &[f64], k: usize) -> Option<f64> {
    let mu = d.rates(rates);
    mu.iter()
        .zip(fixed)
        .enumerate()
        .all(|(l, (m, f))| l == k || f <= m)
        .then(|| mu[k])
}

/// Mapping with the largest smallest relative headroom `mu_k / lambda_k` at a rate point;
/// the natural operating choice for a rate tuple. Returns the mapping and the headroom.
pub fn best_mapping_for(rates: &RateMatrix, lambdas: &[f64]) -> Result<(FixedMapping, f64)> {
    let mut best: Option<(FixedMapping, f64)> = None;
    for d in all_mappings(rates)? {
        let head = d
            .rates(rates)
            .iter()
            .zip(lambdas)
            .filter(|(_, &l)| l > 0.0)
            .map(|(m, l)| m / l)
            .fold(f64::INFINITY, f64::min);
        if best.as_ref().is_none_or(|b| head > b.1) {
            best = Some((d, head));
        }
    }
    best.ok_or_else(|| Error::input("no mappings to choose from"))
}
