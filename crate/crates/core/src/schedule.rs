//! Turning long-run assignment fractions into a lottery over one-to-one assignments.
//!
//! The fractions are embedded in a square doubly stochastic matrix (virtual bands and
//! virtual users soak up the slack) and that matrix is written as a convex combination of
//! permutation matrices with the Birkhoff–von Neumann construction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orthogonal::AssignmentMatrix;

const SUM_TOL: f64 = 1e-9;
/// Entries at or below this are treated as outside the support during matching.
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublyStochasticMatrix {
    rows: Vec<Vec<f64>>,
}

impl DoublyStochasticMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::dimension("doubly stochastic matrix must be square and non-empty"));
        }
        if rows.iter().flatten().any(|v| !v.is_finite() || *v < -SUM_TOL) {
            return Err(Error::input("doubly stochastic matrix has a negative entry"));
        }
        for i in 0..n {
            let row: f64 = rows[i].iter().sum();
            let col: f64 = rows.iter().map(|r| r[i]).sum();
            if (row - 1.0).abs() > SUM_TOL || (col - 1.0).abs() > SUM_TOL {
                return Err(Error::input(format!(
                    "row/column {} sums to {row}/{col}, not 1",
                    i + 1
                )));
            }
        }
        Ok(DoublyStochasticMatrix { rows })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }
}

/// Square embedding of an assignment matrix. Rows `0..n_bands` are the real bands and
/// columns `0..n_users` the real users; everything else is virtual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaddedMatrix {
    pub matrix: DoublyStochasticMatrix,
    pub n_bands: usize,
    pub n_users: usize,
}

/// Northwest-corner transport of `supply` into `demand`, both consumed in order.
fn northwest(supply: &[f64], demand: &[f64]) -> Vec<Vec<f64>> {
    let mut flow = vec![vec![0.0; demand.len()]; supply.len()];
    let mut left_demand = demand.to_vec();
    let mut j = 0;
    for (i, &s) in supply.iter().enumerate() {
        let mut left = s;
        while left > SUPPORT_TOL && j < demand.len() {
            let moved = left.min(left_demand[j]);
            flow[i][j] += moved;
            left -= moved;
            left_demand[j] -= moved;
            if left_demand[j] <= SUPPORT_TOL {
                j += 1;
            }
        }
        // Round-off leftovers go to the last column so sums stay exact.
        if left > 0.0 && !demand.is_empty() {
            flow[i][demand.len() - 1] += left;
        }
    }
    flow
}

/// Embeds `omega` in the smallest square doubly stochastic matrix whose real block is
/// `omega` and whose real-by-real remainder is empty. The size is
/// `max(M_p, M_s, ceil(M_p + M_s - sum(omega)))`; the last term is needed whenever the
/// fractions leave more idle time than a `max(M_p, M_s)` square can absorb.
pub fn pad_to_doubly_stochastic(omega: &AssignmentMatrix) -> Result<PaddedMatrix> {
    omega.check_fractions(SUM_TOL)?;
    let (nb, nu) = (omega.n_bands(), omega.n_users());
    let total: f64 = omega.rows().iter().flatten().map(|v| v.max(0.0)).sum();
    let needed = ((nb + nu) as f64 - total - SUM_TOL).ceil().max(0.0) as usize;
    let n = nb.max(nu).max(needed);

    let row_res: Vec<f64> = (0..nb).map(|j| (1.0 - omega.band_load(j)).max(0.0)).collect();
    let col_res: Vec<f64> = (0..nu).map(|k| (1.0 - omega.user_load(k)).max(0.0)).collect();

    let mut m = vec![vec![0.0; n]; n];
    for j in 0..nb {
        for k in 0..nu {
            m[j][k] = omega.get(j, k).max(0.0);
        }
    }
    // Real bands idle -> virtual users; real users idle -> virtual bands.
    let ones_u = vec![1.0; n - nu];
    for (j, row) in northwest(&row_res, &ones_u).into_iter().enumerate() {
        for (v, x) in row.into_iter().enumerate() {
            m[j][nu + v] = x;
        }
    }
    let ones_b = vec![1.0; n - nb];
    for (k, col) in northwest(&col_res, &ones_b).into_iter().enumerate() {
        for (v, x) in col.into_iter().enumerate() {
            m[nb + v][k] = x;
        }
    }
    // Virtual-by-virtual block closes the remaining gaps.
    let vrow_res: Vec<f64> = (nb..n).map(|i| (1.0 - m[i].iter().sum::<f64>()).max(0.0)).collect();
    let vcol_res: Vec<f64> = (nu..n)
        .map(|c| (1.0 - m.iter().map(|r| r[c]).sum::<f64>()).max(0.0))
        .collect();
    for (a, row) in northwest(&vrow_res, &vcol_res).into_iter().enumerate() {
        for (b, x) in row.into_iter().enumerate() {
            m[nb + a][nu + b] += x;
        }
    }
    Ok(PaddedMatrix {
        matrix: DoublyStochasticMatrix::new(m)?,
        n_bands: nb,
        n_users: nu,
    })
}

/// Kuhn's augmenting-path matching on the support. Returns `row_of[col]`.
fn perfect_matching(m: &[Vec<f64>]) -> Option<Vec<usize>> {
    let n = m.len();
    let mut row_of: Vec<Option<usize>> = vec![None; n];

    fn augment(r: usize, m: &[Vec<f64>], seen: &mut [bool], row_of: &mut [Option<usize>]) -> bool {
        for c in 0..m.len() {
            if m[r][c] > SUPPORT_TOL && !seen[c] {
                seen[c] = true;
                if row_of[c].is_none_or(|r2| augment(r2, m, seen, row_of)) {
                    row_of[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }

    for r in 0..n {
        let mut seen = vec![false; n];
        if !augment(r, m, &mut seen, &mut row_of) {
            return None;
        }
    }
    row_of.into_iter().collect()
}

/// Permutation terms `(row_of_col, weight)` of a doubly stochastic matrix.
fn decompose_terms(m: &DoublyStochasticMatrix) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = m.size();
    let mut residual = m.rows.clone();
    let mut terms: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut remaining = 1.0;
    while remaining > SUM_TOL {
        let Some(row_of) = perfect_matching(&residual) else {
            if residual.iter().flatten().all(|&v| v <= SUM_TOL) {
                break;
            }
            return Err(Error::Decomposition(format!(
                "no perfect matching on the support with {remaining:e} mass left"
            )));
        };
        let weight = (0..n).map(|c| residual[row_of[c]][c]).fold(f64::INFINITY, f64::min);
        for c in 0..n {
            let v = &mut residual[row_of[c]][c];
            *v -= weight;
            if *v <= SUPPORT_TOL {
                *v = 0.0;
            }
        }
        remaining -= weight;
        terms.push((row_of, weight));
        if terms.len() > n * n + 1 {
            return Err(Error::Decomposition("decomposition failed to terminate".into()));
        }
    }
    terms.retain(|(_, w)| *w >= SUM_TOL);
    let total: f64 = terms.iter().map(|(_, w)| w).sum();
    if terms.is_empty() || total <= 0.0 {
        return Err(Error::Decomposition("decomposition produced no permutations".into()));
    }
    for (_, w) in terms.iter_mut() {
        *w /= total;
    }
    Ok(terms)
}

/// One assignment pattern: `bands[k]` is the band handed to user `k`, 1-based, with 0
/// meaning a virtual band (the user stays silent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub bands: Vec<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSchedule {
    pub entries: Vec<ScheduleEntry>,
}

impl PermutationSchedule {
    /// Always gives user `k` band `bands[k]` (1-based, 0 for none).
    pub fn deterministic(bands: Vec<usize>) -> Result<Self> {
        let s = PermutationSchedule {
            entries: vec![ScheduleEntry { bands, weight: 1.0 }],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n_users(&self) -> usize {
        self.entries.first().map_or(0, |e| e.bands.len())
    }

    pub fn validate(&self) -> Result<()> {
        let nu = self.n_users();
        if self.entries.is_empty() || nu == 0 {
            return Err(Error::input("schedule has no entries"));
        }
        let mut total = 0.0;
        for e in &self.entries {
            if e.bands.len() != nu {
                return Err(Error::dimension("schedule entries disagree on the number of users"));
            }
            if !(e.weight > 0.0) {
                return Err(Error::input("schedule weights must be positive"));
            }
            let mut used: Vec<usize> = e.bands.iter().copied().filter(|&b| b != 0).collect();
            used.sort_unstable();
            if used.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::input(format!("entry {:?} gives one band to two users", e.bands)));
            }
            total += e.weight;
        }
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::input(format!("schedule weights sum to {total}")));
        }
        Ok(())
    }

    pub fn max_band(&self) -> usize {
        self.entries.iter().flat_map(|e| e.bands.iter().copied()).max().unwrap_or(0)
    }

    /// Long-run fraction of slots each real band goes to each user.
    pub fn marginals(&self, n_bands: usize) -> Vec<Vec<f64>> {
        let mut w = vec![vec![0.0; self.n_users()]; n_bands];
        for e in &self.entries {
            for (k, &b) in e.bands.iter().enumerate() {
                if b != 0 && b <= n_bands {
                    w[b - 1][k] += e.weight;
                }
            }
        }
        w
    }

    /// Draws one entry using a single uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[usize] {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for e in &self.entries {
            acc += e.weight;
            if u < acc {
                return &e.bands;
            }
        }
        &self.entries[self.entries.len() - 1].bands
    }
}

/// Decomposition of a square matrix with every row a real band: `bands[c]` is
/// `row + 1` for the row matched to column `c`.
pub fn birkhoff_decompose(m: &DoublyStochasticMatrix) -> Result<PermutationSchedule> {
    let entries = decompose_terms(m)?
        .into_iter()
        .map(|(row_of, weight)| ScheduleEntry {
            bands: row_of.into_iter().map(|r| r + 1).collect(),
            weight,
        })
        .collect();
    Ok(PermutationSchedule { entries })
}

/// Schedule over the real users of a padded matrix; virtual rows become band 0 and
/// entries that differ only in their virtual part are merged.
pub fn decompose_padded(padded: &PaddedMatrix) -> Result<PermutationSchedule> {
    let mut entries: Vec<ScheduleEntry> = Vec::new();
    for (row_of, weight) in decompose_terms(&padded.matrix)? {
        let bands: Vec<usize> = row_of[..padded.n_users]
            .iter()
            .map(|&r| if r < padded.n_bands { r + 1 } else { 0 })
            .collect();
        match entries.iter_mut().find(|e| e.bands == bands) {
            Some(e) => e.weight += weight,
            None => entries.push(ScheduleEntry { bands, weight }),
        }
    }
    Ok(PermutationSchedule { entries })
}

/// Pads and decomposes an assignment matrix in one go.
pub fn schedule_for(omega: &AssignmentMatrix) -> Result<(PaddedMatrix, PermutationSchedule)> {
    let padded = pad_to_doubly_stochastic(omega)?;
    let schedule = decompose_padded(&padded)?;
    Ok((padded, schedule))
}

/// Free-function form of [`PermutationSchedule::sample`].
pub fn sample_permutation<'a, R: Rng + ?Sized>(schedule: &'a PermutationSchedule, rng: &mut R) -> &'a [usize] {
    schedule.sample(rng)
}
