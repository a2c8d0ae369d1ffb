use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest constraint violation accepted in a reported optimum.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Entries smaller than this are never pivoted on.
pub const PIVOT_TOL: f64 = 1e-12;

const MAX_PIVOTS: usize = 50_000;

/// `maximize objective·x` subject to `constraints·x <= rhs` and `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Per-variable `(lo, hi)`; `lo` must be finite, `hi` may be `f64::INFINITY`.
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// Problem over `n` variables bounded to `[0, inf)` with a zero objective.
    pub fn new(n: usize) -> Self {
        LpProblem {
            objective: vec![0.0; n],
            constraints: Vec::new(),
            rhs: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.constraints.push(coeffs);
        self.rhs.push(rhs);
    }

    pub fn add_ge(&mut self, coeffs: Vec<f64>, rhs: f64) {
        self.constraints.push(coeffs.into_iter().map(|c| -c).collect());
        self.rhs.push(-rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        if self.bounds.len() != n {
            return Err(Error::dimension(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.rhs.len() != self.constraints.len() {
            return Err(Error::dimension("one right-hand side per constraint required"));
        }
        if self.constraints.iter().any(|row| row.len() != n) {
            return Err(Error::dimension("constraint row length differs from variable count"));
        }
        let finite = self
            .objective
            .iter()
            .chain(self.constraints.iter().flatten())
            .chain(&self.rhs)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::input("linear program coefficients must be finite"));
        }
        for (i, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(Error::input(format!("invalid bounds [{lo}, {hi}] on variable {i}")));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.constraints.iter().zip(&self.rhs).map(|(row, &b)| {
            let lhs: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            lhs - b
        });
        let bounds = self
            .bounds
            .iter()
            .zip(x)
            .map(|(&(lo, hi), &v)| (lo - v).max(v - hi));
        rows.chain(bounds).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Numerical breakdown: no trustworthy answer was produced.
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
}

impl LpSolution {
    fn without_point(status: LpStatus) -> Self {
        LpSolution {
            status,
            value: f64::NAN,
            point: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Dense tableau in canonical form. The last column holds the right-hand side and the
/// `reduced` row holds `c_B B^-1 A - c` with the objective value in its last slot.
struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    width: usize,
}

enum Phase {
    Optimal,
    Unbounded,
    Stalled,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn price(&mut self, cost: &[f64]) {
        let mut reduced = vec![0.0; self.width + 1];
        for (j, r) in reduced.iter_mut().enumerate().take(self.width) {
            *r = -cost[j];
        }
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (r, &v) in reduced.iter_mut().zip(row) {
                    *r += cb * v;
                }
            }
        }
        self.reduced = reduced;
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        self.rows[row][col] = 1.0;
        let pivot_row = self.rows[row].clone();
        for (i, other) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = other[col];
            if f != 0.0 {
                for (v, &pv) in other.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                other[col] = 0.0;
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for (v, &pv) in self.reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Bland's rule: lowest-index improving column enters, ratio ties leave by lowest
    /// basic index.
    fn run(&mut self, allowed: &[bool]) -> Phase {
        for _ in 0..MAX_PIVOTS {
            let entering = (0..self.width).find(|&j| allowed[j] && self.reduced[j] < -PIVOT_TOL);
            let Some(col) = entering else {
                return Phase::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - PIVOT_TOL
                            || ((ratio - br).abs() <= PIVOT_TOL && self.basis[i] < self.basis[bi])
                        {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Phase::Unbounded;
            };
            self.pivot(row, col);
        }
        Phase::Stalled
    }
}

/// Two-phase dense simplex with Bland's anti-cycling rule.
///
/// Malformed problems are errors; infeasibility, unboundedness and numerical
/// breakdown are reported through [`LpStatus`]. An `Optimal` answer always satisfies
/// every constraint and bound within [`FEASIBILITY_TOL`].
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.n_vars();
    let lo: Vec<f64> = problem.bounds.iter().map(|b| b.0).collect();

    // Shift to y = x - lo >= 0; finite upper bounds become explicit rows.
    let mut rows: Vec<(Vec<f64>, f64)> = problem
        .constraints
        .iter()
        .zip(&problem.rhs)
        .map(|(row, &b)| {
            let shift: f64 = row.iter().zip(&lo).map(|(a, l)| a * l).sum();
            (row.clone(), b - shift)
        })
        .collect();
    for (i, &(l, h)) in problem.bounds.iter().enumerate() {
        if h.is_finite() {
            let mut unit = vec![0.0; n];
            unit[i] = 1.0;
            rows.push((unit, h - l));
        }
    }
    let m = rows.len();
    let n_art = rows.iter().filter(|(_, b)| *b < 0.0).count();
    let width = n + m + n_art;

    let mut tab = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        reduced: Vec::new(),
        width,
    };
    let mut next_art = n + m;
    for (i, (coeffs, b)) in rows.into_iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..n].copy_from_slice(&coeffs);
        row[n + i] = 1.0;
        row[width] = b;
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            row[next_art] = 1.0;
            tab.basis.push(next_art);
            next_art += 1;
        } else {
            tab.basis.push(n + i);
        }
        tab.rows.push(row);
    }
    let is_art = |j: usize| j >= n + m;

    if n_art > 0 {
        let cost: Vec<f64> = (0..width).map(|j| if is_art(j) { -1.0 } else { 0.0 }).collect();
        tab.price(&cost);
        let allowed = vec![true; width];
        match tab.run(&allowed) {
            Phase::Optimal => {}
            Phase::Unbounded | Phase::Stalled => {
                return Ok(LpSolution::without_point(LpStatus::SolverFailure));
            }
        }
        if tab.reduced[width] < -FEASIBILITY_TOL {
            return Ok(LpSolution::without_point(LpStatus::Infeasible));
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < tab.rows.len() {
            if is_art(tab.basis[i]) {
                let col = (0..n + m).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => {
                        tab.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let mut cost = vec![0.0; width];
    cost[..n].copy_from_slice(&problem.objective);
    tab.price(&cost);
    let allowed: Vec<bool> = (0..width).map(|j| !is_art(j)).collect();
    match tab.run(&allowed) {
        Phase::Optimal => {}
        Phase::Unbounded => return Ok(LpSolution::without_point(LpStatus::Unbounded)),
        Phase::Stalled => return Ok(LpSolution::without_point(LpStatus::SolverFailure)),
    }

    let mut point = lo.clone();
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            point[b] += tab.rhs(i);
        }
    }
    // Snap sub-tolerance bound excursions caused by rounding.
    for (x, &(l, h)) in point.iter_mut().zip(&problem.bounds) {
        if *x < l && *x > l - FEASIBILITY_TOL {
            *x = l;
        }
        if *x > h && *x < h + FEASIBILITY_TOL {
            *x = h;
        }
    }
    if !point.iter().all(|v| v.is_finite()) || problem.max_violation(&point) > FEASIBILITY_TOL {
        return Ok(LpSolution::without_point(LpStatus::SolverFailure));
    }
    let value = problem.objective.iter().zip(&point).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        value,
        point,
    })
}
