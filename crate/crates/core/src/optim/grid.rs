use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub point: Vec<f64>,
    pub value: f64,
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let span = (hi - lo) / step;
    let n = (span + 1e-9).floor() as usize;
    let mut values: Vec<f64> = (0..=n).map(|i| (lo + i as f64 * step).min(hi)).collect();
    if values.last().is_some_and(|&v| hi - v > 1e-12 * step.max(1.0)) {
        values.push(hi);
    }
    values
}

/// Exhaustive search over the lattice `lo + i * step` (plus each upper bound) of a box.
///
/// Points are visited in lexicographic order and only a strictly better value replaces the
/// incumbent, so ties resolve to the lexicographically smallest point. Returns `None` when
/// no lattice point satisfies `feasible`, or when `step` or the box is invalid.
pub fn grid_search<F, P>(objective: F, bounds: &[(f64, f64)], feasible: P, step: f64) -> Option<GridPoint>
where
    F: Fn(&[f64]) -> f64,
    P: Fn(&[f64]) -> bool,
{
    if !(step.is_finite() && step > 0.0)
        || bounds.is_empty()
        || bounds
            .iter()
            .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
    {
        return None;
    }
    let axes: Vec<Vec<f64>> = bounds.iter().map(|&(lo, hi)| axis(lo, hi, step)).collect();
    let mut index = vec![0usize; axes.len()];
    let mut point: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best: Option<GridPoint> = None;
    loop {
        if feasible(&point) {
            let value = objective(&point);
            if best.as_ref().is_none_or(|b| value > b.value) {
                best = Some(GridPoint {
                    point: point.clone(),
                    value,
                });
            }
        }
        // odometer increment, last coordinate fastest
        let mut d = axes.len();
        loop {
            if d == 0 {
                return best;
            }
            d -= 1;
            index[d] += 1;
            if index[d] < axes[d].len() {
                point[d] = axes[d][index[d]];
                break;
            }
            index[d] = 0;
            point[d] = axes[d][0];
        }
    }
}
