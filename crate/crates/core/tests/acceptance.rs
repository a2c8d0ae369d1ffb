//! Acceptance suite. Runs without the libtest harness so that every criterion prints one
//! PASS/FAIL line; the process exits non-zero if any criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cogband::cli::{analytic_policy, ScenarioDocument, System};
use cogband::fixedalloc::{best_fixed_max, FixedMapping};
use cogband::model::{rate_matrix, RateMatrix, Scenario};
use cogband::orthogonal::{
    envelope_point, fully_symmetric_max, one_band_envelope, symmetric_band_max, symmetric_su_max,
    two_by_two_closed_form, AssignmentMatrix,
};
use cogband::randalloc::{
    conditional_service_rate, dominant1_envelope_2x2, dominant2_envelope_2x2, envelope_2x2,
    one_band_boundary, one_band_boundary_closed, one_band_region_check, region_2x2_check,
    SelectionMatrix,
};
use cogband::schedule::{birkhoff_decompose, schedule_for, DoublyStochasticMatrix};
use cogband::sim::{run, Policy, SimConfig, Verdict};

type Check = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str) -> (Scenario, RateMatrix) {
    let doc = ScenarioDocument::load(&scenario_path(name)).expect("scenario loads");
    let scenario = doc.to_scenario().expect("scenario is valid");
    let rates = rate_matrix(&scenario).expect("rates");
    (scenario, rates)
}

fn rates_2x2(mu: [[f64; 2]; 2]) -> RateMatrix {
    RateMatrix::from_service(mu.iter().map(|r| r.to_vec()).collect()).unwrap()
}

fn random_2x2(rng: &mut ChaCha8Rng) -> [[f64; 2]; 2] {
    [[rng.gen(), rng.gen()], [rng.gen(), rng.gen()]]
}

fn agree(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:.2?}, limit {limit:.0?}"))
    }
}

// 1 ---------------------------------------------------------------------------------

fn figure3_thresholds() -> Check {
    let start = Instant::now();
    let (_, rates) = load("figure3.toml");
    if rates.mu[0][0] != 0.175 || rates.mu[0][1] != 0.2125 {
        return Err(format!("mu11 = {}, mu12 = {}", rates.mu[0][0], rates.mu[0][1]));
    }
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for (free, limit) in [(1usize, 0.175), (0usize, 0.2125)] {
        for i in 0..=70 {
            let x = limit * i as f64 / 70.0;
            let mut fixed = vec![0.0, 0.0];
            fixed[1 - free] = x;
            let s = envelope_point(&rates, &fixed, free).unwrap().map(|p| p.max_rate);
            let f = best_fixed_max(&rates, &fixed, free).unwrap().map(|p| p.max_rate);
            match (s, f) {
                (Some(s), Some(f)) => worst = worst.max((s - f).abs()),
                _ => return Err(format!("infeasible envelope at {x}")),
            }
            points += 1;
        }
    }
    if worst > 1e-9 {
        return Err(format!("fixed and S envelopes differ by {worst:e}"));
    }
    within_time(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "mu11=0.175 mu12=0.2125; fixed = S on {points} low-rate points (max gap {worst:.1e}); {:.0?}",
        start.elapsed()
    ))
}

// 2 ---------------------------------------------------------------------------------

fn closed_forms_match_lp() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;

    for i in 0..1000 {
        let mu = random_2x2(&mut rng);
        let l1 = rng.gen::<f64>() * 1.05 * mu[0][0].max(mu[1][0]);
        let closed = two_by_two_closed_form(&mu, l1).unwrap().map(|o| o.lambda_s2_max);
        let lp = envelope_point(&rates_2x2(mu), &[l1, 0.0], 1).unwrap().map(|p| p.max_rate);
        if !agree(closed, lp, 1e-9) {
            return Err(format!("2x2 instance {i}: closed {closed:?} vs LP {lp:?} (mu {mu:?}, l1 {l1})"));
        }
        if let (Some(a), Some(b)) = (closed, lp) {
            worst = worst.max((a - b).abs());
        }
    }

    for i in 0..1000 {
        let n = rng.gen_range(2..=5);
        let row: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
        let k = rng.gen_range(0..n);
        let fixed: Vec<f64> = row.iter().map(|m| m * rng.gen::<f64>() * 0.6).collect();
        let closed = one_band_envelope(&row, &fixed, k).unwrap().map(|p| p.max_rate);
        let rates = RateMatrix::from_service(vec![row.clone()]).unwrap();
        let lp = envelope_point(&rates, &fixed, k).unwrap().map(|p| p.max_rate);
        if !agree(closed, lp, 1e-9) {
            return Err(format!("one-band instance {i}: closed {closed:?} vs LP {lp:?}"));
        }
    }

    for i in 0..300 {
        let nb = rng.gen_range(1..=5);
        let nu = rng.gen_range(1..=5);
        let g: Vec<f64> = (0..nb).map(|_| rng.gen()).collect();
        let (lambda, _) = symmetric_su_max(&g, nu);
        let rates = RateMatrix::from_service(g.iter().map(|&v| vec![v; nu]).collect()).unwrap();
        let k = rng.gen_range(0..nu);
        let lp = envelope_point(&rates, &vec![lambda; nu], k).unwrap().map(|p| p.max_rate);
        if !agree(Some(lambda), lp, 1e-9) {
            return Err(format!("symmetric-user instance {i}: {lambda} vs LP {lp:?}"));
        }
    }

    for i in 0..300 {
        let nb = rng.gen_range(1..=5);
        let nu = rng.gen_range(2..=5);
        let beta: Vec<f64> = (0..nu).map(|_| 0.05 + 0.95 * rng.gen::<f64>()).collect();
        let k = rng.gen_range(0..nu);
        let fixed: Vec<f64> = beta.iter().map(|b| b * rng.gen::<f64>()).collect();
        let closed = symmetric_band_max(&beta, nb, &fixed, k);
        let rates = RateMatrix::from_service(vec![beta.clone(); nb]).unwrap();
        let lp = envelope_point(&rates, &fixed, k).unwrap().map(|p| p.max_rate);
        if !agree(closed, lp, 1e-9) {
            return Err(format!("symmetric-band instance {i}: {closed:?} vs LP {lp:?}"));
        }
    }

    for nb in 1..=6 {
        for nu in 1..=6 {
            let beta: f64 = rng.gen();
            let v = fully_symmetric_max(nb, nu, beta);
            let rates = RateMatrix::from_service(vec![vec![beta; nu]; nb]).unwrap();
            let lp = envelope_point(&rates, &vec![v; nu], 0).unwrap().map(|p| p.max_rate);
            if !agree(Some(v), lp, 1e-9) {
                return Err(format!("fully symmetric {nb}x{nu}: {v} vs LP {lp:?}"));
            }
        }
    }
    within_time(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!(
        "1000 2x2 (max gap {worst:.1e}), 1000 one-band, 300 symmetric-user, 300 symmetric-band, 36 fully symmetric; {:.2?}",
        start.elapsed()
    ))
}

// 3 ---------------------------------------------------------------------------------

/// Best user-2 rate over assignment fractions on the lattice of step 1/100, with user 1
/// at `l1`. User 1's share of band 2 is taken as large as the constraints allow.
fn omega_grid_oracle(mu: &[[f64; 2]; 2], l1: f64) -> Option<f64> {
    let n = 100usize;
    let f = |i: usize| i as f64 / n as f64;
    let mut best: Option<f64> = None;
    for w11 in 0..=n {
        for w12 in 0..=(n - w11) {
            for w22 in 0..=(n - w12) {
                let w21 = (n - w22).min(n - w11);
                if f(w11) * mu[0][0] + f(w21) * mu[1][0] < l1 - 1e-12 {
                    continue;
                }
                let v = f(w12) * mu[0][1] + f(w22) * mu[1][1];
                if best.is_none_or(|b| v > b) {
                    best = Some(v);
                }
            }
        }
    }
    best
}

/// Best rate of the always-transmitting user `sat` with the other user at `l_other`,
/// over selection probabilities on the lattice of step 1/1000.
fn gamma_grid_oracle(mu: &[[f64; 2]; 2], sat: usize, l_other: f64) -> Option<f64> {
    let other = 1 - sat;
    let n = 1000usize;
    let mut best: Option<f64> = None;
    for a in 0..=n {
        // probability that `sat` picks band 2
        let gs2 = a as f64 / n as f64;
        let gs1 = 1.0 - gs2;
        for b in 0..=n {
            let go2 = b as f64 / n as f64;
            let go1 = 1.0 - go2;
            let other_served = mu[0][other] * go1 * (1.0 - gs1) + mu[1][other] * go2 * (1.0 - gs2);
            if other_served < l_other - 1e-12 {
                continue;
            }
            let busy = if l_other > 0.0 { (l_other / other_served).min(1.0) } else { 0.0 };
            let alone = mu[0][sat] * gs1 + mu[1][sat] * gs2;
            let crowded = mu[0][sat] * gs1 * (1.0 - go1) + mu[1][sat] * gs2 * (1.0 - go2);
            let v = (1.0 - busy) * alone + busy * crowded;
            if best.is_none_or(|x| v > x) {
                best = Some(v);
            }
        }
    }
    best
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_lp: f64 = 0.0;
    for i in 0..100 {
        let mu = random_2x2(&mut rng);
        let l1 = rng.gen::<f64>() * mu[0][0].max(mu[1][0]);
        let lp = envelope_point(&rates_2x2(mu), &[l1, 0.0], 1).unwrap().map(|p| p.max_rate);
        let oracle = omega_grid_oracle(&mu, l1);
        if !agree(lp, oracle, 2e-2) {
            return Err(format!("LP instance {i}: {lp:?} vs lattice {oracle:?}"));
        }
        if let (Some(a), Some(b)) = (lp, oracle) {
            worst_lp = worst_lp.max((a - b).abs());
        }
    }
    let mut worst_dom: f64 = 0.0;
    for i in 0..100 {
        let mu = random_2x2(&mut rng);
        let l2 = rng.gen::<f64>() * mu[0][1].max(mu[1][1]);
        let d1 = dominant1_envelope_2x2(&mu, l2).unwrap().map(|p| p.max_lambda);
        let o1 = gamma_grid_oracle(&mu, 0, l2);
        let l1 = rng.gen::<f64>() * mu[0][0].max(mu[1][0]);
        let d2 = dominant2_envelope_2x2(&mu, l1).unwrap().map(|p| p.max_lambda);
        let o2 = gamma_grid_oracle(&mu, 1, l1);
        if !agree(d1, o1, 2e-3) || !agree(d2, o2, 2e-3) {
            return Err(format!("dominant instance {i}: {d1:?}/{o1:?}, {d2:?}/{o2:?} (mu {mu:?})"));
        }
        for (a, b) in [(d1, o1), (d2, o2)] {
            if let (Some(a), Some(b)) = (a, b) {
                worst_dom = worst_dom.max((a - b).abs());
            }
        }
    }
    Ok(format!(
        "LP vs lattice max gap {worst_lp:.1e} (tol 2e-2); dominant vs lattice max gap {worst_dom:.1e} (tol 2e-3); {:.2?}",
        start.elapsed()
    ))
}

// 4 ---------------------------------------------------------------------------------

fn random_doubly_stochastic(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    if rng.gen_bool(0.5) {
        // Sinkhorn balancing of a dense positive matrix.
        let mut m: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect()).collect();
        for _ in 0..10_000 {
            for row in m.iter_mut() {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|v| *v /= s);
            }
            for c in 0..n {
                let s: f64 = m.iter().map(|r| r[c]).sum();
                m.iter_mut().for_each(|r| r[c] /= s);
            }
            let err = m.iter().map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
            if err < 1e-14 {
                break;
            }
        }
        m
    } else {
        // Sparse mixture of a few random permutations.
        let k = rng.gen_range(1..=n + 1);
        let mut weights: Vec<f64> = (0..k).map(|_| rng.gen::<f64>() + 0.01).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut m = vec![vec![0.0; n]; n];
        for w in weights {
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            for (r, &c) in perm.iter().enumerate() {
                m[r][c] += w;
            }
        }
        m
    }
}

fn birkhoff() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut sampler = ChaCha8Rng::seed_from_u64(40);
    let mut worst_rec: f64 = 0.0;
    let mut worst_freq: f64 = 0.0;
    for i in 0..1000 {
        let n = rng.gen_range(1..=6);
        let rows = random_doubly_stochastic(&mut rng, n);
        let m = DoublyStochasticMatrix::new(rows.clone()).map_err(|e| format!("matrix {i}: {e}"))?;
        let s = birkhoff_decompose(&m).map_err(|e| format!("matrix {i}: {e}"))?;
        s.validate().map_err(|e| format!("matrix {i}: {e}"))?;
        if s.entries.len() > (n - 1) * (n - 1) + 1 {
            return Err(format!("matrix {i}: {} permutations for n = {n}", s.entries.len()));
        }
        let rec = s.marginals(n);
        for r in 0..n {
            for c in 0..n {
                worst_rec = worst_rec.max((rec[r][c] - rows[r][c]).abs());
            }
        }
        let draws = 100_000;
        let mut counts = vec![vec![0u32; n]; n];
        for _ in 0..draws {
            for (user, &band) in s.sample(&mut sampler).iter().enumerate() {
                counts[band - 1][user] += 1;
            }
        }
        for r in 0..n {
            for c in 0..n {
                worst_freq = worst_freq.max((counts[r][c] as f64 / draws as f64 - rows[r][c]).abs());
            }
        }
    }
    if worst_rec > 1e-9 {
        return Err(format!("reconstruction error {worst_rec:e}"));
    }
    if worst_freq > 0.01 {
        return Err(format!("sampled marginal error {worst_freq}"));
    }
    // Rectangular assignment matrices go through padding; the marginals must survive it.
    let mut worst_pad: f64 = 0.0;
    for i in 0..200 {
        let nb = rng.gen_range(1..=4);
        let nu = rng.gen_range(1..=4);
        let mu: Vec<Vec<f64>> = (0..nb).map(|_| (0..nu).map(|_| rng.gen()).collect()).collect();
        let rates = RateMatrix::from_service(mu).unwrap();
        let fixed: Vec<f64> = (0..nu).map(|_| 0.2 * rng.gen::<f64>()).collect();
        let Some(p) = envelope_point(&rates, &fixed, 0).unwrap() else { continue };
        let (padded, s) = schedule_for(&p.omega_star).map_err(|e| format!("padding {i}: {e}"))?;
        let n = padded.matrix.size();
        if s.entries.len() > (n - 1) * (n - 1) + 1 {
            return Err(format!("padded {i}: too many permutations"));
        }
        let marg = s.marginals(nb);
        for j in 0..nb {
            for k in 0..nu {
                worst_pad = worst_pad.max((marg[j][k] - p.omega_star.get(j, k)).abs());
            }
        }
    }
    if worst_pad > 1e-9 {
        return Err(format!("padded marginal error {worst_pad:e}"));
    }
    Ok(format!(
        "1000 matrices: reconstruction {worst_rec:.1e}, sampled marginals {worst_freq:.4}; 200 padded schedules {worst_pad:.1e}; {:.2?}",
        start.elapsed()
    ))
}

// 5 ---------------------------------------------------------------------------------

fn containment() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for i in 0..1000 {
        let mu = random_2x2(&mut rng);
        let rates = rates_2x2(mu);
        let free = rng.gen_range(0..2);
        let other = 1 - free;
        let x = rng.gen::<f64>() * mu[0][other].max(mu[1][other]);
        let mut fixed = vec![0.0, 0.0];
        fixed[other] = x;
        let s = envelope_point(&rates, &fixed, free).unwrap().map(|p| p.max_rate);
        let h = envelope_2x2(&mu, free, x).unwrap().map(|p| p.max_lambda);
        let f = best_fixed_max(&rates, &fixed, free).unwrap().map(|p| p.max_rate);
        let above = |a: Option<f64>, b: Option<f64>, tol: f64| match (a, b) {
            (Some(a), Some(b)) => a > b + tol,
            (Some(_), None) => true,
            _ => false,
        };
        if above(f, h, 2e-3) || above(h, s, 2e-3) || above(f, s, 1e-9) {
            return Err(format!("instance {i}: fixed {f:?}, S_hat {h:?}, S {s:?} (mu {mu:?}, free {free}, x {x})"));
        }

        let pair = (rng.gen::<f64>() * 0.8, rng.gen::<f64>() * 0.8);
        if region_2x2_check(&mu, pair).unwrap() {
            let s = envelope_point(&rates, &[pair.0, 0.0], 1).unwrap().map(|p| p.max_rate);
            if !s.is_some_and(|v| pair.1 <= v + 1e-9) {
                return Err(format!("instance {i}: {pair:?} in the random region but not the orthogonal one"));
            }
            checked += 1;
        }

        let (m1, m2) = (mu[0][0], mu[0][1]);
        let pair = (rng.gen::<f64>() * m1, rng.gen::<f64>() * m2);
        if one_band_region_check(m1, m2, pair) && pair.0 / m1 + pair.1 / m2 >= 1.0 {
            return Err(format!("instance {i}: one-band pair {pair:?} escapes the orthogonal region"));
        }
    }
    Ok(format!(
        "1000 instances, ordering fixed <= S_hat <= S holds; {checked} random-region points inside S; {:.2?}",
        start.elapsed()
    ))
}

// 6 ---------------------------------------------------------------------------------

fn one_band_random_region() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let m1 = 0.01 + 0.99 * rng.gen::<f64>();
        let m2 = 0.01 + 0.99 * rng.gen::<f64>();
        let l2 = m2 * rng.gen::<f64>();
        let built = one_band_boundary(m1, m2, l2).unwrap();
        let closed = one_band_boundary_closed(m1, m2, l2).unwrap();
        let on_curve = (built / m1).sqrt() + (l2 / m2).sqrt();
        // the second dominant system gives back the same curve
        let mirrored = one_band_boundary(m2, m1, built).unwrap();
        let gap = (built - closed).abs().max((on_curve - 1.0).abs()).max((mirrored - l2).abs());
        if gap > 1e-6 {
            return Err(format!("instance {i}: construction {built}, closed form {closed}, mirror {mirrored} vs {l2}"));
        }
        worst = worst.max(gap);
        let mu = m1;
        if one_band_region_check(mu, mu, (mu / 2.0, mu / 2.0)) {
            return Err(format!("midpoint of (mu,0) and (0,mu) inside the region for mu = {mu}"));
        }
    }
    Ok(format!(
        "1000 instances, construction vs closed form max gap {worst:.1e}; midpoint witness outside; {:.2?}",
        start.elapsed()
    ))
}

// 7 ---------------------------------------------------------------------------------

/// Envelope value and the policy attaining it, for `system` at rate point `fixed`.
fn boundary_policy(system: System, rates: &RateMatrix, fixed: &[f64], free: usize) -> (f64, Policy) {
    match system {
        System::S => {
            let p = envelope_point(rates, fixed, free).unwrap().unwrap();
            (p.max_rate, Policy::from_assignment(&p.omega_star).unwrap())
        }
        System::Fixed => {
            let p = best_fixed_max(rates, fixed, free).unwrap().unwrap();
            (p.max_rate, Policy::Fixed(p.mapping))
        }
        System::SHat => {
            let mu = rates.as_2x2().unwrap();
            let p = envelope_2x2(&mu, free, fixed[1 - free]).unwrap().unwrap();
            (p.max_lambda, Policy::Random(p.gamma_star))
        }
    }
}

fn simulation_matches_analysis() -> Check {
    let start = Instant::now();
    let (scenario, rates) = load("figure3.toml");
    // (system, rates of user 1 when user 2 is free, rates of user 2 when user 1 is free)
    let span = |lo: f64, hi: f64| -> Vec<f64> { (0..10).map(|i| lo + (hi - lo) * i as f64 / 9.0).collect() };
    let plans = [
        (System::S, span(0.02, 0.5), span(0.02, 0.6)),
        (System::SHat, span(0.01, 0.2), span(0.01, 0.2)),
        (System::Fixed, span(0.01, 0.155), span(0.01, 0.19)),
    ];
    let mut seed = 7000;
    let mut summary = Vec::new();
    let mut failures = Vec::new();
    for (system, for_user2, for_user1) in plans {
        let mut ok = 0;
        let sets = [(1usize, for_user2), (0usize, for_user1)];
        for (free, xs) in sets {
            for x in xs {
                let mut fixed = vec![0.0, 0.0];
                fixed[1 - free] = x;
                let (boundary, outside_policy) = boundary_policy(system, &rates, &fixed, free);
                for (factor, want_stable) in [(0.9, true), (1.1, false)] {
                    // scale the boundary point radially
                    let mut lambdas = fixed.clone();
                    lambdas[free] = boundary;
                    lambdas.iter_mut().for_each(|l| *l *= factor);
                    let policy = if want_stable {
                        analytic_policy(system, &rates, &lambdas).unwrap()
                    } else {
                        outside_policy.clone()
                    };
                    let sc = scenario.with_secondary_rates(&lambdas).unwrap();
                    seed += 1;
                    let r = run(&sc, &policy, &SimConfig::new(100_000, seed)).unwrap();
                    let good = if want_stable { r.all_stable() } else { r.any_unstable() };
                    if good {
                        ok += 1;
                    } else {
                        let verdicts: Vec<Verdict> = r.secondary.iter().map(|q| q.verdict).collect();
                        failures.push(format!("{system:?} {lambdas:?} ({factor}x) -> {verdicts:?}"));
                    }
                }
            }
        }
        summary.push(format!("{system:?} {ok}/40"));
    }
    if !failures.is_empty() {
        return Err(format!("{} misclassified: {}", failures.len(), failures.join("; ")));
    }
    within_time(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{}; {:.2?}", summary.join(", "), start.elapsed()))
}

// 8 ---------------------------------------------------------------------------------

fn saturated_rates() -> Check {
    let start = Instant::now();
    let (scenario, rates) = load("figure3.toml");
    let sc = scenario.with_secondary_rates(&[1.0, 1.0]).unwrap();
    let mut worst: f64 = 0.0;
    let mut seed = 8000;
    let omegas = [
        vec![vec![0.3, 0.7], vec![0.7, 0.3]],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.2, 0.5], vec![0.6, 0.1]],
    ];
    for w in omegas {
        let omega = AssignmentMatrix::new(w).unwrap();
        let policy = Policy::from_assignment(&omega).unwrap();
        seed += 1;
        let r = run(&sc, &policy, &SimConfig::new(100_000, seed)).unwrap();
        for (k, &got) in r.throughput.iter().enumerate() {
            let want = omega.service_rates(&rates)[k];
            worst = worst.max((got - want).abs());
        }
    }
    let gammas = [
        vec![vec![0.4, 1.0], vec![0.6, 0.0]],
        vec![vec![0.5, 0.3], vec![0.5, 0.7]],
        vec![vec![0.1, 0.8], vec![0.6, 0.2]],
    ];
    for g in gammas {
        let gamma = SelectionMatrix::new(g).unwrap();
        seed += 1;
        let r = run(&sc, &Policy::Random(gamma.clone()), &SimConfig::new(100_000, seed)).unwrap();
        for (k, &got) in r.throughput.iter().enumerate() {
            let want = conditional_service_rate(&gamma, &[0, 1], &rates, k).unwrap();
            worst = worst.max((got - want).abs());
        }
    }
    for bands in [vec![0, 1], vec![1, 0]] {
        seed += 1;
        let d = FixedMapping::new(bands, 2).unwrap();
        let r = run(&sc, &Policy::Fixed(d.clone()), &SimConfig::new(100_000, seed)).unwrap();
        for (got, want) in r.throughput.iter().zip(d.rates(&rates)) {
            worst = worst.max((got - want).abs());
        }
    }
    if worst > 0.01 {
        return Err(format!("saturated throughput off by {worst}"));
    }
    Ok(format!("3 orthogonal, 3 random, 2 fixed policies; max deviation {worst:.4}; {:.2?}", start.elapsed()))
}

// 9 ---------------------------------------------------------------------------------

fn convexity_and_determinism() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pairs = 0;
    for i in 0..500 {
        let nb = rng.gen_range(1..=4);
        let nu = rng.gen_range(1..=4);
        let mu: Vec<Vec<f64>> = (0..nb).map(|_| (0..nu).map(|_| rng.gen()).collect()).collect();
        let rates = RateMatrix::from_service(mu).unwrap();
        let boundary_point = |rng: &mut ChaCha8Rng| -> Option<Vec<f64>> {
            let k = rng.gen_range(0..nu);
            let mut fixed: Vec<f64> = (0..nu).map(|_| 0.3 * rng.gen::<f64>()).collect();
            let p = envelope_point(&rates, &fixed, k).unwrap()?;
            fixed[k] = p.max_rate;
            Some(fixed)
        };
        let (Some(a), Some(b)) = (boundary_point(&mut rng), boundary_point(&mut rng)) else {
            continue;
        };
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        let k = rng.gen_range(0..nu);
        let feasible = envelope_point(&rates, &mid, k)
            .unwrap()
            .is_some_and(|p| p.max_rate >= mid[k] - 1e-9);
        if !feasible {
            return Err(format!("instance {i}: midpoint {mid:?} of {a:?} and {b:?} infeasible"));
        }
        pairs += 1;
    }

    let (scenario, rates) = load("figure3.toml");
    let lambdas = [0.3, 0.3];
    let sc = scenario.with_secondary_rates(&lambdas).unwrap();
    for system in [System::S, System::SHat, System::Fixed] {
        let policy = analytic_policy(system, &rates, &lambdas).unwrap();
        let a = run(&sc, &policy, &SimConfig::new(50_000, 99)).unwrap();
        let b = run(&sc, &policy, &SimConfig::new(50_000, 99)).unwrap();
        if serde_json::to_vec(&a).unwrap() != serde_json::to_vec(&b).unwrap() {
            return Err(format!("{system:?} simulation not reproducible"));
        }
    }
    let path = scenario_path("figure3.toml");
    let cli = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_cogband"))
            .args(["simulate", "--system", "S", "--fixed", "1=0.3,2=0.3", "--slots", "20000", "--seed", seed, "--json"])
            .arg("--scenario")
            .arg(&path)
            .output()
            .expect("binary runs")
    };
    let (x, y) = (cli("5"), cli("5"));
    if !x.status.success() || x.stdout != y.stdout || x.stdout.is_empty() {
        return Err("command-line simulation not byte-identical across runs".into());
    }
    Ok(format!(
        "{pairs} boundary midpoints feasible; simulations and CLI output byte-identical; {:.2?}",
        start.elapsed()
    ))
}

// Table II sweep timing ------------------------------------------------------------

fn table2_sweeps() -> Check {
    let (_, rates) = load("table2.toml");
    if rates.mu[0][0] != 0.27 {
        return Err(format!("mu11 = {}", rates.mu[0][0]));
    }
    let mut slowest = Duration::ZERO;
    for others in [0.0, 0.1, 0.2] {
        let start = Instant::now();
        let mut feasible = 0;
        for i in 0..100 {
            let x = 0.6 * i as f64 / 99.0;
            let fixed = [x, 0.0, others, others];
            if envelope_point(&rates, &fixed, 1).unwrap().is_some() {
                feasible += 1;
            }
        }
        if feasible == 0 {
            return Err("sweep entirely infeasible".into());
        }
        slowest = slowest.max(start.elapsed());
    }
    within_time(slowest, Duration::from_secs(10))?;
    Ok(format!("three 100-point sweeps, slowest {slowest:.2?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("1 figure-3 thresholds", figure3_thresholds),
        ("2 closed forms vs LP", closed_forms_match_lp),
        ("3 oracle equivalence", oracle_equivalence),
        ("4 birkhoff decomposition", birkhoff),
        ("5 containment ordering", containment),
        ("6 one-band random region", one_band_random_region),
        ("7 simulation vs analysis", simulation_matches_analysis),
        ("8 saturated service rates", saturated_rates),
        ("9 convexity and determinism", convexity_and_determinism),
        ("table-II sweep runtime", table2_sweeps),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
