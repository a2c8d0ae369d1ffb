//! Slotted simulation of the primary and secondary queues under each allocation policy.
//!
//! Each slot runs, in order: secondary band assignment, primary service, secondary
//! service on bands whose primary queue was empty at the start of the slot, then
//! Bernoulli arrivals (a packet is never served in the slot it arrives).
//!
//! Randomness comes from three ChaCha8 streams derived from one seed: stream 0 drives
//! primary service and arrivals, stream 1 secondary assignment and channel outcomes,
//! stream 2 secondary arrivals. Primary queues therefore evolve identically whatever the
//! secondary policy, and runs are bit-reproducible.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedalloc::FixedMapping;
use crate::model::Scenario;
use crate::orthogonal::AssignmentMatrix;
use crate::randalloc::SelectionMatrix;
use crate::schedule::{schedule_for, PermutationSchedule};

/// Stable when the fitted drift is below this (packets/slot) and the backlog is small.
pub const STABLE_SLOPE: f64 = 0.005;
/// Unstable when the fitted drift exceeds this.
pub const UNSTABLE_SLOPE: f64 = 0.02;
/// Stable backlog limit as a fraction of the observation window.
pub const BACKLOG_FRACTION: f64 = 0.05;
/// Runs shorter than this never get a definite verdict.
pub const MIN_VERDICT_SLOTS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Orthogonal(PermutationSchedule),
    Random(SelectionMatrix),
    Fixed(FixedMapping),
}

impl Policy {
    /// Orthogonal policy realizing the given long-run assignment fractions.
    pub fn from_assignment(omega: &AssignmentMatrix) -> Result<Policy> {
        Ok(Policy::Orthogonal(schedule_for(omega)?.1))
    }

    fn check(&self, n_bands: usize, n_users: usize) -> Result<()> {
        let ok = match self {
            Policy::Orthogonal(s) => {
                s.validate()?;
                s.n_users() == n_users && s.max_band() <= n_bands
            }
            Policy::Random(g) => g.n_bands() == n_bands && g.n_users() == n_users,
            Policy::Fixed(d) => d.bands.len() == n_users && d.bands.iter().all(|&b| b < n_bands),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::dimension(format!(
                "policy does not fit a network of {n_bands} bands and {n_users} users"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_slots: u64,
    pub warmup: u64,
    pub seed: u64,
    /// Queue lengths are recorded every `trace_stride` slots.
    pub trace_stride: u64,
}

impl SimConfig {
    /// `n_slots` slots, a tenth of them warm-up, a trace point every 100 slots.
    pub fn new(n_slots: u64, seed: u64) -> Self {
        SimConfig {
            n_slots,
            warmup: n_slots / 10,
            seed,
            trace_stride: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots == 0 || self.warmup >= self.n_slots {
            return Err(Error::config("warm-up must be shorter than the run"));
        }
        if self.trace_stride == 0 {
            return Err(Error::config("trace stride must be at least 1"));
        }
        Ok(())
    }

    fn window(&self) -> u64 {
        self.n_slots - self.warmup
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub arrivals: u64,
    pub departures: u64,
    pub final_length: u64,
    /// Departures after warm-up.
    pub window_departures: u64,
    /// Queue length at each traced slot.
    pub trace: Vec<u64>,
    pub verdict: Verdict,
}

impl QueueStats {
    fn new() -> Self {
        QueueStats {
            arrivals: 0,
            departures: 0,
            final_length: 0,
            window_departures: 0,
            trace: Vec::new(),
            verdict: Verdict::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    /// Slot index (1-based count of completed slots) of each trace point.
    pub trace_slots: Vec<u64>,
    pub primary: Vec<QueueStats>,
    pub secondary: Vec<QueueStats>,
    /// Post-warm-up departures per slot of each secondary user.
    pub throughput: Vec<f64>,
    /// Post-warm-up fraction of slots each primary queue was empty at slot start.
    pub idle_fraction: Vec<f64>,
    /// Slots-times-bands in which two or more secondary users hit the same idle band.
    pub collisions: u64,
}

impl SimResult {
    /// True when every secondary queue is stable.
    pub fn all_stable(&self) -> bool {
        self.secondary.iter().all(|q| q.verdict == Verdict::Stable)
    }

    /// True when some secondary queue is unstable.
    pub fn any_unstable(&self) -> bool {
        self.secondary.iter().any(|q| q.verdict == Verdict::Unstable)
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Simulates `config.n_slots` slots of `scenario` under `policy`.
pub fn run(scenario: &Scenario, policy: &Policy, config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let links = scenario.link_profile()?;
    let (nb, nu) = (scenario.n_bands(), scenario.n_users());
    policy.check(nb, nu)?;

    let mut rng_p = stream(config.seed, 0);
    let mut rng_s = stream(config.seed, 1);
    let mut rng_a = stream(config.seed, 2);

    let mut pu_q = vec![0u64; nb];
    let mut su_q = vec![0u64; nu];
    let mut primary: Vec<QueueStats> = (0..nb).map(|_| QueueStats::new()).collect();
    let mut secondary: Vec<QueueStats> = (0..nu).map(|_| QueueStats::new()).collect();
    let mut idle_slots = vec![0u64; nb];
    let mut trace_slots = Vec::new();
    let mut collisions = 0u64;

    // choice[k]: 0-based band for user k this slot
    let mut choice: Vec<Option<usize>> = vec![None; nu];
    let mut idle = vec![false; nb];
    let mut contenders = vec![0u32; nb];

    for t in 0..config.n_slots {
        let counted = t >= config.warmup;

        // 1. assignment
        match policy {
            Policy::Orthogonal(s) => {
                let bands = s.sample(&mut rng_s);
                for (c, &b) in choice.iter_mut().zip(bands) {
                    *c = b.checked_sub(1);
                }
            }
            Policy::Random(g) => {
                for (k, c) in choice.iter_mut().enumerate() {
                    *c = if su_q[k] > 0 { g.sample_band(k, &mut rng_s) } else { None };
                }
            }
            Policy::Fixed(d) => {
                for (c, &b) in choice.iter_mut().zip(&d.bands) {
                    *c = Some(b);
                }
            }
        }

        // 2. primary service
        for j in 0..nb {
            idle[j] = pu_q[j] == 0;
            if idle[j] {
                if counted {
                    idle_slots[j] += 1;
                }
            } else if rng_p.gen::<f64>() < links.pu_success[j] {
                pu_q[j] -= 1;
                primary[j].departures += 1;
                if counted {
                    primary[j].window_departures += 1;
                }
            }
        }

        // 3. secondary service
        contenders.iter_mut().for_each(|c| *c = 0);
        for k in 0..nu {
            if su_q[k] > 0 {
                if let Some(j) = choice[k] {
                    contenders[j] += 1;
                }
            }
        }
        for j in 0..nb {
            if idle[j] && contenders[j] > 1 {
                collisions += 1;
            }
        }
        for k in 0..nu {
            let Some(j) = choice[k] else { continue };
            if su_q[k] == 0 || !idle[j] || contenders[j] > 1 {
                continue;
            }
            if rng_s.gen::<f64>() < links.su_success[j][k] {
                su_q[k] -= 1;
                secondary[k].departures += 1;
                if counted {
                    secondary[k].window_departures += 1;
                }
            }
        }

        // 4. arrivals
        for j in 0..nb {
            if rng_p.gen::<f64>() < links.pu_arrival[j] {
                pu_q[j] += 1;
                primary[j].arrivals += 1;
            }
        }
        for k in 0..nu {
            if rng_a.gen::<f64>() < links.su_arrival[k] {
                su_q[k] += 1;
                secondary[k].arrivals += 1;
            }
        }

        if (t + 1) % config.trace_stride == 0 {
            trace_slots.push(t + 1);
            for j in 0..nb {
                primary[j].trace.push(pu_q[j]);
            }
            for k in 0..nu {
                secondary[k].trace.push(su_q[k]);
            }
        }
    }

    for (q, &len) in primary.iter_mut().zip(&pu_q) {
        q.final_length = len;
    }
    for (q, &len) in secondary.iter_mut().zip(&su_q) {
        q.final_length = len;
    }
    let window = config.window() as f64;
    let mut result = SimResult {
        config: *config,
        trace_slots,
        throughput: secondary.iter().map(|q| q.window_departures as f64 / window).collect(),
        idle_fraction: idle_slots.iter().map(|&n| n as f64 / window).collect(),
        primary,
        secondary,
        collisions,
    };
    for i in 0..result.primary.len() {
        result.primary[i].verdict = queue_verdict(&result.trace_slots, &result.primary[i], config);
    }
    for i in 0..result.secondary.len() {
        result.secondary[i].verdict = queue_verdict(&result.trace_slots, &result.secondary[i], config);
    }
    Ok(result)
}

/// Least-squares slope of queue length against slot index over the post-warm-up trace.
fn drift(slots: &[u64], lengths: &[u64], warmup: u64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = slots
        .iter()
        .zip(lengths)
        .filter(|(&s, _)| s > warmup)
        .map(|(&s, &l)| (s as f64, l as f64))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn queue_verdict(slots: &[u64], q: &QueueStats, config: &SimConfig) -> Verdict {
    if config.n_slots < MIN_VERDICT_SLOTS {
        return Verdict::Inconclusive;
    }
    let Some(slope) = drift(slots, &q.trace, config.warmup) else {
        return Verdict::Inconclusive;
    };
    if slope > UNSTABLE_SLOPE {
        Verdict::Unstable
    } else if slope < STABLE_SLOPE && (q.final_length as f64) < BACKLOG_FRACTION * config.window() as f64 {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    }
}

/// Verdict for every secondary queue.
pub fn assess_stability(result: &SimResult) -> Vec<Verdict> {
    result
        .secondary
        .iter()
        .map(|q| queue_verdict(&result.trace_slots, q, &result.config))
        .collect()
}

/// Post-warm-up departures per slot of every secondary user.
pub fn empirical_throughput(result: &SimResult) -> Vec<f64> {
    result.throughput.clone()
}

/// Queue-length trace as CSV: `slot,pu1,...,su1,...`.
pub fn trace_csv(result: &SimResult) -> String {
    let mut out = String::from("slot");
    for j in 0..result.primary.len() {
        let _ = write!(out, ",pu{}", j + 1);
    }
    for k in 0..result.secondary.len() {
        let _ = write!(out, ",su{}", k + 1);
    }
    out.push('\n');
    for (i, slot) in result.trace_slots.iter().enumerate() {
        let _ = write!(out, "{slot}");
        for q in result.primary.iter().chain(&result.secondary) {
            let _ = write!(out, ",{}", q.trace[i]);
        }
        out.push('\n');
    }
    out
}
