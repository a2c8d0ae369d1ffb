//! Result documents emitted by the command-line tool.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::PermutationSchedule;
use crate::sim::{SimResult, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario_digest: String,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(scenario_digest: String, seed: Option<u64>) -> Self {
        Provenance {
            scenario_digest,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
        }
    }

    fn csv_comment(&self) -> String {
        let mut s = format!(
            "# scenario_digest={} tool_version={}",
            self.scenario_digest, self.tool_version
        );
        if let Some(seed) = self.seed {
            let _ = write!(s, " seed={seed}");
        }
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedRate {
    /// 1-based user index.
    pub user: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// `S`, `S_hat` or `S_fixed_best`.
    pub system: String,
    /// 1-based index of the user whose maximum rate is reported.
    pub axis: usize,
    /// 1-based index of the user whose rate runs through the grid.
    pub swept: usize,
    pub fixed: Vec<FixedRate>,
    pub grid: Vec<f64>,
    /// `None` where the swept and fixed rates cannot be supported.
    pub values: Vec<Option<f64>>,
    pub infeasible: Vec<bool>,
    pub provenance: Provenance,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "infeasible".to_string(), |x| x.to_string())
}

impl RegionReport {
    pub fn to_csv(&self) -> String {
        let mut out = self.provenance.csv_comment();
        let _ = writeln!(out, "# system={}", self.system);
        for f in &self.fixed {
            let _ = writeln!(out, "# lambda_s{}={}", f.user, f.rate);
        }
        let _ = writeln!(out, "lambda_s{},lambda_s{}_max", self.swept, self.axis);
        for (x, v) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{x},{}", cell(*v));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingCurve {
    /// 1-based band of each user.
    pub mapping: Vec<usize>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub axis: usize,
    pub swept: usize,
    pub grid: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Vec<Option<f64>>,
    #[serde(rename = "S_hat")]
    pub s_hat: Vec<Option<f64>>,
    #[serde(rename = "S_fixed_best")]
    pub fixed_best: Vec<Option<f64>>,
    pub mappings: Vec<MappingCurve>,
    /// Grid points where the ordering fixed <= S_hat <= S fails.
    pub violations: Vec<String>,
    pub provenance: Provenance,
}

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut out = self.provenance.csv_comment();
        let _ = write!(out, "lambda_s{},S,S_hat,S_fixed_best", self.swept);
        for m in &self.mappings {
            let tag: Vec<String> = m.mapping.iter().map(|b| b.to_string()).collect();
            let _ = write!(out, ",fixed_{}", tag.join("_"));
        }
        out.push('\n');
        for (i, x) in self.grid.iter().enumerate() {
            let _ = write!(out, "{x},{},{},{}", cell(self.s[i]), cell(self.s_hat[i]), cell(self.fixed_best[i]));
            for m in &self.mappings {
                let _ = write!(out, ",{}", cell(m.values[i]));
            }
            out.push('\n');
        }
        for v in &self.violations {
            let _ = writeln!(out, "# violation: {v}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    /// `mu[j][k]`, band `j`, user `k`.
    pub mu: Vec<Vec<f64>>,
    pub mu_p: Vec<f64>,
    pub pi: Vec<f64>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposeReport {
    /// 1-based user whose rate was maximized.
    pub axis: usize,
    pub rates: Vec<f64>,
    pub max_rate: f64,
    pub omega: Vec<Vec<f64>>,
    /// Square embedding; rows beyond the band count and columns beyond the user count
    /// are virtual.
    pub padded: Vec<Vec<f64>>,
    pub schedule: PermutationSchedule,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSummary {
    pub arrivals: u64,
    pub departures: u64,
    pub final_length: u64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub system: String,
    pub rates: Vec<f64>,
    pub n_slots: u64,
    pub warmup: u64,
    pub throughput: Vec<f64>,
    pub idle_fraction: Vec<f64>,
    pub collisions: u64,
    pub primary: Vec<QueueSummary>,
    pub secondary: Vec<QueueSummary>,
    pub provenance: Provenance,
}

impl SimReport {
    pub fn new(system: &str, rates: Vec<f64>, result: &SimResult, provenance: Provenance) -> Self {
        let summary = |q: &crate::sim::QueueStats| QueueSummary {
            arrivals: q.arrivals,
            departures: q.departures,
            final_length: q.final_length,
            verdict: q.verdict,
        };
        SimReport {
            system: system.to_string(),
            rates,
            n_slots: result.config.n_slots,
            warmup: result.config.warmup,
            throughput: result.throughput.clone(),
            idle_fraction: result.idle_fraction.clone(),
            collisions: result.collisions,
            primary: result.primary.iter().map(summary).collect(),
            secondary: result.secondary.iter().map(summary).collect(),
            provenance,
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string(value).map_err(|e| Error::input(e.to_string()))
}
