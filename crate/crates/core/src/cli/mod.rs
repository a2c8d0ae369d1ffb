//! Command-line front end: `rates`, `envelope`, `decompose`, `simulate` and `compare`.

pub mod document;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::fixedalloc::{self, FixedMapping};
use crate::model::{rate_matrix, RateMatrix, Scenario};
use crate::orthogonal;
use crate::randalloc::{self, SelectionMatrix};
use crate::schedule::schedule_for;
use crate::sim::{self, Policy, SimConfig};

pub use document::ScenarioDocument;
use report::{
    to_json, to_toml, CompareReport, DecomposeReport, FixedRate, MappingCurve, Provenance,
    RatesReport, RegionReport, SimReport,
};

/// Tolerance of the containment checks that involve the grid-based random envelope.
pub const GRID_TOL: f64 = 2e-3;
/// Tolerance of purely analytic containment checks.
pub const ANALYTIC_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "cogband", version, about = "Stable-throughput regions of cognitive radio band allocation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the service-rate matrix, primary service rates and band availabilities.
    Rates(CommonArgs),
    /// Sweep the region envelope of one system.
    Envelope(EnvelopeArgs),
    /// Optimal assignment fractions at a rate point and their permutation schedule.
    Decompose(DecomposeArgs),
    /// Simulate the queues under one system's policy.
    Simulate(SimulateArgs),
    /// Sweep all systems side by side and check their containment ordering.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Emit a single JSON document instead of CSV/TOML.
    #[arg(long)]
    pub json: bool,
    /// Write output here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum System {
    #[value(name = "S")]
    S,
    #[value(name = "S_hat")]
    SHat,
    #[value(name = "fixed")]
    Fixed,
}

impl System {
    fn tag(self) -> &'static str {
        match self {
            System::S => "S",
            System::SHat => "S_hat",
            System::Fixed => "S_fixed_best",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// User (1-based) whose maximum rate is reported.
    #[arg(long)]
    pub axis: usize,
    /// Rates of the swept user: `start:stop:step`, a comma list, or one value.
    #[arg(long)]
    pub grid: String,
    /// Rates held fixed, `k=rate,...` (1-based users). Unlisted users other than the axis
    /// and swept user keep their scenario rates.
    #[arg(long)]
    pub fixed: Option<String>,
    /// Swept user (1-based); inferred when exactly one user is neither the axis nor fixed.
    #[arg(long)]
    pub sweep: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EnvelopeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub system: System,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// User (1-based) whose rate is maximized.
    #[arg(long)]
    pub axis: usize,
    /// Rates of the other users, `k=rate,...`; unlisted users keep their scenario rates.
    #[arg(long)]
    pub fixed: Option<String>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub system: System,
    /// Override secondary arrival rates, `k=rate,...`.
    #[arg(long)]
    pub fixed: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub slots: u64,
    #[arg(long)]
    pub seed: u64,
    /// Warm-up slots excluded from verdicts and throughputs (default: a tenth of the run).
    #[arg(long)]
    pub warmup: Option<u64>,
    /// Record queue lengths every this many slots.
    #[arg(long, default_value_t = 100)]
    pub stride: u64,
    /// Explicit policy: `mapping:b1,b2,...` (1-based bands) or `gamma:g11,g12,...;g21,...`
    /// (rows are bands). Without it the policy is derived from the analysis.
    #[arg(long)]
    pub policy: Option<String>,
    /// Write the queue-length trace as CSV.
    #[arg(long)]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

/// What a command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    /// Containment violations found by `compare`.
    pub violations: Vec<String>,
}

impl Outcome {
    fn ok(text: String) -> Self {
        Outcome {
            text,
            violations: Vec::new(),
        }
    }
}

struct Loaded {
    scenario: Scenario,
    rates: RateMatrix,
    digest: String,
}

fn load(path: &Path) -> Result<Loaded> {
    let doc = ScenarioDocument::load(path)?;
    let scenario = doc.to_scenario()?;
    let rates = rate_matrix(&scenario)?;
    Ok(Loaded {
        scenario,
        rates,
        digest: doc.digest()?,
    })
}

/// Parses `start:stop:step`, a comma-separated list, or a single value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::input(format!("bad number {s:?} in grid {spec:?}")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (a, b, s) = (num(start)?, num(stop)?, num(step)?);
            if !(s > 0.0) || b < a {
                return Err(Error::input(format!("grid {spec:?} needs step > 0 and stop >= start")));
            }
            let n = ((b - a) / s + 1e-9).floor() as usize;
            if n > 1_000_000 {
                return Err(Error::input("grid has more than a million points"));
            }
            (0..=n).map(|i| ((a + i as f64 * s) * 1e12).round() / 1e12).collect()
        }
        [list] => list.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        _ => return Err(Error::input(format!("cannot parse grid {spec:?}"))),
    };
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::input("grid rates must be non-negative"));
    }
    if values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::input("grid must be ascending"));
    }
    Ok(values)
}

/// Parses `k=rate,...` with 1-based users into 0-based pairs.
pub fn parse_fixed(spec: &str, n_users: usize) -> Result<Vec<(usize, f64)>> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, r) = item
            .split_once('=')
            .ok_or_else(|| Error::input(format!("expected k=rate, got {item:?}")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad user index in {item:?}")))?;
        let r: f64 = r
            .trim()
            .parse()
            .map_err(|_| Error::input(format!("bad rate in {item:?}")))?;
        if k == 0 || k > n_users {
            return Err(Error::input(format!("user {k} does not exist (1..={n_users})")));
        }
        if !(r.is_finite() && (0.0..=1.0).contains(&r)) {
            return Err(Error::input(format!("rate {r} must lie in [0, 1]")));
        }
        if out.iter().any(|&(u, _)| u == k - 1) {
            return Err(Error::input(format!("user {k} listed twice")));
        }
        out.push((k - 1, r));
    }
    Ok(out)
}

fn user_index(k: usize, n_users: usize, what: &str) -> Result<usize> {
    if k == 0 || k > n_users {
        return Err(Error::input(format!("{what} {k} does not exist (1..={n_users})")));
    }
    Ok(k - 1)
}

/// Resolved sweep: free user, swept user, base rate vector (scenario rates overridden by
/// `--fixed`), grid.
struct Sweep {
    free: usize,
    swept: usize,
    base: Vec<f64>,
    grid: Vec<f64>,
}

impl Sweep {
    fn resolve(args: &SweepArgs, scenario: &Scenario) -> Result<Sweep> {
        let nu = scenario.n_users();
        if nu < 2 {
            return Err(Error::input("an envelope sweep needs at least two users"));
        }
        let free = user_index(args.axis, nu, "axis user")?;
        let fixed = parse_fixed(args.fixed.as_deref().unwrap_or(""), nu)?;
        let swept = match args.sweep {
            Some(k) => user_index(k, nu, "swept user")?,
            None => {
                let candidates: Vec<usize> = (0..nu)
                    .filter(|&k| k != free && !fixed.iter().any(|&(u, _)| u == k))
                    .collect();
                match candidates.as_slice() {
                    [k] => *k,
                    _ => {
                        return Err(Error::input(
                            "cannot tell which user to sweep; list the others in --fixed or pass --sweep",
                        ))
                    }
                }
            }
        };
        if swept == free {
            return Err(Error::input("the swept user cannot be the axis user"));
        }
        let mut base = scenario.secondary_rates();
        for (k, r) in fixed {
            base[k] = r;
        }
        Ok(Sweep {
            free,
            swept,
            base,
            grid: parse_grid(&args.grid)?,
        })
    }

    fn fixed_report(&self) -> Vec<FixedRate> {
        (0..self.base.len())
            .filter(|&k| k != self.free && k != self.swept)
            .map(|k| FixedRate {
                user: k + 1,
                rate: self.base[k],
            })
            .collect()
    }

    fn point(&self, x: f64) -> Vec<f64> {
        let mut v = self.base.clone();
        v[self.swept] = x;
        v[self.free] = 0.0;
        v
    }
}

fn require_analytic_random(rates: &RateMatrix) -> Result<()> {
    if rates.n_users() != 2 || rates.n_bands() > 2 {
        return Err(Error::Unsupported(
            "analytic envelope unsupported; use simulate".into(),
        ));
    }
    Ok(())
}

/// Envelope of one system at one rate point; `fixed[free]` is ignored.
pub fn system_envelope(system: System, rates: &RateMatrix, fixed: &[f64], free: usize) -> Result<Option<f64>> {
    match system {
        System::S => Ok(orthogonal::envelope_point(rates, fixed, free)?.map(|p| p.max_rate)),
        System::Fixed => Ok(fixedalloc::best_fixed_max(rates, fixed, free)?.map(|p| p.max_rate)),
        System::SHat => {
            require_analytic_random(rates)?;
            let other = 1 - free;
            if rates.n_bands() == 1 {
                Ok(randalloc::one_band_envelope(rates.mu[0][0], rates.mu[0][1], free, fixed[other]))
            } else {
                let mu = rates.as_2x2()?;
                Ok(randalloc::envelope_2x2(&mu, free, fixed[other])?.map(|p| p.max_lambda))
            }
        }
    }
}

fn emit<T: serde::Serialize>(value: &T, json: bool, csv: Option<String>) -> Result<String> {
    match (json, csv) {
        (true, _) => to_json(value),
        (false, Some(csv)) => Ok(csv),
        (false, None) => to_toml(value),
    }
}

fn cmd_rates(args: &CommonArgs) -> Result<Outcome> {
    let l = load(&args.scenario)?;
    let report = RatesReport {
        mu: l.rates.mu.clone(),
        mu_p: l.rates.mu_p.clone(),
        pi: l.rates.pi.clone(),
        provenance: Provenance::new(l.digest, None),
    };
    Ok(Outcome::ok(emit(&report, args.json, None)?))
}

fn cmd_envelope(args: &EnvelopeArgs) -> Result<Outcome> {
    let l = load(&args.common.scenario)?;
    if args.system == System::SHat {
        require_analytic_random(&l.rates)?;
    }
    let sweep = Sweep::resolve(&args.sweep, &l.scenario)?;
    let values = sweep
        .grid
        .iter()
        .map(|&x| system_envelope(args.system, &l.rates, &sweep.point(x), sweep.free))
        .collect::<Result<Vec<_>>>()?;
    let report = RegionReport {
        system: args.system.tag().to_string(),
        axis: sweep.free + 1,
        swept: sweep.swept + 1,
        fixed: sweep.fixed_report(),
        grid: sweep.grid.clone(),
        infeasible: values.iter().map(Option::is_none).collect(),
        values,
        provenance: Provenance::new(l.digest, None),
    };
    let csv = report.to_csv();
    Ok(Outcome::ok(emit(&report, args.common.json, Some(csv))?))
}

fn cmd_decompose(args: &DecomposeArgs) -> Result<Outcome> {
    let l = load(&args.common.scenario)?;
    let nu = l.scenario.n_users();
    let free = user_index(args.axis, nu, "axis user")?;
    let mut rates = l.scenario.secondary_rates();
    for (k, r) in parse_fixed(args.fixed.as_deref().unwrap_or(""), nu)? {
        rates[k] = r;
    }
    rates[free] = 0.0;
    let point = orthogonal::envelope_point(&l.rates, &rates, free)?
        .ok_or_else(|| Error::input("the fixed rates lie outside the orthogonal region"))?;
    let (padded, schedule) = schedule_for(&point.omega_star)?;
    rates[free] = point.max_rate;
    let report = DecomposeReport {
        axis: free + 1,
        rates,
        max_rate: point.max_rate,
        omega: point.omega_star.rows().to_vec(),
        padded: padded.matrix.rows().to_vec(),
        schedule,
        provenance: Provenance::new(l.digest, None),
    };
    Ok(Outcome::ok(emit(&report, args.common.json, None)?))
}

/// Parses `mapping:...` or `gamma:...` policy specifications.
pub fn parse_policy(spec: &str, n_bands: usize, n_users: usize) -> Result<Policy> {
    let (kind, body) = spec
        .split_once(':')
        .ok_or_else(|| Error::input(format!("policy {spec:?} must start with mapping: or gamma:")))?;
    let nums = |s: &str| -> Result<Vec<f64>> {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::input(format!("bad number {v:?} in policy")))
            })
            .collect()
    };
    match kind {
        "mapping" => {
            let bands = nums(body)?
                .into_iter()
                .map(|b| {
                    if b >= 1.0 && b.fract() == 0.0 {
                        Ok(b as usize - 1)
                    } else {
                        Err(Error::input("mapping bands are 1-based integers"))
                    }
                })
                .collect::<Result<Vec<usize>>>()?;
            if bands.len() != n_users {
                return Err(Error::dimension(format!("mapping needs {n_users} bands")));
            }
            Ok(Policy::Fixed(FixedMapping::new(bands, n_bands)?))
        }
        "gamma" => {
            let rows = body.split(';').map(nums).collect::<Result<Vec<_>>>()?;
            let gamma = SelectionMatrix::new(rows)?;
            if gamma.n_bands() != n_bands || gamma.n_users() != n_users {
                return Err(Error::dimension(format!("gamma must be {n_bands}x{n_users}")));
            }
            Ok(Policy::Random(gamma))
        }
        _ => Err(Error::input(format!("unknown policy kind {kind:?}"))),
    }
}

/// Random-selection probabilities for a two-user rate point: the grid point with the
/// largest common relative headroom.
pub fn random_policy_for(rates: &RateMatrix, lambdas: &[f64]) -> Result<SelectionMatrix> {
    require_analytic_random(rates)?;
    Ok(randalloc::balanced_selection(rates, (lambdas[0], lambdas[1]), 0.01)?.1)
}

/// Policy the analysis recommends for a rate point under the given system.
pub fn analytic_policy(system: System, rates: &RateMatrix, lambdas: &[f64]) -> Result<Policy> {
    match system {
        System::S => {
            let (_, omega) = orthogonal::balanced_assignment(rates, lambdas)?;
            Policy::from_assignment(&omega)
        }
        System::Fixed => Ok(Policy::Fixed(fixedalloc::best_mapping_for(rates, lambdas)?.0)),
        System::SHat => Ok(Policy::Random(random_policy_for(rates, lambdas)?)),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome> {
    let l = load(&args.common.scenario)?;
    let nu = l.scenario.n_users();
    let mut lambdas = l.scenario.secondary_rates();
    for (k, r) in parse_fixed(args.fixed.as_deref().unwrap_or(""), nu)? {
        lambdas[k] = r;
    }
    let scenario = l.scenario.with_secondary_rates(&lambdas)?;
    let policy = match &args.policy {
        Some(spec) => parse_policy(spec, l.scenario.n_bands(), nu)?,
        None => analytic_policy(args.system, &l.rates, &lambdas)?,
    };
    let expected = match args.system {
        System::S => matches!(policy, Policy::Orthogonal(_)),
        System::SHat => matches!(policy, Policy::Random(_)),
        System::Fixed => matches!(policy, Policy::Fixed(_)),
    };
    if !expected {
        return Err(Error::input("policy kind does not match --system"));
    }
    let config = SimConfig {
        n_slots: args.slots,
        warmup: args.warmup.unwrap_or(args.slots / 10),
        seed: args.seed,
        trace_stride: args.stride,
    };
    let result = sim::run(&scenario, &policy, &config)?;
    if let Some(path) = &args.trace_csv {
        write_file(path, &sim::trace_csv(&result))?;
    }
    let report = SimReport::new(
        args.system.tag(),
        lambdas,
        &result,
        Provenance::new(l.digest, Some(args.seed)),
    );
    Ok(Outcome::ok(emit(&report, args.common.json, None)?))
}

fn exceeds(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a > b + tol,
        (Some(_), None) => true,
        _ => false,
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<Outcome> {
    let l = load(&args.common.scenario)?;
    require_analytic_random(&l.rates)?;
    let sweep = Sweep::resolve(&args.sweep, &l.scenario)?;
    let mut s = Vec::new();
    let mut s_hat = Vec::new();
    let mut fixed_best = Vec::new();
    let has_fixed = l.rates.n_bands() >= l.rates.n_users();
    let mappings = if has_fixed {
        fixedalloc::all_mappings(&l.rates)?
    } else {
        Vec::new()
    };
    let mut curves: Vec<MappingCurve> = mappings
        .iter()
        .map(|d| MappingCurve {
            mapping: d.one_based(),
            values: Vec::new(),
        })
        .collect();
    let mut violations = Vec::new();
    for &x in &sweep.grid {
        let p = sweep.point(x);
        let vs = system_envelope(System::S, &l.rates, &p, sweep.free)?;
        let vh = system_envelope(System::SHat, &l.rates, &p, sweep.free)?;
        let vf = if has_fixed {
            system_envelope(System::Fixed, &l.rates, &p, sweep.free)?
        } else {
            None
        };
        for (d, c) in mappings.iter().zip(curves.iter_mut()) {
            c.values.push(fixedalloc::mapping_max(d, &l.rates, &p, sweep.free));
        }
        if exceeds(vh, vs, GRID_TOL) {
            violations.push(format!("at {x}: S_hat {vh:?} exceeds S {vs:?}"));
        }
        if exceeds(vf, vh, GRID_TOL) {
            violations.push(format!("at {x}: fixed {vf:?} exceeds S_hat {vh:?}"));
        }
        if exceeds(vf, vs, ANALYTIC_TOL) {
            violations.push(format!("at {x}: fixed {vf:?} exceeds S {vs:?}"));
        }
        s.push(vs);
        s_hat.push(vh);
        fixed_best.push(vf);
    }
    let report = CompareReport {
        axis: sweep.free + 1,
        swept: sweep.swept + 1,
        grid: sweep.grid.clone(),
        s,
        s_hat,
        fixed_best,
        mappings: curves,
        violations: violations.clone(),
        provenance: Provenance::new(l.digest, None),
    };
    let csv = report.to_csv();
    Ok(Outcome {
        text: emit(&report, args.common.json, Some(csv))?,
        violations,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Rates(a) => a,
            Command::Envelope(a) => &a.common,
            Command::Decompose(a) => &a.common,
            Command::Simulate(a) => &a.common,
            Command::Compare(a) => &a.common,
        }
    }
}

/// Runs a parsed command; output goes to `--out` when given, otherwise it is returned.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let mut outcome = match &cli.command {
        Command::Rates(a) => cmd_rates(a)?,
        Command::Envelope(a) => cmd_envelope(a)?,
        Command::Decompose(a) => cmd_decompose(a)?,
        Command::Simulate(a) => cmd_simulate(a)?,
        Command::Compare(a) => cmd_compare(a)?,
    };
    if let Some(path) = &cli.command.common().out {
        write_file(path, &outcome.text)?;
        outcome.text.clear();
    }
    Ok(outcome)
}
