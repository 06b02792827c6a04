//! The four subcommands as library functions returning typed reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use adrf_core::{compare_pdrf_drf_with, DemandSet, DrfTermination, ResourceVector};
use adrf_sim::{replay, run_simulation_with, CallKind, CostRecord, Trace};
use num_integer::Integer;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{check_accounting, crosscheck_trace, ClaimMismatch};
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::fixtures::load_fixture;
use crate::regression::{fit_linear, to_f64, FitSummary, RegressionFit};

pub const COSTS_FILE: &str = "costs.csv";

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    fs::write(path, text + "\n").map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn simulate(cfg: &ExperimentConfig, m: usize, trial: u64) -> Result<Trace, CliError> {
    Ok(run_simulation_with(
        &cfg.sim_config(m, trial),
        cfg.cost.clone(),
    )?)
}

// ---------------------------------------------------------------- run

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunEntry {
    pub resources: usize,
    pub trial: u64,
    pub seed: u64,
    pub trace: PathBuf,
    pub calls: usize,
    pub transitions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub runs: Vec<RunEntry>,
    pub cost_csv: PathBuf,
    pub cost_records: usize,
}

pub fn trace_file_name(m: usize, trial: u64) -> String {
    format!("trace-m{m}-t{trial}.tsv")
}

/// Simulates every (m, trial) pair, checks each trace, and writes the traces, one combined cost
/// CSV and `run-summary.json` into the output directory.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    cfg.validate()?;
    ensure_dir(&cfg.out)?;
    let traces = cfg
        .runs()
        .into_par_iter()
        .map(|(m, t)| {
            let trace = simulate(cfg, m, t)?;
            check_accounting(&trace)
                .map_err(|e| CliError::Invariant(format!("m={m} trial={t}: {e}")))?;
            replay(&trace).map_err(|d| CliError::Invariant(format!("m={m} trial={t}: {d}")))?;
            log::info!("m={m} trial={t}: {} calls checked", trace.records.len());
            Ok((m, t, trace))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let cost_csv = cfg.out.join(COSTS_FILE);
    let mut csv = csv::Writer::from_path(&cost_csv)
        .map_err(|e| CliError::io(format!("writing {}", cost_csv.display()), e.into()))?;
    let mut runs = Vec::with_capacity(traces.len());
    let mut cost_records = 0;
    for (m, t, trace) in &traces {
        let path = cfg.out.join(trace_file_name(*m, *t));
        trace.write_file(&path)?;
        for rec in trace.cost_records() {
            csv.serialize(&rec)
                .map_err(|e| CliError::io(format!("writing {}", cost_csv.display()), e.into()))?;
            cost_records += 1;
        }
        runs.push(RunEntry {
            resources: *m,
            trial: *t,
            seed: trace.header.config.seed,
            trace: path,
            calls: trace.records.len(),
            transitions: trace
                .records
                .iter()
                .filter(|r| r.update_cost.is_some())
                .count(),
        });
    }
    csv.flush()
        .map_err(|e| CliError::io(format!("writing {}", cost_csv.display()), e))?;
    let report = RunReport {
        runs,
        cost_csv,
        cost_records,
    };
    write_json(&cfg.out.join("run-summary.json"), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------- crosscheck

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocatedMismatch {
    pub resources: usize,
    pub trial: u64,
    #[serde(flatten)]
    pub claim: ClaimMismatch,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrosscheckReport {
    pub runs: usize,
    pub epochs: usize,
    pub claims: usize,
    pub matches: usize,
    /// Machine claims equal to the fixed-point reference, as a fraction.
    pub match_rate: f64,
    /// Count of claims per value of (fixed-point - exact-rational) task count.
    pub fixed_minus_rational: BTreeMap<i64, usize>,
    pub max_abs_delta: u64,
    pub nonzero_delta_rate: f64,
    pub first_mismatch: Option<LocatedMismatch>,
}

impl CrosscheckReport {
    pub fn passed(&self) -> bool {
        self.first_mismatch.is_none() && self.matches == self.claims
    }
}

/// Simulates every (m, trial) pair and recomputes each claim from the recorded inputs.
pub fn cmd_crosscheck(cfg: &ExperimentConfig) -> Result<CrosscheckReport, CliError> {
    cfg.validate()?;
    let per_run = cfg
        .runs()
        .into_par_iter()
        .map(|(m, t)| {
            let trace = simulate(cfg, m, t)?;
            let check = crosscheck_trace(&trace)
                .map_err(|e| CliError::Invariant(format!("m={m} trial={t}: {e}")))?;
            log::info!(
                "m={m} trial={t}: {}/{} claims match",
                check.matches,
                check.claims
            );
            Ok((m, t, check))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut report = CrosscheckReport {
        runs: per_run.len(),
        epochs: 0,
        claims: 0,
        matches: 0,
        match_rate: 1.0,
        fixed_minus_rational: BTreeMap::new(),
        max_abs_delta: 0,
        nonzero_delta_rate: 0.0,
        first_mismatch: None,
    };
    for (m, t, check) in per_run {
        report.epochs += check.epochs;
        report.claims += check.claims;
        report.matches += check.matches;
        for d in check.fixed_minus_rational {
            *report.fixed_minus_rational.entry(d).or_default() += 1;
            report.max_abs_delta = report.max_abs_delta.max(d.unsigned_abs());
        }
        if report.first_mismatch.is_none() {
            report.first_mismatch = check.first_mismatch.map(|claim| LocatedMismatch {
                resources: m,
                trial: t,
                claim,
            });
        }
    }
    if report.claims > 0 {
        report.match_rate = report.matches as f64 / report.claims as f64;
        let zero = report.fixed_minus_rational.get(&0).copied().unwrap_or(0);
        report.nonzero_delta_rate = (report.claims - zero) as f64 / report.claims as f64;
    }
    Ok(report)
}

// ---------------------------------------------------------------- stats

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Proportion {
    pub count: usize,
    pub fraction: f64,
    /// 95% Wilson score interval.
    pub ci95: [f64; 2],
}

impl Proportion {
    pub fn new(count: usize, total: usize) -> Self {
        if total == 0 {
            return Proportion {
                count,
                fraction: 0.0,
                ci95: [0.0, 1.0],
            };
        }
        let z = 1.959_963_984_540_054_f64;
        let n = total as f64;
        let p = count as f64 / n;
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        Proportion {
            count,
            fraction: p,
            ci95: [(centre - half).max(0.0), (centre + half).min(1.0)],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StatsReport {
    pub trials: u64,
    pub users: u32,
    pub resources: usize,
    pub exact_cycles: bool,
    pub termination: String,
    pub user_samples: usize,
    /// DRF gave exactly one more task than PDRF.
    pub underallocated: Proportion,
    /// PDRF gave more tasks than DRF.
    pub overallocated: Proportion,
    /// DRF gave two or more tasks more than PDRF.
    pub underallocated_by_more: Proportion,
    pub exact: Proportion,
    pub min_delta: i64,
    pub max_delta: i64,
}

/// Random instance: demands uniform on the demand range, reserves uniform on the reserve range.
pub fn random_instance(
    cfg: &ExperimentConfig,
    m: usize,
    trial: u64,
) -> (DemandSet, ResourceVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial));
    let (rl, rh) = (cfg.reserve_range.low, cfg.reserve_range.high);
    let (dl, dh) = (cfg.demand_range.low, cfg.demand_range.high);
    let reserves = (0..m).map(|_| rng.gen_range(rl..=rh)).collect();
    let demands = (0..cfg.users)
        .map(|_| {
            let v = (0..m).map(|_| rng.gen_range(dl..=dh)).collect();
            ResourceVector::new(v).expect("m >= 1")
        })
        .collect();
    (
        DemandSet::from_vectors(demands).expect("valid demands"),
        ResourceVector::new(reserves).expect("m >= 1"),
    )
}

/// Instance on which PDRF is exact: every demand is a divisor-of-12 multiple of one base vector
/// and the reserves are a whole number of cycles of the combined drain.
pub fn exact_cycle_instance(
    cfg: &ExperimentConfig,
    m: usize,
    trial: u64,
) -> (DemandSet, ResourceVector) {
    const MULTIPLES: [u64; 6] = [1, 2, 3, 4, 6, 12];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(trial));
    let (dl, dh) = (cfg.demand_range.low, cfg.demand_range.high);
    let base: Vec<u64> = (0..m).map(|_| rng.gen_range(dl..=dh)).collect();
    let multiples: Vec<u64> = (0..cfg.users)
        .map(|_| MULTIPLES[rng.gen_range(0..MULTIPLES.len())])
        .collect();
    let smallest = *multiples.iter().min().expect("users >= 1");
    let lcm = multiples.iter().fold(1u64, |acc, &a| acc.lcm(&a));
    let cycles = rng.gen_range(1..=5u64);
    let demands = multiples
        .iter()
        .map(|a| ResourceVector::new(base.iter().map(|d| d * a).collect()).expect("m >= 1"))
        .collect();
    let reserves = base
        .iter()
        .map(|d| cfg.users as u64 * smallest * d * cycles * lcm)
        .collect();
    (
        DemandSet::from_vectors(demands).expect("valid demands"),
        ResourceVector::new(reserves).expect("m >= 1"),
    )
}

/// Monte-Carlo comparison of PDRF against the DRF loop. Trials run in parallel and are reduced in
/// trial order.
pub fn cmd_stats(cfg: &ExperimentConfig) -> Result<StatsReport, CliError> {
    cfg.validate()?;
    let m = cfg.resources;
    let termination = if cfg.skip_unfit {
        DrfTermination::SkipUnfit
    } else {
        DrfTermination::StopAtFirstUnfit
    };
    let deltas = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let (demands, reserves) = if cfg.exact_cycles {
                exact_cycle_instance(cfg, m, t)
            } else {
                random_instance(cfg, m, t)
            };
            compare_pdrf_drf_with(&demands, &reserves, termination)
                .map(|s| s.deltas)
                .map_err(|e| CliError::Invariant(format!("trial {t}: {e}")))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let all: Vec<i64> = deltas.into_iter().flatten().collect();
    let total = all.len();
    let count = |f: fn(i64) -> bool| all.iter().filter(|&&d| f(d)).count();
    Ok(StatsReport {
        trials: cfg.trials,
        users: cfg.users,
        resources: m,
        exact_cycles: cfg.exact_cycles,
        termination: format!("{termination:?}"),
        user_samples: total,
        underallocated: Proportion::new(count(|d| d == 1), total),
        overallocated: Proportion::new(count(|d| d < 0), total),
        underallocated_by_more: Proportion::new(count(|d| d > 1), total),
        exact: Proportion::new(count(|d| d == 0), total),
        min_delta: all.iter().copied().min().unwrap_or(0),
        max_delta: all.iter().copied().max().unwrap_or(0),
    })
}

// ---------------------------------------------------------------- costfit

#[derive(Clone, Debug, PartialEq)]
pub struct KindFit {
    pub kind: CallKind,
    pub used: usize,
    pub excluded: usize,
    pub per_call: RegressionFit,
    pub per_m_mean: RegressionFit,
    /// Mean cost per m and its residual under the per-call fit.
    pub means: Vec<(i64, BigRational, BigRational)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KindFitSummary {
    pub call_kind: CallKind,
    pub used: usize,
    pub excluded: usize,
    pub per_call: FitSummary,
    pub per_m_mean: FitSummary,
    pub residuals: Vec<MeanResidual>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanResidual {
    pub m: i64,
    pub mean_cost: f64,
    pub residual: f64,
}

impl KindFit {
    pub fn summary(&self) -> KindFitSummary {
        KindFitSummary {
            call_kind: self.kind,
            used: self.used,
            excluded: self.excluded,
            per_call: self.per_call.summary(),
            per_m_mean: self.per_m_mean.summary(),
            residuals: self
                .means
                .iter()
                .map(|(m, mean, res)| MeanResidual {
                    m: *m,
                    mean_cost: to_f64(mean),
                    residual: to_f64(res),
                })
                .collect(),
        }
    }
}

/// Demand calls 1-2 and claim call 1 of each user carry one-time costs. Calls are ranked by
/// distinct epoch per (kind, m, user), so repeated trials in one file are each trimmed.
pub fn is_warmup(kind: CallKind, rank: usize) -> bool {
    match kind {
        CallKind::Demand => rank < 2,
        CallKind::Claim => rank < 1,
        CallKind::UpdateState => false,
    }
}

fn fit_points(
    kind: CallKind,
    points: Vec<(i64, BigRational)>,
    excluded: usize,
) -> Result<KindFit, CliError> {
    let per_call = fit_linear(&points).map_err(|e| CliError::Config(format!("{kind}: {e}")))?;
    let mut grouped: BTreeMap<i64, (BigRational, usize)> = BTreeMap::new();
    for (m, y) in &points {
        let slot = grouped
            .entry(*m)
            .or_insert((BigRational::from_integer(0.into()), 0));
        slot.0 += y;
        slot.1 += 1;
    }
    let mean_points: Vec<(i64, BigRational)> = grouped
        .into_iter()
        .map(|(m, (sum, n))| (m, sum / BigRational::from_integer(n.into())))
        .collect();
    let per_m_mean =
        fit_linear(&mean_points).map_err(|e| CliError::Config(format!("{kind}: {e}")))?;
    let means = mean_points
        .iter()
        .map(|(m, y)| (*m, y.clone(), y - per_call.predict(*m)))
        .collect();
    Ok(KindFit {
        kind,
        used: points.len(),
        excluded,
        per_call,
        per_m_mean,
        means,
    })
}

/// Fits cost against m for every call kind present, warm-up calls excluded.
pub fn fit_cost_records(records: &[CostRecord]) -> Result<Vec<KindFit>, CliError> {
    let mut epochs: BTreeMap<(CallKind, usize, u32), BTreeSet<u64>> = BTreeMap::new();
    for r in records {
        epochs
            .entry((r.call_kind, r.m, r.user))
            .or_default()
            .insert(r.epoch);
    }
    let mut by_kind: BTreeMap<CallKind, (Vec<(i64, BigRational)>, usize)> = BTreeMap::new();
    for r in records {
        let rank = epochs[&(r.call_kind, r.m, r.user)].range(..r.epoch).count();
        let slot = by_kind.entry(r.call_kind).or_default();
        if is_warmup(r.call_kind, rank) {
            slot.1 += 1;
        } else {
            slot.0
                .push((r.m as i64, BigRational::from_integer(r.cost_units.into())));
        }
    }
    if by_kind.is_empty() {
        return Err(CliError::Config("no cost records".into()));
    }
    by_kind
        .into_iter()
        .map(|(kind, (points, excluded))| fit_points(kind, points, excluded))
        .collect()
}

pub fn read_cost_csv(path: &Path) -> Result<Vec<CostRecord>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e.into()))?;
    reader
        .deserialize()
        .collect::<Result<Vec<CostRecord>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub enum CostSource<'a> {
    Csv(&'a Path),
    Fixture(&'a str),
}

/// Fits either a cost CSV written by `run` or a bundled measured cost series.
pub fn cmd_costfit(source: CostSource<'_>) -> Result<Vec<KindFit>, CliError> {
    match source {
        CostSource::Csv(path) => fit_cost_records(&read_cost_csv(path)?),
        CostSource::Fixture(name) => {
            let case = load_fixture(name).map_err(|e| CliError::Config(e.to_string()))?;
            let kind = match &case.body {
                crate::fixtures::CaseBody::CostSeries { inputs, .. } => inputs.call_kind,
                _ => return Err(CliError::Config(format!("`{name}` is not a cost series"))),
            };
            let points = case.cost_points().map_err(CliError::Config)?;
            Ok(vec![fit_points(kind, points, 0)?])
        }
    }
}
