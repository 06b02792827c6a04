//! Golden cases bundled with the binary. Every case can be re-checked against the live code.

use adrf_core::{
    drf_allocate, pdrf_allocate, ClaimReceipt, DemandSet, Machine, MachineConfig, MachineError,
    RationalShare, ResourceVector, UserId,
};
use adrf_sim::{replay, run_simulation_with, CallKind};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::regression::{fit_linear, parse_decimal, relative_error, RegressionFit};

const FILES: &[(&str, &str)] = &[
    ("drf-classic", include_str!("../fixtures/drf-classic.json")),
    (
        "single-user-depletion",
        include_str!("../fixtures/single-user-depletion.json"),
    ),
    (
        "pdrf-equal-ds",
        include_str!("../fixtures/pdrf-equal-ds.json"),
    ),
    (
        "adrf-worked-example",
        include_str!("../fixtures/adrf-worked-example.json"),
    ),
    (
        "demand-cost-measured",
        include_str!("../fixtures/demand-cost-measured.json"),
    ),
    (
        "claim-cost-measured",
        include_str!("../fixtures/claim-cost-measured.json"),
    ),
    (
        "update-state-cost-measured",
        include_str!("../fixtures/update-state-cost-measured.json"),
    ),
    (
        "golden-trace",
        include_str!("../fixtures/golden-trace.json"),
    ),
];

const TRACES: &[(&str, &str)] = &[(
    "golden-trace.tsv",
    include_str!("../fixtures/golden-trace.tsv"),
)];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FixtureError {
    #[error("no fixture named `{0}`")]
    Unknown(String),
    #[error("fixture `{name}` is malformed: {reason}")]
    Malformed { name: String, reason: String },
    #[error("fixture `{name}` disagrees with the code: {reason}")]
    Drift { name: String, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProvenanceKind {
    /// Computed by an independent oracle and frozen.
    Derived,
    /// Published measurements, transcribed.
    Published,
    /// Follows directly from the definitions.
    Trivial,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: ProvenanceKind,
    pub source: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oracle {
    Drf,
    Pdrf,
    /// One epoch of the state machine: demands in epoch 1, claims in epoch 2.
    Machine,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationInputs {
    pub demands: Vec<ResourceVector>,
    pub reserves: ResourceVector,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedAllocation {
    pub task_counts: Vec<u64>,
    pub shares: Vec<ResourceVector>,
    /// PDRF cycle count.
    #[serde(default)]
    pub cycles: Option<RationalShare>,
    /// Fixed-point cycle count of the state machine, as a decimal string.
    #[serde(default)]
    pub k_prime: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSeriesInputs {
    pub call_kind: CallKind,
    /// `(m, cost)` with the cost as an exact decimal string.
    pub points: Vec<(i64, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedFit {
    pub slope: String,
    pub slope_tolerance: String,
    #[serde(default)]
    pub intercept: Option<String>,
    #[serde(default)]
    pub intercept_tolerance: Option<String>,
    #[serde(default)]
    pub min_r_squared: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceInputs {
    pub config: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedTrace {
    pub trace_file: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseBody {
    Allocation {
        inputs: AllocationInputs,
        check: Vec<Oracle>,
        expected: ExpectedAllocation,
    },
    CostSeries {
        inputs: CostSeriesInputs,
        expected: ExpectedFit,
    },
    Trace {
        inputs: TraceInputs,
        expected: ExpectedTrace,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub name: String,
    pub description: String,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub body: CaseBody,
}

pub fn fixture_names() -> impl Iterator<Item = &'static str> {
    FILES.iter().map(|(name, _)| *name)
}

pub fn load_fixture(name: &str) -> Result<GoldenCase, FixtureError> {
    let (_, text) = FILES
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| FixtureError::Unknown(name.to_string()))?;
    parse_fixture(name, text)
}

pub fn parse_fixture(name: &str, text: &str) -> Result<GoldenCase, FixtureError> {
    let malformed = |reason: String| FixtureError::Malformed {
        name: name.to_string(),
        reason,
    };
    let case: GoldenCase = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if case.name != name {
        return Err(malformed(format!("declares name `{}`", case.name)));
    }
    match &case.body {
        CaseBody::Allocation {
            inputs,
            check,
            expected,
        } => {
            let n = inputs.demands.len();
            if expected.task_counts.len() != n || expected.shares.len() != n {
                return Err(malformed(format!("expected values for {n} users")));
            }
            if check.is_empty() {
                return Err(malformed("nothing to check".into()));
            }
        }
        CaseBody::CostSeries { .. } => {
            case.cost_points().map_err(malformed)?;
        }
        CaseBody::Trace { expected, .. } => {
            trace_text(&expected.trace_file)
                .ok_or_else(|| malformed(format!("no bundled trace `{}`", expected.trace_file)))?;
        }
    }
    Ok(case)
}

fn trace_text(file: &str) -> Option<&'static str> {
    TRACES.iter().find(|(n, _)| *n == file).map(|(_, t)| *t)
}

impl GoldenCase {
    /// Points of a cost series as exact rationals.
    pub fn cost_points(&self) -> Result<Vec<(i64, BigRational)>, String> {
        match &self.body {
            CaseBody::CostSeries { inputs, .. } => inputs
                .points
                .iter()
                .map(|(m, y)| parse_decimal(y).map(|y| (*m, y)).map_err(|e| e.to_string()))
                .collect(),
            _ => Err(format!("`{}` is not a cost series", self.name)),
        }
    }

    /// Re-derives every expected value with the current code.
    pub fn validate(&self) -> Result<(), FixtureError> {
        let drift = |reason: String| FixtureError::Drift {
            name: self.name.clone(),
            reason,
        };
        match &self.body {
            CaseBody::Allocation {
                inputs,
                check,
                expected,
            } => {
                for oracle in check {
                    check_allocation(*oracle, inputs, expected)
                        .map_err(|r| drift(format!("{oracle:?}: {r}")))?;
                }
                Ok(())
            }
            CaseBody::CostSeries { expected, .. } => {
                let points = self.cost_points().map_err(drift)?;
                let fit = fit_linear(&points).map_err(|e| drift(e.to_string()))?;
                check_fit(&fit, expected).map_err(drift)
            }
            CaseBody::Trace { inputs, expected } => {
                let cfg = &inputs.config;
                let sim = cfg.sim_config(cfg.resources, 0);
                let trace = run_simulation_with(&sim, cfg.cost.clone())
                    .map_err(|e| drift(e.to_string()))?;
                let golden = trace_text(&expected.trace_file)
                    .ok_or_else(|| drift("trace file missing".into()))?;
                if trace.to_text() != golden {
                    return Err(drift("simulated trace differs from the bundled one".into()));
                }
                let parsed = golden
                    .parse()
                    .map_err(|e: adrf_sim::SimError| drift(e.to_string()))?;
                replay(&parsed).map_err(|d| drift(d.to_string()))
            }
        }
    }

    /// The bundled trace text, for trace cases.
    pub fn trace_text(&self) -> Option<&'static str> {
        match &self.body {
            CaseBody::Trace { expected, .. } => trace_text(&expected.trace_file),
            _ => None,
        }
    }
}

/// Checks a fit against expected coefficients with relative tolerances.
pub fn check_fit(fit: &RegressionFit, expected: &ExpectedFit) -> Result<(), String> {
    let q = |s: &str| parse_decimal(s).map_err(|e| e.to_string());
    let within = |value: &BigRational, target: &str, tol: &str, what: &str| -> Result<(), String> {
        let err = relative_error(value, &q(target)?);
        if err > q(tol)? {
            return Err(format!(
                "{what} {fit} is off {target} by more than {tol}",
                fit = crate::regression::to_f64(value)
            ));
        }
        Ok(())
    };
    within(
        &fit.slope,
        &expected.slope,
        &expected.slope_tolerance,
        "slope",
    )?;
    if let (Some(target), Some(tol)) = (&expected.intercept, &expected.intercept_tolerance) {
        within(&fit.intercept, target, tol, "intercept")?;
    }
    if let Some(min) = &expected.min_r_squared {
        if fit.r_squared < q(min)? {
            return Err(format!(
                "R^2 {} below {min}",
                crate::regression::to_f64(&fit.r_squared)
            ));
        }
    }
    Ok(())
}

/// Result of one state-machine epoch on a fixed demand set.
#[derive(Clone, Debug)]
pub struct MachineEpoch {
    pub k_prime: u128,
    pub claims: Vec<ClaimReceipt>,
    pub machine: Machine,
}

/// Registers every user, collects all demands in epoch 1 and all claims at the start of
/// epoch 2, with `reserves` as the per-epoch injection.
pub fn machine_one_epoch(
    demands: &[ResourceVector],
    reserves: &ResourceVector,
) -> Result<MachineEpoch, MachineError> {
    let n = demands.len() as u64;
    let span = (2 * n).max(1);
    let mut machine = Machine::new(MachineConfig::new(span, 1, reserves.clone()))?;
    for u in 0..n {
        machine.register_user(UserId(u as u32))?;
    }
    for (u, d) in demands.iter().enumerate() {
        machine.demand(UserId(u as u32), d, 1 + u as u64)?;
    }
    let mut claims = Vec::with_capacity(demands.len());
    for u in 0..n {
        claims.push(machine.claim(UserId(u as u32), 1 + span + u)?);
    }
    machine.audit()?;
    Ok(MachineEpoch {
        k_prime: machine.k_prime(),
        claims,
        machine,
    })
}

fn check_allocation(
    oracle: Oracle,
    inputs: &AllocationInputs,
    expected: &ExpectedAllocation,
) -> Result<(), String> {
    let (counts, shares) = match oracle {
        Oracle::Drf | Oracle::Pdrf => {
            let set = DemandSet::from_vectors(inputs.demands.clone()).map_err(|e| e.to_string())?;
            let result = if oracle == Oracle::Drf {
                drf_allocate(&set, &inputs.reserves)
            } else {
                pdrf_allocate(&set, &inputs.reserves)
            }
            .map_err(|e| e.to_string())?;
            if oracle == Oracle::Pdrf {
                if let Some(k) = expected.cycles {
                    if result.cycles != k {
                        return Err(format!("cycles {} != {k}", result.cycles));
                    }
                }
            }
            (result.task_counts, result.allocations)
        }
        Oracle::Machine => {
            let run =
                machine_one_epoch(&inputs.demands, &inputs.reserves).map_err(|e| e.to_string())?;
            if let Some(k) = &expected.k_prime {
                if run.k_prime.to_string() != *k {
                    return Err(format!("k' {} != {k}", run.k_prime));
                }
            }
            if run.claims.iter().any(|c| c.clamped) {
                return Err("a claim was clamped".into());
            }
            (
                run.claims.iter().map(|c| c.task_count).collect(),
                run.claims.into_iter().map(|c| c.share).collect(),
            )
        }
    };
    if counts != expected.task_counts {
        return Err(format!(
            "task counts {counts:?} != {:?}",
            expected.task_counts
        ));
    }
    if shares != expected.shares {
        return Err(format!("shares {shares:?} != {:?}", expected.shares));
    }
    Ok(())
}
