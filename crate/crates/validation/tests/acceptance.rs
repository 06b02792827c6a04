//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use adrf_cli::commands::{cmd_costfit, cmd_crosscheck, cmd_stats, CostSource, KindFit};
use adrf_cli::fixtures::machine_one_epoch;
use adrf_cli::regression::{parse_decimal, relative_error, to_f64};
use adrf_cli::ExperimentConfig;
use adrf_core::{
    drf_allocate, pdrf_allocate, progressive_filling, weighted_pdrf_allocate,
    weighted_progressive_filling, DemandSet, RationalShare, ResourceVector, UserId, WeightVector,
};
use adrf_sim::{
    build_schedule, replay, run_simulation, BlockTx, Call, CallKind, CostModel, SimConfig,
    Simulator,
};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rv(v: &[u64]) -> ResourceVector {
    ResourceVector::new(v.to_vec()).unwrap()
}

fn q(s: &str) -> BigRational {
    parse_decimal(s).unwrap()
}

/// The machine-vs-reference runs shared by criteria 2, 3 and 8.
fn reference_runs() -> ExperimentConfig {
    ExperimentConfig {
        users: 10,
        sweep: vec![2, 5, 10],
        trials: 10,
        seed: 0,
        epochs: 34,
        ..ExperimentConfig::default()
    }
}

fn ac1_worked_example() -> Outcome {
    let demands = DemandSet::from_vectors(vec![rv(&[1, 4]), rv(&[3, 1])]).unwrap();
    let reserves = rv(&[9, 18]);
    let shares = vec![rv(&[3, 12]), rv(&[6, 2])];

    let drf = drf_allocate(&demands, &reserves).unwrap();
    ensure(drf.task_counts == [3, 2], || {
        format!("drf {:?}", drf.task_counts)
    })?;
    ensure(drf.allocations == shares, || {
        format!("drf shares {:?}", drf.allocations)
    })?;

    let pdrf = pdrf_allocate(&demands, &reserves).unwrap();
    ensure(pdrf.task_counts == [3, 2], || {
        format!("pdrf {:?}", pdrf.task_counts)
    })?;
    ensure(pdrf.allocations == shares, || {
        format!("pdrf shares {:?}", pdrf.allocations)
    })?;

    let run = machine_one_epoch(&[rv(&[1, 4]), rv(&[3, 1])], &reserves).unwrap();
    let counts: Vec<u64> = run.claims.iter().map(|c| c.task_count).collect();
    let machine_shares: Vec<ResourceVector> = run.claims.iter().map(|c| c.share.clone()).collect();
    ensure(counts == [3, 2], || format!("machine {counts:?}"))?;
    ensure(machine_shares == shares, || {
        format!("machine shares {machine_shares:?}")
    })?;
    Ok(format!("drf = pdrf = machine = (3,2), k'={}", run.k_prime))
}

fn ac2_machine_matches_reference() -> Outcome {
    let report = cmd_crosscheck(&reference_runs()).map_err(|e| e.to_string())?;
    ensure(report.epochs >= 990, || {
        format!("only {} claiming epochs", report.epochs)
    })?;
    ensure(report.passed() && report.match_rate == 1.0, || {
        format!(
            "match rate {} first mismatch {:?}",
            report.match_rate, report.first_mismatch
        )
    })?;
    Ok(format!(
        "{} runs, {} simulated epochs ({} with claims), {} claims, match rate {}",
        report.runs,
        report.runs as u64 * reference_runs().epochs,
        report.epochs,
        report.claims,
        report.match_rate
    ))
}

fn ac3_fixed_vs_rational() -> Outcome {
    let mut details = Vec::new();
    for (label, cfg) in [
        ("reference", reference_runs()),
        (
            "m=5",
            ExperimentConfig {
                sweep: vec![5],
                trials: 30,
                seed: 100,
                ..reference_runs()
            },
        ),
    ] {
        let report = cmd_crosscheck(&cfg).map_err(|e| e.to_string())?;
        ensure(report.max_abs_delta <= 1, || {
            format!("|fixed - rational| reached {}", report.max_abs_delta)
        })?;
        details.push(format!(
            "{label}: {} claims, nonzero delta rate {:.5} {:?}",
            report.claims, report.nonzero_delta_rate, report.fixed_minus_rational
        ));
    }
    Ok(details.join("; "))
}

fn ac4_approximation_statistics() -> Outcome {
    let cfg = ExperimentConfig {
        users: 10,
        resources: 4,
        trials: 10_000,
        seed: 0,
        ..ExperimentConfig::default()
    };
    let report = cmd_stats(&cfg).map_err(|e| e.to_string())?;
    let skip = cmd_stats(&ExperimentConfig {
        skip_unfit: true,
        ..cfg.clone()
    })
    .map_err(|e| e.to_string())?;
    let summary = format!(
        "under {:.4} ci95 [{:.4},{:.4}], over {:.4} ci95 [{:.4},{:.4}], under>1 {}, delta range [{},{}]; \
         skip-unfit loop: under {:.4}, over {:.4}, under>1 {:.4}",
        report.underallocated.fraction,
        report.underallocated.ci95[0],
        report.underallocated.ci95[1],
        report.overallocated.fraction,
        report.overallocated.ci95[0],
        report.overallocated.ci95[1],
        report.underallocated_by_more.count,
        report.min_delta,
        report.max_delta,
        skip.underallocated.fraction,
        skip.overallocated.fraction,
        skip.underallocated_by_more.fraction,
    );
    ensure(report.user_samples == 100_000, || {
        format!("{} samples", report.user_samples)
    })?;
    ensure(report.underallocated_by_more.count == 0, || {
        format!("underallocation beyond one task: {summary}")
    })?;
    let under = report.underallocated.fraction;
    ensure((0.35..=0.60).contains(&under), || {
        format!("underallocation out of band: {summary}")
    })?;
    ensure(report.overallocated.fraction <= 0.01, || {
        format!("overallocation above 0.01: {summary}")
    })?;
    Ok(summary)
}

fn ac5_conservation() -> Outcome {
    let mut calls = 0usize;
    let mut clamps = 0usize;

    // Scheduled runs with random shapes, audited after every call.
    let mut runner = TestRunner::new_with_rng(
        RunnerConfig {
            failure_persistence: None,
            ..RunnerConfig::with_cases(300)
        },
        proptest::test_runner::TestRng::deterministic_rng(
            proptest::test_runner::RngAlgorithm::ChaCha,
        ),
    );
    let shapes = (
        1u32..=10,
        1usize..=6,
        2u64..=8,
        1u64..=20,
        1u64..=300,
        any::<u64>(),
    );
    let scheduled = std::cell::Cell::new(0usize);
    let clamped = std::cell::Cell::new(0usize);
    runner
        .run(
            &shapes,
            |(users, resources, epochs, high, reserve, seed)| {
                let cfg = SimConfig {
                    users,
                    resources,
                    epochs,
                    demand_low: 1,
                    demand_high: high,
                    per_user_reserve: reserve,
                    seed,
                };
                let mut sim = Simulator::new(cfg.machine_config(), CostModel::default()).unwrap();
                for tx in build_schedule(&cfg).unwrap() {
                    let rec = sim
                        .execute(&tx)
                        .map_err(|e| TestCaseError::fail(e.to_string()))?;
                    scheduled.set(scheduled.get() + 1);
                    clamped.set(clamped.get() + rec.clamped as usize);
                    sim.machine()
                        .audit()
                        .map_err(|e| TestCaseError::fail(e.to_string()))?;
                }
                Ok(())
            },
        )
        .map_err(|e| e.to_string())?;
    calls += scheduled.get();
    clamps += clamped.get();

    // Unscheduled calls at random blocks, including ones the machine must reject.
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut rejected = 0usize;
    for _ in 0..100 {
        let users = rng.gen_range(1..=6u32);
        let m = rng.gen_range(1..=4usize);
        let cfg = SimConfig {
            users,
            resources: m,
            per_user_reserve: rng.gen_range(1..=100),
            ..SimConfig::default()
        };
        let mut sim = Simulator::new(cfg.machine_config(), CostModel::default()).unwrap();
        let mut block = 1u64;
        for u in 0..users {
            sim.execute(&BlockTx {
                block,
                call: Call::Register { user: UserId(u) },
            })
            .unwrap();
            block += 1;
        }
        for _ in 0..60 {
            block += rng.gen_range(1..=3);
            let user = UserId(rng.gen_range(0..users));
            let call = match rng.gen_range(0..3) {
                0 => Call::Claim { user },
                1 => Call::Noop,
                _ => Call::Demand {
                    user,
                    demand: ResourceVector::new((0..m).map(|_| rng.gen_range(0..=12)).collect())
                        .unwrap(),
                },
            };
            let before = sim.machine().state().clone();
            match sim.execute(&BlockTx { block, call }) {
                Ok(rec) => clamps += rec.clamped as usize,
                Err(_) => {
                    rejected += 1;
                    ensure(sim.machine().state() == &before, || {
                        format!("rejected call at block {block} changed the state")
                    })?;
                }
            }
            calls += 1;
            sim.machine().audit().map_err(|e| e.to_string())?;
        }
    }
    ensure(calls >= 10_000, || format!("only {calls} calls"))?;
    ensure(clamps == 0, || format!("{clamps} clamp events"))?;
    Ok(format!(
        "{calls} calls audited ({} scheduled, {rejected} rejected and rolled back), 0 clamps",
        scheduled.get()
    ))
}

fn ac6_cost_structure() -> Outcome {
    // Simulated claims: exactly affine in m.
    let dir = std::env::temp_dir().join(format!("adrf-acceptance-{}", std::process::id()));
    let cfg = ExperimentConfig {
        sweep: vec![2, 5, 10, 20, 30, 40, 50, 100],
        users: 10,
        epochs: 4,
        out: dir.clone(),
        ..ExperimentConfig::default()
    };
    let run = adrf_cli::commands::cmd_run(&cfg).map_err(|e| e.to_string())?;
    let fits = cmd_costfit(CostSource::Csv(&run.cost_csv)).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    let claim = fits
        .iter()
        .find(|f| f.kind == CallKind::Claim)
        .ok_or("no claim records")?;
    ensure(claim.per_call.r_squared.is_one(), || {
        "claim R^2 != 1".into()
    })?;
    ensure(claim.means.iter().all(|(_, _, r)| r.is_zero()), || {
        "claim residuals not zero".into()
    })?;
    let model = CostModel::default();
    ensure(
        claim.per_call.slope == BigRational::from_integer(model.claim.per_resource.into()),
        || format!("claim slope {}", claim.per_call.slope),
    )?;

    let fit_of = |name: &str| -> Result<KindFit, String> {
        let mut fits = cmd_costfit(CostSource::Fixture(name)).map_err(|e| e.to_string())?;
        Ok(fits.remove(0))
    };
    let claim = fit_of("claim-cost-measured")?;
    ensure(
        relative_error(&claim.per_call.slope, &q("15130")) <= q("0.01"),
        || format!("claim slope {}", to_f64(&claim.per_call.slope)),
    )?;
    ensure(
        relative_error(&claim.per_call.intercept, &q("36486")) <= q("0.05"),
        || format!("claim intercept {}", to_f64(&claim.per_call.intercept)),
    )?;
    ensure(claim.per_call.r_squared >= q("0.9999"), || {
        format!("claim R^2 {}", to_f64(&claim.per_call.r_squared))
    })?;
    let demand = fit_of("demand-cost-measured")?;
    ensure(
        relative_error(&demand.per_call.slope, &q("13616")) <= q("0.01"),
        || format!("demand slope {}", to_f64(&demand.per_call.slope)),
    )?;
    let update = fit_of("update-state-cost-measured")?;
    ensure(
        relative_error(&update.per_call.slope, &q("11295")) <= q("0.02"),
        || format!("update slope {}", to_f64(&update.per_call.slope)),
    )?;
    Ok(format!(
        "simulated claim R^2 = 1, residuals 0; measured fits: claim {} | demand {} | update_state {}",
        claim.per_call, demand.per_call, update.per_call
    ))
}

fn ac7_reduction_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..1000 {
        let n = rng.gen_range(1..=10);
        let demands: Vec<RationalShare> = (0..n)
            .map(|_| RationalShare::new(rng.gen_range(0..=60), rng.gen_range(1..=4)).unwrap())
            .collect();
        let reserve = RationalShare::from_integer(rng.gen_range(0..=200));
        let w = RationalShare::new(rng.gen_range(1..=9), rng.gen_range(1..=3)).unwrap();
        let weights = WeightVector::new(vec![w; n]).unwrap();
        let plain = progressive_filling(&demands, reserve).unwrap();
        let weighted = weighted_progressive_filling(&demands, &weights, reserve).unwrap();
        ensure(plain == weighted, || {
            format!("MF instance {i}: {plain:?} vs {weighted:?}")
        })?;
    }
    for i in 0..1000 {
        let n = rng.gen_range(1..=10);
        let m = rng.gen_range(1..=5);
        let reserves =
            ResourceVector::new((0..m).map(|_| rng.gen_range(100..=1000)).collect()).unwrap();
        let demands = DemandSet::from_vectors(
            (0..n)
                .map(|_| {
                    ResourceVector::new((0..m).map(|_| rng.gen_range(1..=10)).collect()).unwrap()
                })
                .collect(),
        )
        .unwrap();
        let unit = vec![WeightVector::uniform(m); n];
        let plain = pdrf_allocate(&demands, &reserves).unwrap();
        let weighted = weighted_pdrf_allocate(&demands, &unit, &reserves).unwrap();
        ensure(plain == weighted, || format!("PDRF instance {i} differs"))?;
    }
    Ok("1000 MF and 1000 PDRF instances identical".into())
}

fn ac8_determinism_and_replay() -> Outcome {
    let mut traces = 0;
    let base = reference_runs();
    for (m, t) in base.runs() {
        let cfg = base.sim_config(m, t);
        let a = run_simulation(&cfg).map_err(|e| e.to_string())?;
        let b = run_simulation(&cfg).map_err(|e| e.to_string())?;
        let text = a.to_text();
        ensure(text == b.to_text(), || {
            format!("m={m} trial={t} traces differ")
        })?;
        replay(&a).map_err(|d| format!("m={m} trial={t}: {d}"))?;
        let parsed = text
            .parse()
            .map_err(|e: adrf_sim::SimError| e.to_string())?;
        replay(&parsed).map_err(|d| format!("m={m} trial={t} after parsing: {d}"))?;
        traces += 1;
    }
    Ok(format!(
        "{traces} traces bit-identical across runs and replayed"
    ))
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: 1,
            name: "worked example",
            limit: Duration::from_secs(1),
            check: ac1_worked_example,
        },
        Criterion {
            id: 2,
            name: "machine = fixed-point reference",
            limit: Duration::from_secs(60),
            check: ac2_machine_matches_reference,
        },
        Criterion {
            id: 3,
            name: "fixed-point vs exact rational",
            limit: Duration::from_secs(60),
            check: ac3_fixed_vs_rational,
        },
        Criterion {
            id: 4,
            name: "PDRF approximation statistics",
            limit: Duration::from_secs(300),
            check: ac4_approximation_statistics,
        },
        Criterion {
            id: 5,
            name: "conservation",
            limit: Duration::from_secs(60),
            check: ac5_conservation,
        },
        Criterion {
            id: 6,
            name: "cost structure",
            limit: Duration::from_secs(1),
            check: ac6_cost_structure,
        },
        Criterion {
            id: 7,
            name: "reduction identities",
            limit: Duration::from_secs(30),
            check: ac7_reduction_identities,
        },
        Criterion {
            id: 8,
            name: "determinism and replay",
            limit: Duration::from_secs(30),
            check: ac8_determinism_and_replay,
        },
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();

    let mut failed = 0;
    for c in &criteria {
        let label = format!("AC{}", c.id);
        if !filter.is_empty() && !filter.contains(&label) {
            continue;
        }
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed > c.limit {
                Err(format!("took {elapsed:.2?}, limit {:?}; {detail}", c.limit))
            } else {
                Ok(detail)
            }
        });
        match outcome {
            Ok(detail) => println!("{label} PASS {} ({elapsed:.2?}): {detail}", c.name),
            Err(why) => {
                failed += 1;
                println!("{label} FAIL {} ({elapsed:.2?}): {why}", c.name);
            }
        }
    }
    println!("acceptance: {} failed", failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
