//! Runs schedules against a machine and checks recorded traces.

use std::collections::BTreeMap;
use std::fmt;

use adrf_core::{Machine, MachineConfig, ResourceVector, UserId};
use serde::{Deserialize, Serialize};

use crate::cost::{CallKind, CostModel};
use crate::error::SimError;
use crate::schedule::{build_schedule, BlockTx, Call};
use crate::trace::{Trace, TraceHeader, TraceRecord};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub users: u32,
    pub resources: usize,
    pub epochs: u64,
    pub demand_low: u64,
    pub demand_high: u64,
    /// Each epoch injects `users * per_user_reserve` of every resource.
    pub per_user_reserve: u64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            users: 10,
            resources: 2,
            epochs: 11,
            demand_low: 1,
            demand_high: 10,
            per_user_reserve: 150,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: &str| Err(SimError::InvalidConfig(msg.to_string()));
        if self.users == 0 {
            return fail("at least one user is required");
        }
        if self.resources == 0 {
            return fail("at least one resource is required");
        }
        if self.epochs == 0 {
            return fail("at least one epoch is required");
        }
        if self.demand_low == 0 {
            return fail("demand components must be positive");
        }
        if self.demand_low > self.demand_high {
            return fail("demand range is empty");
        }
        if self.per_user_reserve == 0 {
            return fail("per-user reserve must be positive");
        }
        if (self.users as u64)
            .checked_mul(self.per_user_reserve)
            .is_none()
        {
            return fail("epoch reserve overflows");
        }
        Ok(())
    }

    /// One epoch is exactly the `2n` blocks of a round, starting at block 1.
    pub fn machine_config(&self) -> MachineConfig {
        let reserve = self.users as u64 * self.per_user_reserve;
        MachineConfig::new(
            2 * self.users as u64,
            1,
            ResourceVector::filled(self.resources, reserve),
        )
    }
}

/// Step-by-step driver. Blocks must strictly increase.
pub struct Simulator {
    machine: Machine,
    cost: CostModel,
    demand_calls: BTreeMap<UserId, u32>,
    claim_calls: BTreeMap<UserId, u32>,
    last_block: Option<u64>,
}

impl Simulator {
    pub fn new(machine_config: MachineConfig, cost: CostModel) -> Result<Self, SimError> {
        let machine = Machine::new(machine_config)
            .map_err(|source| SimError::Machine { block: 0, source })?;
        Ok(Simulator {
            machine,
            cost,
            demand_calls: BTreeMap::new(),
            claim_calls: BTreeMap::new(),
            last_block: None,
        })
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn cost_model(&self) -> &CostModel {
        &self.cost
    }

    pub fn execute(&mut self, tx: &BlockTx) -> Result<TraceRecord, SimError> {
        if let Some(previous) = self.last_block {
            if tx.block <= previous {
                return Err(SimError::BlockOrder {
                    block: tx.block,
                    previous,
                });
            }
        }
        let block = tx.block;
        let wrap = |source| SimError::Machine { block, source };
        let m = self.machine.config().resources;
        let epoch_before = self.machine.epoch();

        let mut share = None;
        let mut detail = None;
        let mut clamped = false;
        let mut cost_units = None;
        match &tx.call {
            Call::Register { user } => self.machine.register_user(*user).map_err(wrap)?,
            Call::Demand { user, demand } => {
                let receipt = self.machine.demand(*user, demand, block).map_err(wrap)?;
                let ordinal = bump(&mut self.demand_calls, *user);
                detail = Some(receipt.recip_share);
                cost_units = Some(self.cost.cost_with_warmup(
                    CallKind::Demand,
                    m,
                    receipt.branch_events,
                    ordinal,
                ));
            }
            Call::Claim { user } => {
                let receipt = self.machine.claim(*user, block).map_err(wrap)?;
                let ordinal = bump(&mut self.claim_calls, *user);
                detail = Some(receipt.task_count as u128);
                clamped = receipt.clamped;
                share = Some(receipt.share);
                cost_units = Some(self.cost.cost_with_warmup(CallKind::Claim, m, 0, ordinal));
            }
            Call::Noop => {}
        }
        self.last_block = Some(block);

        let epoch = self.machine.epoch();
        let update_cost =
            (epoch != epoch_before).then(|| self.cost.cost_of_call(CallKind::UpdateState, m, 0));
        let state = self.machine.state();
        Ok(TraceRecord {
            block,
            epoch,
            call: tx.call.clone(),
            share,
            detail,
            clamped,
            cost_units,
            update_cost,
            k_prime: state.k_prime,
            pools: state.reserves.clone(),
            balance: tx
                .call
                .user()
                .and_then(|u| self.machine.balance(u).cloned()),
        })
    }
}

fn bump(counter: &mut BTreeMap<UserId, u32>, user: UserId) -> u32 {
    let slot = counter.entry(user).or_insert(0);
    let ordinal = *slot;
    *slot += 1;
    ordinal
}

pub fn run_simulation(config: &SimConfig) -> Result<Trace, SimError> {
    run_simulation_with(config, CostModel::default())
}

pub fn run_simulation_with(config: &SimConfig, cost: CostModel) -> Result<Trace, SimError> {
    let schedule = build_schedule(config)?;
    let mut sim = Simulator::new(config.machine_config(), cost.clone())?;
    let records = schedule
        .iter()
        .map(|tx| sim.execute(tx))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trace {
        header: TraceHeader::new(config.clone(), cost, false),
        records,
    })
}

/// First block at which a recorded trace disagrees with re-execution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Divergence {
    pub block: u64,
    pub reason: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "diverged at block {}: {}", self.block, self.reason)
    }
}

impl std::error::Error for Divergence {}

/// Re-executes a trace and compares every record, costs excepted. Traces of generated runs are
/// also checked against the schedule their header describes, so edited inputs are caught.
pub fn replay(trace: &Trace) -> Result<(), Divergence> {
    let header = &trace.header;
    let at = |block: u64, reason: String| Divergence { block, reason };
    if !header.custom_schedule {
        let schedule = build_schedule(&header.config).map_err(|e| at(0, e.to_string()))?;
        if schedule.len() != trace.records.len() {
            let block = trace.records.last().map_or(0, |r| r.block);
            return Err(at(
                block,
                format!(
                    "{} records for a schedule of {}",
                    trace.records.len(),
                    schedule.len()
                ),
            ));
        }
        for (tx, record) in schedule.iter().zip(&trace.records) {
            if tx.block != record.block || tx.call != record.call {
                return Err(at(
                    record.block,
                    format!("recorded {} but the schedule has {}", record.call, tx.call),
                ));
            }
        }
    }

    let mut sim = Simulator::new(header.machine_config(), header.cost_model.clone())
        .map_err(|e| at(0, e.to_string()))?;
    for record in &trace.records {
        let tx = BlockTx {
            block: record.block,
            call: record.call.clone(),
        };
        let fresh = sim
            .execute(&tx)
            .map_err(|e| at(record.block, e.to_string()))?;
        if let Some(field) = first_difference(&fresh, record) {
            return Err(at(record.block, format!("{field} differs")));
        }
    }
    Ok(())
}

fn first_difference(a: &TraceRecord, b: &TraceRecord) -> Option<&'static str> {
    if a.epoch != b.epoch {
        Some("epoch")
    } else if a.share != b.share {
        Some("share")
    } else if a.detail != b.detail {
        Some("detail")
    } else if a.clamped != b.clamped {
        Some("clamped")
    } else if a.update_cost.is_some() != b.update_cost.is_some() {
        Some("epoch transition")
    } else if a.k_prime != b.k_prime {
        Some("k_prime")
    } else if a.pools != b.pools {
        Some("pools")
    } else if a.balance != b.balance {
        Some("balance")
    } else {
        None
    }
}
