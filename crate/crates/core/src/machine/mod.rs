//! Off-chain model of the Autonomous DRF contract.
//!
//! Time is measured in blocks. Blocks are grouped into epochs of `epoch_span` blocks counted from
//! the deployment block (`offset`), starting at epoch 1. A user submits a unit-task demand in one
//! epoch and claims the resulting share in the next. Two resource pools indexed by epoch parity
//! keep the reserves seen by demands stable while claims drain the other pool:
//!
//! * demands in epoch `e` register against pool `(e + 1) % 2`,
//! * claims in epoch `e` draw from pool `e % 2`,
//! * on entering epoch `e`, pool `(e + 1) % 2` is topped up with the per-epoch reserve and the
//!   cycle count `k'` is computed for pool `e % 2`.
//!
//! No call loops over users; the per-user work is spread over the users' own transactions.
//!
//! A call that returns an error leaves the state untouched, like a reverted transaction.

pub mod fixed;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::resource::{Quantity, ResourceVector, UserId};
use fixed::{add, fixed_floor_div, mul, DEFAULT_PRECISION};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("resource count must be at least 1")]
    NoResources,
    #[error("epoch span must be at least 1 block")]
    ZeroEpochSpan,
    #[error("precision factor must be positive")]
    ZeroPrecision,
    #[error("dimension mismatch: expected {expected} resources, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("block {block} precedes deployment block {offset}")]
    BlockBeforeOffset { block: u64, offset: u64 },
    #[error("user {0} is already registered")]
    DuplicateUser(UserId),
    #[error("user {0} is not registered")]
    UnknownUser(UserId),
    #[error("user {user} submitted an all-zero demand")]
    ZeroDemand { user: UserId },
    #[error("user {user} already demanded in epoch {epoch}")]
    AlreadyDemanded { user: UserId, epoch: u64 },
    #[error("demanded resource {resource} has an empty pool")]
    ZeroReserve { resource: usize },
    #[error("demand of user {user} is too large to represent at this precision")]
    DemandBelowPrecision { user: UserId },
    #[error("user {user} has no demand from epoch {previous} to claim in epoch {epoch}", previous = epoch.saturating_sub(1))]
    NoPriorDemand { user: UserId, epoch: u64 },
    #[error("user {user} already claimed in epoch {epoch}")]
    AlreadyClaimed { user: UserId, epoch: u64 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("arithmetic overflow")]
    Overflow,
    #[error("accounting identity broken on resource {resource}: injected {injected}, held {held}")]
    AccountingViolation {
        resource: usize,
        injected: u128,
        held: u128,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineConfig {
    pub resources: usize,
    /// Blocks per epoch. Each user needs one demand and one claim per epoch, so at least twice
    /// the number of users.
    pub epoch_span: u64,
    /// Deployment block.
    pub offset: u64,
    /// Quantity added to the demand pool at every epoch transition.
    pub epoch_reserve: ResourceVector,
    pub precision: u128,
}

impl MachineConfig {
    pub fn new(epoch_span: u64, offset: u64, epoch_reserve: ResourceVector) -> Self {
        MachineConfig {
            resources: epoch_reserve.len(),
            epoch_span,
            offset,
            epoch_reserve,
            precision: DEFAULT_PRECISION,
        }
    }

    pub fn with_precision(mut self, precision: u128) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        if self.resources == 0 {
            return Err(MachineError::NoResources);
        }
        if self.epoch_reserve.len() != self.resources {
            return Err(MachineError::DimensionMismatch {
                expected: self.resources,
                found: self.epoch_reserve.len(),
            });
        }
        if self.epoch_span == 0 {
            return Err(MachineError::ZeroEpochSpan);
        }
        if self.precision == 0 {
            return Err(MachineError::ZeroPrecision);
        }
        Ok(())
    }

    /// `(block - offset) / epoch_span + 1`
    pub fn epoch_at(&self, block: u64) -> Result<u64, MachineError> {
        let elapsed = block
            .checked_sub(self.offset)
            .ok_or(MachineError::BlockBeforeOffset {
                block,
                offset: self.offset,
            })?;
        Ok(elapsed / self.epoch_span + 1)
    }
}

/// Per-user storage. Demand and reciprocal-share buffers are indexed by pool parity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSlot {
    pub demands: [ResourceVector; 2],
    pub recip_shares: [u128; 2],
    pub balance: ResourceVector,
    /// 0 when the user never demanded.
    pub last_demand_epoch: u64,
    pub last_claim_epoch: u64,
}

impl UserSlot {
    fn new(m: usize) -> Self {
        UserSlot {
            demands: [ResourceVector::zeros(m), ResourceVector::zeros(m)],
            recip_shares: [0, 0],
            balance: ResourceVector::zeros(m),
            last_demand_epoch: 0,
            last_claim_epoch: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineState {
    pub epoch: u64,
    /// Epoch in which the scaled sums and minimum reciprocal were last reset by a demand.
    pub reset_epoch: u64,
    pub k_prime: u128,
    pub reserves: [ResourceVector; 2],
    pub scaled_demand_sums: [Vec<u128>; 2],
    pub min_recip_shares: [u128; 2],
    pub users: BTreeMap<UserId, UserSlot>,
    /// Everything ever added to the pools: the initial reserve plus each replenishment.
    pub injected: Vec<u128>,
}

/// Result of a successful `demand` call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandReceipt {
    pub user: UserId,
    pub epoch: u64,
    pub recip_share: u128,
    /// Times the running minimum reciprocal improved after the first demanded resource.
    pub branch_events: u32,
    /// Whether this call reset the scaled sums for its pool.
    pub reset: bool,
}

/// Result of a successful `claim` call.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimReceipt {
    pub user: UserId,
    pub epoch: u64,
    pub task_count: u64,
    pub share: ResourceVector,
    /// Set when some component of the share had to be cut down to the pool's remainder.
    pub clamped: bool,
}

/// Self-describing view of the state at a call boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineSnapshot {
    pub epoch: u64,
    pub reserves: [ResourceVector; 2],
    pub k_prime: u128,
    pub balances: BTreeMap<UserId, ResourceVector>,
}

struct Transition {
    epoch: u64,
    pool: usize,
    replenished: ResourceVector,
    injected: Vec<u128>,
    k_prime: u128,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    config: MachineConfig,
    state: MachineState,
}

fn parity(epoch: u64) -> usize {
    (epoch % 2) as usize
}

impl Machine {
    /// Deploys the contract: epoch 1, the epoch-1 demand pool (parity 0) holds one epoch reserve.
    pub fn new(config: MachineConfig) -> Result<Self, MachineError> {
        config.validate()?;
        let m = config.resources;
        let state = MachineState {
            epoch: 1,
            reset_epoch: 0,
            k_prime: 0,
            reserves: [config.epoch_reserve.clone(), ResourceVector::zeros(m)],
            scaled_demand_sums: [vec![0; m], vec![0; m]],
            min_recip_shares: [0, 0],
            users: BTreeMap::new(),
            injected: config.epoch_reserve.iter().map(|&q| q as u128).collect(),
        };
        Ok(Machine { config, state })
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn state(&self) -> &MachineState {
        &self.state
    }

    pub fn epoch(&self) -> u64 {
        self.state.epoch
    }

    pub fn k_prime(&self) -> u128 {
        self.state.k_prime
    }

    pub fn total_injected(&self) -> &[u128] {
        &self.state.injected
    }

    pub fn balance(&self, user: UserId) -> Option<&ResourceVector> {
        self.state.users.get(&user).map(|slot| &slot.balance)
    }

    pub fn snapshot(&self) -> MachineSnapshot {
        MachineSnapshot {
            epoch: self.state.epoch,
            reserves: self.state.reserves.clone(),
            k_prime: self.state.k_prime,
            balances: self
                .state
                .users
                .iter()
                .map(|(id, slot)| (*id, slot.balance.clone()))
                .collect(),
        }
    }

    pub fn register_user(&mut self, user: UserId) -> Result<(), MachineError> {
        if self.state.users.contains_key(&user) {
            return Err(MachineError::DuplicateUser(user));
        }
        self.state
            .users
            .insert(user, UserSlot::new(self.config.resources));
        let needed = 2 * self.state.users.len() as u64;
        if needed > self.config.epoch_span {
            log::warn!(
                "{} users need {} blocks per epoch but the epoch span is {}",
                self.state.users.len(),
                needed,
                self.config.epoch_span
            );
        }
        Ok(())
    }

    /// Advances the epoch if `block` lies in a later one. Returns whether a transition happened.
    pub fn update_state(&mut self, block: u64) -> Result<bool, MachineError> {
        match self.plan_transition(block)? {
            Some(t) => {
                self.apply_transition(t);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn plan_transition(&self, block: u64) -> Result<Option<Transition>, MachineError> {
        let epoch = self.config.epoch_at(block)?;
        if epoch <= self.state.epoch {
            return Ok(None);
        }
        let claim_pool = parity(epoch);
        let pool = 1 - claim_pool;

        // One replenishment per detected transition, however many epochs went by.
        let mut replenished = Vec::with_capacity(self.config.resources);
        let mut injected = self.state.injected.clone();
        for (r, total) in injected.iter_mut().enumerate() {
            let topped = self.state.reserves[pool][r]
                .checked_add(self.config.epoch_reserve[r])
                .ok_or(MachineError::Overflow)?;
            replenished.push(topped);
            *total = add(*total, self.config.epoch_reserve[r] as u128)?;
        }

        // The sums are only current if demands were registered in the epoch right before.
        let k_prime = if self.state.reset_epoch + 1 == epoch {
            self.cycle_count(claim_pool)?
        } else {
            0
        };

        Ok(Some(Transition {
            epoch,
            pool,
            replenished: ResourceVector::new(replenished).expect("m >= 1"),
            injected,
            k_prime,
        }))
    }

    /// `k' = min_r floor(ds'* * reserve_r * p / sds_r)` over resources with a positive sum.
    fn cycle_count(&self, pool: usize) -> Result<u128, MachineError> {
        let p = self.config.precision;
        let min_recip = self.state.min_recip_shares[pool];
        let mut k_prime: Option<u128> = None;
        for (r, &sum) in self.state.scaled_demand_sums[pool].iter().enumerate() {
            if sum == 0 {
                continue;
            }
            let reserve = self.state.reserves[pool][r] as u128;
            let k = fixed_floor_div(mul(mul(min_recip, reserve)?, p)?, sum)?;
            k_prime = Some(k_prime.map_or(k, |c| c.min(k)));
        }
        Ok(k_prime.unwrap_or(0))
    }

    fn apply_transition(&mut self, t: Transition) {
        self.state.epoch = t.epoch;
        self.state.reserves[t.pool] = t.replenished;
        self.state.injected = t.injected;
        self.state.k_prime = t.k_prime;
    }

    /// Registers `user`'s unit-task demand for the current epoch.
    ///
    /// Computes the reciprocal dominant share `ds' = min_r floor(p * reserve_r / d_r)` against
    /// the demand pool (resources with `d_r = 0` are skipped), and folds `d * ds'` into the pool's
    /// scaled sums and `ds'` into its running minimum. The first demand of an epoch resets both.
    pub fn demand(
        &mut self,
        user: UserId,
        demand: &ResourceVector,
        block: u64,
    ) -> Result<DemandReceipt, MachineError> {
        let transition = self.plan_transition(block)?;
        let epoch = transition.as_ref().map_or(self.state.epoch, |t| t.epoch);
        let pool = parity(epoch + 1);
        let m = self.config.resources;

        let slot = self
            .state
            .users
            .get(&user)
            .ok_or(MachineError::UnknownUser(user))?;
        if demand.len() != m {
            return Err(MachineError::DimensionMismatch {
                expected: m,
                found: demand.len(),
            });
        }
        if demand.is_zero() {
            return Err(MachineError::ZeroDemand { user });
        }
        if slot.last_demand_epoch == epoch {
            return Err(MachineError::AlreadyDemanded { user, epoch });
        }

        let reserves = match &transition {
            Some(t) if t.pool == pool => &t.replenished,
            _ => &self.state.reserves[pool],
        };
        let p = self.config.precision;
        let mut recip: Option<u128> = None;
        let mut branch_events = 0u32;
        for r in 0..m {
            if demand[r] == 0 {
                continue;
            }
            if reserves[r] == 0 {
                return Err(MachineError::ZeroReserve { resource: r });
            }
            let candidate = fixed_floor_div(mul(p, reserves[r] as u128)?, demand[r] as u128)?;
            recip = match recip {
                None => Some(candidate),
                Some(current) if candidate < current => {
                    branch_events += 1;
                    Some(candidate)
                }
                keep => keep,
            };
        }
        let recip = recip.expect("demand has a positive component");
        if recip == 0 {
            return Err(MachineError::DemandBelowPrecision { user });
        }

        let reset = self.state.reset_epoch < epoch;
        let mut sums = if reset {
            vec![0u128; m]
        } else {
            self.state.scaled_demand_sums[pool].clone()
        };
        for (sum, &d) in sums.iter_mut().zip(demand.iter()) {
            *sum = add(*sum, mul(d as u128, recip)?)?;
        }
        let min_recip = if reset {
            recip
        } else {
            self.state.min_recip_shares[pool].min(recip)
        };

        if let Some(t) = transition {
            self.apply_transition(t);
        }
        self.state.scaled_demand_sums[pool] = sums;
        self.state.min_recip_shares[pool] = min_recip;
        if reset {
            self.state.reset_epoch = epoch;
        }
        let slot = self.state.users.get_mut(&user).expect("checked above");
        slot.demands[pool] = demand.clone();
        slot.recip_shares[pool] = recip;
        slot.last_demand_epoch = epoch;

        Ok(DemandReceipt {
            user,
            epoch,
            recip_share: recip,
            branch_events,
            reset,
        })
    }

    /// Moves `user`'s share for the demand registered in the previous epoch into their balance.
    ///
    /// `ratio = floor(ds'_u * p / ds'*)`, `tasks = floor(ratio * k' / p^2)` and the share is
    /// `tasks * d_u`, cut componentwise to what the pool still holds.
    pub fn claim(&mut self, user: UserId, block: u64) -> Result<ClaimReceipt, MachineError> {
        let transition = self.plan_transition(block)?;
        let epoch = transition.as_ref().map_or(self.state.epoch, |t| t.epoch);
        let k_prime = transition
            .as_ref()
            .map_or(self.state.k_prime, |t| t.k_prime);
        let pool = parity(epoch);

        let slot = self
            .state
            .users
            .get(&user)
            .ok_or(MachineError::UnknownUser(user))?;
        if slot.last_demand_epoch == 0 || slot.last_demand_epoch + 1 != epoch {
            return Err(MachineError::NoPriorDemand { user, epoch });
        }
        if slot.last_claim_epoch == epoch {
            return Err(MachineError::AlreadyClaimed { user, epoch });
        }

        let p = self.config.precision;
        let ratio = fixed_floor_div(
            mul(slot.recip_shares[pool], p)?,
            self.state.min_recip_shares[pool],
        )?;
        let tasks = fixed_floor_div(mul(ratio, k_prime)?, mul(p, p)?)?;
        let task_count = u64::try_from(tasks).map_err(|_| MachineError::Overflow)?;

        let reserves = match &transition {
            Some(t) if t.pool == pool => &t.replenished,
            _ => &self.state.reserves[pool],
        };
        let m = self.config.resources;
        let mut share = Vec::with_capacity(m);
        let mut remaining = Vec::with_capacity(m);
        let mut balance = Vec::with_capacity(m);
        let mut clamped = false;
        for r in 0..m {
            let wanted: Quantity = slot.demands[pool][r]
                .checked_mul(task_count)
                .ok_or(MachineError::Overflow)?;
            let granted = wanted.min(reserves[r]);
            clamped |= granted < wanted;
            share.push(granted);
            remaining.push(reserves[r] - granted);
            balance.push(
                slot.balance[r]
                    .checked_add(granted)
                    .ok_or(MachineError::Overflow)?,
            );
        }
        if clamped {
            log::warn!("claim of user {user} in epoch {epoch} clamped to the pool remainder");
        }

        if let Some(t) = transition {
            self.apply_transition(t);
        }
        self.state.reserves[pool] = ResourceVector::new(remaining).expect("m >= 1");
        let slot = self.state.users.get_mut(&user).expect("checked above");
        slot.balance = ResourceVector::new(balance).expect("m >= 1");
        slot.last_claim_epoch = epoch;

        Ok(ClaimReceipt {
            user,
            epoch,
            task_count,
            share: ResourceVector::new(share).expect("m >= 1"),
            clamped,
        })
    }

    /// Checks `injected = sum(balances) + pool 0 + pool 1` for every resource.
    pub fn audit(&self) -> Result<(), MachineError> {
        for r in 0..self.config.resources {
            let mut held = self.state.reserves[0][r] as u128 + self.state.reserves[1][r] as u128;
            for slot in self.state.users.values() {
                held += slot.balance[r] as u128;
            }
            let injected = self.state.injected[r];
            if held != injected {
                return Err(MachineError::AccountingViolation {
                    resource: r,
                    injected,
                    held,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u128 = DEFAULT_PRECISION;

    fn rv(v: &[u64]) -> ResourceVector {
        ResourceVector::new(v.to_vec()).unwrap()
    }

    fn machine(epoch_span: u64, offset: u64, reserve: &[u64]) -> Machine {
        Machine::new(MachineConfig::new(epoch_span, offset, rv(reserve))).unwrap()
    }

    #[test]
    fn init_fills_epoch_one_demand_pool() {
        let m = machine(4, 0, &[1500, 1500]);
        assert_eq!(m.epoch(), 1);
        assert_eq!(m.state().reserves, [rv(&[1500, 1500]), rv(&[0, 0])]);
        assert_eq!(m.k_prime(), 0);
        assert_eq!(m.state().reset_epoch, 0);

        let inert = machine(4, 0, &[0]);
        assert_eq!(inert.state().reserves, [rv(&[0]), rv(&[0])]);
    }

    #[test]
    fn init_rejects_bad_config() {
        let zero_span = MachineConfig::new(0, 0, rv(&[1]));
        assert_eq!(
            Machine::new(zero_span).unwrap_err(),
            MachineError::ZeroEpochSpan
        );
        let mut no_resources = MachineConfig::new(2, 0, rv(&[1]));
        no_resources.resources = 0;
        assert_eq!(
            Machine::new(no_resources).unwrap_err(),
            MachineError::NoResources
        );
        let zero_p = MachineConfig::new(2, 0, rv(&[1])).with_precision(0);
        assert_eq!(
            Machine::new(zero_p).unwrap_err(),
            MachineError::ZeroPrecision
        );
    }

    #[test]
    fn epoch_arithmetic() {
        let cfg = MachineConfig::new(20, 100, rv(&[1]));
        assert_eq!(cfg.epoch_at(100).unwrap(), 1);
        assert_eq!(cfg.epoch_at(119).unwrap(), 1);
        assert_eq!(cfg.epoch_at(120).unwrap(), 2);
        assert_eq!(
            cfg.epoch_at(99),
            Err(MachineError::BlockBeforeOffset {
                block: 99,
                offset: 100
            })
        );
        let mut m = Machine::new(cfg).unwrap();
        assert!(matches!(
            m.update_state(5),
            Err(MachineError::BlockBeforeOffset { .. })
        ));
    }

    /// Two users, pool (9,18) seen at demand time.
    fn worked_example() -> Machine {
        let mut m = machine(4, 0, &[9, 18]);
        m.register_user(UserId(0)).unwrap();
        m.register_user(UserId(1)).unwrap();
        m
    }

    #[test]
    fn demand_accumulates_reciprocal_shares() {
        let mut m = worked_example();
        let a = m.demand(UserId(0), &rv(&[1, 4]), 2).unwrap();
        // min(9,000,000, 4,500,000)
        assert_eq!(a.recip_share, 4_500_000);
        assert_eq!(a.branch_events, 1);
        assert!(a.reset);
        let b = m.demand(UserId(1), &rv(&[3, 1]), 3).unwrap();
        assert_eq!(b.recip_share, 3_000_000);
        assert_eq!(b.branch_events, 0);
        assert!(!b.reset);
        let s = m.state();
        assert_eq!(s.min_recip_shares[0], 3_000_000);
        assert_eq!(s.scaled_demand_sums[0], vec![13_500_000, 21_000_000]);
    }

    #[test]
    fn transition_computes_cycle_count() {
        let mut m = worked_example();
        m.demand(UserId(0), &rv(&[1, 4]), 2).unwrap();
        m.demand(UserId(1), &rv(&[3, 1]), 3).unwrap();
        assert!(m.update_state(4).unwrap());
        // min(2,000,000, 2,571,428)
        assert_eq!(m.k_prime(), 2_000_000);
        assert_eq!(m.epoch(), 2);
        assert_eq!(m.state().reserves[1], rv(&[9, 18]));
        let before = m.clone();
        assert!(!m.update_state(4).unwrap());
        assert_eq!(m, before);
    }

    #[test]
    fn claims_match_exact_allocation() {
        let mut m = worked_example();
        m.demand(UserId(0), &rv(&[1, 4]), 2).unwrap();
        m.demand(UserId(1), &rv(&[3, 1]), 3).unwrap();
        let a = m.claim(UserId(0), 4).unwrap();
        // ratio 1,500,000; floor(1.5e6 * 2e6 / 1e12) = 3
        assert_eq!(a.task_count, 3);
        assert_eq!(a.share, rv(&[3, 12]));
        assert!(!a.clamped);
        let b = m.claim(UserId(1), 5).unwrap();
        assert_eq!(b.task_count, 2);
        assert_eq!(b.share, rv(&[6, 2]));
        assert_eq!(m.state().reserves[0], rv(&[0, 4]));
        assert_eq!(m.balance(UserId(0)), Some(&rv(&[3, 12])));
        m.audit().unwrap();
    }

    #[test]
    fn top_share_user_gets_k_over_p() {
        let mut m = machine(2, 0, &[7]);
        m.register_user(UserId(0)).unwrap();
        m.demand(UserId(0), &rv(&[2]), 1).unwrap();
        let c = m.claim(UserId(0), 2).unwrap();
        assert_eq!(m.k_prime(), 7 * P / 2);
        assert_eq!(c.task_count as u128, m.k_prime() / P);
        assert_eq!(c.share, rv(&[6]));
    }

    #[test]
    fn zero_cycle_count_yields_nothing() {
        // ds' of user 0 is floor(1e6 * 1 / 1e6) = 1, user 1 has 1e6, so
        // k' = floor(1 * 1 * 1e6 / 2e6) = 0.
        let mut m = machine(4, 0, &[1]);
        m.register_user(UserId(0)).unwrap();
        m.register_user(UserId(1)).unwrap();
        m.demand(UserId(0), &rv(&[1_000_000]), 1).unwrap();
        m.demand(UserId(1), &rv(&[1]), 2).unwrap();
        let c = m.claim(UserId(0), 4).unwrap();
        assert_eq!(m.k_prime(), 0);
        assert_eq!(c.task_count, 0);
        assert_eq!(c.share, rv(&[0]));
    }

    #[test]
    fn epoch_without_demands_has_no_cycles() {
        let mut m = machine(2, 0, &[10]);
        m.register_user(UserId(0)).unwrap();
        m.demand(UserId(0), &rv(&[1]), 1).unwrap();
        m.claim(UserId(0), 2).unwrap();
        // Nobody demands in epoch 2; stale sums of pool 1 must not produce cycles in epoch 3,
        // nor those of pool 0 in epoch 4.
        m.update_state(4).unwrap();
        assert_eq!(m.k_prime(), 0);
        m.update_state(6).unwrap();
        assert_eq!(m.k_prime(), 0);
        assert_eq!(
            m.claim(UserId(0), 6),
            Err(MachineError::NoPriorDemand {
                user: UserId(0),
                epoch: 4
            })
        );
    }

    #[test]
    fn guards_reject_out_of_order_calls() {
        let mut m = worked_example();
        assert_eq!(
            m.register_user(UserId(0)),
            Err(MachineError::DuplicateUser(UserId(0)))
        );
        assert_eq!(
            m.demand(UserId(9), &rv(&[1, 1]), 1),
            Err(MachineError::UnknownUser(UserId(9)))
        );
        assert_eq!(
            m.claim(UserId(0), 1),
            Err(MachineError::NoPriorDemand {
                user: UserId(0),
                epoch: 1
            })
        );
        assert_eq!(
            m.demand(UserId(0), &rv(&[0, 0]), 1),
            Err(MachineError::ZeroDemand { user: UserId(0) })
        );
        m.demand(UserId(0), &rv(&[1, 1]), 1).unwrap();
        assert_eq!(
            m.demand(UserId(0), &rv(&[1, 1]), 2),
            Err(MachineError::AlreadyDemanded {
                user: UserId(0),
                epoch: 1
            })
        );
        m.claim(UserId(0), 4).unwrap();
        assert_eq!(
            m.claim(UserId(0), 5),
            Err(MachineError::AlreadyClaimed {
                user: UserId(0),
                epoch: 2
            })
        );
    }

    #[test]
    fn failed_call_does_not_advance_epoch() {
        let mut m = worked_example();
        let before = m.clone();
        // Claim in epoch 2 without a prior demand: the transition must be rolled back too.
        assert!(m.claim(UserId(0), 4).is_err());
        assert_eq!(m, before);
    }

    #[test]
    fn zero_pool_on_demanded_resource_is_rejected() {
        let mut m = machine(2, 0, &[5, 0]);
        m.register_user(UserId(0)).unwrap();
        assert_eq!(
            m.demand(UserId(0), &rv(&[1, 1]), 0),
            Err(MachineError::ZeroReserve { resource: 1 })
        );
        // Not demanding the empty resource is fine.
        let d = m.demand(UserId(0), &rv(&[1, 0]), 0).unwrap();
        assert_eq!(d.recip_share, 5 * P);
    }

    #[test]
    fn uniform_demand_reciprocal() {
        let mut m = machine(2, 0, &[37, 37, 37]);
        m.register_user(UserId(0)).unwrap();
        let d = m.demand(UserId(0), &rv(&[1, 1, 1]), 0).unwrap();
        assert_eq!(d.recip_share, P * 37);
        assert_eq!(d.branch_events, 0);
    }

    #[test]
    fn skipped_epochs_replenish_once() {
        let mut m = machine(2, 0, &[10]);
        m.update_state(9).unwrap();
        assert_eq!(m.epoch(), 5);
        assert_eq!(m.total_injected(), &[20]);
        m.audit().unwrap();
    }

    #[test]
    fn overflow_is_reported() {
        let cfg = MachineConfig::new(2, 0, rv(&[u64::MAX])).with_precision(u128::MAX / 2);
        let mut m = Machine::new(cfg).unwrap();
        m.register_user(UserId(0)).unwrap();
        assert_eq!(
            m.demand(UserId(0), &rv(&[1]), 0),
            Err(MachineError::Overflow)
        );
    }

    #[test]
    fn snapshot_serializes() {
        let mut m = worked_example();
        m.demand(UserId(0), &rv(&[1, 4]), 2).unwrap();
        let snap = m.snapshot();
        let json = serde_json::to_string(&snap).unwrap();
        let back: MachineSnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(back, snap);
        assert_eq!(snap.balances.len(), 2);
    }
}
