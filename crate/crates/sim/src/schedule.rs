//! Block-by-block transaction schedule.

use std::fmt;

use adrf_core::{ResourceVector, UserId};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::sim::SimConfig;
use crate::workload::DemandSampler;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "call", rename_all = "snake_case")]
pub enum Call {
    Register {
        user: UserId,
    },
    Demand {
        user: UserId,
        demand: ResourceVector,
    },
    Claim {
        user: UserId,
    },
    /// An empty block. Only the clock moves.
    Noop,
}

impl Call {
    pub fn name(&self) -> &'static str {
        match self {
            Call::Register { .. } => "register",
            Call::Demand { .. } => "demand",
            Call::Claim { .. } => "claim",
            Call::Noop => "noop",
        }
    }

    pub fn user(&self) -> Option<UserId> {
        match self {
            Call::Register { user } | Call::Demand { user, .. } | Call::Claim { user } => {
                Some(*user)
            }
            Call::Noop => None,
        }
    }
}

impl fmt::Display for Call {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.user() {
            Some(user) => write!(f, "{}({user})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockTx {
    pub block: u64,
    #[serde(flatten)]
    pub call: Call,
}

/// Lays out `2n * epochs` blocks starting at block 1. The first epoch registers every user and
/// then collects their demands; each later epoch claims for every user and then collects fresh
/// demands. Demands of the last epoch are never claimed.
pub fn build_schedule(config: &SimConfig) -> Result<Vec<BlockTx>, SimError> {
    config.validate()?;
    let n = config.users as usize;
    let mut sampler = DemandSampler::new(config.seed, config.demand_low, config.demand_high)?;
    let mut txs = Vec::with_capacity(2 * n * config.epochs as usize);
    let mut block = 1u64;
    let mut push = |call: Call| {
        txs.push(BlockTx { block, call });
        block += 1;
    };
    for epoch in 1..=config.epochs {
        for u in 0..config.users {
            let user = UserId(u);
            push(if epoch == 1 {
                Call::Register { user }
            } else {
                Call::Claim { user }
            });
        }
        for (u, demand) in sampler
            .next_batch(n, config.resources)?
            .into_iter()
            .enumerate()
        {
            push(Call::Demand {
                user: UserId(u as u32),
                demand,
            });
        }
    }
    Ok(txs)
}
