//! Deterministic chain harness for the ADRF machine.
//!
//! Every call is the only transaction of its block, so the block number is the clock. A run
//! registers `n` users, then every epoch of `2n` blocks carries `n` claims followed by `n` fresh
//! demands (the first epoch carries the registrations in place of the claims). Each call is
//! annotated with a modelled cost that is affine in the resource count.

pub mod cost;
pub mod error;
pub mod schedule;
pub mod sim;
pub mod trace;
pub mod workload;

pub use cost::{cost_of_call, AffineCost, CallKind, CostModel, CostRecord};
pub use error::SimError;
pub use schedule::{build_schedule, BlockTx, Call};
pub use sim::{replay, run_simulation, run_simulation_with, Divergence, SimConfig, Simulator};
pub use trace::{Trace, TraceHeader, TraceRecord};
pub use workload::{gen_demands, DemandSampler, GENERATOR_ID};
