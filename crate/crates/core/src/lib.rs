//! Multi-resource fair allocation.
//!
//! This crate carries two layers. The first is a set of pure reference allocators working in
//! exact rational arithmetic: progressive filling for (weighted) max-min fairness over a single
//! resource, the iterative Dominant Resource Fairness loop, and Precomputed DRF, which replaces
//! the loop with a closed-form cycle count. The second is [`machine::Machine`], an off-chain
//! model of the Autonomous DRF contract: users register demands in one epoch and claim their
//! shares in the next, every division is an integer floor scaled by a precision factor, and two
//! parity pools keep the demand-time reserves stable while claims drain the other pool.
//!
//! The rational allocators double as the oracles used to validate the fixed-point machine.

pub mod drf;
pub mod error;
pub mod machine;
pub mod maxmin;
pub mod pdrf;
pub mod resource;
pub mod share;

pub use drf::{drf_allocate, drf_allocate_with, weighted_drf_allocate, DrfTermination};
pub use error::AllocError;
pub use machine::fixed::{fixed_floor_div, fixed_pdrf_reference, FixedPdrf, DEFAULT_PRECISION};
pub use machine::{
    ClaimReceipt, DemandReceipt, Machine, MachineConfig, MachineError, MachineSnapshot,
    MachineState,
};
pub use maxmin::{progressive_filling, weighted_progressive_filling};
pub use pdrf::{
    compare_pdrf_drf, compare_pdrf_drf_with, pdrf_allocate, weighted_pdrf_allocate, DiffStats,
};
pub use resource::{AllocationResult, DemandSet, Quantity, ResourceVector, UserId, WeightVector};
pub use share::{dominant_share, weighted_dominant_share, RationalShare};
