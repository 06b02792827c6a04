use adrf_core::{AllocError, MachineError};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("block {block}: {source}")]
    Machine {
        block: u64,
        #[source]
        source: MachineError,
    },
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("block {block} does not follow block {previous}")]
    BlockOrder { block: u64, previous: u64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {reason}")]
    TraceFormat { line: usize, reason: String },
}
