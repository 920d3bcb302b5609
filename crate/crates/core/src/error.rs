use thiserror::Error;

pub type Result<T> = std::result::Result<T, RifsError>;

/// Errors shared across the crate. Validation failures carry enough context
/// to name the offending component or map.
#[derive(Debug, Error)]
pub enum RifsError {
    #[error("invalid system: {0}")]
    InvalidSpec(String),

    #[error("cannot parse system file: {0}")]
    Parse(String),

    #[error("symbol {symbol} out of range for component {component} ({alphabet} maps)")]
    InvalidSymbol {
        component: usize,
        symbol: usize,
        alphabet: usize,
    },

    #[error("word supplies {len} letters but {needed} are required")]
    WordTooShort { len: usize, needed: usize },

    #[error("enumeration would visit {needed} nodes, over the budget of {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },

    #[error("separation requirement not met: {0}")]
    SeparationRequired(String),

    #[error("not supported: {0}")]
    Unsupported(String),

    #[error("index set is not a finite maximal antichain: {0}")]
    NotAnFma(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("internal invariant violated: {0}")]
    InternalInvariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
