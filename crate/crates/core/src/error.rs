use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("unknown variable `{name}` at byte {pos}")]
    UnknownVariable { name: String, pos: usize },

    #[error("division by zero in `{subexpr}`")]
    DivisionByZero { subexpr: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("expressions belong to different charts")]
    ChartMismatch,

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("block index {block} out of range (chart has {count} blocks)")]
    BlockOutOfRange { block: usize, count: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("locality violation: entry {entry} references `{var}` outside block {block}")]
    Locality { entry: String, var: String, block: usize },

    #[error("generator {generator} has a structurally zero cofactor in slot {slot}; choose another generator")]
    GeneratorSlot { generator: usize, slot: usize },

    #[error("zero denominator in slot {slot}: {detail}")]
    ZeroDenominator { slot: usize, detail: String },

    #[error("Newton iteration did not converge at step {step}")]
    NewtonFailure { step: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
