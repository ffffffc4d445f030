use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("no rows")]
    NoRows,
    #[error("row {row} has {found} cells, expected {expected}")]
    RowLength { row: String, found: usize, expected: usize },
    #[error("duplicate row label {0}")]
    DuplicateRow(String),
    #[error("duplicate sample id {0}")]
    DuplicateSample(String),
    #[error("unknown group {0}")]
    UnknownGroup(String),
    #[error("unknown alteration {0}")]
    UnknownAlteration(String),
    #[error("row index {index} out of range for {rows} rows")]
    RowIndex { index: u32, rows: usize },
    #[error("hypergeometric parameters out of range: n={n}, k={k}, r={r}")]
    HypergeomParams { n: u32, k: u32, r: u32 },
    #[error("coverage {coverage} exceeds sample count {n}")]
    CoverageAboveN { coverage: u32, n: u32 },
    #[error("observed union size {observed} above support maximum {max}")]
    ObservedAboveSupport { observed: u32, max: u32 },
    #[error("empty weight sequence")]
    EmptyWeights,
    #[error("length mismatch: {0} p-values, {1} weights")]
    LengthMismatch(usize, usize),
    #[error("no positive weight")]
    NoPositiveWeight,
    #[error("set size {size} outside 2..={k_max}")]
    SizeOutOfRange { size: usize, k_max: usize },
    #[error("subset closure would hold {count} sets, budget is {budget}")]
    ClosureBudget { count: usize, budget: usize },
    #[error("enumeration needs {count} tuples, budget is {budget}")]
    EnumerationBudget { count: u128, budget: u128 },
    #[error("margin {margin} infeasible for group of {size} samples")]
    InfeasibleMargin { margin: u32, size: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
}
