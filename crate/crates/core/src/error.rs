use thiserror::Error;

/// Unified error type for the construction suite.
#[derive(Debug, Error)]
pub enum Error {
    /// A tuple or label refers to an element absent from the structure.
    #[error("unknown element: {0}")]
    UnknownElement(String),

    /// A layer, variable, or relation index is out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A density query was made against an empty target structure.
    #[error("empty target structure")]
    EmptyTarget,

    /// A sampler was pointed at a structure with no elements.
    #[error("empty source structure")]
    EmptySource,

    /// A formula falls outside the supported quantifier-free / pithy Pi-2 fragment.
    #[error("unsupported formula: {0}")]
    UnsupportedFormula(String),

    /// Two structures (or a structure and a class) disagree on signatures.
    #[error("signature mismatch: {0}")]
    SignatureMismatch(String),

    /// The structure is not a member of the amalgamation class.
    #[error("structure not in age: {0}")]
    NotInAge(String),

    /// The claimed common substructure is not embedded as stated.
    #[error("bad embedding: {0}")]
    BadEmbedding(String),

    /// No witness in the age satisfies the one-point demand.
    #[error("unsatisfiable demand: {0}")]
    UnsatisfiableDemand(String),

    /// Duplicating the given type leaves the age.
    #[error("not duplicable in age: {0}")]
    NotDuplicableInAge(String),

    /// Splitting was requested for a tuple shorter than the declared order.
    #[error("type order too small: need at least {need} variables, got {got}")]
    OrderTooSmall { need: usize, got: usize },

    /// The class declares no splitting order.
    #[error("class {0} declares no splitting order")]
    NoSplittingDeclared(String),

    /// The structure violates the threshold metric axiom schemata.
    #[error("not a metric model: {0}")]
    NotAMetricModel(String),

    /// A staged run exceeded its configured element or work budget.
    #[error("stage budget exceeded: {0}")]
    StageBudgetExceeded(String),

    /// Constant symbols are not supported by the staged engines.
    #[error("constants unsupported: {0}")]
    ConstantsUnsupported(String),

    /// An address is malformed or not realized at the stage in question.
    #[error("invalid address: {0}")]
    InvalidAddress(String),

    /// Malformed input data (files, JSON, CSV).
    #[error("parse error: {0}")]
    Parse(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// Underlying JSON failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
