use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invariant violated at {path}: {message}")]
    Invariant { path: String, message: String },
    #[error("non-positive length at {path}: {value}")]
    NonPositiveLength { path: String, value: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),
    #[error("truncation would create {vertices} vertices, above the cap of {cap}")]
    DepthTooLarge { vertices: u64, cap: u64 },
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
    #[error("point {0} lies outside [0, L)")]
    OutOfDomain(f64),
    #[error("kernel functions are only analysed on finite-volume trees")]
    InfiniteVolumeRegime,
    #[error("function has no limit at the end")]
    NoLimit,
    #[error("the graph has no finite volume end")]
    NoFiniteVolumeEnd,
    #[error("no qualifying subgraph sequence: {0}")]
    NoQualifyingSequence(String),
    #[error("shooting failed: {0}")]
    ShootingFailure(String),
    #[error("root scan too coarse near k = {0}")]
    RootScanTooCoarse(f64),
    #[error("singular assembly: {0}")]
    SingularAssembly(String),
    #[error("all norms of the function vanish")]
    ZeroFunction,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Process exit status used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Spec(_) | Error::InvalidArgument(_) | Error::UnknownVertex(_) => 2,
            Error::UnsupportedFamily(_) | Error::NoQualifyingSequence(_) => 3,
            _ => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::Spec(SpecError::Schema { .. }) => "SchemaError",
            Error::Spec(SpecError::Invariant { .. }) => "InvariantError",
            Error::Spec(SpecError::NonPositiveLength { .. }) => "NonPositiveLength",
            Error::UnsupportedFamily(_) => "UnsupportedFamily",
            Error::DepthTooLarge { .. } => "DepthTooLarge",
            Error::UnknownVertex(_) => "UnknownVertex",
            Error::OutOfDomain(_) => "OutOfDomain",
            Error::InfiniteVolumeRegime => "InfiniteVolumeRegime",
            Error::NoLimit => "NoLimit",
            Error::NoFiniteVolumeEnd => "NoFiniteVolumeEnd",
            Error::NoQualifyingSequence(_) => "NoQualifyingSequence",
            Error::ShootingFailure(_) => "ShootingFailure",
            Error::RootScanTooCoarse(_) => "RootScanTooCoarse",
            Error::SingularAssembly(_) => "SingularAssembly",
            Error::ZeroFunction => "ZeroFunction",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
