use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain has no interior lattice points at this mesh")]
    EmptyDomain,
    #[error("domain is not simply connected: {0}")]
    NotSimplyConnected(String),
    #[error("marked points coincide on the lattice boundary")]
    DegenerateMarks,
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("exact enumeration too large: {0} free sites (limit {1})")]
    TooLarge(usize, usize),
    #[error("chain did not mix: {0}")]
    NotMixed(String),
    #[error("configuration does not carry Dobrushin boundary conditions")]
    NoInterface,
    #[error("annulus leaves the domain interior")]
    AnnulusOutOfDomain,
    #[error("kernel points closer than the mesh")]
    PointsTooClose,
    #[error("normalizing constant is not positive: {0}")]
    NormalizerNonpositive(f64),
    #[error("ghost coupling needs a nonnegative field")]
    NegativeField,
    #[error("field present but no ghost flags attached")]
    MissingGhost,
    #[error("consecutive curve points coincide at vertex {0}")]
    DegenerateStep(usize),
    #[error("Green's function evaluated on the diagonal")]
    CoincidentPoints,
    #[error("point {0:?} is outside the domain")]
    ExteriorPoint([f64; 2]),
    #[error("requested component of the complement is empty")]
    ComponentEmpty,
    #[error("interface extraction failed: {0}")]
    Trace(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
