use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid rational {0:?}")]
    InvalidRational(String),
    #[error("malformed bitstring {0:?}")]
    MalformedBitstring(String),
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch { context: String, expected: usize, found: usize },
    #[error("decay rate {index} is not positive")]
    NonPositiveDecay { index: usize },
    #[error("incomplete truth table: missing row {missing}")]
    IncompleteTruthTable { missing: String },
    #[error("bad literal {0:?} (expected Y<i> or Y<i>')")]
    BadLiteral(String),
    #[error("malformed network document: {0}")]
    SpecFormat(String),
    #[error("axis {axis} is not an exit direction of box {label}")]
    NotAnExit { label: String, axis: usize },
    #[error("{from} -> {to} is not an edge of the transition graph")]
    NotAnEdge { from: String, to: String },
    #[error("path does not return to its starting wall")]
    PathNotClosed,
    #[error("cannot compose an empty list of maps")]
    EmptyComposition,
    #[error("cone computations need equal decay rates")]
    UnequalDecay,
    #[error("trajectory hit a codimension-2 face at step {step}")]
    CodimensionTwo { step: usize },
    #[error("box {label} is terminal")]
    TerminalBox { label: String },
    #[error("map denominator is not positive on the cone")]
    DenominatorSign,
    #[error("cones live on different walls")]
    WallMismatch,
    #[error("trapping region is not verified")]
    UnverifiedTrap,
    #[error("unknown cycle label {0:?}")]
    UnknownCycleLabel(String),
    #[error("block length {n} exceeds sequence length {len}")]
    BlockLength { n: usize, len: usize },
    #[error("fit needs at least two distinct block lengths with positive counts")]
    DegenerateFit,
    #[error("cycle segmentation failed at position {position}")]
    Segmentation { position: usize },
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
