use thiserror::Error;

/// Crate-wide error type. Variant names mirror the failure modes of the
/// public operations they guard.
#[derive(Debug, Error)]
pub enum Error {
    #[error("packet-too-wide-for-grid: {0}")]
    PacketTooWide(String),

    #[error("overlap-of-pulses: {0}")]
    OverlapOfPulses(String),

    #[error("grid-mismatch: fields live on different grids")]
    GridMismatch,

    #[error("instability-detected: norm drift {drift:.3e} in one step exceeds 1e-6")]
    InstabilityDetected { drift: f64 },

    #[error("overlapping-site-windows: sites {0} and {1} overlap")]
    OverlappingSiteWindows(String, String),

    #[error("branch-not-bound: branch {0} holds no bound atom")]
    BranchNotBound(u32),

    #[error("empty-ledger: no branches to aggregate")]
    EmptyLedger,

    #[error("schema-violation at `{path}`: {message}")]
    SchemaViolation { path: String, message: String },

    #[error("inconsistent-physics: {0}")]
    InconsistentPhysics(String),

    #[error("schema-mismatch: report schema versions differ ({0} vs {1})")]
    SchemaMismatch(u32, u32),

    #[error("audit-failure: {audit} drift {value:.3e} exceeds tolerance {tolerance:.1e}")]
    AuditFailure {
        audit: String,
        value: f64,
        tolerance: f64,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
