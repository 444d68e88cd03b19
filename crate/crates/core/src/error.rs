use alloc::string::String;

/// Error kinds shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    /// Invalid layout, grid, or parameter configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Vector or matrix dimensions do not line up.
    #[error("shape error: expected {expected}, got {got} ({context})")]
    Shape {
        /// Where the mismatch was found.
        context: &'static str,
        /// Expected length.
        expected: usize,
        /// Actual length.
        got: usize,
    },
    /// Optimizer or loss produced a non-finite value.
    #[error("training error: {0}")]
    Training(String),
    /// A region has no calibrated threshold or no pristine data.
    #[error("calibration error: {0}")]
    Calibration(String),
    /// Degenerate geometry, such as coincident actuator and sensor.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Input that makes the requested quantity undefined.
    #[error("degenerate input: {0}")]
    Degenerate(String),
    /// API misuse, such as mixing regions.
    #[error("usage error: {0}")]
    Usage(String),
}

/// Crate result alias.
pub type Result<T, E = Error> = core::result::Result<T, E>;

impl Error {
    pub(crate) fn shape(context: &'static str, expected: usize, got: usize) -> Self {
        Error::Shape {
            context,
            expected,
            got,
        }
    }
}
