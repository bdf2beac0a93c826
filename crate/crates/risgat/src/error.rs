use std::path::PathBuf;

/// Errors raised by file formats, configuration and experiment drivers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Propagated from the numerical core.
    #[error(transparent)]
    Core(#[from] risgat_core::Error),
    /// Filesystem failure, tagged with the offending path.
    #[error("{path}: {source}")]
    Io {
        /// Path being read or written.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// Structurally invalid file.
    #[error("{path}: malformed file: {reason}")]
    Format {
        /// File being decoded.
        path: PathBuf,
        /// What went wrong.
        reason: String,
    },
    /// Unsupported format version.
    #[error("{path}: unsupported version {found} (expected {expected})")]
    Version {
        /// File being decoded.
        path: PathBuf,
        /// Version in the file.
        found: u32,
        /// Version this build writes.
        expected: u32,
    },
    /// Payload does not match the recorded checksum.
    #[error("{path}: checksum mismatch (manifest {expected}, payload {actual})")]
    Checksum {
        /// Tensor file.
        path: PathBuf,
        /// Digest recorded in the manifest.
        expected: String,
        /// Digest of the bytes on disk.
        actual: String,
    },
    /// Stored model or dataset disagrees with the requested shape.
    #[error("dimension mismatch for {what}: found {found}, expected {expected}")]
    Mismatch {
        /// Quantity being compared.
        what: &'static str,
        /// Value on disk.
        found: usize,
        /// Value requested.
        expected: usize,
    },
    /// Bad configuration key, value or combination.
    #[error("config: {0}")]
    Config(String),
    /// A prerequisite artifact (weights, dataset) is absent.
    #[error("missing artifact: {0}")]
    Missing(PathBuf),
    /// Output exists and overwriting was not requested.
    #[error("{0} already exists (pass --force to overwrite)")]
    Exists(PathBuf),
}

/// Result alias for this crate.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format { path: path.into(), reason: reason.into() }
    }
}
