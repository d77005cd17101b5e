use std::path::Path;

/// Failures of the file formats and of the pipeline around them.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{0}")]
    Io(String),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("unsupported format version {found} (this build reads version {expected})")]
    Version { found: u16, expected: u16 },
    #[error("file truncated at record {record} of {declared}")]
    Truncated { record: u64, declared: u64 },
    #[error("record {record}: {kind} id {value} out of range (header allows {limit})")]
    LabelRange {
        record: u64,
        kind: &'static str,
        value: u32,
        limit: u32,
    },
    #[error("checksum mismatch: payload is corrupt")]
    Checksum,
    #[error("expected a {expected} file, found a {found} file")]
    Kind {
        expected: &'static str,
        found: &'static str,
    },
    #[error(transparent)]
    Core(#[from] tiedfactor_core::Error),
    #[error("{path}: {source}")]
    InFile {
        path: String,
        #[source]
        source: Box<IoError>,
    },
}

pub type IoResult<T> = Result<T, IoError>;

impl IoError {
    pub fn at(path: &Path, e: std::io::Error) -> Self {
        IoError::Io(format!("{}: {e}", path.display()))
    }

    pub fn in_file(self, path: &Path) -> Self {
        match self {
            IoError::Io(_) | IoError::InFile { .. } => self,
            other => IoError::InFile {
                path: path.display().to_string(),
                source: Box::new(other),
            },
        }
    }

    /// The underlying error with any file context removed.
    pub fn root(&self) -> &IoError {
        match self {
            IoError::InFile { source, .. } => source.root(),
            other => other,
        }
    }
}
