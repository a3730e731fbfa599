use meshot::deform::DeformError;
use meshot::measures::MeasureError;
use meshot::mesh::MeshError;
use meshot::transport::TransportError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MeasureError> for CliError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::Csv { .. } => CliError::Input(e.to_string()),
            MeasureError::ZeroSamples => CliError::Config(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::DimensionMismatch(..) | TransportError::InvalidParameter(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<DeformError> for CliError {
    fn from(e: DeformError) -> Self {
        match e {
            DeformError::Config(_) => CliError::Config(e.to_string()),
            DeformError::Mesh(m) => m.into(),
            DeformError::Measure(m) => m.into(),
            DeformError::Transport(t) => t.into(),
            DeformError::Diverged { .. } | DeformError::NonFinite { .. } | DeformError::MissingTape => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

impl From<meshot::Error> for CliError {
    fn from(e: meshot::Error) -> Self {
        match e {
            meshot::Error::Mesh(m) => m.into(),
            meshot::Error::Measure(m) => m.into(),
            meshot::Error::Transport(t) => t.into(),
            meshot::Error::Deform(d) => d.into(),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
