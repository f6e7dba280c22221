use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Network,
    Data,
    Other,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Network => 3,
            ErrorKind::Data => 4,
            ErrorKind::Other => 1,
        }
    }
}

/// A failure tagged with the stage it happened in.
#[derive(Debug)]
pub struct CliError {
    pub stage: String,
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(stage: &str, kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError { stage: stage.to_string(), kind, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage name and an exit category to library errors.
pub trait StageContext<T> {
    fn stage(self, stage: &str) -> Result<T, CliError>;
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl<T> StageContext<T> for Result<T, $t> {
            fn stage(self, stage: &str) -> Result<T, CliError> {
                self.map_err(|e| CliError::new(stage, ErrorKind::Data, e.to_string()))
            }
        }
    )*};
}

data_errors!(
    persona_miner::metrics::MetricsError,
    persona_miner::cluster::ClusterError,
    persona_miner::stats::StatsError,
    persona_miner::personas::PersonaError,
    persona_miner::report::ReportError,
    persona_miner::classify::ClassifyError,
    persona_miner::sampling::SamplingError,
    persona_miner::simgen::SimError,
    csv::Error,
    serde_json::Error
);

impl<T> StageContext<T> for Result<T, persona_miner::ingest::IngestError> {
    fn stage(self, stage: &str) -> Result<T, CliError> {
        use persona_miner::ingest::IngestError;
        self.map_err(|e| {
            let kind = match &e {
                e if e.is_network() => ErrorKind::Network,
                IngestError::Io(_) => ErrorKind::Other,
                _ => ErrorKind::Data,
            };
            CliError::new(stage, kind, e.to_string())
        })
    }
}

impl<T> StageContext<T> for Result<T, std::io::Error> {
    fn stage(self, stage: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::new(stage, ErrorKind::Other, e.to_string()))
    }
}
