use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] nvmag::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Core(e) if e.is_fit_error() => 4,
            CliError::Core(_) => 3,
        }
    }

    /// Variant name of a core error, for scripts that match on it.
    pub fn kind(&self) -> &'static str {
        use nvmag::Error as E;
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Io { .. } => "Io",
            CliError::Core(e) => match e {
                E::InvalidParameter(_) => "InvalidParameter",
                E::NonSymmetric { .. } => "NonSymmetric",
                E::DiscriminantViolation { .. } => "DiscriminantViolation",
                E::InconsistentResonances { .. } => "InconsistentResonances",
                E::AngleOutOfRange { .. } => "AngleOutOfRange",
                E::ZeroField => "ZeroField",
                E::SplittingBelowStrain => "SplittingBelowStrain",
                E::WrongLineCount { .. } => "WrongLineCount",
                E::DuplicateLines { .. } => "DuplicateLines",
                E::SingularNormalMatrix { .. } => "SingularNormalMatrix",
                E::DegenerateSolution => "DegenerateSolution",
                E::DegenerateInput(_) => "DegenerateInput",
                E::DomainError { .. } => "DomainError",
                E::InvalidSpectrum(_) => "InvalidSpectrum",
                E::NoDipFound => "NoDipFound",
                E::FitNotConverged { .. } => "FitNotConverged",
                E::BaselineNotConverged { .. } => "BaselineNotConverged",
                E::Csv(_) => "Csv",
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn read_file(path: &std::path::Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}
