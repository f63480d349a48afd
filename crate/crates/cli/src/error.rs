use aoi_core::harness::HarnessError;
use aoi_core::policy::PolicyError;
use aoi_core::sim::SimError;
use aoi_core::AgeError;

/// Exit status 2 for bad configuration or input, 3 for failures while
/// running.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }
}

impl From<AgeError> for CliError {
    fn from(e: AgeError) -> Self {
        match e {
            AgeError::Io(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Age(a) => a.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::TooFewPings { .. } => {
                CliError::Config(e.to_string())
            }
            HarnessError::Age(a) => a.into(),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Harness(h) => h.into(),
            PolicyError::Age(a) => a.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
