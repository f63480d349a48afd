use std::io;

use super::WireError;
use crate::age::AgeError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Age(#[from] AgeError),
    #[error("no response from peer after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("need at least {need} ping exchanges, got {got}")]
    TooFewPings { need: usize, got: usize },
    #[error("invalid harness config: {0}")]
    Config(String),
}
