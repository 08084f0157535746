//! Library side of the `ssv` binary, so tests can drive commands directly.

pub mod bench;
pub mod commands;

use std::fmt;

/// A failed command. User errors exit with 1, internal ones with 2.
#[derive(Debug)]
pub enum Failure {
    User(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    pub fn user(e: impl Into<anyhow::Error>) -> Self {
        Failure::User(e.into())
    }

    pub fn internal(e: impl Into<anyhow::Error>) -> Self {
        Failure::Internal(e.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::User(_) => 1,
            Failure::Internal(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::User(e) | Failure::Internal(e) => write!(f, "{e:#}"),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;
