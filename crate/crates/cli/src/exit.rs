//! Exit codes and the mapping from library errors onto them.

use std::fmt;
use std::process::ExitCode;

use gigtail::asymptotics::AsymptoticError;
use gigtail::blockseq::SeqError;
use gigtail::bmapq::QueueError;
use gigtail::gig1core::ChainError;
use gigtail::heavytail::DistError;
use gigtail::model::ModelError;

/// Model fails validation.
pub const EXIT_INVALID_MODEL: u8 = 2;
/// Numerical iteration or series did not converge.
pub const EXIT_NUMERIC: u8 = 3;
/// Bad command line.
pub const EXIT_USAGE: u8 = 64;
/// Output cannot be written.
pub const EXIT_CANT_CREATE: u8 = 73;

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    /// Process exit code.
    pub code: u8,
    /// Message printed to stderr.
    pub message: String,
}

impl CliError {
    pub fn invalid(message: impl Into<String>) -> Self {
        CliError { code: EXIT_INVALID_MODEL, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: message.into() }
    }

    pub fn io(what: &str, err: std::io::Error) -> Self {
        CliError { code: EXIT_CANT_CREATE, message: format!("cannot write {what}: {err}") }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn dist_code(e: &DistError) -> u8 {
    match e {
        DistError::Quadrature(_) => EXIT_NUMERIC,
        _ => EXIT_INVALID_MODEL,
    }
}

fn seq_code(e: &SeqError) -> u8 {
    match e {
        SeqError::Dist(d) => dist_code(d),
        SeqError::BeyondHorizon { .. } => EXIT_NUMERIC,
        _ => EXIT_INVALID_MODEL,
    }
}

fn chain_code(e: &ChainError) -> u8 {
    match e {
        ChainError::NotConverged { .. } | ChainError::Singular(_) | ChainError::DriftMismatch { .. } => EXIT_NUMERIC,
        ChainError::Seq(s) => seq_code(s),
        _ => EXIT_INVALID_MODEL,
    }
}

fn queue_code(e: &QueueError) -> u8 {
    match e {
        QueueError::IdentityResidual { .. } | QueueError::SeriesCap(_) => EXIT_NUMERIC,
        QueueError::Dist(d) => dist_code(d),
        QueueError::Seq(s) => seq_code(s),
        QueueError::Chain(c) => chain_code(c),
        _ => EXIT_INVALID_MODEL,
    }
}

fn queue_message(e: &QueueError) -> String {
    match e {
        QueueError::Unstable { rho, limit } => {
            format!("unstable model: drift sigma = rho - {limit} = {} >= 0 (rho = {rho})", rho - limit)
        }
        other => other.to_string(),
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        CliError { code: chain_code(&e), message: e.to_string() }
    }
}

impl From<QueueError> for CliError {
    fn from(e: QueueError) -> Self {
        CliError { code: queue_code(&e), message: queue_message(&e) }
    }
}

impl From<SeqError> for CliError {
    fn from(e: SeqError) -> Self {
        CliError { code: seq_code(&e), message: e.to_string() }
    }
}

impl From<AsymptoticError> for CliError {
    fn from(e: AsymptoticError) -> Self {
        let code = match &e {
            AsymptoticError::Chain(c) => chain_code(c),
            AsymptoticError::Seq(s) => seq_code(s),
            AsymptoticError::Dist(d) => dist_code(d),
            _ => EXIT_INVALID_MODEL,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Chain(c) => c.into(),
            ModelError::Queue(q) => q.into(),
            ModelError::Seq(s) => s.into(),
            other => CliError::invalid(other.to_string()),
        }
    }
}
