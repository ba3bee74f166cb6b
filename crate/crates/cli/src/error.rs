use std::fmt;
use std::path::Path;

use medclaim_ckks::HeError;
use medclaim_core::envelope::EnvelopeError;
use medclaim_core::ledger::LedgerError;
use medclaim_core::model::ModelError;
use medclaim_core::workflow::WorkflowError;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    VerificationFailed = 1,
    Usage = 2,
    CryptoOrLedger = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            exit,
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Exit::Usage, "Usage", message)
    }

    pub fn file_exists(path: &Path) -> Self {
        Self::new(
            Exit::Usage,
            "FileExists",
            format!("{} already exists (pass --force to overwrite)", path.display()),
        )
    }

    pub fn missing_artifact(path: &Path, hint: &str) -> Self {
        Self::new(
            Exit::Usage,
            "MissingArtifact",
            format!("{} not found; {hint}", path.display()),
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let kind = match &e {
            ModelError::SchemaViolation(_) => "SchemaViolation",
            ModelError::DegenerateColumn(_) => "DegenerateColumn",
            ModelError::He(inner) => return Self::new(Exit::CryptoOrLedger, he_kind(inner), e.to_string()),
            ModelError::Io(_) => return Self::new(Exit::CryptoOrLedger, "Io", e.to_string()),
            _ => "InvalidModelInput",
        };
        Self::new(Exit::Usage, kind, e.to_string())
    }
}

fn he_kind(e: &HeError) -> &'static str {
    match e {
        HeError::KeyParamsMismatch => "KeyParamsMismatch",
        HeError::Format(_) => "Format",
        _ => "HeError",
    }
}

impl From<HeError> for CliError {
    fn from(e: HeError) -> Self {
        Self::new(Exit::CryptoOrLedger, he_kind(&e), e.to_string())
    }
}

impl From<EnvelopeError> for CliError {
    fn from(e: EnvelopeError) -> Self {
        let kind = match e {
            EnvelopeError::AuthFailure => "AuthFailure",
            EnvelopeError::InvalidKeyLength(_) => "InvalidKeyLength",
            _ => "Envelope",
        };
        Self::new(Exit::CryptoOrLedger, kind, e.to_string())
    }
}

impl From<LedgerError> for CliError {
    fn from(e: LedgerError) -> Self {
        let kind = match e {
            LedgerError::CorruptLedger { .. } => "CorruptLedger",
            LedgerError::BadHeader(_) => "BadHeader",
            LedgerError::MissingDataLog(_) => "MissingDataLog",
            LedgerError::DuplicateResult(_) => "DuplicateResult",
            LedgerError::DataHashConflict(_) => "DataHashConflict",
            LedgerError::UnknownClaim(_) => "UnknownClaim",
            _ => "Ledger",
        };
        Self::new(Exit::CryptoOrLedger, kind, e.to_string())
    }
}

impl From<WorkflowError> for CliError {
    fn from(e: WorkflowError) -> Self {
        match e {
            WorkflowError::Model(m) => m.into(),
            WorkflowError::He(h) => h.into(),
            WorkflowError::Envelope(v) => v.into(),
            WorkflowError::Ledger(l) => l.into(),
            WorkflowError::InvalidClaimId(_) => Self::new(Exit::Usage, "InvalidClaimId", e.to_string()),
            WorkflowError::StaleSubmission(_) => Self::new(Exit::VerificationFailed, "StaleSubmission", e.to_string()),
            WorkflowError::PendingResult(_) => Self::new(Exit::CryptoOrLedger, "PendingResult", e.to_string()),
            WorkflowError::ExchangeUnwritable { .. } => {
                Self::new(Exit::CryptoOrLedger, "ExchangeUnwritable", e.to_string())
            }
            _ => Self::new(Exit::CryptoOrLedger, "Workflow", e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::new(Exit::CryptoOrLedger, "Io", e.to_string())
    }
}
