//! Rejection codes shared by every module and the HTTP layer.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Machine-readable reason attached to every rejection.
///
/// The HTTP layer maps each code to exactly one status; see [`ErrorCode::http_status`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownTarget,
    EmptyRange,
    RangeOutOfBounds,
    NoEnabledHyperpartition,
    InvalidSpec,
    InvalidDelta,
    ConfigMismatch,
    InvalidTransition,
    InvalidCommand,
    InvalidBudget,
    InvalidMetric,
    UnknownDataset,
    UnknownRun,
    UnknownName,
    UnknownAlgorithm,
    IngestionFailed,
    NoActiveArm,
    CorruptLog,
    BadRequest,
    Io,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 20] = [
        ErrorCode::UnknownTarget,
        ErrorCode::EmptyRange,
        ErrorCode::RangeOutOfBounds,
        ErrorCode::NoEnabledHyperpartition,
        ErrorCode::InvalidSpec,
        ErrorCode::InvalidDelta,
        ErrorCode::ConfigMismatch,
        ErrorCode::InvalidTransition,
        ErrorCode::InvalidCommand,
        ErrorCode::InvalidBudget,
        ErrorCode::InvalidMetric,
        ErrorCode::UnknownDataset,
        ErrorCode::UnknownRun,
        ErrorCode::UnknownName,
        ErrorCode::UnknownAlgorithm,
        ErrorCode::IngestionFailed,
        ErrorCode::NoActiveArm,
        ErrorCode::CorruptLog,
        ErrorCode::BadRequest,
        ErrorCode::Io,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnknownTarget => "unknown_target",
            ErrorCode::EmptyRange => "empty_range",
            ErrorCode::RangeOutOfBounds => "range_out_of_bounds",
            ErrorCode::NoEnabledHyperpartition => "no_enabled_hyperpartition",
            ErrorCode::InvalidSpec => "invalid_spec",
            ErrorCode::InvalidDelta => "invalid_delta",
            ErrorCode::ConfigMismatch => "config_mismatch",
            ErrorCode::InvalidTransition => "invalid_transition",
            ErrorCode::InvalidCommand => "invalid_command",
            ErrorCode::InvalidBudget => "invalid_budget",
            ErrorCode::InvalidMetric => "invalid_metric",
            ErrorCode::UnknownDataset => "unknown_dataset",
            ErrorCode::UnknownRun => "unknown_run",
            ErrorCode::UnknownName => "unknown_name",
            ErrorCode::UnknownAlgorithm => "unknown_algorithm",
            ErrorCode::IngestionFailed => "ingestion_failed",
            ErrorCode::NoActiveArm => "no_active_arm",
            ErrorCode::CorruptLog => "corrupt_log",
            ErrorCode::BadRequest => "bad_request",
            ErrorCode::Io => "io",
        }
    }

    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::UnknownDataset | ErrorCode::UnknownRun => 404,
            ErrorCode::InvalidTransition | ErrorCode::NoActiveArm => 409,
            ErrorCode::BadRequest => 400,
            ErrorCode::CorruptLog | ErrorCode::Io => 500,
            _ => 422,
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A refused operation: code, human message and optional structured detail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct Rejection {
    pub code: ErrorCode,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl Rejection {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

impl From<std::io::Error> for Rejection {
    fn from(err: std::io::Error) -> Self {
        Rejection::new(ErrorCode::Io, err.to_string())
    }
}

pub type Result<T, E = Rejection> = std::result::Result<T, E>;
