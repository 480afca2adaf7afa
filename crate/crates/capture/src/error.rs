use thiserror::Error;

/// Failures reported to capture clients. Each variant has a stable
/// machine-readable code (see `API.md`).
#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("unknown session token")]
    UnknownSession,
    #[error("session is finalized")]
    SessionFinalized,
    #[error("participant {0} already completed the study")]
    ParticipantDone(String),
    #[error("invalid participant id {0:?}")]
    InvalidParticipant(String),
    #[error("item {item} was already answered; the current item is {current}")]
    BacktrackRejected { item: String, current: String },
    #[error("item {item} is not the current item {current}")]
    ItemNotCurrent { item: String, current: String },
    #[error("all items are answered")]
    NoCurrentItem,
    #[error("item {0} is not part of this session")]
    UnknownItem(String),
    #[error("time limit of {limit_ms} ms passed ({elapsed_ms} ms elapsed); only SKIPPED is accepted")]
    TimeExpired { limit_ms: u64, elapsed_ms: u64 },
    #[error("choice {choice} is out of range for item {item}")]
    InvalidChoice { item: String, choice: u32 },
    #[error("click {index} is invalid: {reason}")]
    InvalidClick { index: usize, reason: String },
    #[error("self-assessment is only accepted after the last item")]
    SglNotReady,
    #[error("self-assessment was already recorded")]
    SglAlreadyRecorded,
    #[error("invalid self-assessment: {0}")]
    InvalidSgl(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no chart {0}")]
    ChartNotFound(String),
    #[error("internal failure: {0}")]
    Internal(String),
    #[error("storage failure: {0}")]
    Storage(#[from] attnlit::Error),
}

impl CaptureError {
    pub fn code(&self) -> &'static str {
        match self {
            CaptureError::UnknownSession => "UNKNOWN_SESSION",
            CaptureError::SessionFinalized => "SESSION_FINALIZED",
            CaptureError::ParticipantDone(_) => "PARTICIPANT_DONE",
            CaptureError::InvalidParticipant(_) => "INVALID_PARTICIPANT",
            CaptureError::BacktrackRejected { .. } => "BACKTRACK_REJECTED",
            CaptureError::ItemNotCurrent { .. } => "ITEM_NOT_CURRENT",
            CaptureError::NoCurrentItem => "NO_CURRENT_ITEM",
            CaptureError::UnknownItem(_) => "UNKNOWN_ITEM",
            CaptureError::TimeExpired { .. } => "TIME_EXPIRED",
            CaptureError::InvalidChoice { .. } => "INVALID_CHOICE",
            CaptureError::InvalidClick { .. } => "INVALID_CLICK",
            CaptureError::SglNotReady => "SGL_NOT_READY",
            CaptureError::SglAlreadyRecorded => "SGL_ALREADY_RECORDED",
            CaptureError::InvalidSgl(_) => "INVALID_SGL",
            CaptureError::InvalidRequest(_) => "INVALID_REQUEST",
            CaptureError::ChartNotFound(_) => "CHART_NOT_FOUND",
            CaptureError::Internal(_) => "INTERNAL_ERROR",
            CaptureError::Storage(_) => "STORAGE_ERROR",
        }
    }
}
