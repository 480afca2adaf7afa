//! Local study runner for click-based attention capture: serves the study
//! configuration and chart images, receives click and answer streams and
//! persists one append-only JSON-lines file per session.

mod api;
mod clock;
mod error;
mod store;

pub use api::{router, serve, AnswerRequest, ClientConfig, ClientItem, ErrorBody};
pub use clock::{Clock, ManualClock, SystemClock};
pub use error::CaptureError;
pub use store::{ClickAck, ClickIn, OpenRequest, SessionStatus, Store};
