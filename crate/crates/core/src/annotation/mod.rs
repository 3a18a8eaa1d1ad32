//! Crowdsourced V-A rating collection: per-worker randomized sequences with
//! the previous answer shown as an anchor, 9-point integer ratings, a
//! per-worker question cap, and mean aggregation once enough ratings exist.
//!
//! The append-only rating log is the source of truth; every other piece of
//! state is derived from it and rebuilt on startup.

mod export;
mod server;
mod store;

pub use export::{export_labels, ExportReport};
pub use server::{router, AppState, ServiceConfig};
pub use store::{
    replay_log, AggregateLabel, AnnotationError, NextItem, PreviousItem, Protocol, ProtocolConfig, RatingEvent,
    RatingStore, WorkerSession, MIN_RATINGS, WORKER_QUOTA,
};
