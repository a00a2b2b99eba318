//! Predictive monitoring of business processes over event streams.
//!
//! Given a historical event log and a predicate over completed traces, the
//! offline pipeline clusters trace prefixes by control flow and trains one
//! data-attribute classifier per cluster. The online monitor maps a running
//! case to its nearest cluster and queries that cluster's classifier,
//! emitting a prediction only when class support and class probability clear
//! the configured reliability thresholds.

pub mod error;
pub mod monitor;
pub mod pipeline;
pub mod classification;
pub mod clustering;
pub mod encoding;
pub mod event_model;
pub mod predicate;

pub use error::{Error, Result};
