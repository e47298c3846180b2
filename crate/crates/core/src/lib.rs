//! Simulator for loss-tolerant measurement-device-independent quantum coin
//! tossing: state algebra, device models, the protocol state machine,
//! cheating strategies and the analysis layer that checks them against
//! their closed forms.

pub mod adversaries;
pub mod analysis;
pub mod cli;
pub mod devices;
mod error;
pub mod protocol;
pub mod qmath;
mod streams;

pub use error::{Error, Result};
pub use streams::Streams;
