//! Experiment harness around `cnu_core`: random nets, observation sessions
//! with a hidden marking, the dense-versus-network benchmark, and the HTTP
//! service behind the observer console.

pub mod bench;
pub mod cli;
pub mod error;
pub mod gen;
pub mod server;
pub mod session;

pub use error::{WbError, WbResult};
