//! File formats: configuration, Touchstone and CSV exports.

pub mod config;
pub mod export;
pub mod touchstone;

pub use export::write_atomic;
