//! Std companion to `bitfilt-core`: on-disk formats, deterministic parallel
//! drivers, the stage pipeline, and the command-line interface.

pub mod cli;
pub mod formats;
pub mod parallel;
pub mod pipeline;

pub use formats::FormatError;
