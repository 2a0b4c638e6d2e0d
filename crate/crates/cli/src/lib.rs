//! Command-line harness for the pdfp-langevin samplers.

pub mod config;
pub mod experiment;
pub mod output;
pub mod pgm;
pub mod sample;
pub mod verify;
