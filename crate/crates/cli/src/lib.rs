//! Command-line front end for predictive individual effect analyses.
//!
//! `pie run` turns a JSON config into a run directory holding the plot data
//! (Kaplan-Meier, cumulative gain, conditional gain), a summary, per-arm model
//! dumps and a manifest; `pie render` draws the three panels as SVG and
//! `pie compare` lines several runs up in one table.

pub mod compare;
pub mod config;
pub mod error;
pub mod output;
pub mod render;
pub mod run;

pub use error::CliError;
