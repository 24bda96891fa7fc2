//! Predictive individual effect (PIE) for two-arm time-to-event data.
//!
//! The PIE is the survival gain `Y - X` a single new patient would experience
//! under the test treatment (`Y`) rather than control (`X`). Both times are
//! predicted from Bayesian piecewise-exponential fits of the observed arms and
//! joined by an equal-survival-quantile (rank preserving) coupling.
//!
//! Layout:
//! - [`survival_data`]: arm datasets, Kaplan-Meier curves, reconstruction of
//!   patient-level data from digitized published curves.
//! - [`pwexp`]: piecewise-exponential law, conjugate Gamma fits, DIC selection.
//! - [`engine`]: joint predictive sampling and the gain summaries.
//! - [`pipeline`]: end-to-end arm comparison and biomarker subgroups.
//! - [`simulate`]: synthetic arms from a known law.
//! - [`stream`]: labeled, row-addressable random substreams.

pub mod engine;
pub mod error;
pub mod pipeline;
pub mod pwexp;
pub mod simulate;
pub mod stats;
pub mod stream;
pub mod survival_data;

pub use error::{Error, Result};
