//! Channel spectrum benchmarking toolkit.
//!
//! Simulates noisy quantum gates as Kraus channels, runs the repeated-gate
//! survival protocol to produce shot-sampled decay curves, extracts damped
//! complex exponentials from those curves (matrix pencil baseline and a
//! 6-term nonlinear fit), and turns the fitted spectra into SPAM-robust
//! process-fidelity statements: a bootstrap fidelity estimate interval plus a
//! degeneracy-weighted point estimate, validated against an exact
//! process-fidelity oracle in simulation.

pub mod channel;
pub mod config;
pub mod error;
pub mod estimation;
pub mod gates;
pub mod linalg;
pub mod fitting;
pub mod noise;
pub mod pipeline;
pub mod plot;
pub mod protocol;
pub mod report;

pub use error::{CsbError, Result};
