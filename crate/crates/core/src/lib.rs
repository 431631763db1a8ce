//! Small-signal and phasor-domain analysis of a virtual synchronous
//! generator (VSG) operating in parallel with a synchronous generator (SG)
//! on a shared load bus.
//!
//! The crate covers the full pipeline:
//!
//! * [`model`] - domain types, unit conventions, JSON configuration;
//! * [`powerflow`] - nonlinear operating-point solve and its linearization;
//! * [`ratpoly`] - polynomial / rational-function / 2x2 rational-matrix
//!   algebra, root finding and tolerance-based pole-zero cancellation;
//! * [`tfbuild`] - stand-alone and interconnected transfer matrices plus an
//!   independent descriptor realization used as a numeric oracle;
//! * [`analysis`] - poles/zeros, mode classification, Bode magnitude, step
//!   responses, DC gains, CSV emission;
//! * [`sweep`] - the seven single-parameter sensitivity studies with
//!   automated qualitative-trend verdicts;
//! * [`simulate`] - nonlinear phasor-domain time simulation with a switched
//!   load, and its comparison against the linear predictions.

pub mod analysis;
pub mod error;
pub mod model;
pub mod powerflow;
pub mod ratpoly;
pub mod simulate;
pub mod sweep;
pub mod tfbuild;

pub use error::{Error, Result};
