//! Link-level simulation and optimization toolkit for MIMO integrated
//! sensing and communication (ISAC) transceivers.
//!
//! The crate models the transmit side of a narrowband multi-antenna ISAC
//! base station and the receivers hanging off it:
//!
//! - [`scenario`]: array geometry, steering vectors, channels, targets, and
//!   the JSON scenario files every experiment is driven by.
//! - [`constellation`]: standard constellations, the fourth- and inverse
//!   second-order moments that govern sensing performance, and geometric
//!   shaping between those moments and minimum distance.
//! - [`ofdm`]: OFDM sensing frames, echo synthesis, matched / reciprocal /
//!   LMMSE range processing with closed-form SINR predictions, and
//!   spectrally efficient FDM (SEFDM) modulation.
//! - [`blp`]: block-level precoding, beampattern and Cramer-Rao bound
//!   metrics, and the weighted communication/sensing tradeoff solver.
//! - [`slp`]: symbol-level precoding with constructive-interference
//!   constraints and destructive-interference regions for eavesdroppers.
//! - [`secure_data`]: artificial-noise secrecy-rate designs and
//!   directional-modulation beam synthesis.
//! - [`secure_sensing`]: ambiguity-function sidelobe control that hides
//!   range information from unauthorized sensing receivers.
//! - [`full_duplex`]: self-interference channels, cancellation stages, and
//!   null-space transmit projection.
//! - [`im`]: antenna-selection index modulation riding on a radar beam.
//! - [`experiments`]: declarative experiment runner behind the `isac-lab`
//!   binary; writes CSV/SVG artifacts plus a hash manifest.
//!
//! Every stochastic routine takes an explicit seed or generator; rerunning
//! an experiment with the same scenario reproduces artifacts bit for bit.

pub mod blp;
pub mod constellation;
pub mod dft;
pub mod error;
pub mod experiments;
pub mod full_duplex;
pub mod im;
pub mod io;
pub mod linalg;
pub mod ofdm;
pub mod rng;
pub mod scenario;
pub mod secure_data;
pub mod secure_sensing;
pub mod slp;
pub mod solver;

pub use error::{IsacError, Result};
