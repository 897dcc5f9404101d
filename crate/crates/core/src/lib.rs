//! Multicast crossbar switch scheduling with intra-flow linear network coding.
//!
//! The crate models a slotted-time M×N input-queued crossbar carrying
//! multicast flows. Sub-flow conflicts are captured by an enhanced conflict
//! graph; achievable rates correspond to its stable set polytope. On top of
//! that sit exact rational LP machinery (fractional weighted coloring,
//! minimum speedup, offline frame synthesis), GF(2^m) coding with an
//! innovative-packet coder, online max-weight stable-set schedulers, and a
//! discrete event simulator.

pub mod coding;
pub mod conflict;
pub mod gf;
pub mod lp;
pub mod polytope;
pub mod ratio;
pub mod region;
pub mod sched;
pub mod sim;
pub mod traffic;

use num::BigRational;

/// Crate-wide error type.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("rate vector outside the coded rate region: chi_f = {0}")]
    OutOfRegion(BigRational),
    #[error("coding failure: {0}")]
    Coding(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
    #[error("data integrity: {0}")]
    Integrity(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
