//! Detection of quantum resources from prepare-and-measure correlation tables.
//!
//! The pipeline runs bottom-up:
//!
//! * [`qmath`] — states, effects and spectral helpers;
//! * [`scenario`] — preparation/operation boxes and correlation tables;
//! * [`ranktest`] — witness-free detection from the rank of a correlation matrix;
//! * [`freesets`] — incoherent, real, stabilizer and maximally-mixed free sets;
//! * [`witnesses`] — linear and nonlinear witnesses with their free bounds;
//! * [`optimizer`] — numerical certification of free bounds and gap estimation.

pub mod error;
pub mod freesets;
pub mod optimizer;
pub mod qmath;
pub mod ranktest;
pub mod scenario;
pub mod witnesses;

pub use error::{Error, ErrorKind, Result};
