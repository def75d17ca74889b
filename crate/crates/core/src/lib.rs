//! Data-driven meta-models for multibody dynamics.
//!
//! The crate covers the full offline pipeline: exact simulation of three
//! canonical mechanisms ([`mbd`]), assembly of training lattices with time
//! either as an input column or fixed per model ([`dataset`]), a from-scratch
//! feed-forward network with backpropagation ([`ffn`]), hyper-parameter search
//! ([`tuning`]) and evaluation of the trained meta-models ([`eval`]).

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
mod digest;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod ffn;
pub mod mbd;
pub mod system;
pub mod tuning;

pub use error::{Error, Result};
pub use system::{SystemKind, SystemModel, SystemSpec};
