//! Laboratory for oblivious p-CLI first-order methods on quadratics.

pub mod algos;
pub mod bounds;
pub mod error;
pub mod harness;
pub mod instances;
pub mod pcli;
pub mod poly;
pub mod restart;

pub use error::{Error, Result};
