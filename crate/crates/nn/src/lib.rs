//! Residual dense networks for super-resolving simulation fields in space
//! and time, with hand-written backpropagation and an Adam optimizer.

pub mod adam;
pub mod bank;
pub mod config;
mod conv;
pub mod error;
mod gemm;
pub mod rdn;

pub use adam::Adam;
pub use bank::{derive_seeds, BankTrace, ModelBank, ModelKind};
pub use config::RdnConfig;
pub use error::{NnError, Result};
pub use rdn::{AffineNorm, Head, Rdn, Trace};
