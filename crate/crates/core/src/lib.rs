//! Simulation and analysis of an RIS-aided multi-user OFDM uplink with
//! low-resolution ADCs: channel draws, the quantized signal chain, closed-form
//! rates and their large-array limits, and max-min RIS phase design.

pub mod channel;
pub mod closedform;
pub mod config;
pub mod error;
pub mod experiments;
pub mod model;
pub mod optimizer;
pub mod txchain;

pub use error::{Error, ErrorCategory, Result};
pub use model::{Bits, Geometry, QuantizationModel, SystemConfig};
pub use txchain::PhaseVector;
