//! hardwire-core: compiles quantized transformer weights into
//! constant-coefficient shift-add netlists and synthesizable Verilog,
//! models the resulting silicon's energy, area, cost, and link behavior,
//! and simulates the host/device split inference protocol against a
//! bit-exact integer reference.
//!
//! Module map:
//! - [`model`]: topology, weight storage, synthetic generation, `.itw` files
//! - [`reference`]: bit-exact integer transformer (the oracle)
//! - [`csd`]: canonical signed digit encoding and shift-add planning
//! - [`netlist`]: gate-level synthesis, evaluation, and gate costing
//! - [`rtl`]: structural Verilog emission and testbenches
//! - [`analytics`]: energy / area / yield / cost / power models
//! - [`splitbrain`]: link traffic, latency, and the protocol simulator

pub mod analytics;
pub mod csd;
pub mod error;
pub mod model;
pub mod netlist;
pub mod reference;
pub mod rtl;
pub mod splitbrain;

pub use error::{Error, Result};
