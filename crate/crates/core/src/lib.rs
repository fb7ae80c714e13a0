//! Rate allocation for inference over capacitated sensor networks.
//!
//! Sensors quantize their observations and ship the bits to a fusion center
//! through a relay network with integral link capacities. Instead of pushing
//! the most bits ([`network::max_flow`]), [`num::solve`] allocates rates to
//! maximize a sum of concave per-sensor utilities that measure how much each
//! sensor's bits are worth to the inference task:
//!
//! * [`estimation`]: least-squares recovery of a deterministic vector from
//!   uniformly quantized linear measurements; the utility is the negated
//!   quantization contribution to the mean squared error.
//! * [`detection`]: binary hypothesis testing with likelihood-ratio
//!   quantizers; the utility is the best achievable KL divergence between
//!   the quantized observation laws.
//!
//! [`experiment`] wires these together into reproducible comparisons against
//! the max-flow allocation.

pub mod detection;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod network;
pub mod num;

pub use error::{Error, Result};
