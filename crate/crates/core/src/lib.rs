//! Joint CoMP-cell selection and OFDMA resource allocation for
//! fronthaul-constrained C-RAN.
//!
//! * [`model`]: scenarios, associations, allocations.
//! * [`channel`]: SINR, Shannon rate, BS load, Jain fairness.
//! * [`allocation`]: the optimal allocation for a fixed association.
//! * [`selection`]: the CoMP-cell filter and the greedy selection pass.
//! * [`scenario`]: random deployments and the 3-SAT reduction.
//! * [`oracle`]: brute-force verifiers for small instances.

pub mod allocation;
pub mod channel;
pub mod error;
pub mod model;
pub mod oracle;
pub mod scenario;
pub mod selection;

pub use error::{Error, Result};
