//! System-level Monte-Carlo simulator for the availability of cellular,
//! small-cell, and cell-free massive MIMO networks under finite-blocklength
//! (URLLC) error-probability targets.
//!
//! The pipeline per fading realization is: uplink pilots -> MMSE channel
//! estimation -> combining (and, for the downlink, duality-based precoding
//! plus optional precoded downlink pilots) -> one effective scalar link per
//! UE -> saddlepoint error probability from [`fbl_core`] with the decoding
//! metric optimized per realization. Network availability is the fraction of
//! random UE placements whose fading-averaged error probability meets the
//! target.
//!
//! Everything is deterministic given the experiment seed: all randomness is
//! drawn from counter-derived RNG streams keyed by (placement, task kind,
//! index), so results are independent of worker count and scheduling order.

pub mod channel;
mod error;
pub mod estimation;
pub mod processing;
pub mod quad;
pub mod scenario;
pub mod sim;

pub use error::SimError;
