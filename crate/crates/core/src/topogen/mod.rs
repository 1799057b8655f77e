//! Brain-network-inspired topology synthesis.
//!
//! [`grow`] builds one topology deterministically from [`GrowthParams`];
//! [`sweep()`] grows a grid of `(gamma, beta)` pairs and selects the one
//! trading rough communication cost against basic power best.

mod baseline;
mod grow;
pub mod powerlaw;
mod sweep;

pub use baseline::preferential_attachment;
pub use grow::{grow, grow_detailed, Attachment, DegreeTracker, Grower, GrowthOutcome, GrowthParams, LengthTracker};
pub use powerlaw::{compute_ma, degree_frequencies, expected_link_prob, link_length_distribution};
pub use sweep::{basic_obj, sweep, SweepConfig, SweepEntry, SweepResult};
