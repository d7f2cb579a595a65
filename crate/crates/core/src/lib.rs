//! Two-tier unsupervised clustering of heterogeneous drug data.
//!
//! Tier 1 clusters each textual feature (mechanism of action, pathway,
//! indication, target) separately. The resulting co-membership graphs are
//! OR-fused into one drug–drug graph, embedded with a graph autoencoder over
//! the numeric drug features, and clustered again (tier 2). Clusters rich in
//! drugs already under clinical trial are mined for repurposing candidates,
//! ranked by the trial phase of their nearest trial drug.

pub mod analysis;
pub mod clustering;
pub mod ddr;
pub mod dataset;
pub mod error;
pub mod gae;
pub mod numerics;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
