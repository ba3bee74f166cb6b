//! Claim pipeline built on `medclaim-ckks`: the scoring model and its
//! encrypted circuit, a hash-chained attestation ledger, authenticated file
//! envelopes, and the client/server workflow that ties them together.

pub mod dataset;
pub mod envelope;
pub mod ledger;
pub mod model;
pub mod par;
pub mod record;
pub mod training;
pub mod workflow;

pub use record::{FeatureVector, RawRecord, FEATURE_COUNT, FEATURE_NAMES};
