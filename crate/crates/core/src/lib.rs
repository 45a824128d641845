//! Emotion-based cross-domain user linking and recommendation.
//!
//! Items are classified into seven-emotion distributions, users are
//! summarized by the mean of what they consumed, and users from different
//! datasets are linked when their profiles point the same way.

// errors carry the scoped ids they are about
#![allow(clippy::result_large_err)]

pub mod classifier;
pub mod emotion;
pub mod evaluation;
pub mod exec;
pub mod ingest;
pub mod pac;
pub mod pipeline;
pub mod profiles;
pub mod recommend;
pub mod store;
