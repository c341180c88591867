//! Hallucination detection by belief propagation over trees of
//! logically related statements.
//!
//! - [`tree`]: the belief tree and its canonical file format
//! - [`hmt`]: exact upward inference and a brute-force oracle
//! - [`estimation`]: emission tables from labelled scores
//! - [`providers`]: chat and NLI backends, fixture replay and caching
//! - [`construction`]: building trees from provider replies
//! - [`evaluation`]: datasets and detection metrics
//! - [`pipeline`]: dataset records to predictions

pub mod construction;
pub mod estimation;
pub mod evaluation;
pub mod hmt;
pub mod io;
pub mod pipeline;
pub mod prompts;
pub mod providers;
pub mod tree;
