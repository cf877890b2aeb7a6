//! Patch provenance: decide whether code snippets shared in AI-assistant
//! conversations were applied in pull-request diffs.
//!
//! The pipeline runs bottom-up through the modules:
//! [`diffmodel`] parses unified diffs, [`conversation`] finds share links
//! and extracts code blocks from saved exports, [`normalize`] canonicalizes
//! lines per file type, [`matching`] builds token n-grams and measures
//! containment, [`classify`] labels hunks and pull requests, [`pipeline`]
//! runs a corpus, and [`report`] summarizes and evaluates the results.
//! [`acquire`] and [`dataset`] cover fetching from the code host and the
//! on-disk layout.

pub mod acquire;
pub mod classify;
pub mod conversation;
pub mod dataset;
pub mod diffmodel;
pub mod matching;
pub mod normalize;
pub mod pipeline;
pub mod report;
pub mod synth;
pub mod cli;
