//! Policy-mining toolkit: extracts concise ABAC rules from access logs and
//! attribute files in heterogeneous formats, evaluates mined policies, and
//! renders them as stakeholder-readable natural-language reports.
//!
//! Module map:
//! - [`model`] — domain types, rule matching, WSC, coverage
//! - [`parse`] — format inference and file parsing
//! - [`miner`] — seed-generalization-refinement mining engine
//! - [`datagen`] — synthetic ABAC and DAC dataset generators
//! - [`compress`] — attribute-level log compression
//! - [`nlgen`] — prompt assembly, summarization, fidelity checking
//! - [`eval`] — experiment runner and report emission

pub mod compress;
pub mod datagen;
pub mod eval;
pub mod fixtures;
pub mod miner;
pub mod model;
pub mod nlgen;
pub mod parse;
