//! Inductive invariant inference for parameterized protocols over finite
//! instances.
//!
//! Candidate lemmas are sampled from a user grammar and kept when they hold
//! on every reachable state; counterexamples to induction (CTIs) are found
//! by random simulation; lemmas are conjoined greedily by how many CTIs
//! they eliminate until none remain.

pub mod ctigen;
pub mod evaluator;
pub mod infer;
pub mod instance;
pub mod invgen;
pub mod reachability;
pub mod select;
pub mod spec_lang;
