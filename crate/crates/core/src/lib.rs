//! Discontinuous constituent parsing by reversible token reordering.
//!
//! A discontinuous tree becomes continuous once its tokens are rearranged
//! into the order of an in-order traversal of the tree. This crate
//! implements that arrangement and its exact inverse, a pointer-network
//! model that predicts the arrangement from the raw sentence, a PCFG-CKY
//! baseline parser for the rearranged sentences, bracketing and reordering
//! metrics, and a batch pipeline gluing the stages together.

pub mod cli;
pub mod cparser;
pub mod metrics;
pub mod pointer;
pub mod reorder;
pub mod synth;
pub mod treebank;
