//! A self-contained continuous constituent parser (treebank PCFG + Viterbi
//! CKY) plus the file bridge for plugging in any external continuous
//! parser instead.

mod bridge;
mod cky;
mod grammar;

pub use bridge::{bridge_read, bridge_write};
pub use cky::{cky_parse, viterbi_logprob, ParseStatus};
pub use grammar::{induce_grammar, Grammar, InduceConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CparserError {
    #[error("cannot induce a grammar from an empty corpus")]
    EmptyCorpus,
    #[error("sentence {sentence_id:?} is discontinuous; grammar induction needs continuous trees")]
    DiscontinuousInput { sentence_id: String },
    #[error("sentence {sentence_id:?}: label {label:?} uses a reserved character")]
    ReservedLabel { sentence_id: String, label: String },
    #[error("rules for {label:?} sum to {mass}, expected 1")]
    Normalization { label: String, mass: f64 },
    #[error("grammar text line {line}: {msg}")]
    GrammarText { line: usize, msg: String },
    #[error("bridge file line {line}: {msg}")]
    Bridge { line: usize, msg: String },
}
