//! Learning the arrangement function: a BiLSTM-CNN encoder, a stepwise
//! LSTM decoder with biaffine attention over the remaining positions, and
//! a jointly trained binary relocation labeller.

mod checkpoint;
mod decode;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod tensor;
mod train;
mod vocab;

pub use checkpoint::{load, save};
pub use decode::{decode, decode_traced, DecodeMode, StepTrace};
pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::{loss_and_grads, LossBreakdown, LossOpts, TrainItem};
pub use model::{EncoderStates, ModelConfig, PointerModel};
pub use tensor::GradStore;
pub use train::{
    gold_arrangements, predict, train, BestTracker, EpochStats, TrainConfig, TrainOutcome,
};
pub use vocab::{Vocab, VocabData, PAD_ID, UNK_ID};

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PointerError {
    #[error("bad model configuration: {0}")]
    Config(String),
    #[error("external vectors: {0}")]
    ExternalVector(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("training requires non-empty corpora")]
    EmptyCorpus,
}

/// Fixed per-token vectors loaded from a sidecar file: one line per token,
/// `sentence_id TAB index TAB v_1 ... v_d`.
#[derive(Debug, Clone)]
pub struct ExternalVectors {
    dim: usize,
    map: HashMap<(String, usize), Vec<f64>>,
}

impl ExternalVectors {
    pub fn parse(text: &str) -> Result<Self, PointerError> {
        let mut dim = None;
        let mut map = HashMap::new();
        for (lineno0, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |msg: String| {
                PointerError::ExternalVector(format!("line {}: {}", lineno0 + 1, msg))
            };
            let mut fields = line.split('\t');
            let id = fields
                .next()
                .ok_or_else(|| err("missing sentence id".into()))?;
            let index: usize = fields
                .next()
                .ok_or_else(|| err("missing token index".into()))?
                .parse()
                .map_err(|_| err("bad token index".into()))?;
            let values = fields
                .next()
                .ok_or_else(|| err("missing vector values".into()))?;
            let vector: Vec<f64> = values
                .split_whitespace()
                .map(|v| v.parse::<f64>().map_err(|_| err(format!("bad value {v:?}"))))
                .collect::<Result<_, _>>()?;
            if vector.is_empty() {
                return Err(err("empty vector".into()));
            }
            match dim {
                None => dim = Some(vector.len()),
                Some(d) if d != vector.len() => {
                    return Err(err(format!(
                        "vector has dimension {}, expected {d}",
                        vector.len()
                    )))
                }
                _ => {}
            }
            map.insert((id.to_string(), index), vector);
        }
        Ok(ExternalVectors {
            dim: dim.unwrap_or(0),
            map,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The vectors for one sentence, errors naming the first missing token.
    pub fn for_sentence(&self, id: &str, n: usize) -> Result<Vec<Vec<f64>>, PointerError> {
        (0..n)
            .map(|index| {
                self.map
                    .get(&(id.to_string(), index))
                    .cloned()
                    .ok_or_else(|| {
                        PointerError::ExternalVector(format!(
                            "no vector for sentence {id:?}, token {index}"
                        ))
                    })
            })
            .collect()
    }
}
