//! Linear-chain CRF tagger: features, inference, training and evaluation.

mod data;
mod eval;
mod features;
mod inference;
mod model;
mod train;

pub use data::{load_tsv, parse_tsv, split_train_test, write_tsv};
pub use eval::{evaluate, evaluate_predictions, EvalReport, EvalScheme, LabelScore};
pub use features::{extract_features, FeatureTemplateSet, Template};
pub use inference::{ChainPotentials, ForwardBackward};
pub use model::{log_partition, marginals, sequence_score, tag, viterbi, CrfModel};
pub use train::{nll_and_gradient, train_crf, train_crf_with_report, CrfTrainConfig, TrainReport};

use crate::error::{Error, Result};

/// A token sequence with one label per token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSequence {
    pub tokens: Vec<String>,
    pub labels: Vec<String>,
}

impl LabeledSequence {
    pub fn new(tokens: Vec<String>, labels: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::Usage("empty labeled sequence".into()));
        }
        if tokens.len() != labels.len() {
            return Err(Error::Usage(format!(
                "{} tokens but {} labels",
                tokens.len(),
                labels.len()
            )));
        }
        Ok(LabeledSequence { tokens, labels })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
