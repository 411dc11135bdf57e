//! Bengali text processing: normalization and lexicon filters,
//! tokenization, unigram subword segmentation, skip-gram embeddings and a
//! linear-chain CRF tagger.

pub mod crf;
pub mod embed;
pub mod error;
pub mod optim;
pub mod subword;
pub mod text;
pub mod tokenize;

pub use error::{Error, Result};
pub use text::{load_lexicon, nfc, CorpusStats, Lexicon, LexiconKind};
pub use tokenize::{basic_tokenize, sentence_tokenize};
