//! Dictionary-pivoted curation of parallel corpora.
//!
//! The pipeline filters a corpus, retrieves a sense-balanced subset with a
//! bilingual lexicon as pivot, asks a chat model for demonstrations of the
//! senses the corpus never covers, and writes instruction-tuning records.

pub mod augment;
pub mod cli;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod filter;
pub mod lexicon;
pub mod manifest;
pub mod matcher;
pub mod sft;
pub mod stats;
pub mod text;

pub use corpus_io::{Corpus, SentencePair};
pub use error::{Error, Result};
pub use lexicon::{Lexicon, SensePair};
pub use matcher::{retrieve, CoverageReport, MatchRecord, Retrieval};
