//! Sequence models of what a document says next.
//!
//! `scriptseq` trains LSTM encoder-decoder models that read a sentence (or
//! its verb-argument events) and predict the successor sentence's tokens or
//! events, then scores the predictions with corpus BLEU and event-level
//! cloze metrics. Everything is f64, from scratch, and deterministic: the
//! analytic backpropagation is checked against a finite-difference oracle,
//! and a seeded run reproduces its loss trace and model file bit for bit.
//!
//! The crate is organized around the pipeline:
//!
//! - [`corpus`]: vocabularies, corpus files, (context, successor) pairs
//! - [`events`]: verb-argument event extraction and (de)serialization
//! - [`numerics`]: the dense f64 substrate and the gradient oracle
//! - [`seqmodel`]: the LSTM encoder-decoder, attention, BPTT, model files
//! - [`training`]: momentum SGD with the windowed damping schedule
//! - [`metrics`]: corpus BLEU and narrative-cloze scores, plus baselines
//! - [`cli`]: the `scriptseq` command-line surface tying it together
//!
//! The `examples/` directory holds one runnable example per capability; see
//! the README for the tour.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod events;
pub mod fsutil;
pub mod metrics;
pub mod numerics;
pub mod seqmodel;
pub mod training;

pub use corpus::{Document, Representation, SentencePair, TokenId, Vocabulary};
pub use error::{Error, Result};
pub use events::{Event, ParsedSentence, PrepPair};
pub use metrics::MetricsReport;
pub use seqmodel::{SeqModel, SequenceKind};
pub use training::TrainConfig;
