//! Synthetic languages, tagging, rebalancing, direction filtering and
//! corpus files.

mod corpus;
mod directions;
mod language;
mod sampling;
pub mod vocab;

pub use corpus::{generate_corpus, Corpus, CorpusSpec, GeneratedCorpus};
pub use directions::{all_directions, direction_filter, Direction, DirectionMode, DirectionSplit};
pub use language::{generate_pair, make_language, symbol_ids, tag_source, ExamplePair, Reorder, SyntheticLanguage};
pub use sampling::temperature_sample;
pub use vocab::{Vocab, BOS, EOS, PAD};
