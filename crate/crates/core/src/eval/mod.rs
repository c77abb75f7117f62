//! Greedy decoding, chrF, paired bootstrap and direction-matrix reports.

mod bootstrap;
mod chrf;
mod decode;
mod matrix;

pub use bootstrap::{bootstrap_indices, paired_bootstrap};
pub use chrf::{chrf, chrf_from_stats, chrf_stats, corpus_chrf, ChrfConfig, ChrfStats};
pub use decode::{greedy_decode, ModelTranslator, Translator};
pub use matrix::{
    evaluate_matrix, parse_scores_tsv, render_symbols, score_outputs, summarize, DirectionOutputs, DirectionScore,
    MatrixReport, MatrixSummary,
};
