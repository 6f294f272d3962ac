//! Motif-level molecule tokenization.
//!
//! Molecules are split into motifs (ring systems and non-single-bond
//! groups, with every other atom standing alone), arranged as a tree, and
//! linearized into a token sequence. Any token sequence decodes back to a
//! valid molecule. Around the tokenizer sit a vocabulary, masked-LM data
//! preparation with atom-count importance weights, generation metrics, and
//! confidence-based selection among candidate generations.

pub mod chem;
pub mod cli;
pub mod ensemble;
pub mod metrics;
pub mod motif;
pub mod training;
pub mod vocab;
