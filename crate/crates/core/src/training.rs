//! Masked-LM training data over motif ids: importance weights from motif
//! atom counts, span corruption, and the two training losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use thiserror::Error;

use crate::vocab::{VocabError, Vocabulary, SENTINEL_COUNT};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {0} losses but {1} weights")]
    LengthMismatch(usize, usize),
    #[error("invalid value: {0}")]
    InvalidValue(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
}

/// Per-position weights summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceWeights(Vec<f64>);

impl ImportanceWeights {
    /// Softmax of `ln(A + 1)` over the positions, which reduces to
    /// `(A_i + 1) / Σ (A_j + 1)`.
    pub fn from_atom_counts(counts: &[usize]) -> Result<ImportanceWeights, TrainingError> {
        if counts.is_empty() {
            return Err(TrainingError::EmptyInput);
        }
        let total: f64 = counts.iter().map(|&a| a as f64 + 1.0).sum();
        Ok(ImportanceWeights(counts.iter().map(|&a| (a as f64 + 1.0) / total).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Weights at the given positions, not renormalized.
    pub fn restrict(&self, positions: &[usize]) -> Vec<f64> {
        positions.iter().map(|&p| self.0[p]).collect()
    }
}

/// Importance weights of a token id sequence; specials count as 0 atoms.
pub fn importance_weights(ids: &[u32], vocab: &Vocabulary) -> Result<ImportanceWeights, TrainingError> {
    let counts = ids
        .iter()
        .map(|&id| vocab.atom_count(id))
        .collect::<Result<Vec<_>, _>>()?;
    ImportanceWeights::from_atom_counts(&counts)
}

/// A span-corrupted training instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorruptedPair {
    /// Original ids with each masked span replaced by one sentinel.
    pub input_ids: Vec<u32>,
    /// Each sentinel followed by the span it replaced.
    pub target_ids: Vec<u32>,
    /// `(start, length)` of each masked span in the original sequence.
    pub spans: Vec<(usize, usize)>,
}

impl CorruptedPair {
    /// Splices the target spans back into the input.
    pub fn reconstruct(&self) -> Vec<u32> {
        let mut out = Vec::new();
        let mut input = self.input_ids.iter().copied();
        let mut t = 0;
        for &(start, len) in &self.spans {
            while out.len() < start {
                out.extend(input.next());
            }
            input.next(); // sentinel
            out.extend_from_slice(&self.target_ids[t + 1..t + 1 + len]);
            t += len + 1;
        }
        out.extend(input);
        out
    }
}

/// Masks roughly `rate` of the positions in spans with geometric lengths of
/// mean `mean_span`. At least one position is always masked, and at least
/// one is kept when the sequence has more than one token. Deterministic for
/// a given seed.
pub fn span_corrupt(ids: &[u32], seed: u64, rate: f64, mean_span: f64) -> Result<CorruptedPair, TrainingError> {
    if ids.is_empty() {
        return Err(TrainingError::EmptyInput);
    }
    if !(rate > 0.0 && rate < 1.0) {
        return Err(TrainingError::InvalidValue(format!("corruption rate {rate} must lie in (0, 1)")));
    }
    if !(mean_span >= 1.0 && mean_span.is_finite()) {
        return Err(TrainingError::InvalidValue(format!("mean span {mean_span} must be at least 1")));
    }
    let n = ids.len();
    let masked = ((n as f64 * rate).round() as usize).clamp(1, (n - 1).max(1));
    let kept = n - masked;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let geometric = Geometric::new(1.0 / mean_span).expect("probability in (0, 1]");
    let mut lengths = Vec::new();
    let mut total = 0;
    while total < masked {
        let len = (1 + geometric.sample(&mut rng) as usize).min(masked - total);
        lengths.push(len);
        total += len;
    }
    // spans need a kept token between them and one sentinel each
    let max_spans = (kept + 1).min(SENTINEL_COUNT as usize);
    while lengths.len() > max_spans {
        let last = lengths.pop().unwrap();
        *lengths.last_mut().unwrap() += last;
    }

    // kept tokens go into the gaps before, between and after the spans;
    // inner gaps need at least one
    let s = lengths.len();
    let mut gaps = vec![0usize; s + 1];
    for g in gaps.iter_mut().take(s).skip(1) {
        *g = 1;
    }
    for _ in 0..kept - (s - 1) {
        gaps[rng.random_range(0..=s)] += 1;
    }

    let mut input_ids = Vec::with_capacity(kept + s);
    let mut target_ids = Vec::with_capacity(masked + s);
    let mut spans = Vec::with_capacity(s);
    let mut pos = 0;
    for (k, &len) in lengths.iter().enumerate() {
        input_ids.extend_from_slice(&ids[pos..pos + gaps[k]]);
        pos += gaps[k];
        let sentinel = crate::vocab::sentinel_id(k as u32);
        input_ids.push(sentinel);
        target_ids.push(sentinel);
        target_ids.extend_from_slice(&ids[pos..pos + len]);
        spans.push((pos, len));
        pos += len;
    }
    input_ids.extend_from_slice(&ids[pos..]);
    debug_assert_eq!(pos + gaps[s], n);
    Ok(CorruptedPair { input_ids, target_ids, spans })
}

/// `Σ w_i · nll_i` with the weights renormalized to sum to 1.
pub fn weighted_mlm_loss(nll: &[f64], weights: &[f64]) -> Result<f64, TrainingError> {
    if nll.len() != weights.len() {
        return Err(TrainingError::LengthMismatch(nll.len(), weights.len()));
    }
    if nll.is_empty() {
        return Err(TrainingError::EmptyInput);
    }
    if let Some(v) = nll.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(TrainingError::InvalidValue(format!("loss {v} must be finite and non-negative")));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(TrainingError::InvalidValue(format!("weight {w} must be finite and non-negative")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(TrainingError::InvalidValue("weights sum to zero".into()));
    }
    Ok(nll.iter().zip(weights).map(|(l, w)| l * w).sum::<f64>() / total)
}

/// Natural-log probabilities a model assigned to the tokens it generated.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLogProbs(Vec<f64>);

impl TokenLogProbs {
    pub fn new(values: Vec<f64>) -> Result<TokenLogProbs, TrainingError> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v <= 0.0)) {
            return Err(TrainingError::InvalidValue(format!("log-probability {v} must be finite and at most 0")));
        }
        Ok(TokenLogProbs(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mean negative log-likelihood over the generated tokens.
pub fn sequence_ce(tlp: &TokenLogProbs) -> Result<f64, TrainingError> {
    if tlp.is_empty() {
        return Err(TrainingError::EmptyInput);
    }
    Ok(-tlp.0.iter().sum::<f64>() / tlp.len() as f64)
}

/// One line of the training-instance dump: input ids, target ids and the
/// target's importance weights, tab-separated, values space-separated.
pub fn format_instance(pair: &CorruptedPair, weights: &ImportanceWeights) -> String {
    let join_ids = |ids: &[u32]| ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
    let w = weights.as_slice().iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
    format!("{}\t{}\t{}", join_ids(&pair.input_ids), join_ids(&pair.target_ids), w)
}
