//! Confidence-based selection among candidate generations from different
//! models.
//!
//! A candidate's confidence is the mean log-likelihood of its generated
//! tokens. Invalid molecules are discarded and the most confident remaining
//! candidate wins; ties go to the earliest candidate.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chem::{canonical_form, parse_smiles, MolGraph};
use crate::metrics::{score_pair, FingerprintParams, Generated, MetricsError};
use crate::training::{TokenLogProbs, TrainingError};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("empty input")]
    EmptyInput,
    #[error("no candidate produced a valid molecule")]
    NoValidCandidate,
    #[error("candidate {0} has a valid molecule but no token log-probabilities")]
    MissingLogProbs(String),
    #[error("candidate {model}: {source}")]
    LogProbs {
        model: String,
        #[source]
        source: TrainingError,
    },
    #[error("reference {smiles:?} does not parse: {msg}")]
    Reference { smiles: String, msg: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Mean log-probability over the generated tokens.
pub fn confidence(tlp: &TokenLogProbs) -> Result<f64, EnsembleError> {
    if tlp.is_empty() {
        return Err(EnsembleError::EmptyInput);
    }
    Ok(tlp.as_slice().iter().sum::<f64>() / tlp.len() as f64)
}

#[derive(Debug, Clone)]
pub struct Candidate {
    model: String,
    molecule: Generated,
    logprobs: TokenLogProbs,
}

impl Candidate {
    pub fn new(model: impl Into<String>, molecule: Generated, logprobs: TokenLogProbs) -> Result<Candidate, EnsembleError> {
        let model = model.into();
        if molecule.is_valid() && logprobs.is_empty() {
            return Err(EnsembleError::MissingLogProbs(model));
        }
        Ok(Candidate { model, molecule, logprobs })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn molecule(&self) -> &Generated {
        &self.molecule
    }

    pub fn logprobs(&self) -> &TokenLogProbs {
        &self.logprobs
    }

    pub fn is_valid(&self) -> bool {
        self.molecule.is_valid()
    }

    /// None when no tokens were reported.
    pub fn confidence(&self) -> Option<f64> {
        confidence(&self.logprobs).ok()
    }
}

/// One row of the selection rationale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceRow {
    pub model: String,
    pub valid: bool,
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Index of the winning candidate.
    pub winner: usize,
    pub rows: Vec<ConfidenceRow>,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<3}{:<16}{:<7}{:>12}", "", "model", "valid", "confidence")?;
        for (i, r) in self.rows.iter().enumerate() {
            let mark = if i == self.winner { "*" } else { "" };
            let conf = r.confidence.map_or("-".to_string(), |c| format!("{c:.4}"));
            writeln!(f, "{mark:<3}{:<16}{:<7}{conf:>12}", r.model, r.valid)?;
        }
        Ok(())
    }
}

pub fn select(candidates: &[Candidate]) -> Result<Selection, EnsembleError> {
    let rows: Vec<ConfidenceRow> = candidates
        .iter()
        .map(|c| ConfidenceRow { model: c.model.clone(), valid: c.is_valid(), confidence: c.confidence() })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        let (true, Some(c)) = (r.valid, r.confidence) else { continue };
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((i, c));
        }
    }
    let (winner, _) = best.ok_or(EnsembleError::NoValidCandidate)?;
    Ok(Selection { winner, rows })
}

/// One line of ensemble input.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct EnsembleRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct CandidateRecord {
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smiles: Option<String>,
    /// Overrides parsing when false.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<bool>,
    #[serde(default)]
    pub logprobs: Vec<f64>,
}

impl CandidateRecord {
    /// Invalid when the SMILES is missing, does not parse, or `valid` is false.
    pub fn to_candidate(&self) -> Result<Candidate, EnsembleError> {
        let molecule = match (&self.smiles, self.valid) {
            (_, Some(false)) | (None, _) => Generated::Invalid,
            (Some(s), _) => parse_smiles(s).map_or(Generated::Invalid, Generated::Valid),
        };
        let logprobs = TokenLogProbs::new(self.logprobs.clone())
            .map_err(|source| EnsembleError::LogProbs { model: self.model.clone(), source })?;
        Candidate::new(self.model.clone(), molecule, logprobs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Winner {
    pub model: String,
    pub smiles: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub model: String,
    pub exact: bool,
    pub morgan: f64,
    pub path: f64,
}

/// One line of ensemble output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleOutput {
    pub id: String,
    pub winner: Winner,
    pub confidences: Vec<ConfidenceRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<CandidateScore>>,
}

/// Selects the winner of one record and, when a reference is present,
/// scores every candidate against it.
pub fn process_record(record: &EnsembleRecord, params: FingerprintParams) -> Result<EnsembleOutput, EnsembleError> {
    let candidates = record.candidates.iter().map(|c| c.to_candidate()).collect::<Result<Vec<_>, _>>()?;
    let selection = select(&candidates)?;
    let best = &candidates[selection.winner];
    let mol: &MolGraph = best.molecule().molecule().expect("winner is valid");
    let winner = Winner {
        model: best.model.clone(),
        smiles: canonical_form(mol),
        confidence: selection.rows[selection.winner].confidence.expect("winner has a confidence"),
    };
    let scores = match &record.reference {
        None => None,
        Some(r) => {
            let reference = parse_smiles(r).map_err(|e| EnsembleError::Reference { smiles: r.clone(), msg: e.to_string() })?;
            let scores = candidates
                .iter()
                .map(|c| {
                    let s = score_pair(c.molecule(), &reference, params)?;
                    Ok(CandidateScore { model: c.model.clone(), exact: s.exact, morgan: s.morgan, path: s.path })
                })
                .collect::<Result<Vec<_>, EnsembleError>>()?;
            Some(scores)
        }
    };
    Ok(EnsembleOutput { id: record.id.clone(), winner, confidences: selection.rows, scores })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::sequence_ce;
    use proptest::prelude::*;

    fn cand(model: &str, valid: bool, lp: &[f64]) -> Candidate {
        let mol = if valid { Generated::Valid(parse_smiles("CCO").unwrap()) } else { Generated::Invalid };
        Candidate::new(model, mol, TokenLogProbs::new(lp.to_vec()).unwrap()).unwrap()
    }

    fn winner_model(c: &[Candidate]) -> String {
        c[select(c).unwrap().winner].model().to_string()
    }

    #[test]
    fn confidence_examples() {
        let c = confidence(&TokenLogProbs::new(vec![-0.1, -0.3]).unwrap()).unwrap();
        assert!((c + 0.2).abs() < 1e-15);
        assert_eq!(confidence(&TokenLogProbs::new(vec![0.0, 0.0]).unwrap()).unwrap(), 0.0);
        assert!(matches!(confidence(&TokenLogProbs::new(vec![]).unwrap()), Err(EnsembleError::EmptyInput)));
    }

    #[test]
    fn selection_examples() {
        let c = [cand("A", true, &[-0.2]), cand("B", true, &[-0.1, -0.2]), cand("C", true, &[-0.3])];
        assert_eq!(winner_model(&c), "B");
        let c = [cand("A", false, &[-0.05]), cand("B", true, &[-0.2])];
        assert_eq!(winner_model(&c), "B");
        assert_eq!(winner_model(&[cand("only", true, &[-3.0])]), "only");
        let c = [cand("first", true, &[-0.5]), cand("second", true, &[-0.5])];
        assert_eq!(winner_model(&c), "first");
        assert!(matches!(select(&[cand("A", false, &[-0.1])]), Err(EnsembleError::NoValidCandidate)));
        assert!(matches!(select(&[]), Err(EnsembleError::NoValidCandidate)));
    }

    #[test]
    fn valid_molecule_needs_logprobs() {
        let r = Candidate::new("A", Generated::Valid(parse_smiles("C").unwrap()), TokenLogProbs::new(vec![]).unwrap());
        assert!(matches!(r, Err(EnsembleError::MissingLogProbs(_))));
        assert!(Candidate::new("A", Generated::Invalid, TokenLogProbs::new(vec![]).unwrap()).is_ok());
    }

    #[test]
    fn json_record_round() {
        let line = r#"{"id":"d1","reference":"CCO","candidates":[
            {"model":"A","smiles":"CCO","logprobs":[-0.2]},
            {"model":"B","smiles":"OCC","logprobs":[-0.1,-0.2]},
            {"model":"C","smiles":"C(","logprobs":[-0.01]},
            {"model":"D","smiles":"CC","valid":false,"logprobs":[-0.01]},
            {"model":"E","smiles":"CCN","logprobs":[-0.3]}]}"#;
        let rec: EnsembleRecord = serde_json::from_str(line).unwrap();
        let out = process_record(&rec, FingerprintParams::default()).unwrap();
        assert_eq!(out.winner.model, "B");
        assert_eq!(out.winner.smiles, canonical_form(&parse_smiles("CCO").unwrap()));
        assert!(!out.confidences[2].valid && !out.confidences[3].valid);
        let scores = out.scores.as_ref().unwrap();
        assert!(scores[0].exact && scores[1].exact && !scores[2].exact && !scores[4].exact);
        assert_eq!(scores[2].morgan, 0.0);
        let json = serde_json::to_string(&out).unwrap();
        assert!(json.starts_with(r#"{"id":"d1","winner":{"model":"B""#), "{json}");

        let bad: EnsembleRecord =
            serde_json::from_str(r#"{"id":"x","candidates":[{"model":"A","smiles":"C","logprobs":[0.5]}]}"#).unwrap();
        assert!(matches!(process_record(&bad, FingerprintParams::default()), Err(EnsembleError::LogProbs { .. })));
    }

    #[test]
    fn selection_table_marks_winner() {
        let c = [cand("A", true, &[-0.2]), cand("B", false, &[])];
        let table = select(&c).unwrap().to_string();
        assert!(table.lines().nth(1).unwrap().starts_with('*'));
        assert!(table.lines().nth(2).unwrap().trim_end().ends_with('-'));
    }

    fn arb_candidates() -> impl Strategy<Value = Vec<(bool, Vec<f64>)>> {
        prop::collection::vec((any::<bool>(), prop::collection::vec(-5.0f64..=0.0, 1..6)), 1..8)
    }

    fn build(cases: &[(bool, Vec<f64>)]) -> Vec<Candidate> {
        cases.iter().enumerate().map(|(i, (v, lp))| cand(&format!("m{i}"), *v, lp)).collect()
    }

    proptest! {
        #[test]
        fn confidence_is_negated_cross_entropy(lp in prop::collection::vec(-20.0f64..=0.0, 1..50)) {
            let t = TokenLogProbs::new(lp).unwrap();
            prop_assert!((confidence(&t).unwrap() + sequence_ce(&t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn winner_dominates_valid_candidates(cases in arb_candidates()) {
            let c = build(&cases);
            match select(&c) {
                Ok(s) => {
                    let best = c[s.winner].confidence().unwrap();
                    prop_assert!(c[s.winner].is_valid());
                    for x in c.iter().filter(|x| x.is_valid()) {
                        prop_assert!(best >= x.confidence().unwrap());
                    }
                }
                Err(_) => prop_assert!(c.iter().all(|x| !x.is_valid())),
            }
        }

        #[test]
        fn invalid_additions_do_not_change_winner(cases in arb_candidates(), extra in prop::collection::vec(-1.0f64..=0.0, 1..4), at in 0usize..8) {
            let mut c = build(&cases);
            if let Ok(s) = select(&c) {
                let name = c[s.winner].model().to_string();
                c.insert(at.min(c.len()), cand("invalid", false, &extra));
                prop_assert_eq!(winner_model(&c), name);
            }
        }

        #[test]
        fn permutation_invariant_for_distinct_confidences(cases in arb_candidates(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let c = build(&cases);
            let mut confs: Vec<f64> = c.iter().filter_map(|x| x.confidence()).collect();
            confs.sort_by(f64::total_cmp);
            confs.dedup();
            prop_assume!(confs.len() == c.len());
            if let Ok(s) = select(&c) {
                let name = c[s.winner].model().to_string();
                let mut shuffled = c.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
                prop_assert_eq!(winner_model(&shuffled), name);
            }
        }

        #[test]
        fn selected_set_dominates_each_member(sets in prop::collection::vec(prop::collection::vec(prop::collection::vec(-5.0f64..=0.0, 1..5), 3), 1..20)) {
            // every member valid on every description
            let chosen: Vec<f64> = sets.iter().map(|lps| {
                let c: Vec<Candidate> = lps.iter().enumerate().map(|(i, lp)| cand(&format!("m{i}"), true, lp)).collect();
                c[select(&c).unwrap().winner].confidence().unwrap()
            }).collect();
            let mean_sel = chosen.iter().sum::<f64>() / chosen.len() as f64;
            for m in 0..3 {
                let member: f64 = sets.iter().map(|lps| lps[m].iter().sum::<f64>() / lps[m].len() as f64).sum::<f64>() / sets.len() as f64;
                prop_assert!(mean_sel >= member - 1e-12);
            }
        }
    }
}
