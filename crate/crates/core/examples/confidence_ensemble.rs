//! Pick the most confident valid generation among several models.

use moltok::chem::parse_smiles;
use moltok::ensemble::{process_record, select, Candidate, EnsembleRecord};
use moltok::metrics::{FingerprintParams, Generated};
use moltok::training::TokenLogProbs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let candidates = vec![
        Candidate::new("A", Generated::Valid(parse_smiles("CCO")?), TokenLogProbs::new(vec![-0.1, -0.3])?)?,
        Candidate::new("B", Generated::Valid(parse_smiles("CCN")?), TokenLogProbs::new(vec![-0.15])?)?,
        Candidate::new("C", Generated::Invalid, TokenLogProbs::new(vec![-0.01])?)?,
    ];
    let selection = select(&candidates)?;
    print!("{selection}");
    println!("winner: {}", candidates[selection.winner].model());

    let line = r#"{"id":"q1","reference":"CCO","candidates":[
        {"model":"smiles-model","smiles":"C1CC","logprobs":[-0.02,-0.04]},
        {"model":"motif-model","smiles":"OCC","logprobs":[-0.3,-0.1]}]}"#;
    let record: EnsembleRecord = serde_json::from_str(line)?;
    let out = process_record(&record, FingerprintParams::default())?;
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
