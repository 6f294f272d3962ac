//! Span-corrupted masked-LM instances with atom-count importance weights.

use moltok::chem::{parse_smiles, smiles_lines};
use moltok::motif::{tokenize, TraversalOrder};
use moltok::training::{format_instance, importance_weights, span_corrupt, weighted_mlm_loss, ImportanceWeights};
use moltok::vocab::build_vocab;

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/moses_test_2000.smi");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a ring of six atoms next to a single atom
    let w = ImportanceWeights::from_atom_counts(&[6, 1])?;
    println!("weights for atom counts [6, 1]: {:?}", w.as_slice());

    let text = std::fs::read_to_string(CORPUS)?;
    let mols = smiles_lines(&text).map(|(_, s)| parse_smiles(s)).collect::<Result<Vec<_>, _>>()?;
    let vocab = build_vocab(&mols)?;

    for (seed, mol) in mols.iter().take(3).enumerate() {
        let ids = vocab.encode(&tokenize(mol, TraversalOrder::Dfs)?);
        let pair = span_corrupt(&ids, seed as u64, 0.15, 3.0)?;
        let weights = importance_weights(&pair.target_ids, &vocab)?;
        assert_eq!(pair.reconstruct(), ids);
        println!("{}", format_instance(&pair, &weights));

        // with a made-up per-token loss
        let nll: Vec<f64> = (0..pair.target_ids.len()).map(|i| 0.5 + i as f64 * 0.1).collect();
        println!("  weighted loss {:.4}", weighted_mlm_loss(&nll, weights.as_slice())?);
    }
    Ok(())
}
