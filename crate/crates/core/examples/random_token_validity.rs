//! Arbitrary token sequences still assemble into valid molecules.
//!
//! Builds a vocabulary from the bundled corpus, samples random sequences of
//! vocabulary ids, decodes them and checks that every result reparses.

use moltok::chem::{molecules_equal, parse_smiles, smiles_lines, write_smiles};
use moltok::motif::{detokenize_with_report, TraversalOrder};
use moltok::vocab::build_vocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/moses_test_2000.smi");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(CORPUS)?;
    let mols = smiles_lines(&text).map(|(_, s)| parse_smiles(s)).collect::<Result<Vec<_>, _>>()?;
    let vocab = build_vocab(&mols)?;
    let ids: Vec<u32> = vocab.motif_ids().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut reparsed, mut dropped, mut capped) = (0, 0, 0);
    let trials = 1000;
    for i in 0..trials {
        let len = rng.random_range(1..=32);
        let sample: Vec<u32> = (0..len).map(|_| ids[rng.random_range(0..ids.len())]).collect();
        let seq = vocab.decode(&sample, TraversalOrder::Dfs)?;
        let (mol, report) = detokenize_with_report(&seq)?;
        dropped += report.dropped.len();
        capped += report.capped_slots;
        let written = write_smiles(&mol);
        if parse_smiles(&written).is_ok_and(|m| molecules_equal(&m, &mol)) {
            reparsed += 1;
        }
        if i < 3 {
            println!("{} tokens -> {written}", sample.len());
        }
    }
    println!("{reparsed}/{trials} reparsed; {dropped} tokens dropped, {capped} slots capped");
    Ok(())
}
