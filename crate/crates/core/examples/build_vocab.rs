//! Build a motif vocabulary, save it, and encode a molecule with it.

use moltok::chem::{parse_smiles, smiles_lines};
use moltok::motif::{tokenize, TraversalOrder};
use moltok::vocab::{build_vocab, Vocabulary};

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/moses_test_2000.smi");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(CORPUS)?;
    let mols = smiles_lines(&text).map(|(_, s)| parse_smiles(s)).collect::<Result<Vec<_>, _>>()?;
    let vocab = build_vocab(&mols)?;
    println!("{} molecules -> {} motifs ({} ids with specials)", mols.len(), vocab.motif_count(), vocab.len());

    for id in vocab.motif_ids().take(5) {
        println!("  {id:>4} {:>2} atoms  {}", vocab.atom_count(id)?, vocab.token_text(id).unwrap_or_default());
    }

    let path = std::env::temp_dir().join("moltok-example.vocab");
    vocab.save(&path)?;
    let reloaded = Vocabulary::load(&path)?;
    let same = reloaded.len() == vocab.len() && vocab.motif_ids().all(|id| reloaded.token_text(id) == vocab.token_text(id));
    println!("saved to {} and reloaded unchanged: {same}", path.display());

    let seq = tokenize(&parse_smiles("CCOc1ccccc1")?, TraversalOrder::Dfs)?;
    println!("CCOc1ccccc1 -> {:?}", vocab.encode(&seq));
    Ok(())
}
