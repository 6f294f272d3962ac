//! Tokenize a molecule in both traversal orders and assemble it back.
//!
//! Usage: cargo run --example tokenize_roundtrip -- [SMILES]

use moltok::chem::{canonical_form, molecules_equal, parse_smiles};
use moltok::motif::{detokenize, fragment, tokenize, TraversalOrder};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let smiles = std::env::args().nth(1).unwrap_or_else(|| "CC(=O)Oc1ccccc1C(=O)O".to_string());
    let mol = parse_smiles(&smiles)?;

    let tree = fragment(&mol)?;
    println!("{smiles}: {} atoms, {} motifs", mol.atom_count(), tree.len());
    for edge in tree.edges() {
        println!("  motif {} slot {} -> motif {}", edge.parent, edge.parent_slot, edge.child);
    }

    for order in [TraversalOrder::Dfs, TraversalOrder::Bfs] {
        let seq = tokenize(&mol, order)?;
        let back = detokenize(&seq)?;
        println!("{order}: {}", seq.to_text());
        println!("     -> {} (equal: {})", canonical_form(&back), molecules_equal(&back, &mol));
    }
    Ok(())
}
