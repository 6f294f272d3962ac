//! Score generated molecules against references.

use moltok::chem::parse_smiles;
use moltok::metrics::{evaluate, morgan_fingerprint, path_fingerprint, tanimoto, Generated};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = parse_smiles("CC(=O)Oc1ccccc1C(=O)O")?;
    let b = parse_smiles("OC(=O)c1ccccc1O")?;
    let (ma, mb) = (morgan_fingerprint(&a, 2, 2048)?, morgan_fingerprint(&b, 2, 2048)?);
    let (pa, pb) = (path_fingerprint(&a, 7, 2048)?, path_fingerprint(&b, 7, 2048)?);
    println!("aspirin vs salicylic acid: morgan {:.3}, path {:.3}", tanimoto(&ma, &mb)?, tanimoto(&pa, &pb)?);

    let rows = [("CCO", "OCC"), ("c1ccccc1", "c1ccccc1"), ("CC(=O)O", "CC(=O)OC"), ("CCN", "INVALID")];
    let pairs = rows
        .iter()
        .map(|&(r, g)| {
            let generated = parse_smiles(g).map_or(Generated::Invalid, Generated::Valid);
            Ok((generated, parse_smiles(r)?))
        })
        .collect::<Result<Vec<_>, moltok::chem::SmilesError>>()?;
    println!("{}", evaluate(&pairs)?);
    Ok(())
}
