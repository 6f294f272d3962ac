//! Parse SMILES, write canonical forms, and compare molecules.

use moltok::chem::{canonical_form, molecules_equal, parse_smiles, perceive_rings};

fn main() -> Result<(), moltok::chem::SmilesError> {
    let spellings = ["OCC", "C(O)C", "[CH3][CH2][OH]"];
    for s in spellings {
        let mol = parse_smiles(s)?;
        println!("{s:<16} -> {}", canonical_form(&mol));
    }

    let alanine = parse_smiles("N[C@@H](C)C(=O)O")?;
    let mirror = parse_smiles("N[C@H](C)C(=O)O")?;
    println!("alanine: {}", canonical_form(&alanine));
    println!("enantiomers equal: {}", molecules_equal(&alanine, &mirror));

    let naphthol = parse_smiles("Oc1ccc2ccccc2c1")?;
    let rings = perceive_rings(&naphthol);
    let ring_atoms = (0..naphthol.atom_count()).filter(|&i| rings.is_ring_atom(i)).count();
    println!("naphthol: {} atoms, {ring_atoms} in rings", naphthol.atom_count());
    Ok(())
}
