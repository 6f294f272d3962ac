#![allow(dead_code)]

use moltok::chem::{
    implicit_hydrogens, parse_smiles, smiles_lines, Atom, BondOrder, BondStereo, Chirality, Element, MolBuilder,
    MolGraph,
};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MOSES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/moses_test_2000.smi");
pub const STEREO: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/stereo_curated.smi");

pub fn load(path: &str) -> Vec<(String, MolGraph)> {
    let text = std::fs::read_to_string(path).unwrap();
    smiles_lines(&text)
        .map(|(line, s)| (s.to_string(), parse_smiles(s).unwrap_or_else(|e| panic!("{path}:{line}: {e}"))))
        .collect()
}

/// Both bundled corpora.
pub fn corpus() -> Vec<(String, MolGraph)> {
    let mut all = load(MOSES);
    all.extend(load(STEREO));
    all
}

pub fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

fn max_valence(e: Element) -> u32 {
    *e.default_valences().last().unwrap() as u32
}

/// Random connected aliphatic molecule: a random tree of up to `max_atoms`
/// atoms, extra ring-closing bonds, multiple bonds where valence allows, and
/// random tetrahedral and double-bond stereo tags.
pub fn random_molecule(seed: u64, max_atoms: usize) -> MolGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let palette = [Element::C, Element::C, Element::C, Element::N, Element::O, Element::S, Element::F, Element::CL];
    let n = rng.random_range(1..=max_atoms);
    let mut elements = vec![Element::C];
    let mut used = vec![0u32];
    let mut bonds: Vec<(usize, usize, BondOrder)> = Vec::new();
    for i in 1..n {
        let e = palette[rng.random_range(0..palette.len())];
        let open: Vec<usize> = (0..i).filter(|&j| used[j] < max_valence(elements[j])).collect();
        let Some(&j) = open.choose(&mut rng) else { break };
        elements.push(e);
        used.push(1);
        used[j] += 1;
        bonds.push((j, i, BondOrder::Single));
    }
    let n = elements.len();
    for _ in 0..rng.random_range(0..=n / 3) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        let exists = bonds.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a));
        if a != b && !exists && used[a] < max_valence(elements[a]) && used[b] < max_valence(elements[b]) {
            used[a] += 1;
            used[b] += 1;
            bonds.push((a, b, BondOrder::Single));
        }
    }
    for k in 0..bonds.len() {
        let (a, b, _) = bonds[k];
        let spare = (max_valence(elements[a]) - used[a]).min(max_valence(elements[b]) - used[b]);
        let extra = if spare == 0 { 0 } else { rng.random_range(0..=spare.min(2)) };
        if extra > 0 && rng.random_bool(0.3) {
            used[a] += extra;
            used[b] += extra;
            bonds[k].2 = if extra == 1 { BondOrder::Double } else { BondOrder::Triple };
        }
    }

    let mut builder = MolBuilder::new();
    for (i, &e) in elements.iter().enumerate() {
        let mut atom = Atom::new(e);
        atom.hydrogens = implicit_hydrogens(e, false, used[i]);
        builder.add_atom(atom);
    }
    let mut ids = Vec::new();
    for &(a, b, o) in &bonds {
        ids.push(builder.add_bond(a, b, o).unwrap());
    }
    let degree = |i: usize| bonds.iter().filter(|&&(a, b, _)| a == i || b == i).count();
    for i in 0..n {
        let h = implicit_hydrogens(elements[i], false, used[i]) as usize;
        let sp3 = bonds.iter().all(|&(a, b, o)| (a != i && b != i) || o == BondOrder::Single);
        if elements[i] == Element::C && sp3 && degree(i) + h == 4 && h <= 1 && rng.random_bool(0.5) {
            builder.atom_mut(i).chirality =
                if rng.random_bool(0.5) { Chirality::TetrahedralCcw } else { Chirality::TetrahedralCw };
        }
    }
    for (k, &(a, b, o)) in bonds.iter().enumerate() {
        if o != BondOrder::Double || !rng.random_bool(0.5) {
            continue;
        }
        let nbr = |x: usize, other: usize| {
            bonds.iter().filter_map(|&(p, q, _)| {
                if p == x && q != other {
                    Some(q)
                } else if q == x && p != other {
                    Some(p)
                } else {
                    None
                }
            }).next()
        };
        if let (Some(ra), Some(rb)) = (nbr(a, b), nbr(b, a)) {
            if ra != rb {
                let stereo = if rng.random_bool(0.5) {
                    BondStereo::E { ref_a: ra, ref_b: rb }
                } else {
                    BondStereo::Z { ref_a: ra, ref_b: rb }
                };
                builder.set_bond_stereo(ids[k], stereo);
            }
        }
    }
    builder.build().unwrap()
}
