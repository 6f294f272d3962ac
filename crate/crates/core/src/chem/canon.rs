//! Canonical labeling by iterative neighborhood refinement with
//! individualization over tied cells.
//!
//! Every tie left after refinement is explored, and the labeling whose
//! certificate is lexicographically smallest wins. Leaves that reproduce
//! the current best certificate expose automorphisms, which prune sibling
//! branches in the same orbit.

use super::graph::{permutation_parity, BondStereo, Chirality, MolGraph, NbrRef};
use super::write::write_ranked;

/// Canonical labels: `labels[atom]` is the atom's canonical position.
pub fn canonical_labels(mol: &MolGraph) -> Vec<usize> {
    Search::new(mol).run().1
}

/// Canonical string for `mol`: two molecules get the same string iff they
/// are isomorphic as attributed graphs, stereo included.
///
/// The string is a canonical SMILES. When a double-bond configuration cannot
/// be expressed with directional bonds, an explicit `|E:..;Z:..|` block
/// follows the SMILES.
pub fn canonical_form(mol: &MolGraph) -> String {
    let labels = canonical_labels(mol);
    write_ranked(mol, &labels).into_string(mol)
}

pub fn molecules_equal(a: &MolGraph, b: &MolGraph) -> bool {
    if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
        return false;
    }
    Search::new(a).run().0 == Search::new(b).run().0
}

fn chirality_code(c: Chirality) -> i64 {
    match c {
        Chirality::None => 0,
        Chirality::TetrahedralCcw => 1,
        Chirality::TetrahedralCw => 2,
    }
}

/// Complete encoding of the molecule under a labeling.
fn certificate(mol: &MolGraph, labels: &[usize]) -> Vec<i64> {
    let n = mol.atom_count();
    let mut inverse = vec![0usize; n];
    for (atom, &l) in labels.iter().enumerate() {
        inverse[l] = atom;
    }
    let mut cert = Vec::with_capacity(8 * n + 4 * mol.bond_count() + 2);
    cert.push(n as i64);
    for &atom in &inverse {
        let a = mol.atom(atom);
        let chir = if a.chirality == Chirality::None {
            0
        } else {
            let mut canonical = Vec::with_capacity(mol.degree(atom) + 1);
            if a.hydrogens > 0 {
                canonical.push(NbrRef::ImplicitH);
            }
            let mut nbrs: Vec<usize> = mol.neighbors(atom).iter().map(|&(nb, _)| nb).collect();
            nbrs.sort_by_key(|&nb| labels[nb]);
            canonical.extend(nbrs.into_iter().map(NbrRef::Atom));
            let odd = permutation_parity(&mol.neighbor_order(atom), &canonical).expect("same neighbors");
            chirality_code(a.chirality.flipped_if(odd))
        };
        cert.extend_from_slice(&[
            a.element.atomic_number() as i64,
            a.isotope.map_or(0, |v| v as i64 + 1),
            a.charge as i64,
            a.hydrogens as i64,
            a.aromatic as i64,
            a.map.map_or(0, |v| v as i64 + 1),
            chir,
        ]);
    }
    let mut edges: Vec<[i64; 4]> = mol
        .bonds()
        .iter()
        .map(|b| {
            let (la, lb) = (labels[b.a], labels[b.b]);
            let stereo = match b.stereo.refs() {
                None => 0,
                Some((ra, rb)) => {
                    let lowest = |end: usize, other: usize| {
                        mol.neighbors(end)
                            .iter()
                            .map(|&(nb, _)| nb)
                            .filter(|&nb| nb != other)
                            .min_by_key(|&nb| labels[nb])
                            .unwrap()
                    };
                    let trans = b.stereo.is_trans().unwrap() ^ (lowest(b.a, b.b) != ra) ^ (lowest(b.b, b.a) != rb);
                    if trans {
                        1
                    } else {
                        2
                    }
                }
            };
            [la.min(lb) as i64, la.max(lb) as i64, b.order.code() as i64, stereo]
        })
        .collect();
    edges.sort_unstable();
    cert.push(edges.len() as i64);
    for e in edges {
        cert.extend_from_slice(&e);
    }
    cert
}

struct Search<'a> {
    mol: &'a MolGraph,
    /// Per atom: sorted `(bond code, neighbor)` list, codes folded with stereo presence.
    nbrs: Vec<Vec<(u8, usize)>>,
    best: Option<(Vec<i64>, Vec<usize>)>,
    first: Option<(Vec<i64>, Vec<usize>)>,
    automorphisms: Vec<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(mol: &'a MolGraph) -> Search<'a> {
        let nbrs = (0..mol.atom_count())
            .map(|u| {
                mol.neighbors(u)
                    .iter()
                    .map(|&(v, e)| {
                        let b = mol.bond(e);
                        let code = b.order.code() * 2 + u8::from(b.stereo != BondStereo::None);
                        (code, v)
                    })
                    .collect()
            })
            .collect();
        Search { mol, nbrs, best: None, first: None, automorphisms: Vec::new() }
    }

    fn run(mut self) -> (Vec<i64>, Vec<usize>) {
        let initial = self.initial_ranks();
        let mut prefix = Vec::new();
        self.descend(initial, &mut prefix);
        self.best.expect("search reaches at least one leaf")
    }

    fn initial_ranks(&self) -> Vec<usize> {
        let keys: Vec<[i64; 8]> = (0..self.mol.atom_count())
            .map(|i| {
                let a = self.mol.atom(i);
                [
                    a.element.atomic_number() as i64,
                    a.isotope.map_or(0, |v| v as i64 + 1),
                    a.charge as i64,
                    a.hydrogens as i64,
                    a.aromatic as i64,
                    a.map.map_or(0, |v| v as i64 + 1),
                    (a.chirality != Chirality::None) as i64,
                    self.mol.degree(i) as i64,
                ]
            })
            .collect();
        dense_ranks(&keys)
    }

    /// Refines ranks until the partition is equitable.
    fn refine(&self, mut ranks: Vec<usize>) -> Vec<usize> {
        let mut classes = count_classes(&ranks);
        loop {
            let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..ranks.len())
                .map(|u| {
                    let mut sig: Vec<(u8, usize)> = self.nbrs[u].iter().map(|&(c, v)| (c, ranks[v])).collect();
                    sig.sort_unstable();
                    (ranks[u], sig)
                })
                .collect();
            ranks = dense_ranks(&keys);
            let now = count_classes(&ranks);
            if now == classes {
                return ranks;
            }
            classes = now;
        }
    }

    fn descend(&mut self, ranks: Vec<usize>, prefix: &mut Vec<usize>) {
        let ranks = self.refine(ranks);
        let n = ranks.len();
        if count_classes(&ranks) == n {
            self.leaf(ranks);
            return;
        }
        let mut sizes = vec![0usize; n];
        for &r in &ranks {
            sizes[r] += 1;
        }
        let target = (0..n).find(|&r| sizes[r] > 1).expect("some tied cell");
        let cell: Vec<usize> = (0..n).filter(|&v| ranks[v] == target).collect();
        let mut explored: Vec<usize> = Vec::new();
        for &v in &cell {
            if !explored.is_empty() && self.same_orbit(v, &explored, prefix) {
                continue;
            }
            explored.push(v);
            let individualized: Vec<usize> = ranks
                .iter()
                .enumerate()
                .map(|(u, &r)| if r == target && u != v { 2 * r + 1 } else { 2 * r })
                .collect();
            prefix.push(v);
            self.descend(individualized, prefix);
            prefix.pop();
        }
    }

    /// Whether `v` shares an orbit with an explored vertex under the known
    /// automorphisms that fix the current prefix pointwise.
    fn same_orbit(&self, v: usize, explored: &[usize], prefix: &[usize]) -> bool {
        let n = self.mol.atom_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for gamma in &self.automorphisms {
            if prefix.iter().any(|&p| gamma[p] != p) {
                continue;
            }
            for (x, &y) in gamma.iter().enumerate() {
                let (rx, ry) = (find(&mut parent, x), find(&mut parent, y));
                if rx != ry {
                    parent[rx] = ry;
                }
            }
        }
        let rv = find(&mut parent, v);
        explored.iter().any(|&u| find(&mut parent, u) == rv)
    }

    fn leaf(&mut self, labels: Vec<usize>) {
        let cert = certificate(self.mol, &labels);
        if let Some((first_cert, first_labels)) = &self.first {
            if *first_cert == cert {
                let gamma = automorphism(first_labels, &labels);
                self.automorphisms.push(gamma);
            }
        } else {
            self.first = Some((cert.clone(), labels.clone()));
        }
        match &self.best {
            Some((best_cert, best_labels)) if *best_cert == cert => {
                let gamma = automorphism(best_labels, &labels);
                self.automorphisms.push(gamma);
            }
            Some((best_cert, _)) if *best_cert < cert => {}
            _ => self.best = Some((cert, labels)),
        }
    }
}

/// Maps each atom to the atom holding the same label in `reference`.
fn automorphism(reference: &[usize], labels: &[usize]) -> Vec<usize> {
    let mut by_label = vec![0usize; reference.len()];
    for (atom, &l) in reference.iter().enumerate() {
        by_label[l] = atom;
    }
    labels.iter().map(|&l| by_label[l]).collect()
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0usize; keys.len()];
    let mut rank = 0;
    for w in 0..order.len() {
        if w > 0 && keys[order[w]] != keys[order[w - 1]] {
            rank += 1;
        }
        ranks[order[w]] = rank;
    }
    ranks
}

fn count_classes(ranks: &[usize]) -> usize {
    ranks.iter().copied().max().map_or(0, |m| m + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canon(s: &str) -> String {
        canonical_form(&parse_smiles(s).unwrap())
    }

    #[test]
    fn same_molecule_different_order() {
        assert_eq!(canon("OCC"), canon("CCO"));
        assert_ne!(canon("CCO"), canon("CCN"));
        assert_eq!(canon("C1=CC=CC=C1O"), canon("OC1=CC=CC=C1"));
    }

    #[test]
    fn stereo_distinguishes() {
        assert_ne!(canon("F/C=C/F"), canon("F/C=C\\F"));
        assert_eq!(canon("F/C=C/F"), canon("F\\C=C\\F"));
        assert_eq!(canon("F/C=C/F"), canon("C(\\F)=C/F"));
        assert_ne!(canon("N[C@@H](C)C(=O)O"), canon("N[C@H](C)C(=O)O"));
        assert_eq!(canon("N[C@@H](C)C(=O)O"), canon("C[C@H](N)C(=O)O"));
        assert_eq!(canon("N[C@@H](C)C(=O)O"), canon("OC(=O)[C@@H](N)C"));
        assert_ne!(canon("FC=CF"), canon("F/C=C/F"));
    }

    #[test]
    fn attributes_distinguish() {
        assert_ne!(canon("[13CH4]"), canon("C"));
        assert_ne!(canon("[NH4+]"), canon("N"));
        assert_ne!(canon("c1ccccc1"), canon("C1CCCCC1"));
        assert_ne!(canon("[*:0]C"), canon("[*:1]C"));
    }

    #[test]
    fn permutation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for s in [
            "CC(C)(C)c1ccc(O)cc1",
            "C[C@H]1CC[C@@H](O)CC1",
            "C/C=C/C(=O)O[C@@H]1C[C@H](C)CC(C)(C)C1",
            "C12C3C4C1C5C2C3C45",
            "CC(C)(C)C(C(C)(C)C)(C(C)(C)C)C(C)(C)C",
            "c1ccc2cc3ccccc3cc2c1",
        ] {
            let mol = parse_smiles(s).unwrap();
            let expected = canonical_form(&mol);
            for _ in 0..100 {
                let mut perm: Vec<usize> = (0..mol.atom_count()).collect();
                perm.shuffle(&mut rng);
                assert_eq!(canonical_form(&mol.permuted(&perm)), expected, "{s}");
            }
        }
    }

    #[test]
    fn canonical_smiles_reparses_equal() {
        for s in ["CC(C)(C)c1ccc(O)cc1", "C/C=C/C=C\\C", "O[C@]12CCCC[C@@H]1CCCC2"] {
            let c = canon(s);
            assert_eq!(canon(&c), c);
        }
    }

    #[test]
    fn inexpressible_configuration_gets_explicit_block() {
        // outer double bonds E, middle one unspecified: the shared single
        // bonds must carry marks that would also fix the middle bond
        let mut mol = parse_smiles("C/C=C/C=C/C=C/C").unwrap();
        let middle = mol.bond_between(3, 4).unwrap();
        let mut stereo: Vec<BondStereo> = mol.bonds().iter().map(|b| b.stereo).collect();
        stereo[middle] = BondStereo::None;
        mol.replace_bond_stereo(stereo).unwrap();

        let form = canonical_form(&mol);
        assert!(form.ends_with('|') && !form.contains(' '), "{form}");
        let back = parse_smiles(&form).unwrap();
        assert!(molecules_equal(&back, &mol));
        assert_eq!(canonical_form(&back), form);
        assert!(!molecules_equal(&back, &parse_smiles("C/C=C/C=C/C=C/C").unwrap()));
        let perm: Vec<usize> = (0..mol.atom_count()).rev().collect();
        assert_eq!(canonical_form(&mol.permuted(&perm)), form);
    }
}
