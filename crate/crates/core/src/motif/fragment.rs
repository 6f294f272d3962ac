use std::collections::VecDeque;

use crate::chem::{
    canonical_labels, perceive_rings, Atom, BondOrder, BondStereo, Chirality, Element, MolBuilder, MolGraph, NbrRef,
};

use super::{Motif, MotifError};

/// A fragmented bond: `child`'s slot 0 joins `parent`'s slot `parent_slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeEdge {
    pub parent: usize,
    pub parent_slot: u32,
    pub child: usize,
    pub order: BondOrder,
    /// Index of the cut bond in the source molecule.
    pub bond: usize,
}

/// Motifs of a molecule joined by its fragmented bonds.
#[derive(Debug, Clone)]
pub struct MotifTree {
    nodes: Vec<Motif>,
    /// Per node, the source atom of every non-placeholder motif atom.
    atom_maps: Vec<Vec<usize>>,
    /// Per node, the edges to its children in slot order.
    children: Vec<Vec<TreeEdge>>,
    root: usize,
}

impl MotifTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, idx: usize) -> &Motif {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[Motif] {
        &self.nodes
    }

    /// Source-molecule atom for each motif atom of `node`; placeholder
    /// positions hold `usize::MAX`.
    pub fn atom_map(&self, node: usize) -> &[usize] {
        &self.atom_maps[node]
    }

    pub fn children(&self, node: usize) -> &[TreeEdge] {
        &self.children[node]
    }

    pub fn edges(&self) -> impl Iterator<Item = &TreeEdge> {
        self.children.iter().flatten()
    }

    pub(crate) fn dfs_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children[n].iter().rev().map(|e| e.child));
        }
        out
    }

    pub(crate) fn bfs_order(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.len());
        let mut queue = VecDeque::from([self.root]);
        while let Some(n) = queue.pop_front() {
            out.push(n);
            queue.extend(self.children[n].iter().map(|e| e.child));
        }
        out
    }
}

/// Splits `mol` into motifs: the connected components of its ring bonds and
/// non-single bonds, with every remaining atom on its own. The remaining
/// bonds (single, acyclic) become the tree edges.
///
/// The root holds the atom of lowest canonical rank; children are ordered by
/// the canonical rank of the attachment atom inside the parent, then of the
/// atom across the cut. Tokenization is therefore independent of input atom
/// order.
pub fn fragment(mol: &MolGraph) -> Result<MotifTree, MotifError> {
    if let Some(i) = mol.atoms().iter().position(|a| a.element == Element::DUMMY) {
        return Err(MotifError::WildcardAtom(i));
    }
    let n = mol.atom_count();
    let rings = perceive_rings(mol);
    let internal: Vec<bool> = mol
        .bonds()
        .iter()
        .enumerate()
        .map(|(i, b)| rings.is_ring_bond(i) || b.order != BondOrder::Single)
        .collect();

    // components over internal bonds
    let mut comp = vec![usize::MAX; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        let c = members.len();
        comp[start] = c;
        let mut list = vec![start];
        let mut k = 0;
        while k < list.len() {
            let u = list[k];
            k += 1;
            for &(v, bond) in mol.neighbors(u) {
                if internal[bond] && comp[v] == usize::MAX {
                    comp[v] = c;
                    list.push(v);
                }
            }
        }
        members.push(list);
    }

    let labels = canonical_labels(mol);
    for list in &mut members {
        list.sort_by_key(|&a| labels[a]);
    }
    let root_atom = (0..n).min_by_key(|&a| labels[a]).expect("non-empty molecule");
    let root_comp = comp[root_atom];

    // walk the component tree from the root; cut bonds per component as
    // (inside atom, outside atom, bond), sorted canonically
    let cuts_of = |c: usize, parent_bond: Option<usize>| -> Vec<(usize, usize, usize)> {
        let mut cuts: Vec<(usize, usize, usize)> = members[c]
            .iter()
            .flat_map(|&u| mol.neighbors(u).iter().map(move |&(v, b)| (u, v, b)))
            .filter(|&(_, _, b)| !internal[b] && Some(b) != parent_bond)
            .collect();
        cuts.sort_by_key(|&(u, v, _)| (labels[u], labels[v]));
        cuts
    };

    let mut nodes = Vec::with_capacity(members.len());
    let mut atom_maps = Vec::with_capacity(members.len());
    let mut children: Vec<Vec<TreeEdge>> = Vec::with_capacity(members.len());
    // (component, parent bond as (inside atom of this component, bond), parent node)
    let mut queue: VecDeque<(usize, Option<(usize, usize)>, Option<(usize, u32)>)> =
        VecDeque::from([(root_comp, None, None)]);
    while let Some((c, parent, parent_link)) = queue.pop_front() {
        let node = nodes.len();
        let cuts = cuts_of(c, parent.map(|(_, b)| b));
        let mut slot_bonds: Vec<(usize, usize)> = Vec::with_capacity(cuts.len() + 1);
        if let Some((inside, bond)) = parent {
            slot_bonds.push((inside, bond));
        }
        slot_bonds.extend(cuts.iter().map(|&(u, _, b)| (u, b)));
        let first_slot = if parent.is_some() { 0 } else { 1 };
        let (motif, map) = build_motif(mol, &members[c], &slot_bonds, first_slot);
        nodes.push(motif);
        atom_maps.push(map);
        children.push(Vec::new());
        if let Some((parent_node, parent_slot)) = parent_link {
            let bond = parent.unwrap().1;
            children[parent_node].push(TreeEdge {
                parent: parent_node,
                parent_slot,
                child: node,
                order: mol.bond(bond).order,
                bond,
            });
        }
        for (k, &(_, v, b)) in cuts.iter().enumerate() {
            queue.push_back((comp[v], Some((v, b)), Some((node, k as u32 + 1))));
        }
    }
    for list in &mut children {
        list.sort_by_key(|e| e.parent_slot);
    }
    Ok(MotifTree { nodes, atom_maps, children, root: 0 })
}

/// Builds the motif graph for `atoms` with one placeholder per cut bond;
/// slot numbers start at `first_slot` in `slot_bonds` order.
fn build_motif(mol: &MolGraph, atoms: &[usize], slot_bonds: &[(usize, usize)], first_slot: u32) -> (Motif, Vec<usize>) {
    let mut local = vec![usize::MAX; mol.atom_count()];
    let mut builder = MolBuilder::new();
    for &a in atoms {
        local[a] = builder.add_atom(mol.atom(a).clone());
    }
    let mut placeholder_of_bond = std::collections::HashMap::new();
    for (k, &(inside, bond)) in slot_bonds.iter().enumerate() {
        let mut atom = Atom::new(Element::DUMMY);
        atom.map = Some(first_slot + k as u32);
        let p = builder.add_atom(atom);
        builder
            .add_bond(local[inside], p, mol.bond(bond).order)
            .expect("placeholder bond is new");
        placeholder_of_bond.insert(bond, p);
    }
    // local index of `v` as seen from its neighbor `u`
    let view = |u: usize, v: usize| -> usize {
        if local[v] != usize::MAX {
            local[v]
        } else {
            placeholder_of_bond[&mol.bond_between(u, v).expect("neighbors")]
        }
    };
    for (i, bond) in mol.bonds().iter().enumerate() {
        if local[bond.a] == usize::MAX || local[bond.b] == usize::MAX || placeholder_of_bond.contains_key(&i) {
            continue;
        }
        let idx = builder
            .add_bond(local[bond.a], local[bond.b], bond.order)
            .expect("source graph is simple");
        let stereo = match bond.stereo {
            BondStereo::None => BondStereo::None,
            BondStereo::E { ref_a, ref_b } => BondStereo::E { ref_a: view(bond.a, ref_a), ref_b: view(bond.b, ref_b) },
            BondStereo::Z { ref_a, ref_b } => BondStereo::Z { ref_a: view(bond.a, ref_a), ref_b: view(bond.b, ref_b) },
        };
        builder.set_bond_stereo(idx, stereo);
    }
    for &a in atoms {
        if mol.atom(a).chirality == Chirality::None {
            continue;
        }
        let order = mol
            .neighbor_order(a)
            .into_iter()
            .map(|r| match r {
                NbrRef::Atom(v) => NbrRef::Atom(view(a, v)),
                NbrRef::ImplicitH => NbrRef::ImplicitH,
            })
            .collect();
        builder.set_neighbor_order(local[a], order);
    }
    let graph = builder.build().expect("motif of a valid molecule is valid");
    let mut map = vec![usize::MAX; graph.atom_count()];
    for &a in atoms {
        map[local[a]] = a;
    }
    let motif = Motif::from_graph(graph).expect("fragment motifs are well formed");
    (motif, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use std::collections::BTreeSet;

    fn tree(s: &str) -> (MolGraph, MotifTree) {
        let mol = parse_smiles(s).unwrap();
        let t = fragment(&mol).unwrap();
        (mol, t)
    }

    #[test]
    fn acetic_acid_has_three_motifs() {
        let (_, t) = tree("CC(=O)O");
        let mut sizes: Vec<usize> = t.nodes().iter().map(Motif::atom_count).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, [1, 1, 2]);
        assert_eq!(t.edges().count(), 2);
    }

    #[test]
    fn ethanol_is_a_path() {
        let (_, t) = tree("CCO");
        assert_eq!(t.len(), 3);
        assert_eq!(t.edges().count(), 2);
        assert!(t.nodes().iter().all(|m| m.atom_count() == 1));
        let mut degree = [0usize; 3];
        for e in t.edges() {
            degree[e.parent] += 1;
            degree[e.child] += 1;
        }
        assert!(degree.iter().all(|&d| d <= 2));
    }

    #[test]
    fn decomposition_partitions_atoms_and_bonds() {
        for s in ["CC(=O)Nc1ccc(O)cc1", "C[C@H](N)C(=O)O", "CC1=C(C(C)(C)CCC1)/C=C/C(C)=C/C=O", "C#CC1CC1"] {
            let (mol, t) = tree(s);
            let mut atoms = Vec::new();
            let mut bonds = BTreeSet::new();
            for node in 0..t.len() {
                let map = t.atom_map(node);
                let g = t.node(node).graph();
                atoms.extend(map.iter().copied().filter(|&a| a != usize::MAX));
                for b in g.bonds() {
                    if map[b.a] != usize::MAX && map[b.b] != usize::MAX {
                        assert!(bonds.insert(mol.bond_between(map[b.a], map[b.b]).unwrap()));
                    }
                }
            }
            for e in t.edges() {
                assert!(bonds.insert(e.bond), "{s}");
                assert_eq!(mol.bond(e.bond).order, BondOrder::Single);
            }
            atoms.sort_unstable();
            assert_eq!(atoms, (0..mol.atom_count()).collect::<Vec<_>>(), "{s}");
            assert_eq!(bonds.len(), mol.bond_count(), "{s}");
            assert!(t.len() <= mol.atom_count());
        }
    }

    #[test]
    fn slots_follow_numbering() {
        let (_, t) = tree("CC(C)(C)c1ccc(CC)cc1");
        assert!(t.node(t.root()).is_root());
        for node in 0..t.len() {
            let m = t.node(node);
            if node != t.root() {
                assert!(!m.is_root());
            }
            let kids: Vec<u32> = t.children(node).iter().map(|e| e.parent_slot).collect();
            let expected: Vec<u32> = (1..=kids.len() as u32).collect();
            assert_eq!(kids, expected);
            assert_eq!(m.slots().len(), kids.len() + usize::from(!m.is_root()));
        }
    }

    #[test]
    fn traversals_cover_all_nodes() {
        let (_, t) = tree("CC(CC(C)O)C(C)(N)c1ccccc1");
        let mut d = t.dfs_order();
        let mut b = t.bfs_order();
        assert_ne!(d, b);
        d.sort_unstable();
        b.sort_unstable();
        assert_eq!(d, b);
        assert_eq!(d, (0..t.len()).collect::<Vec<_>>());
    }
}
