use std::collections::BTreeSet;

use super::graph::MolGraph;

/// Ring membership of bonds and atoms.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RingInfo {
    pub ring_bonds: BTreeSet<usize>,
    pub ring_atoms: BTreeSet<usize>,
}

impl RingInfo {
    pub fn is_ring_bond(&self, bond: usize) -> bool {
        self.ring_bonds.contains(&bond)
    }

    pub fn is_ring_atom(&self, atom: usize) -> bool {
        self.ring_atoms.contains(&atom)
    }
}

/// Ring bonds are exactly the non-bridge edges; ring atoms are their endpoints.
pub fn perceive_rings(mol: &MolGraph) -> RingInfo {
    let edges: Vec<(usize, usize)> = mol.bonds().iter().map(|b| (b.a, b.b)).collect();
    let bridges = bridge_flags(mol.atom_count(), &edges);
    let mut info = RingInfo::default();
    for (i, (&(a, b), &bridge)) in edges.iter().zip(&bridges).enumerate() {
        if !bridge {
            info.ring_bonds.insert(i);
            info.ring_atoms.insert(a);
            info.ring_atoms.insert(b);
        }
    }
    info
}

/// Marks bridges of an undirected simple graph (iterative low-link DFS).
pub(crate) fn bridge_flags(n: usize, edges: &[(usize, usize)]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (i, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, i));
        adj[b].push((a, i));
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut bridge = vec![false; edges.len()];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        // (vertex, edge used to enter it, next adjacency position)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        while let Some(&mut (u, parent_edge, ref mut next)) = stack.last_mut() {
            if *next < adj[u].len() {
                let (v, e) = adj[u][*next];
                *next += 1;
                if e == parent_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridge[parent_edge] = true;
                    }
                }
            }
        }
    }
    bridge
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    /// Edge lies on a cycle iff its endpoints stay connected without it.
    fn brute_force_ring_bonds(mol: &MolGraph) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for (i, bond) in mol.bonds().iter().enumerate() {
            let mut seen = vec![false; mol.atom_count()];
            let mut stack = vec![bond.a];
            seen[bond.a] = true;
            while let Some(u) = stack.pop() {
                for &(v, e) in mol.neighbors(u) {
                    if e != i && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            if seen[bond.b] {
                out.insert(i);
            }
        }
        out
    }

    #[test]
    fn acyclic_has_no_rings() {
        let info = perceive_rings(&parse_smiles("CCO").unwrap());
        assert!(info.ring_bonds.is_empty() && info.ring_atoms.is_empty());
    }

    #[test]
    fn cyclopropane_all_ring() {
        let info = perceive_rings(&parse_smiles("C1CC1").unwrap());
        assert_eq!((info.ring_bonds.len(), info.ring_atoms.len()), (3, 3));
    }

    #[test]
    fn naphthalene_matches_brute_force() {
        let mol = parse_smiles("c1ccc2ccccc2c1").unwrap();
        let info = perceive_rings(&mol);
        assert_eq!(info.ring_bonds, brute_force_ring_bonds(&mol));
        assert_eq!((info.ring_bonds.len(), info.ring_atoms.len()), (11, 10));
    }

    #[test]
    fn k_cycles_have_k_ring_bonds() {
        for k in 3..12 {
            let smiles = format!("C1{}1", "C".repeat(k - 1));
            let mol = parse_smiles(&smiles).unwrap();
            assert_eq!(perceive_rings(&mol).ring_bonds.len(), k);
        }
    }

    #[test]
    fn mixed_systems_match_brute_force() {
        for s in [
            "C1CC1CC2CCC2",
            "c1ccccc1-c1ccccc1",
            "C12(CCC1)CCC2",
            "C1CC2CCC1CC2",
            "OC(=O)C1=CC=CC=C1CCN",
            "C1CCC2(CC1)OCCO2",
        ] {
            let mol = parse_smiles(s).unwrap();
            assert_eq!(perceive_rings(&mol).ring_bonds, brute_force_ring_bonds(&mol), "{s}");
        }
    }
}
