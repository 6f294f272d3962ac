use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::graph::{implicit_hydrogens, permutation_parity, BondOrder, BondStereo, Chirality, MolGraph, NbrRef};
use super::rings::perceive_rings;

/// Writes a SMILES string that reparses to an equal molecule.
pub fn write_smiles(mol: &MolGraph) -> String {
    let rank: Vec<usize> = (0..mol.atom_count()).collect();
    write_ranked(mol, &rank).into_string(mol)
}

pub(crate) struct Written {
    pub smiles: String,
    /// Some double-bond configuration could not be expressed with
    /// directional bonds (conflicting marks in conjugated or cyclic systems).
    pub lossy: bool,
    /// Atoms in order of appearance in `smiles`.
    pub order: Vec<usize>,
}

impl Written {
    /// The SMILES, followed by an explicit `|E:..;Z:..|` block of double-bond
    /// configurations when directional bonds could not express them. Block
    /// entries are `a,b,x,y` positions in order of appearance: the bond's
    /// ends and, for each end, its earliest-written other neighbor.
    pub(crate) fn into_string(self, mol: &MolGraph) -> String {
        if !self.lossy {
            return self.smiles;
        }
        let mut pos = vec![0usize; mol.atom_count()];
        for (i, &atom) in self.order.iter().enumerate() {
            pos[atom] = i;
        }
        let lowest = |end: usize, other: usize| {
            mol.neighbors(end)
                .iter()
                .map(|&(nb, _)| nb)
                .filter(|&nb| nb != other)
                .min_by_key(|&nb| pos[nb])
                .unwrap()
        };
        let mut entries: Vec<(usize, usize, usize, usize, bool)> = mol
            .bonds()
            .iter()
            .filter_map(|b| {
                let (ra, rb) = b.stereo.refs()?;
                let (a, b_end, ra, rb) = if pos[b.a] < pos[b.b] { (b.a, b.b, ra, rb) } else { (b.b, b.a, rb, ra) };
                let (x, y) = (lowest(a, b_end), lowest(b_end, a));
                let trans = b.stereo.is_trans().unwrap() ^ (x != ra) ^ (y != rb);
                Some((pos[a], pos[b_end], pos[x], pos[y], trans))
            })
            .collect();
        entries.sort_unstable();
        let block: Vec<String> = entries
            .into_iter()
            .map(|(a, b, x, y, trans)| format!("{}:{a},{b},{x},{y}", if trans { "E" } else { "Z" }))
            .collect();
        format!("{}|{}|", self.smiles, block.join(";"))
    }
}

/// Writes SMILES starting from the lowest-ranked atom and visiting
/// neighbors by ascending rank. Every choice depends only on `rank`, so a
/// canonical ranking yields a canonical string.
pub(crate) fn write_ranked(mol: &MolGraph, rank: &[usize]) -> Written {
    let n = mol.atom_count();
    let ring = perceive_rings(mol);
    let (marks, lossy) = assign_directions(mol, rank);

    let sorted_nbrs: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|u| {
            let mut v = mol.neighbors(u).to_vec();
            v.sort_by_key(|&(nb, _)| rank[nb]);
            v
        })
        .collect();

    let start = (0..n).min_by_key(|&i| rank[i]).expect("non-empty molecule");
    let mut visited = vec![false; n];
    let mut bond_used = vec![false; mol.bond_count()];
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    // ring events per atom in discovery order: (partner, bond, opens_here)
    let mut ring_events: Vec<Vec<(usize, usize, bool)>> = vec![Vec::new(); n];

    visited[start] = true;
    let mut stack = vec![(start, 0usize)];
    while let Some(&mut (u, ref mut next)) = stack.last_mut() {
        if *next >= sorted_nbrs[u].len() {
            stack.pop();
            continue;
        }
        let (v, bond) = sorted_nbrs[u][*next];
        *next += 1;
        if bond_used[bond] {
            continue;
        }
        bond_used[bond] = true;
        if visited[v] {
            ring_events[v].push((u, bond, true));
            ring_events[u].push((v, bond, false));
        } else {
            visited[v] = true;
            parent[v] = Some(u);
            children[u].push(v);
            stack.push((v, 0));
        }
    }
    // openings at an atom are discovered after its closings; write closings first
    for events in &mut ring_events {
        events.sort_by_key(|&(_, _, opens)| opens);
    }

    // `from` is the atom written first
    let bond_text = |from: usize, bond: usize| -> String {
        if let Some(&up_ab) = marks.get(&bond) {
            return if oriented(mol, bond, from, up_ab) { "/".into() } else { "\\".into() };
        }
        let b = mol.bond(bond);
        let both_aromatic = mol.atom(b.a).aromatic && mol.atom(b.b).aromatic;
        match b.order {
            BondOrder::Single if both_aromatic => "-".into(),
            BondOrder::Single => String::new(),
            BondOrder::Double => "=".into(),
            BondOrder::Triple => "#".into(),
            BondOrder::Aromatic if both_aromatic && ring.is_ring_bond(bond) => String::new(),
            BondOrder::Aromatic => ":".into(),
        }
    };

    enum Task {
        Atom(usize),
        Text(&'static str),
        Bond(usize, usize),
    }
    let mut out = String::new();
    let mut digits: BTreeMap<usize, u32> = BTreeMap::new();
    let mut free_digits: Vec<u32> = Vec::new();
    let mut next_digit = 1u32;
    let mut order = Vec::with_capacity(n);
    let mut tasks = vec![Task::Atom(start)];
    while let Some(task) = tasks.pop() {
        let u = match task {
            Task::Text(t) => {
                out.push_str(t);
                continue;
            }
            Task::Bond(from, to) => {
                let bond = mol.bond_between(from, to).expect("tree bond");
                out.push_str(&bond_text(from, bond));
                continue;
            }
            Task::Atom(u) => u,
        };
        order.push(u);
        let mut written: Vec<NbrRef> = Vec::new();
        if let Some(p) = parent[u] {
            written.push(NbrRef::Atom(p));
        }
        let atom = mol.atom(u);
        let needs_bracket = needs_bracket(mol, u);
        if needs_bracket && atom.hydrogens > 0 {
            written.push(NbrRef::ImplicitH);
        }
        written.extend(ring_events[u].iter().map(|&(p, _, _)| NbrRef::Atom(p)));
        written.extend(children[u].iter().map(|&c| NbrRef::Atom(c)));
        let chirality = if atom.chirality == Chirality::None {
            Chirality::None
        } else {
            let odd = permutation_parity(&mol.neighbor_order(u), &written).expect("same neighbor set");
            atom.chirality.flipped_if(odd)
        };
        write_atom(mol, u, needs_bracket, chirality, &mut out);

        for &(_, bond, opens) in &ring_events[u] {
            if opens {
                let d = if free_digits.is_empty() {
                    next_digit += 1;
                    next_digit - 1
                } else {
                    free_digits.sort_unstable_by(|a, b| b.cmp(a));
                    free_digits.pop().unwrap()
                };
                digits.insert(bond, d);
                out.push_str(&bond_text(u, bond));
                write_ring_digit(d, &mut out);
            } else {
                let d = digits.remove(&bond).expect("ring opened before closing");
                write_ring_digit(d, &mut out);
                free_digits.push(d);
            }
        }

        let kids = &children[u];
        for (k, &c) in kids.iter().enumerate().rev() {
            let last = k + 1 == kids.len();
            if !last {
                tasks.push(Task::Text(")"));
            }
            tasks.push(Task::Atom(c));
            tasks.push(Task::Bond(u, c));
            if !last {
                tasks.push(Task::Text("("));
            }
        }
    }
    Written { smiles: out, lossy, order }
}

fn write_ring_digit(d: u32, out: &mut String) {
    if d < 10 {
        let _ = write!(out, "{d}");
    } else {
        let _ = write!(out, "%{d:02}");
    }
}

fn needs_bracket(mol: &MolGraph, u: usize) -> bool {
    let atom = mol.atom(u);
    if !atom.element.is_organic_subset()
        || atom.charge != 0
        || atom.isotope.is_some()
        || atom.chirality != Chirality::None
        || atom.map.is_some()
    {
        return true;
    }
    if atom.aromatic && !matches!(atom.element.symbol(), "B" | "C" | "N" | "O" | "P" | "S") {
        return true;
    }
    atom.hydrogens != implicit_hydrogens(atom.element, atom.aromatic, mol.bond_valence(u))
}

fn write_atom(mol: &MolGraph, u: usize, bracket: bool, chirality: Chirality, out: &mut String) {
    let atom = mol.atom(u);
    let symbol = if atom.aromatic {
        atom.element.symbol().to_ascii_lowercase()
    } else {
        atom.element.symbol().to_string()
    };
    if !bracket {
        out.push_str(&symbol);
        return;
    }
    out.push('[');
    if let Some(iso) = atom.isotope {
        let _ = write!(out, "{iso}");
    }
    out.push_str(&symbol);
    match chirality {
        Chirality::None => {}
        Chirality::TetrahedralCcw => out.push('@'),
        Chirality::TetrahedralCw => out.push_str("@@"),
    }
    match atom.hydrogens {
        0 => {}
        1 => out.push('H'),
        h => {
            let _ = write!(out, "H{h}");
        }
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => {
            let _ = write!(out, "+{c}");
        }
        c => {
            let _ = write!(out, "-{}", -c);
        }
    }
    if let Some(m) = atom.map {
        let _ = write!(out, ":{m}");
    }
    out.push(']');
}

/// Chooses `/` `\` marks for single bonds next to stereo double bonds.
///
/// Returns, per marked bond, whether its `b` endpoint lies above its `a`
/// endpoint, plus a flag set when the marks cannot express every
/// configuration exactly.
fn assign_directions(mol: &MolGraph, rank: &[usize]) -> (BTreeMap<usize, bool>, bool) {
    let mut stereo_bonds: Vec<usize> = (0..mol.bond_count())
        .filter(|&i| mol.bond(i).stereo != BondStereo::None)
        .collect();
    let mut marks: BTreeMap<usize, bool> = BTreeMap::new();
    if stereo_bonds.is_empty() {
        return (marks, false);
    }
    let key = |i: usize| {
        let b = mol.bond(i);
        let (x, y) = (rank[b.a], rank[b.b]);
        (x.min(y), x.max(y))
    };
    stereo_bonds.sort_by_key(|&i| key(i));

    for &d in &stereo_bonds {
        let bond = mol.bond(d);
        // sides in rank order so the arbitrary first orientation is canonical
        let (p, q) = if rank[bond.a] < rank[bond.b] { (bond.a, bond.b) } else { (bond.b, bond.a) };
        let side = |end: usize, other: usize| -> Vec<(usize, usize)> {
            let mut v: Vec<(usize, usize)> = mol
                .neighbors(end)
                .iter()
                .copied()
                .filter(|&(nb, e)| nb != other && mol.bond(e).order == BondOrder::Single)
                .collect();
            v.sort_by_key(|&(nb, _)| rank[nb]);
            v
        };
        let side_p = side(p, q);
        let side_q = side(q, p);
        let mut pairs: Vec<((usize, usize), (usize, usize))> = Vec::new();
        for &x in &side_p {
            for &y in &side_q {
                if x.1 != y.1 {
                    pairs.push((x, y));
                }
            }
        }
        // reuse existing marks first
        pairs.sort_by_key(|&((_, ex), (_, ey))| {
            let marked = u8::from(marks.contains_key(&ex)) + u8::from(marks.contains_key(&ey));
            std::cmp::Reverse(marked)
        });
        for ((x, ex), (y, ey)) in pairs {
            let trans = if p == bond.a { intended_trans(mol, d, x, y) } else { intended_trans(mol, d, y, x) };
            let saved = marks.clone();
            let up_px = match marks.get(&ex) {
                Some(&m) => oriented(mol, ex, p, m),
                None => {
                    marks.insert(ex, oriented(mol, ex, p, true));
                    true
                }
            };
            let want_up_qy = if trans { !up_px } else { up_px };
            match marks.get(&ey) {
                Some(&m) if oriented(mol, ey, q, m) != want_up_qy => {
                    marks = saved;
                    continue;
                }
                Some(_) => {}
                None => {
                    marks.insert(ey, oriented(mol, ey, q, want_up_qy));
                }
            }
            let touched = [p, q, x, y];
            if touched.iter().all(|&atom| local_consistent(mol, &marks, atom)) {
                break;
            }
            marks = saved;
        }
    }
    let lossy = !(0..mol.atom_count()).all(|a| local_consistent(mol, &marks, a))
        || stereo_bonds.iter().any(|&d| !double_bond_expressed(mol, &marks, d));
    (marks, lossy)
}

/// Whether the far end of `bond` lies above `from`. The mapping is an
/// involution, so it also converts a desired orientation into a stored mark.
fn oriented(mol: &MolGraph, bond: usize, from: usize, up_ab: bool) -> bool {
    if mol.bond(bond).a == from {
        up_ab
    } else {
        !up_ab
    }
}

/// Configuration of double bond `d` expressed relative to neighbors `x`
/// (on `a`'s side) and `y` (on `b`'s side).
fn intended_trans(mol: &MolGraph, d: usize, x: usize, y: usize) -> bool {
    let bond = mol.bond(d);
    let (ra, rb) = bond.stereo.refs().expect("stereo bond");
    let trans = bond.stereo.is_trans().unwrap();
    trans ^ (x != ra) ^ (y != rb)
}

fn side_marks(mol: &MolGraph, marks: &BTreeMap<usize, bool>, end: usize, other: usize) -> Vec<(usize, bool)> {
    mol.neighbors(end)
        .iter()
        .filter(|&&(nb, _)| nb != other)
        .filter_map(|&(nb, e)| marks.get(&e).map(|&m| (nb, oriented(mol, e, end, m))))
        .collect()
}

/// Every double bond at `atom` reads back as intended from the current marks.
fn local_consistent(mol: &MolGraph, marks: &BTreeMap<usize, bool>, atom: usize) -> bool {
    mol.neighbors(atom).iter().all(|&(_, e)| {
        let bond = mol.bond(e);
        if bond.order != BondOrder::Double {
            return true;
        }
        let sa = side_marks(mol, marks, bond.a, bond.b);
        let sb = side_marks(mol, marks, bond.b, bond.a);
        if bond.stereo == BondStereo::None {
            return sa.is_empty() || sb.is_empty();
        }
        // marks on the same side must point opposite ways
        let opposite = |s: &[(usize, bool)]| s.windows(2).all(|w| w[0].1 != w[1].1) && s.len() <= 2;
        if !opposite(&sa) || !opposite(&sb) {
            return false;
        }
        sa.iter().all(|&(x, ux)| {
            sb.iter().all(|&(y, uy)| {
                x == y || (ux != uy) == intended_trans(mol, e, x, y)
            })
        })
    })
}

fn double_bond_expressed(mol: &MolGraph, marks: &BTreeMap<usize, bool>, d: usize) -> bool {
    let bond = mol.bond(d);
    !side_marks(mol, marks, bond.a, bond.b).is_empty() && !side_marks(mol, marks, bond.b, bond.a).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{molecules_equal, parse_smiles};

    fn round_trip(s: &str) {
        let m = parse_smiles(s).unwrap();
        let w = write_smiles(&m);
        let back = parse_smiles(&w).unwrap_or_else(|e| panic!("{s} -> {w}: {e}"));
        assert!(molecules_equal(&m, &back), "{s} -> {w}");
    }

    #[test]
    fn simple_round_trips() {
        for s in ["CCO", "c1ccccc1", "[13CH4]", "C1CC1", "OC(=O)C", "C#N", "[NH4+]", "[O-][n+]1ccccc1"] {
            round_trip(s);
        }
    }

    #[test]
    fn isotope_preserved() {
        let w = write_smiles(&parse_smiles("[13CH4]").unwrap());
        assert!(w.contains("13"), "{w}");
    }

    #[test]
    fn benzene_reparses_aromatic_ring() {
        let m = parse_smiles(&write_smiles(&parse_smiles("c1ccccc1").unwrap())).unwrap();
        assert_eq!(m.atom_count(), 6);
        assert!(m.atoms().iter().all(|a| a.aromatic));
        assert!(m.bonds().iter().all(|b| b.order == BondOrder::Aromatic));
    }

    #[test]
    fn stereo_round_trips() {
        for s in [
            "F/C=C/F",
            "F/C=C\\F",
            "C/C=C/C=C/C",
            "C/C=C\\C=C/C",
            "N[C@@H](C)C(=O)O",
            "N[C@H](C)C(=O)O",
            "C[C@H]1CC[C@@H](O)CC1",
            "C1CCC/C=C/CC1",
            "O[C@]12CCCC[C@@H]1CCCC2",
            "[C@@H]1(F)(Cl)CC1",
            "C(/F)=C/C=C(/Cl)\\Br",
        ] {
            round_trip(s);
        }
    }

    #[test]
    fn non_ring_aromatic_bond_written_explicitly() {
        round_trip("c1ccccc1:c1ccccc1");
        round_trip("c1ccccc1-c1ccccc1");
    }
}
