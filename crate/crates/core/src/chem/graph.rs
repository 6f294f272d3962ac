use std::collections::VecDeque;

use thiserror::Error;

use super::element::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Contribution to the explicit valence of an endpoint. Aromatic bonds
    /// count as 1; aromatic atoms receive their extra unit separately.
    pub fn valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            BondOrder::Single => '-',
            BondOrder::Double => '=',
            BondOrder::Triple => '#',
            BondOrder::Aromatic => ':',
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }
}

/// Tetrahedral parity. `Ccw` is SMILES `@`, `Cw` is `@@`, both read
/// relative to the atom's neighbor order (see [`MolGraph::neighbor_order`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Chirality {
    #[default]
    None,
    TetrahedralCcw,
    TetrahedralCw,
}

impl Chirality {
    pub fn inverted(self) -> Chirality {
        match self {
            Chirality::None => Chirality::None,
            Chirality::TetrahedralCcw => Chirality::TetrahedralCw,
            Chirality::TetrahedralCw => Chirality::TetrahedralCcw,
        }
    }

    pub(crate) fn flipped_if(self, odd: bool) -> Chirality {
        if odd {
            self.inverted()
        } else {
            self
        }
    }
}

/// Double-bond configuration relative to two reference neighbors:
/// `ref_a` is bonded to the bond's `a` endpoint, `ref_b` to its `b` endpoint.
/// `E` places the references on opposite sides, `Z` on the same side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BondStereo {
    #[default]
    None,
    E { ref_a: usize, ref_b: usize },
    Z { ref_a: usize, ref_b: usize },
}

impl BondStereo {
    pub fn refs(self) -> Option<(usize, usize)> {
        match self {
            BondStereo::None => None,
            BondStereo::E { ref_a, ref_b } | BondStereo::Z { ref_a, ref_b } => Some((ref_a, ref_b)),
        }
    }

    pub fn is_trans(self) -> Option<bool> {
        match self {
            BondStereo::None => None,
            BondStereo::E { .. } => Some(true),
            BondStereo::Z { .. } => Some(false),
        }
    }

    pub(crate) fn with(trans: bool, ref_a: usize, ref_b: usize) -> BondStereo {
        if trans {
            BondStereo::E { ref_a, ref_b }
        } else {
            BondStereo::Z { ref_a, ref_b }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub charge: i8,
    pub isotope: Option<u16>,
    /// Attached hydrogen count: the bracket count, or the implicit count
    /// derived from standard valences for organic-subset atoms.
    pub hydrogens: u8,
    pub aromatic: bool,
    pub chirality: Chirality,
    /// Atom-map class; attachment placeholders carry their slot number here.
    pub map: Option<u32>,
}

impl Atom {
    pub fn new(element: Element) -> Atom {
        Atom {
            element,
            charge: 0,
            isotope: None,
            hydrogens: 0,
            aromatic: false,
            chirality: Chirality::None,
            map: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: BondStereo,
}

impl Bond {
    pub fn other(&self, atom: usize) -> usize {
        if atom == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// An entry of an atom's neighbor order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NbrRef {
    Atom(usize),
    ImplicitH,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("molecule has no atoms")]
    Empty,
    #[error("molecule has {0} disconnected components")]
    Disconnected(usize),
    #[error("bond references atom {0} out of range")]
    AtomOutOfRange(usize),
    #[error("bond from atom {0} to itself")]
    SelfLoop(usize),
    #[error("duplicate bond between atoms {0} and {1}")]
    DuplicateBond(usize, usize),
    #[error("invalid stereo on bond {0}")]
    InvalidBondStereo(usize),
    #[error("neighbor order for atom {0} does not match its neighbors")]
    InvalidNeighborOrder(usize),
}

/// A connected molecular graph with attributed atoms and bonds.
///
/// Built through [`MolBuilder`], which checks the structural invariants and
/// normalizes stereo descriptors onto the internal neighbor order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// `(neighbor, bond index)` per atom, sorted by neighbor.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub fn bond(&self, idx: usize) -> &Bond {
        &self.bonds[idx]
    }

    /// `(neighbor, bond index)` pairs in ascending neighbor order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(n, _)| n)
            .ok()
            .map(|i| self.adjacency[a][i].1)
    }

    /// Reference order for tetrahedral parity: one implicit hydrogen first
    /// (when any are attached), then neighbors by ascending index.
    pub fn neighbor_order(&self, atom: usize) -> Vec<NbrRef> {
        reference_order(self.atoms[atom].hydrogens, &self.adjacency[atom])
    }

    /// Sum of bond valence contributions at `atom`.
    pub fn bond_valence(&self, atom: usize) -> u32 {
        self.adjacency[atom]
            .iter()
            .map(|&(_, b)| self.bonds[b].order.valence() as u32)
            .sum()
    }

    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.iter().filter(|a| a.element != Element::H).count()
    }

    /// Relabels atoms: atom `i` moves to index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atom_count(), "permutation length mismatch");
        let mut inverse = vec![usize::MAX; perm.len()];
        for (old, &new) in perm.iter().enumerate() {
            inverse[new] = old;
        }
        let mut builder = MolBuilder::new();
        for &old in &inverse {
            builder.add_atom(self.atoms[old].clone());
        }
        for bond in &self.bonds {
            let idx = builder
                .add_bond(perm[bond.a], perm[bond.b], bond.order)
                .expect("permutation preserves simple graph");
            let stereo = match bond.stereo {
                BondStereo::None => BondStereo::None,
                BondStereo::E { ref_a, ref_b } => BondStereo::E { ref_a: perm[ref_a], ref_b: perm[ref_b] },
                BondStereo::Z { ref_a, ref_b } => BondStereo::Z { ref_a: perm[ref_a], ref_b: perm[ref_b] },
            };
            builder.set_bond_stereo(idx, stereo);
        }
        for (old, atom) in self.atoms.iter().enumerate() {
            if atom.chirality != Chirality::None {
                let order = self
                    .neighbor_order(old)
                    .into_iter()
                    .map(|r| match r {
                        NbrRef::Atom(n) => NbrRef::Atom(perm[n]),
                        NbrRef::ImplicitH => NbrRef::ImplicitH,
                    })
                    .collect();
                builder.set_neighbor_order(perm[old], order);
            }
        }
        builder.build().expect("permutation preserves validity")
    }

    /// Replaces every bond's stereo descriptor, validating the references.
    pub(crate) fn replace_bond_stereo(&mut self, stereo: Vec<BondStereo>) -> Result<(), GraphError> {
        assert_eq!(stereo.len(), self.bonds.len(), "one descriptor per bond");
        let stereo: Vec<BondStereo> =
            stereo.into_iter().enumerate().map(|(i, s)| normalize_bond_stereo(&self.bonds[i], s, &self.atoms, &self.adjacency)).collect();
        for (i, s) in stereo.iter().enumerate() {
            if !stereo_refs_valid(&self.bonds[i], *s, &self.adjacency) {
                return Err(GraphError::InvalidBondStereo(i));
            }
        }
        for (bond, s) in self.bonds.iter_mut().zip(stereo) {
            bond.stereo = s;
        }
        Ok(())
    }

    /// Valence diagnostics: neutral atoms whose bonds plus hydrogens exceed
    /// the largest standard valence of their element. Reported, not enforced.
    pub fn valence_warnings(&self) -> Vec<ValenceWarning> {
        let mut out = Vec::new();
        for (i, atom) in self.atoms.iter().enumerate() {
            let Some(&max) = atom.element.default_valences().last() else {
                continue;
            };
            if atom.charge != 0 {
                continue;
            }
            let used = self.bond_valence(i) + atom.hydrogens as u32;
            let allowed = max as u32 + u32::from(atom.aromatic);
            if used > allowed {
                out.push(ValenceWarning { atom: i, valence: used, max: max as u32 });
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValenceWarning {
    pub atom: usize,
    pub valence: u32,
    pub max: u32,
}

/// Implicit hydrogen count for an organic-subset atom given its bonds.
///
/// Aliphatic atoms take the smallest standard valence that accommodates the
/// bond valence; aromatic atoms use only their lowest valence, with one
/// extra unit for the delocalized bond.
pub fn implicit_hydrogens(element: Element, aromatic: bool, bond_valence: u32) -> u8 {
    let valences = element.default_valences();
    if valences.is_empty() {
        return 0;
    }
    if aromatic {
        let used = bond_valence + 1;
        return (valences[0] as u32).saturating_sub(used) as u8;
    }
    valences
        .iter()
        .map(|&v| v as u32)
        .find(|&v| v >= bond_valence)
        .map(|v| (v - bond_valence) as u8)
        .unwrap_or(0)
}

/// Parity of the permutation taking `from` to `to`; `Some(true)` when odd.
/// `None` when the two lists are not permutations of each other.
pub(crate) fn permutation_parity(from: &[NbrRef], to: &[NbrRef]) -> Option<bool> {
    if from.len() != to.len() {
        return None;
    }
    let mut pos = Vec::with_capacity(from.len());
    let mut used = vec![false; to.len()];
    for item in from {
        let j = (0..to.len()).find(|&j| !used[j] && to[j] == *item)?;
        used[j] = true;
        pos.push(j);
    }
    let mut seen = vec![false; pos.len()];
    let mut transpositions = 0usize;
    for start in 0..pos.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = pos[i];
            len += 1;
        }
        transpositions += len - 1;
    }
    Some(transpositions % 2 == 1)
}

/// Incremental constructor for [`MolGraph`].
#[derive(Debug, Default, Clone)]
pub struct MolBuilder {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    orders: Vec<Option<Vec<NbrRef>>>,
}

impl MolBuilder {
    pub fn new() -> MolBuilder {
        MolBuilder::default()
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn add_atom(&mut self, atom: Atom) -> usize {
        self.atoms.push(atom);
        self.orders.push(None);
        self.atoms.len() - 1
    }

    pub fn atom_mut(&mut self, idx: usize) -> &mut Atom {
        &mut self.atoms[idx]
    }

    pub fn add_bond(&mut self, a: usize, b: usize, order: BondOrder) -> Result<usize, GraphError> {
        let n = self.atoms.len();
        if a >= n {
            return Err(GraphError::AtomOutOfRange(a));
        }
        if b >= n {
            return Err(GraphError::AtomOutOfRange(b));
        }
        if a == b {
            return Err(GraphError::SelfLoop(a));
        }
        if self.has_bond(a, b) {
            return Err(GraphError::DuplicateBond(a.min(b), a.max(b)));
        }
        self.bonds.push(Bond { a, b, order, stereo: BondStereo::None });
        Ok(self.bonds.len() - 1)
    }

    pub fn has_bond(&self, a: usize, b: usize) -> bool {
        self.bonds
            .iter()
            .any(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a))
    }

    pub fn set_bond_stereo(&mut self, bond: usize, stereo: BondStereo) {
        self.bonds[bond].stereo = stereo;
    }

    /// Declares the neighbor order the atom's chirality is expressed in.
    /// Without one, chirality is taken as already relative to the internal
    /// order of the built graph.
    pub fn set_neighbor_order(&mut self, atom: usize, order: Vec<NbrRef>) {
        self.orders[atom] = Some(order);
    }

    pub fn build(self) -> Result<MolGraph, GraphError> {
        let MolBuilder { mut atoms, mut bonds, orders } = self;
        if atoms.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); atoms.len()];
        for (i, bond) in bonds.iter().enumerate() {
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        for bond in &mut bonds {
            bond.stereo = normalize_bond_stereo(bond, bond.stereo, &atoms, &adjacency);
        }
        for (i, bond) in bonds.iter().enumerate() {
            if !stereo_refs_valid(bond, bond.stereo, &adjacency) {
                return Err(GraphError::InvalidBondStereo(i));
            }
        }
        let components = count_components(&adjacency);
        if components != 1 {
            return Err(GraphError::Disconnected(components));
        }
        for (i, order) in orders.into_iter().enumerate() {
            let Some(given) = order else { continue };
            if atoms[i].chirality == Chirality::None {
                continue;
            }
            let internal = reference_order(atoms[i].hydrogens, &adjacency[i]);
            let odd = permutation_parity(&given, &internal).ok_or(GraphError::InvalidNeighborOrder(i))?;
            atoms[i].chirality = atoms[i].chirality.flipped_if(odd);
        }
        Ok(MolGraph { atoms, bonds, adjacency })
    }
}

/// Brings a double-bond descriptor into a form every consumer agrees on.
///
/// A configuration is only defined when each end carries at most two
/// substituents (neighbors plus hydrogens); otherwise it is dropped. A double
/// bond in a three-membered ring can reference the shared ring atom from
/// both ends: one end then moves to its other neighbor, flipping the
/// configuration, and the descriptor is dropped when neither end has one.
fn normalize_bond_stereo(bond: &Bond, stereo: BondStereo, atoms: &[Atom], adjacency: &[Vec<(usize, usize)>]) -> BondStereo {
    let Some((ra, rb)) = stereo.refs() else {
        return stereo;
    };
    let substituents = |end: usize| adjacency[end].len() - 1 + atoms[end].hydrogens as usize;
    if bond.order == BondOrder::Double && (substituents(bond.a) > 2 || substituents(bond.b) > 2) {
        return BondStereo::None;
    }
    let adjacent = |end: usize| adjacency[end].iter().any(|&(n, _)| n == ra);
    if ra != rb || !adjacent(bond.a) || !adjacent(bond.b) {
        return stereo;
    }
    let trans = stereo.is_trans().unwrap();
    let other = |end: usize, across: usize| adjacency[end].iter().map(|&(n, _)| n).find(|&n| n != across && n != ra);
    if let Some(x) = other(bond.a, bond.b) {
        BondStereo::with(!trans, x, rb)
    } else if let Some(y) = other(bond.b, bond.a) {
        BondStereo::with(!trans, ra, y)
    } else {
        BondStereo::None
    }
}

fn stereo_refs_valid(bond: &Bond, stereo: BondStereo, adjacency: &[Vec<(usize, usize)>]) -> bool {
    let Some((ra, rb)) = stereo.refs() else {
        return true;
    };
    bond.order == BondOrder::Double
        && ra != bond.b
        && rb != bond.a
        && ra != rb
        && adjacency[bond.a].iter().any(|&(n, _)| n == ra)
        && adjacency[bond.b].iter().any(|&(n, _)| n == rb)
}

fn reference_order(hydrogens: u8, adjacency: &[(usize, usize)]) -> Vec<NbrRef> {
    let mut order = Vec::with_capacity(adjacency.len() + 1);
    if hydrogens > 0 {
        order.push(NbrRef::ImplicitH);
    }
    order.extend(adjacency.iter().map(|&(n, _)| NbrRef::Atom(n)));
    order
}

fn count_components(adjacency: &[Vec<(usize, usize)>]) -> usize {
    let mut seen = vec![false; adjacency.len()];
    let mut components = 0;
    for start in 0..adjacency.len() {
        if seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    components
}

#[cfg(test)]
mod tests {
    use super::*;

    fn carbon() -> Atom {
        Atom::new(Element::C)
    }

    #[test]
    fn builder_rejects_structural_errors() {
        assert_eq!(MolBuilder::new().build(), Err(GraphError::Empty));

        let mut b = MolBuilder::new();
        b.add_atom(carbon());
        b.add_atom(carbon());
        assert_eq!(b.clone().build(), Err(GraphError::Disconnected(2)));
        assert_eq!(b.add_bond(0, 0, BondOrder::Single), Err(GraphError::SelfLoop(0)));
        assert_eq!(b.add_bond(0, 2, BondOrder::Single), Err(GraphError::AtomOutOfRange(2)));
        b.add_bond(0, 1, BondOrder::Single).unwrap();
        assert_eq!(b.add_bond(1, 0, BondOrder::Double), Err(GraphError::DuplicateBond(0, 1)));
        let bond = 0;
        b.set_bond_stereo(bond, BondStereo::E { ref_a: 1, ref_b: 0 });
        assert_eq!(b.build(), Err(GraphError::InvalidBondStereo(0)));
    }

    #[test]
    fn parity_of_swaps() {
        use NbrRef::Atom as A;
        let base = [NbrRef::ImplicitH, A(1), A(2), A(3)];
        assert_eq!(permutation_parity(&base, &base), Some(false));
        assert_eq!(permutation_parity(&[A(1), NbrRef::ImplicitH, A(2), A(3)], &base), Some(true));
        assert_eq!(permutation_parity(&[A(2), A(3), A(1)], &[A(1), A(2), A(3)]), Some(false));
        assert_eq!(permutation_parity(&[A(2), A(3)], &[A(1), A(2)]), None);
    }

    #[test]
    fn chirality_normalized_to_internal_order() {
        let mut b = MolBuilder::new();
        let center = b.add_atom(Atom { chirality: Chirality::TetrahedralCcw, hydrogens: 1, ..carbon() });
        for _ in 0..3 {
            let n = b.add_atom(carbon());
            b.add_bond(center, n, BondOrder::Single).unwrap();
        }
        // one swap relative to the internal [H, 1, 2, 3]
        b.set_neighbor_order(center, vec![NbrRef::Atom(1), NbrRef::ImplicitH, NbrRef::Atom(2), NbrRef::Atom(3)]);
        let g = b.build().unwrap();
        assert_eq!(g.atom(0).chirality, Chirality::TetrahedralCw);
    }

    #[test]
    fn implicit_hydrogen_rules() {
        assert_eq!(implicit_hydrogens(Element::C, false, 1), 3);
        assert_eq!(implicit_hydrogens(Element::C, true, 2), 1);
        assert_eq!(implicit_hydrogens(Element::C, true, 3), 0);
        assert_eq!(implicit_hydrogens(Element::N, true, 2), 0);
        assert_eq!(implicit_hydrogens(Element::S, true, 2), 0);
        assert_eq!(implicit_hydrogens(Element::S, false, 3), 1);
        assert_eq!(implicit_hydrogens(Element::P, false, 4), 1);
        assert_eq!(implicit_hydrogens(Element::O, false, 3), 0);
        assert_eq!(implicit_hydrogens(Element::DUMMY, false, 1), 0);
    }

    #[test]
    fn shared_ring_reference_moves_to_other_neighbor() {
        // cyclopropene 0=1 with ring atom 2 and a methyl 3 on atom 0
        let mut b = MolBuilder::new();
        for h in [0, 1, 2, 3] {
            b.add_atom(Atom { hydrogens: h, ..carbon() });
        }
        let double = b.add_bond(0, 1, BondOrder::Double).unwrap();
        b.add_bond(1, 2, BondOrder::Single).unwrap();
        b.add_bond(2, 0, BondOrder::Single).unwrap();
        b.add_bond(0, 3, BondOrder::Single).unwrap();
        b.set_bond_stereo(double, BondStereo::Z { ref_a: 2, ref_b: 2 });
        let g = b.build().unwrap();
        assert_eq!(g.bond(double).stereo, BondStereo::E { ref_a: 3, ref_b: 2 });
    }

    #[test]
    fn stereo_dropped_when_an_end_has_three_substituents() {
        // S(=C)(C)(C)C with a configuration tag on the double bond
        let mut b = MolBuilder::new();
        let s = b.add_atom(Atom { hydrogens: 0, ..Atom::new(Element::S) });
        let c = b.add_atom(Atom { hydrogens: 1, ..carbon() });
        let f = b.add_atom(Atom::new(Element::F));
        b.add_bond(c, f, BondOrder::Single).unwrap();
        let double = b.add_bond(s, c, BondOrder::Double).unwrap();
        for _ in 0..3 {
            let m = b.add_atom(Atom { hydrogens: 3, ..carbon() });
            b.add_bond(s, m, BondOrder::Single).unwrap();
        }
        b.set_bond_stereo(double, BondStereo::E { ref_a: 3, ref_b: f });
        assert_eq!(b.build().unwrap().bond(double).stereo, BondStereo::None);
    }
}
