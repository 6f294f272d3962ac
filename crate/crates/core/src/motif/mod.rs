//! Motif-level tokenization: fragment a molecule into motifs, arrange them
//! as a tree, linearize the tree into tokens and assemble tokens back into
//! a molecule.
//!
//! A motif is a connected component of ring bonds and non-single bonds, or a
//! lone atom. Each token is written as a canonical SMILES in which the cut
//! bonds appear as numbered placeholder atoms `[*:n]`: slot 0 joins the
//! parent, slots 1.. join the children in visiting order. The root motif has
//! no slot 0.

mod assemble;
mod fragment;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::chem::{canonical_form, parse_smiles, BondOrder, Element, MolGraph, SmilesError};

pub use assemble::{detokenize, detokenize_with_report, AssemblyReport};
pub use fragment::{fragment, MotifTree, TreeEdge};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MotifError {
    #[error("molecule contains a wildcard atom at index {0}; '*' is reserved for attachment slots")]
    WildcardAtom(usize),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("invalid motif key '{key}': {reason}")]
    InvalidKey { key: String, reason: String },
    #[error("unknown traversal order '{0}' (expected dfs or bfs)")]
    UnknownOrder(String),
}

fn invalid_key<T>(key: &str, reason: impl Into<String>) -> Result<T, MotifError> {
    Err(MotifError::InvalidKey { key: key.to_string(), reason: reason.into() })
}

/// Traversal used to turn a motif tree into a token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TraversalOrder {
    #[default]
    Dfs,
    Bfs,
}

impl FromStr for TraversalOrder {
    type Err = MotifError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dfs" => Ok(TraversalOrder::Dfs),
            "bfs" => Ok(TraversalOrder::Bfs),
            _ => Err(MotifError::UnknownOrder(s.to_string())),
        }
    }
}

impl fmt::Display for TraversalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraversalOrder::Dfs => "dfs",
            TraversalOrder::Bfs => "bfs",
        })
    }
}

/// An attachment point of a motif.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Slot {
    pub number: u32,
    /// Motif atom the cut bond starts from (index into [`Motif::graph`]).
    pub atom: usize,
    /// Placeholder atom standing in for the far side of the cut bond.
    pub placeholder: usize,
    pub order: BondOrder,
}

/// A motif token: a molecular fragment whose cut bonds end in numbered
/// placeholder atoms.
#[derive(Debug, Clone)]
pub struct Motif {
    graph: MolGraph,
    slots: Vec<Slot>,
    key: String,
}

impl Motif {
    /// Wraps a fragment graph whose placeholders are map-numbered wildcards.
    fn from_graph(graph: MolGraph) -> Result<Motif, MotifError> {
        let key = canonical_form(&graph);
        let slots = collect_slots(&graph, &key)?;
        Ok(Motif { graph, slots, key })
    }

    /// Reconstructs a motif from its canonical key.
    pub fn from_key(key: &str) -> Result<Motif, MotifError> {
        let graph = parse_smiles(key).map_err(|e: SmilesError| MotifError::InvalidKey {
            key: key.to_string(),
            reason: e.to_string(),
        })?;
        let motif = Motif::from_graph(graph)?;
        if motif.key != key.trim() {
            return invalid_key(key, format!("not canonical (canonical form is '{}')", motif.key));
        }
        Ok(motif)
    }

    /// Canonical key: equal keys iff the motifs are isomorphic, slot numbers
    /// and all atom and bond attributes included.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// The fragment including its placeholder atoms.
    pub fn graph(&self) -> &MolGraph {
        &self.graph
    }

    /// Attachment slots in ascending slot number.
    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    /// True when the motif has no parent slot.
    pub fn is_root(&self) -> bool {
        self.slots.first().is_none_or(|s| s.number != 0)
    }

    pub fn slot(&self, number: u32) -> Option<&Slot> {
        self.slots.iter().find(|s| s.number == number)
    }

    /// Number of real (non-placeholder) atoms.
    pub fn atom_count(&self) -> usize {
        self.graph.atom_count() - self.slots.len()
    }

    pub fn is_placeholder(&self, atom: usize) -> bool {
        self.slots.iter().any(|s| s.placeholder == atom)
    }
}

impl PartialEq for Motif {
    fn eq(&self, other: &Motif) -> bool {
        self.key == other.key
    }
}

impl Eq for Motif {}

impl std::hash::Hash for Motif {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.key.hash(state);
    }
}

impl fmt::Display for Motif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key)
    }
}

pub fn canonical_motif_key(motif: &Motif) -> &str {
    motif.key()
}

fn collect_slots(graph: &MolGraph, key: &str) -> Result<Vec<Slot>, MotifError> {
    let mut slots = Vec::new();
    for (i, atom) in graph.atoms().iter().enumerate() {
        if atom.element != Element::DUMMY {
            continue;
        }
        let Some(number) = atom.map else {
            return invalid_key(key, "wildcard atom without a slot number");
        };
        let plain = atom.charge == 0
            && atom.isotope.is_none()
            && atom.hydrogens == 0
            && !atom.aromatic
            && atom.chirality == crate::chem::Chirality::None;
        if !plain || graph.degree(i) != 1 {
            return invalid_key(key, format!("slot {number} must be a bare placeholder with one bond"));
        }
        let (nb, bond) = graph.neighbors(i)[0];
        if graph.atom(nb).element == Element::DUMMY {
            return invalid_key(key, format!("slot {number} is attached to another placeholder"));
        }
        slots.push(Slot { number, atom: nb, placeholder: i, order: graph.bond(bond).order });
    }
    slots.sort_by_key(|s| s.number);
    if slots.len() == graph.atom_count() {
        return invalid_key(key, "motif has no atoms besides placeholders");
    }
    let first = slots.first().map_or(1, |s| s.number);
    if first > 1 || slots.iter().enumerate().any(|(i, s)| s.number != first + i as u32) {
        return invalid_key(key, "slot numbers must be contiguous from 0 or 1");
    }
    Ok(slots)
}

/// Linearized motif tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub tokens: Vec<Motif>,
    pub order: TraversalOrder,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(Motif::key)
    }

    /// Space-separated motif keys.
    pub fn to_text(&self) -> String {
        self.keys().collect::<Vec<_>>().join(" ")
    }

    /// Parses a space-separated line of motif keys.
    pub fn from_text(line: &str, order: TraversalOrder) -> Result<TokenSequence, MotifError> {
        let tokens = line.split_whitespace().map(Motif::from_key).collect::<Result<Vec<_>, _>>()?;
        Ok(TokenSequence { tokens, order })
    }
}

/// Emits the tree's motifs in traversal order, children by slot number.
pub fn linearize(tree: &MotifTree, order: TraversalOrder) -> TokenSequence {
    let visit = match order {
        TraversalOrder::Dfs => tree.dfs_order(),
        TraversalOrder::Bfs => tree.bfs_order(),
    };
    TokenSequence { tokens: visit.into_iter().map(|n| tree.node(n).clone()).collect(), order }
}

pub fn tokenize(mol: &MolGraph, order: TraversalOrder) -> Result<TokenSequence, MotifError> {
    Ok(linearize(&fragment(mol)?, order))
}
