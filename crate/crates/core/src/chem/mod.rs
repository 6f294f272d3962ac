//! Molecular graphs: SMILES reading and writing, canonicalization, and
//! ring perception.

mod canon;
mod element;
mod graph;
mod parse;
mod rings;
mod write;

pub use canon::{canonical_form, canonical_labels, molecules_equal};
pub use element::Element;
pub use graph::{
    implicit_hydrogens, Atom, Bond, BondOrder, BondStereo, Chirality, GraphError, MolBuilder, MolGraph, NbrRef,
    ValenceWarning,
};
pub use parse::{parse_smiles, SmilesError};
pub use rings::{perceive_rings, RingInfo};
pub use write::write_smiles;

/// Iterates the SMILES entries of a one-molecule-per-line text, skipping
/// blank and `#`-prefixed lines. Yields `(line number, SMILES)`; anything
/// after the first whitespace on a line is ignored.
pub fn smiles_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        line.split_whitespace().next().map(|s| (i + 1, s))
    })
}
