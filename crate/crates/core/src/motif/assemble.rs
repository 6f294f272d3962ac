use std::collections::VecDeque;

use crate::chem::{BondOrder, BondStereo, Chirality, MolBuilder, MolGraph, NbrRef};

use super::{Motif, MotifError, TokenSequence, TraversalOrder};

/// What assembly had to repair to produce a valid molecule.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssemblyReport {
    /// Positions of tokens that could not be attached and were skipped.
    pub dropped: Vec<usize>,
    /// Slots left open and filled with hydrogen.
    pub capped_slots: usize,
    /// Stereo descriptors that lost their meaning after capping.
    pub cleared_stereo: usize,
}

impl AssemblyReport {
    pub fn is_clean(&self) -> bool {
        self.dropped.is_empty() && self.capped_slots == 0 && self.cleared_stereo == 0
    }
}

/// Assembles a token sequence into a molecule. Total on non-empty input:
/// see [`detokenize_with_report`].
pub fn detokenize(seq: &TokenSequence) -> Result<MolGraph, MotifError> {
    let (mol, report) = detokenize_with_report(seq)?;
    if !report.dropped.is_empty() {
        log::warn!("dropped {} token(s) that had no open slot", report.dropped.len());
    }
    Ok(mol)
}

/// Assembles tokens in the sequence's traversal order: each token after the
/// first joins its slot 0 to the next open slot (most recent motif first for
/// DFS, oldest first for BFS). Tokens without slot 0 after the first, and
/// tokens arriving when no slot is open, are dropped. Slots still open at
/// the end are filled with hydrogen, so any non-empty sequence yields a
/// valid molecule.
pub fn detokenize_with_report(seq: &TokenSequence) -> Result<(MolGraph, AssemblyReport), MotifError> {
    if seq.tokens.is_empty() {
        return Err(MotifError::EmptySequence);
    }
    let mut report = AssemblyReport::default();
    let mut placed: Vec<Placed> = Vec::new();
    // placed motifs that may still have open child slots: (placed index, next slot position)
    let mut open: VecDeque<(usize, usize)> = VecDeque::new();

    for (pos, motif) in seq.tokens.iter().enumerate() {
        if placed.is_empty() {
            placed.push(Placed::new(motif));
            open.push_back((0, child_slot_start(motif)));
            continue;
        }
        if motif.slot(0).is_none() {
            report.dropped.push(pos);
            continue;
        }
        let frame = loop {
            let candidate = match seq.order {
                TraversalOrder::Dfs => open.back_mut(),
                TraversalOrder::Bfs => open.front_mut(),
            };
            match candidate {
                None => break None,
                Some(f) if f.1 < placed[f.0].motif.slots().len() => {
                    f.1 += 1;
                    break Some((f.0, f.1 - 1));
                }
                Some(_) => {
                    match seq.order {
                        TraversalOrder::Dfs => open.pop_back(),
                        TraversalOrder::Bfs => open.pop_front(),
                    };
                }
            }
        };
        let Some((parent, slot_pos)) = frame else {
            report.dropped.push(pos);
            continue;
        };
        let child = placed.len();
        placed.push(Placed::new(motif));
        placed[parent].partner[slot_pos] = Some((child, 0));
        placed[child].partner[0] = Some((parent, slot_pos));
        open.push_back((child, child_slot_start(motif)));
    }

    let mol = build(&placed, &mut report);
    Ok((mol, report))
}

fn child_slot_start(motif: &Motif) -> usize {
    usize::from(!motif.is_root())
}

struct Placed<'a> {
    motif: &'a Motif,
    /// Per slot position: the (placed motif, slot position) it is joined to.
    partner: Vec<Option<(usize, usize)>>,
}

impl<'a> Placed<'a> {
    fn new(motif: &'a Motif) -> Placed<'a> {
        Placed { motif, partner: vec![None; motif.slots().len()] }
    }
}

fn build(placed: &[Placed], report: &mut AssemblyReport) -> MolGraph {
    let mut builder = MolBuilder::new();
    // per placed motif: global index of each real atom
    let mut global: Vec<Vec<usize>> = Vec::with_capacity(placed.len());
    for p in placed {
        let g = p.motif.graph();
        let mut map = vec![usize::MAX; g.atom_count()];
        for (i, atom) in g.atoms().iter().enumerate() {
            if !p.motif.is_placeholder(i) {
                let mut atom = atom.clone();
                atom.chirality = Chirality::None;
                map[i] = builder.add_atom(atom);
            }
        }
        global.push(map);
    }

    let mut bond_index: Vec<Vec<Option<usize>>> = Vec::with_capacity(placed.len());
    for (k, p) in placed.iter().enumerate() {
        let g = p.motif.graph();
        let mut idx = vec![None; g.bond_count()];
        for (i, b) in g.bonds().iter().enumerate() {
            let (a, c) = (global[k][b.a], global[k][b.b]);
            if a != usize::MAX && c != usize::MAX {
                idx[i] = Some(builder.add_bond(a, c, b.order).expect("motif bonds are simple"));
            }
        }
        bond_index.push(idx);
    }

    // each placeholder resolves to the atom across the joined slot, or to
    // hydrogen (None) when the slot stays open
    let mut resolved: Vec<Vec<Option<usize>>> =
        placed.iter().map(|p| vec![None; p.motif.graph().atom_count()]).collect();
    for (k, p) in placed.iter().enumerate() {
        for (s, slot) in p.motif.slots().iter().enumerate() {
            let inside = global[k][slot.atom];
            match p.partner[s] {
                Some((q, t)) => {
                    let other = &placed[q].motif.slots()[t];
                    resolved[k][slot.placeholder] = Some(global[q][other.atom]);
                    let order = joined_order(slot.order, other.order);
                    // the side placed first adds the bond
                    if (k, s) < (q, t) {
                        builder
                            .add_bond(inside, global[q][other.atom], order)
                            .expect("slots join distinct motifs");
                    }
                    let extra = slot.order.valence().saturating_sub(order.valence());
                    add_hydrogens(&mut builder, inside, extra);
                }
                None => {
                    report.capped_slots += 1;
                    add_hydrogens(&mut builder, inside, slot.order.valence());
                }
            }
        }
    }

    for (k, p) in placed.iter().enumerate() {
        let g = p.motif.graph();
        let lookup = |v: usize| -> Option<usize> {
            if p.motif.is_placeholder(v) {
                resolved[k][v]
            } else {
                Some(global[k][v])
            }
        };

        for (i, atom) in g.atoms().iter().enumerate() {
            if atom.chirality == Chirality::None || p.motif.is_placeholder(i) {
                continue;
            }
            let order: Vec<NbrRef> = g
                .neighbor_order(i)
                .into_iter()
                .map(|r| match r {
                    NbrRef::ImplicitH => NbrRef::ImplicitH,
                    NbrRef::Atom(v) => lookup(v).map_or(NbrRef::ImplicitH, NbrRef::Atom),
                })
                .collect();
            let h_refs = order.iter().filter(|r| **r == NbrRef::ImplicitH).count();
            let has_h = builder.atom_mut(global[k][i]).hydrogens > 0;
            if h_refs > 1 || (h_refs == 1) != has_h {
                report.cleared_stereo += 1;
                continue;
            }
            builder.atom_mut(global[k][i]).chirality = atom.chirality;
            builder.set_neighbor_order(global[k][i], order);
        }

        for (i, b) in g.bonds().iter().enumerate() {
            let Some((ra, rb)) = b.stereo.refs() else { continue };
            let Some(idx) = bond_index[k][i] else { continue };
            let mut trans = b.stereo.is_trans().unwrap();
            let mut side = |end: usize, other: usize, r: usize| -> Option<usize> {
                if let Some(a) = lookup(r) {
                    return Some(a);
                }
                // the reference became hydrogen: use the remaining substituent
                let alt = g.neighbors(end).iter().map(|&(v, _)| v).find(|&v| v != other && v != r)?;
                let a = lookup(alt)?;
                trans = !trans;
                Some(a)
            };
            let refs = (side(b.a, b.b, ra), side(b.b, b.a, rb));
            match refs {
                (Some(x), Some(y)) => builder.set_bond_stereo(idx, BondStereo::with(trans, x, y)),
                _ => report.cleared_stereo += 1,
            }
        }
    }

    builder.build().expect("assembled motifs form a connected, valid molecule")
}

/// Bond formed when two slots meet; on a mismatch the lower order is used
/// and the difference is filled with hydrogen.
fn joined_order(a: BondOrder, b: BondOrder) -> BondOrder {
    if a.valence() <= b.valence() {
        a
    } else {
        b
    }
}

fn add_hydrogens(builder: &mut MolBuilder, atom: usize, count: u8) {
    let a = builder.atom_mut(atom);
    a.hydrogens = a.hydrogens.saturating_add(count);
}
