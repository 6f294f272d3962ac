use std::collections::HashMap;

use thiserror::Error;

use super::element::Element;
use super::graph::{implicit_hydrogens, Atom, BondOrder, BondStereo, Chirality, GraphError, MolBuilder, MolGraph, NbrRef};
use super::rings::bridge_flags;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES")]
    Empty,
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("multi-component SMILES ('.' at position {0}) is not supported")]
    MultiComponent(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn syntax<T>(pos: usize, msg: impl Into<String>) -> Result<T, SmilesError> {
    Err(SmilesError::Syntax { pos, msg: msg.into() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSym {
    fn order(self) -> BondOrder {
        match self {
            BondSym::Single | BondSym::Up | BondSym::Down => BondOrder::Single,
            BondSym::Double => BondOrder::Double,
            BondSym::Triple => BondOrder::Triple,
            BondSym::Aromatic => BondOrder::Aromatic,
        }
    }

    /// `Some(true)` for `/`, `Some(false)` for `\`.
    fn direction(self) -> Option<bool> {
        match self {
            BondSym::Up => Some(true),
            BondSym::Down => Some(false),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OrderSlot {
    Atom(usize),
    H,
    Ring,
}

struct RawBond {
    a: usize,
    b: usize,
    order: BondOrder,
    implicit: bool,
    /// Written as `first c second`, `c` true for `/`.
    direction: Option<(usize, usize, bool)>,
}

struct OpenRing {
    atom: usize,
    sym: Option<BondSym>,
    slot: usize,
    pos: usize,
}

#[derive(Default)]
struct Parser {
    atoms: Vec<Atom>,
    bracket: Vec<bool>,
    bonds: Vec<RawBond>,
    orders: Vec<Vec<OrderSlot>>,
    rings: HashMap<u32, OpenRing>,
}

/// Parses a single-component SMILES string.
///
/// Supported: organic-subset and bracket atoms (isotope, chirality `@`/`@@`,
/// hydrogen count, charge, atom class), aromatic lowercase atoms, branches,
/// ring closures (digits and `%nn`), bond symbols `- = # :` and the
/// directional bonds `/ \` which become E/Z labels on double bonds.
///
/// A trailing `|E:a,b,x,y;Z:...|` block (as emitted by
/// [`canonical_form`](super::canonical_form) when directional bonds cannot
/// express every configuration) replaces all double-bond stereo with the
/// listed configurations. Indices count atoms in order of appearance; `x` is
/// a neighbor of `a` and `y` a neighbor of `b`.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    let text = text.trim();
    match text.find('|') {
        None => parse_plain(text),
        Some(bar) => {
            let mut mol = parse_plain(&text[..bar])?;
            apply_stereo_block(&mut mol, &text[bar..], bar)?;
            Ok(mol)
        }
    }
}

fn apply_stereo_block(mol: &mut MolGraph, block: &str, offset: usize) -> Result<(), SmilesError> {
    let inner = block
        .strip_prefix('|')
        .and_then(|b| b.strip_suffix('|'))
        .filter(|b| !b.contains('|'));
    let Some(inner) = inner else {
        return syntax(offset, "malformed stereo block");
    };
    let mut stereo = vec![BondStereo::None; mol.bond_count()];
    for item in inner.split(';').filter(|s| !s.is_empty()) {
        let bad = || SmilesError::Syntax { pos: offset, msg: format!("bad stereo entry '{item}'") };
        let (kind, rest) = item.split_once(':').ok_or_else(bad)?;
        let trans = match kind {
            "E" => true,
            "Z" => false,
            _ => return Err(bad()),
        };
        let idx: Vec<usize> = rest
            .split(',')
            .map(|v| v.parse::<usize>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        let &[a, b, x, y] = idx.as_slice() else {
            return Err(bad());
        };
        if [a, b, x, y].iter().any(|&v| v >= mol.atom_count()) {
            return Err(bad());
        }
        let bond = mol.bond_between(a, b).ok_or_else(bad)?;
        stereo[bond] = if mol.bond(bond).a == a {
            BondStereo::with(trans, x, y)
        } else {
            BondStereo::with(trans, y, x)
        };
    }
    mol.replace_bond_stereo(stereo)?;
    Ok(())
}

fn parse_plain(text: &str) -> Result<MolGraph, SmilesError> {
    if text.is_empty() {
        return Err(SmilesError::Empty);
    }
    let bytes = text.as_bytes();
    let mut p = Parser::default();
    let mut prev: Option<usize> = None;
    let mut stack: Vec<usize> = Vec::new();
    let mut pending: Option<(BondSym, usize)> = None;
    let mut just_opened = false;
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b'(' => {
                if prev.is_none() {
                    return syntax(i, "branch without a preceding atom");
                }
                if pending.is_some() {
                    return syntax(i, "bond symbol before '('");
                }
                stack.push(prev.unwrap());
                just_opened = true;
                i += 1;
                continue;
            }
            b')' => {
                if just_opened {
                    return syntax(i, "empty branch");
                }
                if pending.is_some() {
                    return syntax(i, "dangling bond before ')'");
                }
                match stack.pop() {
                    Some(a) => prev = Some(a),
                    None => return syntax(i, "unbalanced ')'"),
                }
                i += 1;
                continue;
            }
            b'.' => return Err(SmilesError::MultiComponent(i)),
            b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                if pending.is_some() {
                    return syntax(i, "consecutive bond symbols");
                }
                let sym = match c {
                    b'-' => BondSym::Single,
                    b'=' => BondSym::Double,
                    b'#' => BondSym::Triple,
                    b':' => BondSym::Aromatic,
                    b'/' => BondSym::Up,
                    _ => BondSym::Down,
                };
                if prev.is_none() {
                    return syntax(i, "bond without a preceding atom");
                }
                pending = Some((sym, i));
                i += 1;
                continue;
            }
            b'0'..=b'9' | b'%' => {
                let Some(cur) = prev else {
                    return syntax(i, "ring closure without a preceding atom");
                };
                if just_opened {
                    return syntax(i, "ring closure at start of branch");
                }
                let rnum = if c == b'%' {
                    if i + 2 >= bytes.len() || !bytes[i + 1].is_ascii_digit() || !bytes[i + 2].is_ascii_digit() {
                        return syntax(i, "'%' must be followed by two digits");
                    }
                    i += 3;
                    ((bytes[i - 2] - b'0') * 10 + (bytes[i - 1] - b'0')) as u32
                } else {
                    i += 1;
                    (c - b'0') as u32
                };
                let sym = pending.take().map(|(s, _)| s);
                p.ring_closure(cur, rnum, sym, start)?;
                continue;
            }
            _ => {}
        }
        let (atom, is_bracket, hcount_given, next) = parse_atom(bytes, i)?;
        i = next;
        let idx = p.atoms.len();
        p.atoms.push(atom);
        p.bracket.push(is_bracket);
        p.orders.push(Vec::new());
        if let Some(from) = prev {
            let sym = pending.take().map(|(s, _)| s);
            p.add_bond(from, idx, sym, start)?;
        } else if pending.is_some() {
            return syntax(start, "bond without a preceding atom");
        }
        if hcount_given {
            p.orders[idx].push(OrderSlot::H);
        }
        prev = Some(idx);
        just_opened = false;
    }
    if let Some((_, pos)) = pending {
        return syntax(pos, "dangling bond at end of input");
    }
    if !stack.is_empty() {
        return syntax(bytes.len(), "unclosed branch");
    }
    if let Some(open) = p.rings.values().min_by_key(|r| r.pos) {
        return syntax(open.pos, "unclosed ring bond");
    }
    p.finish()
}

impl Parser {
    fn add_bond(&mut self, a: usize, b: usize, sym: Option<BondSym>, pos: usize) -> Result<usize, SmilesError> {
        if a == b {
            return syntax(pos, "ring closure to the same atom");
        }
        if self.bonds.iter().any(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) {
            return syntax(pos, "duplicate bond between the same atoms");
        }
        let implicit = sym.is_none();
        let order = match sym {
            Some(s) => s.order(),
            None if self.atoms[a].aromatic && self.atoms[b].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        let direction = sym.and_then(BondSym::direction).map(|d| (a, b, d));
        self.bonds.push(RawBond { a, b, order, implicit, direction });
        self.orders[a].push(OrderSlot::Atom(b));
        self.orders[b].push(OrderSlot::Atom(a));
        Ok(self.bonds.len() - 1)
    }

    fn ring_closure(&mut self, cur: usize, rnum: u32, sym: Option<BondSym>, pos: usize) -> Result<(), SmilesError> {
        let Some(open) = self.rings.remove(&rnum) else {
            self.rings.insert(rnum, OpenRing { atom: cur, sym, slot: self.orders[cur].len(), pos });
            self.orders[cur].push(OrderSlot::Ring);
            return Ok(());
        };
        let merged = match (open.sym, sym) {
            (None, s) | (s, None) => s,
            (Some(x), Some(y)) if x == y => Some(x),
            (Some(x), Some(y)) if x.order() == y.order() && (x.direction().is_some() || y.direction().is_some()) => {
                if x.direction().is_some() {
                    Some(x)
                } else {
                    Some(y)
                }
            }
            _ => return syntax(pos, "conflicting ring-closure bond symbols"),
        };
        if open.atom == cur {
            return syntax(pos, "ring closure to the same atom");
        }
        if self.bonds.iter().any(|bd| (bd.a == open.atom && bd.b == cur) || (bd.a == cur && bd.b == open.atom)) {
            return syntax(pos, "duplicate bond between the same atoms");
        }
        let implicit = merged.is_none();
        let order = match merged {
            Some(s) => s.order(),
            None if self.atoms[open.atom].aromatic && self.atoms[cur].aromatic => BondOrder::Aromatic,
            None => BondOrder::Single,
        };
        // a direction written at a ring digit reads as if the digit were the partner atom
        let direction = match (open.sym.and_then(BondSym::direction), sym.and_then(BondSym::direction)) {
            (Some(d), _) => Some((open.atom, cur, d)),
            (None, Some(d)) => Some((cur, open.atom, d)),
            (None, None) => None,
        };
        self.bonds.push(RawBond { a: open.atom, b: cur, order, implicit, direction });
        self.orders[open.atom][open.slot] = OrderSlot::Atom(cur);
        self.orders[cur].push(OrderSlot::Atom(open.atom));
        Ok(())
    }

    fn finish(mut self) -> Result<MolGraph, SmilesError> {
        let edges: Vec<(usize, usize)> = self.bonds.iter().map(|b| (b.a, b.b)).collect();
        let bridges = bridge_flags(self.atoms.len(), &edges);
        for (bond, &bridge) in self.bonds.iter_mut().zip(&bridges) {
            // an unwritten bond between aromatic atoms outside any ring is single
            if bond.implicit && bond.order == BondOrder::Aromatic && bridge {
                bond.order = BondOrder::Single;
            }
        }
        let mut valence = vec![0u32; self.atoms.len()];
        for bond in &self.bonds {
            valence[bond.a] += bond.order.valence() as u32;
            valence[bond.b] += bond.order.valence() as u32;
        }
        for (i, atom) in self.atoms.iter_mut().enumerate() {
            if !self.bracket[i] {
                atom.hydrogens = implicit_hydrogens(atom.element, atom.aromatic, valence[i]);
            }
        }

        let mut builder = MolBuilder::new();
        for atom in &self.atoms {
            builder.add_atom(atom.clone());
        }
        for bond in &self.bonds {
            builder.add_bond(bond.a, bond.b, bond.order)?;
        }
        for (i, bond) in self.bonds.iter().enumerate() {
            if bond.order != BondOrder::Double {
                continue;
            }
            let side_a = self.directional_side(bond.a, i);
            let side_b = self.directional_side(bond.b, i);
            if let (Some((x, up_x)), Some((y, up_y))) = (side_a, side_b) {
                builder.set_bond_stereo(i, BondStereo::with(up_x != up_y, x, y));
            }
        }
        for (i, order) in self.orders.iter().enumerate() {
            if self.atoms[i].chirality == Chirality::None {
                continue;
            }
            let refs = order
                .iter()
                .map(|slot| match *slot {
                    OrderSlot::Atom(n) => NbrRef::Atom(n),
                    OrderSlot::H => NbrRef::ImplicitH,
                    OrderSlot::Ring => unreachable!("all ring bonds are closed"),
                })
                .collect();
            builder.set_neighbor_order(i, refs);
        }
        Ok(builder.build()?)
    }

    /// First directional neighbor of `atom` other than across `double`,
    /// with whether that neighbor lies "above" `atom`.
    fn directional_side(&self, atom: usize, double: usize) -> Option<(usize, bool)> {
        self.bonds.iter().enumerate().find_map(|(j, bond)| {
            if j == double || (bond.a != atom && bond.b != atom) {
                return None;
            }
            let (first, second, up) = bond.direction?;
            if first == atom {
                Some((second, up))
            } else {
                Some((first, !up))
            }
        })
    }
}

/// Returns `(atom, is_bracket, hcount_given, next_index)`.
fn parse_atom(bytes: &[u8], i: usize) -> Result<(Atom, bool, bool, usize), SmilesError> {
    let c = bytes[i];
    if c == b'[' {
        return parse_bracket(bytes, i);
    }
    let peek = bytes.get(i + 1).copied();
    let (element, aromatic, len) = match c {
        b'B' if peek == Some(b'r') => (Element::BR, false, 2),
        b'C' if peek == Some(b'l') => (Element::CL, false, 2),
        b'B' => (Element::B, false, 1),
        b'C' => (Element::C, false, 1),
        b'N' => (Element::N, false, 1),
        b'O' => (Element::O, false, 1),
        b'P' => (Element::P, false, 1),
        b'S' => (Element::S, false, 1),
        b'F' => (Element::F, false, 1),
        b'I' => (Element::I, false, 1),
        b'*' => (Element::DUMMY, false, 1),
        b'b' => (Element::B, true, 1),
        b'c' => (Element::C, true, 1),
        b'n' => (Element::N, true, 1),
        b'o' => (Element::O, true, 1),
        b'p' => (Element::P, true, 1),
        b's' => (Element::S, true, 1),
        _ => return syntax(i, format!("unexpected character '{}'", char::from(c).escape_default())),
    };
    let mut atom = Atom::new(element);
    atom.aromatic = aromatic;
    Ok((atom, false, false, i + len))
}

fn parse_bracket(bytes: &[u8], open: usize) -> Result<(Atom, bool, bool, usize), SmilesError> {
    let mut i = open + 1;
    let number = |i: &mut usize| -> Option<u32> {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        (start != *i).then(|| std::str::from_utf8(&bytes[start..*i]).unwrap().parse().ok()).flatten()
    };
    let isotope = match number(&mut i) {
        Some(v) if v <= u16::MAX as u32 => Some(v as u16),
        Some(_) => return syntax(open + 1, "isotope out of range"),
        None => None,
    };
    let Some(&first) = bytes.get(i) else {
        return syntax(i, "unterminated bracket atom");
    };
    let (element, aromatic) = if first == b'*' {
        i += 1;
        (Element::DUMMY, false)
    } else if first.is_ascii_uppercase() {
        let two = bytes
            .get(i + 1)
            .filter(|b| b.is_ascii_lowercase())
            .and_then(|&b| Element::from_symbol(std::str::from_utf8(&[first, b]).unwrap()));
        match two {
            Some(e) => {
                i += 2;
                (e, false)
            }
            None => {
                let e = Element::from_symbol(std::str::from_utf8(&[first]).unwrap());
                match e {
                    Some(e) => {
                        i += 1;
                        (e, false)
                    }
                    None => return syntax(i, "unknown element symbol"),
                }
            }
        }
    } else if first.is_ascii_lowercase() {
        let two = bytes.get(i + 1).map(|&b| [first, b]);
        match two.as_ref().map(|t| &t[..]) {
            Some(b"se") => {
                i += 2;
                (Element::from_symbol("Se").unwrap(), true)
            }
            Some(b"as") => {
                i += 2;
                (Element::from_symbol("As").unwrap(), true)
            }
            Some(b"te") => {
                i += 2;
                (Element::from_symbol("Te").unwrap(), true)
            }
            _ => {
                let e = match first {
                    b'b' => Element::B,
                    b'c' => Element::C,
                    b'n' => Element::N,
                    b'o' => Element::O,
                    b'p' => Element::P,
                    b's' => Element::S,
                    _ => return syntax(i, "unknown aromatic element symbol"),
                };
                i += 1;
                (e, true)
            }
        }
    } else {
        return syntax(i, "expected element symbol in bracket atom");
    };

    let mut chirality = Chirality::None;
    if bytes.get(i) == Some(&b'@') {
        i += 1;
        if bytes.get(i) == Some(&b'@') {
            i += 1;
            chirality = Chirality::TetrahedralCw;
        } else if bytes[i..].starts_with(b"TH1") {
            i += 3;
            chirality = Chirality::TetrahedralCcw;
        } else if bytes[i..].starts_with(b"TH2") {
            i += 3;
            chirality = Chirality::TetrahedralCw;
        } else if [&b"TH"[..], b"AL", b"SP", b"TB", b"OH"].iter().any(|t| bytes[i..].starts_with(t)) {
            return syntax(i, "only tetrahedral chirality is supported");
        } else {
            chirality = Chirality::TetrahedralCcw;
        }
    }

    let mut hydrogens = 0u8;
    let mut hcount_given = false;
    if bytes.get(i) == Some(&b'H') {
        i += 1;
        hcount_given = true;
        hydrogens = match number(&mut i) {
            Some(v) if v <= 9 => v as u8,
            Some(_) => return syntax(i, "hydrogen count out of range"),
            None => 1,
        };
    }

    let mut charge: i32 = 0;
    if let Some(&sign @ (b'+' | b'-')) = bytes.get(i) {
        let unit = if sign == b'+' { 1 } else { -1 };
        i += 1;
        if let Some(v) = number(&mut i) {
            charge = unit * v as i32;
        } else {
            charge = unit;
            while bytes.get(i) == Some(&sign) {
                charge += unit;
                i += 1;
            }
        }
        if !(-15..=15).contains(&charge) {
            return syntax(i, "charge out of range");
        }
    }

    let mut map = None;
    if bytes.get(i) == Some(&b':') {
        i += 1;
        match number(&mut i) {
            Some(v) => map = Some(v),
            None => return syntax(i, "atom class must be a number"),
        }
    }
    if bytes.get(i) != Some(&b']') {
        return syntax(i, "expected ']'");
    }
    let atom = Atom {
        element,
        charge: charge as i8,
        isotope,
        hydrogens,
        aromatic,
        chirality,
        map,
    };
    Ok((atom, true, hcount_given && hydrogens > 0, i + 1))
}
