//! Generation metrics: exact match, fingerprint Tanimoto similarity and
//! validity.

use std::fmt;

use thiserror::Error;

use crate::chem::{molecules_equal, perceive_rings, BondOrder, MolGraph};

pub const DEFAULT_NBITS: usize = 2048;
pub const DEFAULT_RADIUS: usize = 2;
pub const DEFAULT_MAX_PATH: usize = 7;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot compare {0:?} and {1:?} fingerprints")]
    KindMismatch(FingerprintKind, FingerprintKind),
    #[error("fingerprint lengths differ ({0} vs {1} bits)")]
    LengthMismatch(usize, usize),
    #[error("fingerprint length {0} is not a power of two")]
    InvalidLength(usize),
    #[error("empty input")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FingerprintKind {
    Morgan,
    Path,
}

/// Binary fingerprint of power-of-two length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
    kind: FingerprintKind,
}

impl Fingerprint {
    fn empty(nbits: usize, kind: FingerprintKind) -> Result<Fingerprint, MetricsError> {
        if nbits == 0 || !nbits.is_power_of_two() {
            return Err(MetricsError::InvalidLength(nbits));
        }
        Ok(Fingerprint { words: vec![0; nbits.div_ceil(64)], nbits, kind })
    }

    fn set_hashed(&mut self, identifier: &str) {
        let bit = (fnv1a(identifier.as_bytes()) % self.nbits as u64) as usize;
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn kind(&self) -> FingerprintKind {
        self.kind
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_set(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    /// Indices of the set bits.
    pub fn ones(&self) -> Vec<usize> {
        (0..self.nbits).filter(|&b| self.is_set(b)).collect()
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Circular fingerprint. Every atom starts from (element, charge, degree,
/// hydrogen count, aromaticity, ring membership); each round folds in the
/// sorted (bond order, neighbor identifier) list. Identifiers from every
/// round up to `radius` are hashed into the bit vector.
pub fn morgan_fingerprint(mol: &MolGraph, radius: usize, nbits: usize) -> Result<Fingerprint, MetricsError> {
    let mut fp = Fingerprint::empty(nbits, FingerprintKind::Morgan)?;
    let rings = perceive_rings(mol);
    let mut ids: Vec<String> = (0..mol.atom_count())
        .map(|i| {
            let a = mol.atom(i);
            format!(
                "{}:{}:{}:{}:{}:{}",
                a.element.atomic_number(),
                a.charge,
                mol.degree(i),
                a.hydrogens,
                u8::from(a.aromatic),
                u8::from(rings.is_ring_atom(i))
            )
        })
        .collect();
    for id in &ids {
        fp.set_hashed(&format!("r0|{id}"));
    }
    for round in 1..=radius {
        let hashed: Vec<u64> = ids.iter().map(|s| fnv1a(s.as_bytes())).collect();
        ids = (0..mol.atom_count())
            .map(|i| {
                let mut env: Vec<(u8, u64)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, b)| (bond_code(mol.bond(b).order), hashed[nb]))
                    .collect();
                env.sort_unstable();
                let env: Vec<String> = env.iter().map(|(o, h)| format!("{o}:{h:016x}")).collect();
                format!("{:016x}({})", hashed[i], env.join(","))
            })
            .collect();
        for id in &ids {
            fp.set_hashed(&format!("r{round}|{id}"));
        }
    }
    Ok(fp)
}

fn bond_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

fn atom_label(mol: &MolGraph, i: usize) -> String {
    let a = mol.atom(i);
    if a.aromatic {
        a.element.symbol().to_ascii_lowercase()
    } else {
        a.element.symbol().to_string()
    }
}

/// Strings of every simple path with up to `max_len` bonds, each undirected
/// path once and written in its lexicographically smaller direction.
pub fn path_identifiers(mol: &MolGraph, max_len: usize) -> Vec<String> {
    let labels: Vec<String> = (0..mol.atom_count()).map(|i| atom_label(mol, i)).collect();
    let mut out = Vec::new();
    let mut path = Vec::with_capacity(max_len + 1);
    let mut on_path = vec![false; mol.atom_count()];
    for start in 0..mol.atom_count() {
        path.push(start);
        on_path[start] = true;
        extend_paths(mol, &labels, max_len, &mut path, &mut on_path, &mut out);
        on_path[start] = false;
        path.pop();
    }
    out
}

fn extend_paths(
    mol: &MolGraph,
    labels: &[String],
    max_len: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    out: &mut Vec<String>,
) {
    let (first, last) = (path[0], *path.last().unwrap());
    // each path is reached from both ends; keep the walk starting at the lower index
    if path.len() == 1 || first < last {
        out.push(path_string(mol, labels, path));
    }
    if path.len() > max_len {
        return;
    }
    for &(nb, _) in mol.neighbors(last) {
        if on_path[nb] {
            continue;
        }
        on_path[nb] = true;
        path.push(nb);
        extend_paths(mol, labels, max_len, path, on_path, out);
        path.pop();
        on_path[nb] = false;
    }
}

fn path_string(mol: &MolGraph, labels: &[String], path: &[usize]) -> String {
    let render = |atoms: &mut dyn Iterator<Item = usize>| {
        let atoms: Vec<usize> = atoms.collect();
        let mut s = labels[atoms[0]].clone();
        for w in atoms.windows(2) {
            let b = mol.bond_between(w[0], w[1]).expect("path follows bonds");
            s.push(mol.bond(b).order.symbol());
            s.push_str(&labels[w[1]]);
        }
        s
    };
    let forward = render(&mut path.iter().copied());
    let backward = render(&mut path.iter().rev().copied());
    forward.min(backward)
}

/// Linear-path fingerprint: every simple path of 0 to `max_len` bonds,
/// written as element and bond symbols, hashed into the bit vector.
pub fn path_fingerprint(mol: &MolGraph, max_len: usize, nbits: usize) -> Result<Fingerprint, MetricsError> {
    let mut fp = Fingerprint::empty(nbits, FingerprintKind::Path)?;
    for p in path_identifiers(mol, max_len) {
        fp.set_hashed(&p);
    }
    Ok(fp)
}

/// `|a ∧ b| / |a ∨ b|`, 1.0 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, MetricsError> {
    if a.kind != b.kind {
        return Err(MetricsError::KindMismatch(a.kind, b.kind));
    }
    if a.nbits != b.nbits {
        return Err(MetricsError::LengthMismatch(a.nbits, b.nbits));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

pub fn exact_match(generated: &MolGraph, reference: &MolGraph) -> bool {
    molecules_equal(generated, reference)
}

/// A model generation: a parsed molecule or an invalid output.
#[derive(Debug, Clone)]
pub enum Generated {
    Valid(MolGraph),
    Invalid,
}

impl Generated {
    pub fn molecule(&self) -> Option<&MolGraph> {
        match self {
            Generated::Valid(m) => Some(m),
            Generated::Invalid => None,
        }
    }

    pub fn is_valid(&self) -> bool {
        matches!(self, Generated::Valid(_))
    }
}

/// Fingerprint parameters used by [`evaluate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FingerprintParams {
    pub radius: usize,
    pub nbits: usize,
    pub max_path: usize,
}

impl Default for FingerprintParams {
    fn default() -> Self {
        FingerprintParams { radius: DEFAULT_RADIUS, nbits: DEFAULT_NBITS, max_path: DEFAULT_MAX_PATH }
    }
}

/// Scores of one generation against its reference; invalid generations
/// score 0 everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScore {
    pub valid: bool,
    pub exact: bool,
    pub morgan: f64,
    pub path: f64,
}

pub fn score_pair(generated: &Generated, reference: &MolGraph, params: FingerprintParams) -> Result<PairScore, MetricsError> {
    let Generated::Valid(g) = generated else {
        // still validate the parameters
        Fingerprint::empty(params.nbits, FingerprintKind::Morgan)?;
        return Ok(PairScore { valid: false, exact: false, morgan: 0.0, path: 0.0 });
    };
    let morgan = tanimoto(
        &morgan_fingerprint(g, params.radius, params.nbits)?,
        &morgan_fingerprint(reference, params.radius, params.nbits)?,
    )?;
    let path = tanimoto(
        &path_fingerprint(g, params.max_path, params.nbits)?,
        &path_fingerprint(reference, params.max_path, params.nbits)?,
    )?;
    Ok(PairScore { valid: true, exact: exact_match(g, reference), morgan, path })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub exact: f64,
    pub morgan: f64,
    pub path: f64,
    pub validity: f64,
    pub n: usize,
}

impl EvalReport {
    /// Averages per-pair scores. Similarities are summed in sorted order so
    /// the result does not depend on pair order.
    pub fn from_scores(scores: &[PairScore]) -> Result<EvalReport, MetricsError> {
        if scores.is_empty() {
            return Err(MetricsError::EmptyInput);
        }
        let n = scores.len();
        let mean_sorted = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v.iter().sum::<f64>() / n as f64
        };
        Ok(EvalReport {
            exact: scores.iter().filter(|s| s.exact).count() as f64 / n as f64,
            morgan: mean_sorted(scores.iter().map(|s| s.morgan).collect()),
            path: mean_sorted(scores.iter().map(|s| s.path).collect()),
            validity: scores.iter().filter(|s| s.valid).count() as f64 / n as f64,
            n,
        })
    }

    /// `key=value` lines.
    pub fn to_key_values(&self) -> String {
        format!(
            "n={}\nexact={:.6}\nmorgan_tanimoto={:.6}\npath_tanimoto={:.6}\nvalidity={:.6}\n",
            self.n, self.exact, self.morgan, self.path, self.validity
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<18}{:>10}", "metric", "value")?;
        writeln!(f, "{:<18}{:>10}", "pairs", self.n)?;
        writeln!(f, "{:<18}{:>10.4}", "exact", self.exact)?;
        writeln!(f, "{:<18}{:>10.4}", "morgan tanimoto", self.morgan)?;
        writeln!(f, "{:<18}{:>10.4}", "path tanimoto", self.path)?;
        write!(f, "{:<18}{:>10.4}", "validity", self.validity)
    }
}

pub fn evaluate(pairs: &[(Generated, MolGraph)]) -> Result<EvalReport, MetricsError> {
    evaluate_with(pairs, FingerprintParams::default())
}

pub fn evaluate_with(pairs: &[(Generated, MolGraph)], params: FingerprintParams) -> Result<EvalReport, MetricsError> {
    let scores = pairs
        .iter()
        .map(|(g, r)| score_pair(g, r, params))
        .collect::<Result<Vec<_>, _>>()?;
    EvalReport::from_scores(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use std::collections::BTreeSet;

    fn mol(s: &str) -> MolGraph {
        parse_smiles(s).unwrap()
    }

    fn from_bits(bits: &[usize]) -> Fingerprint {
        let mut fp = Fingerprint::empty(64, FingerprintKind::Path).unwrap();
        for &b in bits {
            fp.words[0] |= 1 << b;
        }
        fp
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn single_atom_fingerprints() {
        assert_eq!(morgan_fingerprint(&mol("C"), 0, 2048).unwrap().count_ones(), 1);
        assert_eq!(path_fingerprint(&mol("C"), 7, 2048).unwrap().count_ones(), 1);
    }

    #[test]
    fn propane_has_six_paths() {
        let paths = path_identifiers(&mol("CCC"), 7);
        assert_eq!(paths.len(), 6);
        let distinct: BTreeSet<&String> = paths.iter().collect();
        assert_eq!(distinct.len(), 3);
    }

    #[test]
    fn path_counts_match_brute_force() {
        // brute force: all atom sequences of distinct atoms joined by bonds,
        // halved for direction (single atoms counted once)
        fn count(m: &MolGraph, max_len: usize) -> usize {
            fn walk(m: &MolGraph, path: &mut Vec<usize>, max_len: usize) -> usize {
                let mut total = 1;
                if path.len() > max_len {
                    return total;
                }
                for v in 0..m.atom_count() {
                    if !path.contains(&v) && m.bond_between(*path.last().unwrap(), v).is_some() {
                        path.push(v);
                        total += walk(m, path, max_len);
                        path.pop();
                    }
                }
                total
            }
            let directed: usize = (0..m.atom_count()).map(|s| walk(m, &mut vec![s], max_len)).sum();
            (directed - m.atom_count()) / 2 + m.atom_count()
        }
        for s in ["C1CC1", "c1ccccc1O", "CC(C)(C)C", "C1CC2CCC1C2"] {
            let m = mol(s);
            assert_eq!(path_identifiers(&m, 7).len(), count(&m, 7), "{s}");
            assert_eq!(path_identifiers(&m, 2).len(), count(&m, 2), "{s}");
        }
    }

    #[test]
    fn tanimoto_set_arithmetic() {
        let a = from_bits(&[1, 2]);
        let b = from_bits(&[1, 2, 3, 4]);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        assert_eq!(tanimoto(&a, &a).unwrap(), 1.0);
        assert_eq!(tanimoto(&a, &from_bits(&[5, 6])).unwrap(), 0.0);
        assert_eq!(tanimoto(&from_bits(&[]), &from_bits(&[])).unwrap(), 1.0);
        let m = morgan_fingerprint(&mol("CCO"), 2, 64).unwrap();
        assert!(matches!(tanimoto(&a, &m), Err(MetricsError::KindMismatch(..))));
        let wide = path_fingerprint(&mol("CCO"), 7, 128).unwrap();
        assert!(matches!(tanimoto(&a, &wide), Err(MetricsError::LengthMismatch(64, 128))));
        assert!(matches!(path_fingerprint(&mol("C"), 7, 1000), Err(MetricsError::InvalidLength(1000))));
    }

    #[test]
    fn exact_match_examples() {
        assert!(exact_match(&mol("OCC"), &mol("CCO")));
        assert!(!exact_match(&mol("CCO"), &mol("CCN")));
    }

    #[test]
    fn evaluate_examples() {
        let refs = ["CCO", "c1ccccc1", "CC(=O)O", "CCN"];
        let same: Vec<(Generated, MolGraph)> = refs.iter().map(|s| (Generated::Valid(mol(s)), mol(s))).collect();
        let r = evaluate(&same).unwrap();
        assert_eq!((r.exact, r.morgan, r.path, r.validity, r.n), (1.0, 1.0, 1.0, 1.0, 4));

        let invalid: Vec<(Generated, MolGraph)> = refs.iter().map(|s| (Generated::Invalid, mol(s))).collect();
        let r = evaluate(&invalid).unwrap();
        assert_eq!((r.exact, r.morgan, r.path, r.validity), (0.0, 0.0, 0.0, 0.0));

        let mixed = vec![
            (Generated::Valid(mol("OCC")), mol("CCO")),
            (Generated::Valid(mol("c1ccccc1")), mol("c1ccccc1")),
            (Generated::Valid(mol("CC(=O)OC")), mol("CC(=O)O")),
            (Generated::Invalid, mol("CCN")),
        ];
        let r = evaluate(&mixed).unwrap();
        assert_eq!(r.exact, 0.5);
        assert_eq!(r.validity, 0.75);
        let p = FingerprintParams::default();
        let third_m = tanimoto(
            &morgan_fingerprint(&mol("CC(=O)OC"), p.radius, p.nbits).unwrap(),
            &morgan_fingerprint(&mol("CC(=O)O"), p.radius, p.nbits).unwrap(),
        )
        .unwrap();
        let third_p = tanimoto(
            &path_fingerprint(&mol("CC(=O)OC"), p.max_path, p.nbits).unwrap(),
            &path_fingerprint(&mol("CC(=O)O"), p.max_path, p.nbits).unwrap(),
        )
        .unwrap();
        assert!(third_m > 0.0 && third_m < 1.0);
        assert!((r.morgan - (2.0 + third_m) / 4.0).abs() < 1e-12);
        assert!((r.path - (2.0 + third_p) / 4.0).abs() < 1e-12);

        assert!(matches!(evaluate(&[]), Err(MetricsError::EmptyInput)));
    }

    #[test]
    fn report_formats() {
        let r = EvalReport { exact: 0.5, morgan: 0.25, path: 0.75, validity: 1.0, n: 4 };
        assert_eq!(r.to_key_values(), "n=4\nexact=0.500000\nmorgan_tanimoto=0.250000\npath_tanimoto=0.750000\nvalidity=1.000000\n");
        assert!(r.to_string().contains("validity"));
    }
}
