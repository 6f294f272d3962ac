//! Motif vocabulary: a bijection between motif keys and dense integer ids,
//! with reserved special tokens.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::chem::{canonical_form, MolGraph};
use crate::motif::{tokenize, Motif, MotifError, TokenSequence, TraversalOrder};

pub const PAD_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const UNK_ID: u32 = 2;
pub const SENTINEL_COUNT: u32 = 100;
const FIRST_SENTINEL: u32 = 3;
const FIRST_MOTIF: u32 = FIRST_SENTINEL + SENTINEL_COUNT;
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("token id {id} is outside the vocabulary (size {size})")]
    UnknownId { id: u32, size: usize },
    #[error("vocabulary line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error(transparent)]
    Motif(#[from] MotifError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Id of span sentinel `k`.
pub fn sentinel_id(k: u32) -> u32 {
    assert!(k < SENTINEL_COUNT, "sentinel {k} out of range");
    FIRST_SENTINEL + k
}

fn format_err<T>(line: usize, msg: impl Into<String>) -> Result<T, VocabError> {
    Err(VocabError::Format { line, msg: msg.into() })
}

fn special_name(id: u32) -> Option<String> {
    match id {
        PAD_ID => Some("<pad>".into()),
        EOS_ID => Some("</s>".into()),
        UNK_ID => Some("<unk>".into()),
        _ if id < FIRST_MOTIF => Some(format!("<extra_id_{}>", id - FIRST_SENTINEL)),
        _ => None,
    }
}

/// Token vocabulary. Ids `0..103` are specials (pad, eos, unk and 100
/// span sentinels, all with atom count 0); motif ids follow.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    motifs: Vec<Motif>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_motifs(motifs: Vec<Motif>) -> Vocabulary {
        let index = motifs
            .iter()
            .enumerate()
            .map(|(i, m)| (m.key().to_string(), FIRST_MOTIF + i as u32))
            .collect();
        Vocabulary { motifs, index }
    }

    /// A vocabulary holding only the special tokens.
    pub fn specials_only() -> Vocabulary {
        Vocabulary::from_motifs(Vec::new())
    }

    /// Total number of ids, specials included.
    pub fn len(&self) -> usize {
        FIRST_MOTIF as usize + self.motifs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn motif_count(&self) -> usize {
        self.motifs.len()
    }

    pub fn special_count(&self) -> usize {
        FIRST_MOTIF as usize
    }

    pub fn sentinel(&self, k: u32) -> u32 {
        sentinel_id(k)
    }

    pub fn is_special(&self, id: u32) -> bool {
        id < FIRST_MOTIF
    }

    pub fn is_sentinel(&self, id: u32) -> bool {
        (FIRST_SENTINEL..FIRST_MOTIF).contains(&id)
    }

    pub fn id_of(&self, key: &str) -> Option<u32> {
        self.index.get(key).copied()
    }

    /// Key of a motif id, or the display name of a special.
    pub fn token_text(&self, id: u32) -> Option<String> {
        special_name(id).or_else(|| self.motif(id).map(|m| m.key().to_string()))
    }

    pub fn motif(&self, id: u32) -> Option<&Motif> {
        id.checked_sub(FIRST_MOTIF).and_then(|i| self.motifs.get(i as usize))
    }

    /// Atom count of the token; 0 for specials.
    pub fn atom_count(&self, id: u32) -> Result<usize, VocabError> {
        if self.is_special(id) {
            return Ok(0);
        }
        self.motif(id)
            .map(Motif::atom_count)
            .ok_or(VocabError::UnknownId { id, size: self.len() })
    }

    /// Ids of motif tokens.
    pub fn motif_ids(&self) -> std::ops::Range<u32> {
        FIRST_MOTIF..self.len() as u32
    }

    pub fn encode(&self, seq: &TokenSequence) -> Vec<u32> {
        seq.keys().map(|k| self.id_of(k).unwrap_or(UNK_ID)).collect()
    }

    /// Maps ids back to motifs. Specials (including UNK) are skipped with a
    /// warning so that any model output still decodes.
    pub fn decode(&self, ids: &[u32], order: TraversalOrder) -> Result<TokenSequence, VocabError> {
        let mut tokens = Vec::with_capacity(ids.len());
        let mut skipped = 0;
        for &id in ids {
            if id as usize >= self.len() {
                return Err(VocabError::UnknownId { id, size: self.len() });
            }
            match self.motif(id) {
                Some(m) => tokens.push(m.clone()),
                None => skipped += 1,
            }
        }
        if skipped > 0 {
            log::warn!("skipped {skipped} special token(s) while decoding");
        }
        Ok(TokenSequence { tokens, order })
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "#moltok-vocab\tversion={FORMAT_VERSION}\tpad={PAD_ID}\teos={EOS_ID}\tunk={UNK_ID}\tsentinels={FIRST_SENTINEL}..{}",
            FIRST_MOTIF - 1
        )?;
        for id in 0..self.len() as u32 {
            let count = self.atom_count(id).expect("id in range");
            writeln!(w, "{id}\t{count}\t{}", self.token_text(id).expect("id in range"))?;
        }
        w.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), VocabError> {
        Ok(self.write_to(BufWriter::new(File::create(path)?))?)
    }

    /// Reads a vocabulary file, checking ids, specials, key canonicality and
    /// atom counts.
    pub fn read_from<R: BufRead>(r: R) -> Result<Vocabulary, VocabError> {
        let mut lines = r.lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let expected_header = format!(
            "#moltok-vocab\tversion={FORMAT_VERSION}\tpad={PAD_ID}\teos={EOS_ID}\tunk={UNK_ID}\tsentinels={FIRST_SENTINEL}..{}",
            FIRST_MOTIF - 1
        );
        if header != expected_header {
            return format_err(1, "missing or unsupported header");
        }
        let mut motifs = Vec::new();
        let mut seen = HashMap::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            let fields: Vec<&str> = line.split('\t').collect();
            let [id, count, key] = fields.as_slice() else {
                return format_err(line_no, "expected 3 tab-separated fields");
            };
            let id: u32 = id.parse().or_else(|_| format_err(line_no, "bad id"))?;
            let count: usize = count.parse().or_else(|_| format_err(line_no, "bad atom count"))?;
            if id as usize != i {
                return format_err(line_no, format!("expected id {i}, found {id}"));
            }
            if let Some(name) = special_name(id) {
                if *key != name || count != 0 {
                    return format_err(line_no, format!("id {id} must be the special token {name} with atom count 0"));
                }
                continue;
            }
            let motif = Motif::from_key(key)?;
            if motif.atom_count() != count {
                return format_err(line_no, format!("atom count {count} does not match key ({})", motif.atom_count()));
            }
            if seen.insert(key.to_string(), id).is_some() {
                return format_err(line_no, format!("duplicate key {key}"));
            }
            motifs.push(motif);
        }
        Ok(Vocabulary::from_motifs(motifs))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Vocabulary, VocabError> {
        Vocabulary::read_from(BufReader::new(File::open(path)?))
    }
}

/// Accumulates motif keys over a corpus. Ids are assigned by first
/// appearance when molecules are taken in order of their canonical form, so
/// the result does not depend on corpus order.
#[derive(Debug, Default)]
pub struct VocabBuilder {
    /// key -> (canonical form of the earliest molecule, token position, motif)
    first_seen: HashMap<String, (String, usize, Motif)>,
    molecules: usize,
}

impl VocabBuilder {
    pub fn new() -> VocabBuilder {
        VocabBuilder::default()
    }

    pub fn add(&mut self, mol: &MolGraph) -> Result<(), MotifError> {
        let seq = tokenize(mol, TraversalOrder::Dfs)?;
        self.add_tokens(&canonical_form(mol), &seq);
        Ok(())
    }

    /// Adds an already tokenized (DFS) molecule.
    pub fn add_tokens(&mut self, canonical: &str, seq: &TokenSequence) {
        self.molecules += 1;
        for (pos, motif) in seq.tokens.iter().enumerate() {
            match self.first_seen.get_mut(motif.key()) {
                Some(entry) => {
                    if (canonical, pos) < (entry.0.as_str(), entry.1) {
                        entry.0 = canonical.to_string();
                        entry.1 = pos;
                    }
                }
                None => {
                    self.first_seen
                        .insert(motif.key().to_string(), (canonical.to_string(), pos, motif.clone()));
                }
            }
        }
    }

    pub fn merge(&mut self, other: VocabBuilder) {
        self.molecules += other.molecules;
        for (key, (canonical, pos, motif)) in other.first_seen {
            match self.first_seen.get_mut(&key) {
                Some(entry) => {
                    if (canonical.as_str(), pos) < (entry.0.as_str(), entry.1) {
                        entry.0 = canonical;
                        entry.1 = pos;
                    }
                }
                None => {
                    self.first_seen.insert(key, (canonical, pos, motif));
                }
            }
        }
    }

    pub fn finish(self) -> Result<Vocabulary, VocabError> {
        if self.molecules == 0 {
            return Err(VocabError::EmptyCorpus);
        }
        let mut entries: Vec<(String, usize, Motif)> = self.first_seen.into_values().collect();
        entries.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
        Ok(Vocabulary::from_motifs(entries.into_iter().map(|e| e.2).collect()))
    }
}

pub fn build_vocab<'a>(corpus: impl IntoIterator<Item = &'a MolGraph>) -> Result<Vocabulary, VocabError> {
    let mut builder = VocabBuilder::new();
    for mol in corpus {
        builder.add(mol)?;
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{molecules_equal, parse_smiles};
    use crate::motif::detokenize;

    fn mols(smiles: &[&str]) -> Vec<MolGraph> {
        smiles.iter().map(|s| parse_smiles(s).unwrap()).collect()
    }

    #[test]
    fn ethanol_gives_three_motifs() {
        let v = build_vocab(&mols(&["CCO"])).unwrap();
        assert_eq!(v.motif_count(), 3);
        assert_eq!(v.len(), 3 + 103);
        assert_eq!(build_vocab(&mols(&["C"])).unwrap().motif_count(), 1);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(build_vocab(&[]), Err(VocabError::EmptyCorpus)));
    }

    #[test]
    fn specials_have_zero_atoms() {
        let v = build_vocab(&mols(&["c1ccccc1O"])).unwrap();
        for id in 0..v.special_count() as u32 {
            assert_eq!(v.atom_count(id).unwrap(), 0);
        }
        for id in v.motif_ids() {
            assert!(v.atom_count(id).unwrap() >= 1);
        }
        assert_eq!(v.sentinel(0), 3);
        assert_eq!(v.sentinel(99), 102);
    }

    #[test]
    fn order_independent_ids() {
        let corpus = mols(&["CCO", "Cc1ccccc1", "CC(=O)O", "N#CC1CC1"]);
        let a = build_vocab(&corpus).unwrap();
        let reversed: Vec<MolGraph> = corpus.iter().rev().cloned().collect();
        let b = build_vocab(&reversed).unwrap();
        let keys = |v: &Vocabulary| v.motif_ids().map(|i| v.token_text(i).unwrap()).collect::<Vec<_>>();
        assert_eq!(keys(&a), keys(&b));
    }

    #[test]
    fn encode_decode() {
        let toluene = parse_smiles("Cc1ccccc1").unwrap();
        let v = build_vocab([&toluene]).unwrap();
        let seq = tokenize(&toluene, TraversalOrder::Dfs).unwrap();
        let ids = v.encode(&seq);
        assert!(!ids.contains(&UNK_ID));
        let back = v.decode(&ids, TraversalOrder::Dfs).unwrap();
        assert_eq!(back, seq);
        assert!(molecules_equal(&detokenize(&back).unwrap(), &toluene));

        let empty = Vocabulary::specials_only();
        assert!(empty.encode(&seq).iter().all(|&id| id == UNK_ID));

        let specials = v.decode(&[PAD_ID, UNK_ID, v.sentinel(5)], TraversalOrder::Dfs).unwrap();
        assert!(specials.is_empty());
        assert!(detokenize(&specials).is_err());

        let size = v.len() as u32;
        assert!(matches!(v.decode(&[size], TraversalOrder::Dfs), Err(VocabError::UnknownId { .. })));
    }

    #[test]
    fn file_round_trip() {
        let v = build_vocab(&mols(&["CC(=O)Nc1ccc(O)cc1", "C[C@H](N)C(=O)O"])).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("#moltok-vocab\tversion=1\t"));
        let back = Vocabulary::read_from(&buf[..]).unwrap();
        assert_eq!(back.len(), v.len());
        for id in 0..v.len() as u32 {
            assert_eq!(back.token_text(id), v.token_text(id));
        }
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let v = build_vocab(&mols(&["CCO"])).unwrap();
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let last = text.lines().last().unwrap().to_string();
        let (head, key) = last.rsplit_once('\t').unwrap();
        let wrong_count = text.replace(&last, &format!("{}\t{key}", head.replace("\t1", "\t2")));
        match Vocabulary::read_from(wrong_count.as_bytes()) {
            Err(VocabError::Format { line, .. }) => assert_eq!(line, text.lines().count()),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Vocabulary::read_from("no header\n".as_bytes()).is_err());
    }
}
