//! Command-line front end: corpus ingestion and one command per pipeline
//! step.
//!
//! Every command streams its input, writes results to the output (stdout
//! unless `--output` is given) and returns a [`Summary`] of `key=value`
//! pairs. Records are processed in parallel chunks; output order always
//! matches input order.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::chem::{canonical_form, molecules_equal, parse_smiles, perceive_rings, MolGraph};
use crate::ensemble::{process_record, EnsembleRecord};
use crate::metrics::{
    score_pair, EvalReport, FingerprintParams, Generated, DEFAULT_MAX_PATH, DEFAULT_NBITS, DEFAULT_RADIUS,
};
use crate::motif::{detokenize_with_report, tokenize, MotifError, TokenSequence, TraversalOrder};
use crate::training::{format_instance, importance_weights, span_corrupt};
use crate::vocab::{VocabBuilder, Vocabulary, UNK_ID};

const CHUNK: usize = 1024;

/// Literal marking an invalid generation in evaluation input.
pub const INVALID_MARKER: &str = "INVALID";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {msg}")]
    Format { path: String, msg: String },
    #[error("{path}:{line}: {msg}")]
    Record { path: String, line: usize, msg: String },
    #[error("{0}")]
    Usage(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

fn record_err(path: &Path, line: usize, msg: impl fmt::Display) -> CliError {
    CliError::Record { path: path.display().to_string(), line, msg: msg.to_string() }
}

/// Ordered `key=value` pairs describing a finished command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary(Vec<(String, String)>);

impl Summary {
    pub fn push(&mut self, key: &str, value: impl fmt::Display) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.0
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        f.write_str(&parts.join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum InputFormat {
    /// One SMILES per line; the rest of the line is kept as the description.
    #[default]
    #[value(name = "smiles_lines")]
    SmilesLines,
    /// Tab-separated `id`, `smiles`, `description` with a header row.
    #[value(name = "chebi_tsv")]
    ChebiTsv,
}

/// A molecule with its identifier and text description.
#[derive(Debug, Clone)]
pub struct DescriptionRecord {
    /// 1-based line in the source file.
    pub line: usize,
    pub id: String,
    pub description: String,
    pub smiles: String,
    pub molecule: MolGraph,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub records: usize,
    /// Rows written to the quarantine file, malformed ones included.
    pub quarantined: usize,
    /// Rows with the wrong column count.
    pub malformed: usize,
}

/// Streaming reader of a molecule corpus. Rows that fail to parse are
/// appended to the quarantine file (`<input>.quarantine`, created on first
/// use) as `line<TAB>reason<TAB>row`.
pub struct Ingest<R> {
    lines: io::Lines<R>,
    format: InputFormat,
    path: PathBuf,
    line: usize,
    quarantine_path: Option<PathBuf>,
    quarantine: Option<BufWriter<File>>,
    summary: IngestSummary,
}

pub fn quarantine_path(input: &Path) -> PathBuf {
    let mut name = input.as_os_str().to_os_string();
    name.push(".quarantine");
    PathBuf::from(name)
}

impl Ingest<BufReader<File>> {
    pub fn open(path: &Path, format: InputFormat) -> Result<Self, CliError> {
        let file = File::open(path).map_err(io_err(path))?;
        let mut ingest = Ingest::new(BufReader::new(file), format, path);
        ingest.quarantine_path = Some(quarantine_path(path));
        Ok(ingest)
    }
}

impl<R: BufRead> Ingest<R> {
    /// Reads from `reader`; `name` is used in messages. Quarantined rows are
    /// only logged.
    pub fn new(reader: R, format: InputFormat, name: &Path) -> Self {
        Ingest {
            lines: reader.lines(),
            format,
            path: name.to_path_buf(),
            line: 0,
            quarantine_path: None,
            quarantine: None,
            summary: IngestSummary::default(),
        }
    }

    fn quarantine_row(&mut self, reason: &str, row: &str) -> Result<(), CliError> {
        self.summary.quarantined += 1;
        log::warn!("{}:{}: quarantined: {reason}", self.path.display(), self.line);
        let Some(qpath) = &self.quarantine_path else { return Ok(()) };
        if self.quarantine.is_none() {
            let f = File::create(qpath).map_err(io_err(qpath))?;
            self.quarantine = Some(BufWriter::new(f));
        }
        let w = self.quarantine.as_mut().expect("just opened");
        writeln!(w, "{}\t{reason}\t{row}", self.line).map_err(io_err(qpath))
    }

    fn next_line(&mut self) -> Option<Result<String, CliError>> {
        let l = self.lines.next()?;
        self.line += 1;
        Some(l.map_err(io_err(&self.path)))
    }

    /// Splits a row into (id, smiles, description), or None if malformed.
    fn split_row<'a>(&self, row: &'a str) -> Option<(String, &'a str, &'a str)> {
        match self.format {
            InputFormat::SmilesLines => {
                let row = row.trim();
                let (smiles, rest) = row.split_once(char::is_whitespace).unwrap_or((row, ""));
                Some((self.line.to_string(), smiles, rest.trim()))
            }
            InputFormat::ChebiTsv => {
                let cols: Vec<&str> = row.split('\t').collect();
                match cols[..] {
                    [id, smiles, desc] => Some((id.trim().to_string(), smiles.trim(), desc)),
                    _ => None,
                }
            }
        }
    }

    /// Checks the header row of a TSV input.
    fn read_header(&mut self) -> Result<(), CliError> {
        let Some(header) = self.next_line() else {
            return Err(CliError::Format { path: self.path.display().to_string(), msg: "empty file".into() });
        };
        let header = header?;
        let cols: Vec<String> = header.split('\t').map(|c| c.trim().to_ascii_lowercase()).collect();
        if cols != ["id", "smiles", "description"] {
            return Err(CliError::Format {
                path: self.path.display().to_string(),
                msg: format!("expected header 'id<TAB>smiles<TAB>description', found {header:?}"),
            });
        }
        Ok(())
    }

    /// Closes the quarantine file and checks the overall shape of the input.
    pub fn finish(mut self) -> Result<IngestSummary, CliError> {
        if let (Some(w), Some(p)) = (self.quarantine.as_mut(), &self.quarantine_path) {
            w.flush().map_err(io_err(p))?;
        }
        let path = self.path.display().to_string();
        let rows = self.summary.records + self.summary.quarantined;
        if rows == 0 {
            return Err(CliError::Format { path, msg: "no records".into() });
        }
        if self.summary.malformed * 2 > rows {
            return Err(CliError::Format {
                path,
                msg: format!("{} of {rows} rows have the wrong number of columns", self.summary.malformed),
            });
        }
        Ok(self.summary)
    }
}

impl<R: BufRead> Iterator for Ingest<R> {
    type Item = Result<DescriptionRecord, CliError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.format == InputFormat::ChebiTsv && self.line == 0 {
            if let Err(e) = self.read_header() {
                return Some(Err(e));
            }
        }
        loop {
            let row = match self.next_line()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            if row.trim().is_empty() || (self.format == InputFormat::SmilesLines && row.trim_start().starts_with('#')) {
                continue;
            }
            let outcome = match self.split_row(&row) {
                None => {
                    self.summary.malformed += 1;
                    Err("wrong column count".to_string())
                }
                Some((id, smiles, description)) => match parse_smiles(smiles) {
                    Ok(molecule) => Ok(DescriptionRecord {
                        line: self.line,
                        id,
                        description: description.to_string(),
                        smiles: smiles.to_string(),
                        molecule,
                    }),
                    Err(e) => Err(e.to_string()),
                },
            };
            match outcome {
                Ok(rec) => {
                    self.summary.records += 1;
                    return Some(Ok(rec));
                }
                Err(reason) => {
                    if let Err(e) = self.quarantine_row(&reason, &row) {
                        return Some(Err(e));
                    }
                }
            }
        }
    }
}

/// Reads a whole corpus into memory.
pub fn ingest(path: &Path, format: InputFormat) -> Result<(Vec<DescriptionRecord>, IngestSummary), CliError> {
    let mut it = Ingest::open(path, format)?;
    let records = it.by_ref().collect::<Result<Vec<_>, _>>()?;
    Ok((records, it.finish()?))
}

/// Maps `f` over `items` in parallel chunks, handing results to `sink` in
/// input order.
fn for_each_ordered<T, U, F, S>(
    items: impl Iterator<Item = Result<T, CliError>>,
    f: F,
    mut sink: S,
) -> Result<(), CliError>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync,
    S: FnMut(U) -> Result<(), CliError>,
{
    let mut items = items.peekable();
    while items.peek().is_some() {
        let chunk = items.by_ref().take(CHUNK).collect::<Result<Vec<T>, _>>()?;
        for u in chunk.into_par_iter().map(&f).collect::<Vec<U>>() {
            sink(u)?;
        }
    }
    Ok(())
}

/// Non-empty trimmed lines with their 1-based numbers.
fn text_lines(path: &Path) -> Result<impl Iterator<Item = Result<(usize, String), CliError>>, CliError> {
    let file = File::open(path).map_err(io_err(path))?;
    let p = path.to_path_buf();
    Ok(BufReader::new(file).lines().enumerate().filter_map(move |(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l.trim().to_string()))),
        Err(e) => Some(Err(io_err(&p)(e))),
    }))
}

fn ingest_summary(s: &mut Summary, ing: &IngestSummary) {
    s.push("records", ing.records);
    s.push("quarantined", ing.quarantined);
}

fn out_err(e: io::Error) -> CliError {
    CliError::Io { path: "<output>".into(), source: e }
}

fn parse_order(s: &str) -> Result<TraversalOrder, String> {
    s.parse().map_err(|e: MotifError| e.to_string())
}

/// Per-record seed derived from the run seed and the record's line number.
pub fn record_seed(seed: u64, line: usize) -> u64 {
    let mut z = seed ^ (line as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Parser)]
#[command(name = "moltok", version, about = "Motif-level molecule tokenization toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Write results here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tokenize a corpus and check that every molecule round-trips.
    Tokenize(TokenizeArgs),
    /// Assemble token (or id) sequences back into canonical SMILES.
    Detokenize(DetokenizeArgs),
    /// Build a motif vocabulary from a corpus.
    BuildVocab(CorpusArgs),
    /// Tokenize a corpus and map tokens to vocabulary ids.
    Encode(EncodeArgs),
    /// Report token-count and atom-count distributions.
    Stats(TokenizeArgs),
    /// Emit span-corrupted training instances with importance weights.
    Prepare(PrepareArgs),
    /// Score generated molecules against references.
    Eval(EvalArgs),
    /// Pick the most confident valid candidate per description.
    Ensemble(EnsembleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CorpusArgs {
    /// Input corpus.
    pub input: PathBuf,
    /// Input layout.
    #[arg(long, value_enum, default_value_t = InputFormat::SmilesLines)]
    pub format: InputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct TokenizeArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Tree traversal: dfs or bfs.
    #[arg(long, default_value = "dfs", value_parser = parse_order)]
    pub order: TraversalOrder,
}

#[derive(Debug, Clone, Args)]
pub struct DetokenizeArgs {
    /// Lines of space-separated motif keys (or ids with --ids), optionally
    /// prefixed by `id<TAB>`.
    pub input: PathBuf,
    /// Traversal the sequences were written in: dfs or bfs.
    #[arg(long, default_value = "dfs", value_parser = parse_order)]
    pub order: TraversalOrder,
    /// Read vocabulary ids instead of motif keys.
    #[arg(long)]
    pub ids: bool,
    /// Vocabulary file, needed with --ids.
    #[arg(long, env = "MOLTOK_VOCAB")]
    pub vocab: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub tokenize: TokenizeArgs,
    /// Vocabulary file.
    #[arg(long, env = "MOLTOK_VOCAB")]
    pub vocab: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    #[command(flatten)]
    pub encode: EncodeArgs,
    /// Base seed; each record uses a seed derived from it and its line.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of tokens to mask.
    #[arg(long, default_value_t = 0.15)]
    pub rate: f64,
    /// Mean masked span length.
    #[arg(long, default_value_t = 3.0)]
    pub mean_span: f64,
}

#[derive(Debug, Clone, Copy, Args)]
pub struct FingerprintArgs {
    /// Circular fingerprint radius.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: usize,
    /// Fingerprint length in bits (power of two).
    #[arg(long, default_value_t = DEFAULT_NBITS)]
    pub nbits: usize,
    /// Longest path, in bonds, for the path fingerprint.
    #[arg(long, default_value_t = DEFAULT_MAX_PATH)]
    pub max_path: usize,
}

impl From<FingerprintArgs> for FingerprintParams {
    fn from(a: FingerprintArgs) -> Self {
        FingerprintParams { radius: a.radius, nbits: a.nbits, max_path: a.max_path }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// TSV of `reference<TAB>generated`; `INVALID` marks a failed generation.
    pub input: PathBuf,
    #[command(flatten)]
    pub fingerprint: FingerprintArgs,
}

#[derive(Debug, Clone, Args)]
pub struct EnsembleArgs {
    /// JSON-lines candidate records.
    pub input: PathBuf,
    #[command(flatten)]
    pub fingerprint: FingerprintArgs,
}

/// Runs a parsed command line, writing to `--output` or stdout.
pub fn run(cli: &Cli) -> Result<Summary, CliError> {
    match &cli.output {
        Some(path) => {
            let f = File::create(path).map_err(io_err(path))?;
            let mut w = BufWriter::new(f);
            let s = dispatch(&cli.command, &mut w)?;
            w.flush().map_err(io_err(path))?;
            Ok(s)
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            let s = dispatch(&cli.command, &mut w)?;
            w.flush().map_err(out_err)?;
            Ok(s)
        }
    }
}

pub fn dispatch(cmd: &Command, out: &mut dyn Write) -> Result<Summary, CliError> {
    match cmd {
        Command::Tokenize(a) => cmd_tokenize(a, out),
        Command::Detokenize(a) => cmd_detokenize(a, out),
        Command::BuildVocab(a) => cmd_build_vocab(a, out),
        Command::Encode(a) => cmd_encode(a, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Prepare(a) => cmd_prepare(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Ensemble(a) => cmd_ensemble(a, out),
    }
}

/// Writes `id<TAB>tokens` per molecule.
pub fn cmd_tokenize(args: &TokenizeArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let path = &args.corpus.input;
    let mut ingest = Ingest::open(path, args.corpus.format)?;
    let (mut tokens, mut atoms, mut ok, mut failed, mut skipped) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for_each_ordered(
        ingest.by_ref(),
        |rec| {
            let seq = tokenize(&rec.molecule, args.order);
            let round_trip = seq.as_ref().ok().map(|s| {
                detokenize_with_report(s).is_ok_and(|(m, _)| molecules_equal(&m, &rec.molecule))
            });
            (rec, seq, round_trip)
        },
        |(rec, seq, round_trip)| {
            let seq = match seq {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("{}:{}: skipped: {e}", path.display(), rec.line);
                    skipped += 1;
                    return Ok(());
                }
            };
            tokens += seq.len();
            atoms += rec.molecule.atom_count();
            if round_trip == Some(true) {
                ok += 1;
            } else {
                log::warn!("{}:{}: round trip failed", path.display(), rec.line);
                failed += 1;
            }
            writeln!(out, "{}\t{}", rec.id, seq.to_text()).map_err(out_err)
        },
    )?;
    let mut s = Summary::default();
    ingest_summary(&mut s, &ingest.finish()?);
    s.push("untokenizable", skipped);
    s.push("tokens", tokens);
    s.push("atoms", atoms);
    s.push("roundtrip_ok", ok);
    s.push("roundtrip_failed", failed);
    let n = ok + failed;
    s.push("roundtrip_rate", format!("{:.6}", if n == 0 { 0.0 } else { ok as f64 / n as f64 }));
    Ok(s)
}

/// Splits an optional `id<TAB>` prefix off a line.
fn split_id(line: &str) -> (Option<&str>, &str) {
    match line.split_once('\t') {
        Some((id, rest)) => (Some(id), rest.trim()),
        None => (None, line),
    }
}

/// Writes `[id<TAB>]canonical SMILES` per sequence.
pub fn cmd_detokenize(args: &DetokenizeArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let vocab = match (&args.vocab, args.ids) {
        (Some(p), true) => Some(load_vocab(p)?),
        (None, true) => return Err(CliError::Usage("--ids needs --vocab or MOLTOK_VOCAB".into())),
        (_, false) => None,
    };
    let path = &args.input;
    let (mut n, mut dropped, mut capped, mut cleared) = (0usize, 0usize, 0usize, 0usize);
    for_each_ordered(
        text_lines(path)?,
        |(line, text)| {
            let (id, body) = split_id(&text);
            let seq = match &vocab {
                Some(v) => body
                    .split_whitespace()
                    .map(|t| t.parse::<u32>().map_err(|_| format!("bad id {t:?}")))
                    .collect::<Result<Vec<u32>, String>>()
                    .and_then(|ids| v.decode(&ids, args.order).map_err(|e| e.to_string())),
                None => TokenSequence::from_text(body, args.order).map_err(|e| e.to_string()),
            };
            let result = seq.and_then(|s| detokenize_with_report(&s).map_err(|e| e.to_string()));
            (line, id.map(str::to_string), result.map(|(m, r)| (canonical_form(&m), r)))
        },
        |(line, id, result)| {
            let (smiles, report) = result.map_err(|msg| record_err(path, line, msg))?;
            n += 1;
            dropped += report.dropped.len();
            capped += report.capped_slots;
            cleared += report.cleared_stereo;
            match id {
                Some(id) => writeln!(out, "{id}\t{smiles}"),
                None => writeln!(out, "{smiles}"),
            }
            .map_err(out_err)
        },
    )?;
    let mut s = Summary::default();
    s.push("sequences", n);
    s.push("dropped_tokens", dropped);
    s.push("capped_slots", capped);
    s.push("cleared_stereo", cleared);
    Ok(s)
}

fn load_vocab(path: &Path) -> Result<Vocabulary, CliError> {
    Vocabulary::load(path).map_err(|e| CliError::Format { path: path.display().to_string(), msg: e.to_string() })
}

/// Writes the vocabulary file.
pub fn cmd_build_vocab(args: &CorpusArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let path = &args.input;
    let mut ingest = Ingest::open(path, args.format)?;
    let mut builder = VocabBuilder::new();
    let mut skipped = 0;
    for_each_ordered(
        ingest.by_ref(),
        |rec| {
            let seq = tokenize(&rec.molecule, TraversalOrder::Dfs);
            (rec.line, seq.map(|s| (canonical_form(&rec.molecule), s)))
        },
        |(line, r)| {
            match r {
                Ok((canonical, seq)) => builder.add_tokens(&canonical, &seq),
                Err(e) => {
                    log::warn!("{}:{line}: skipped: {e}", path.display());
                    skipped += 1;
                }
            }
            Ok(())
        },
    )?;
    let mut s = Summary::default();
    ingest_summary(&mut s, &ingest.finish()?);
    let vocab = builder.finish().map_err(|e| CliError::Format { path: path.display().to_string(), msg: e.to_string() })?;
    vocab.write_to(&mut *out).map_err(out_err)?;
    s.push("untokenizable", skipped);
    s.push("motifs", vocab.motif_count());
    s.push("size", vocab.len());
    Ok(s)
}

fn encode_record(rec: &DescriptionRecord, order: TraversalOrder, vocab: &Vocabulary) -> Result<Vec<u32>, MotifError> {
    tokenize(&rec.molecule, order).map(|seq| vocab.encode(&seq))
}

fn join_ids(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

/// Writes `id<TAB>space-separated ids` per molecule.
pub fn cmd_encode(args: &EncodeArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let vocab = load_vocab(&args.vocab)?;
    let corpus = &args.tokenize.corpus;
    let mut ingest = Ingest::open(&corpus.input, corpus.format)?;
    let (mut tokens, mut unknown, mut skipped) = (0usize, 0usize, 0usize);
    for_each_ordered(
        ingest.by_ref(),
        |rec| {
            let ids = encode_record(&rec, args.tokenize.order, &vocab);
            (rec, ids)
        },
        |(rec, ids)| match ids {
            Ok(ids) => {
                tokens += ids.len();
                unknown += ids.iter().filter(|&&i| i == UNK_ID).count();
                writeln!(out, "{}\t{}", rec.id, join_ids(&ids)).map_err(out_err)
            }
            Err(e) => {
                log::warn!("{}:{}: skipped: {e}", corpus.input.display(), rec.line);
                skipped += 1;
                Ok(())
            }
        },
    )?;
    let mut s = Summary::default();
    ingest_summary(&mut s, &ingest.finish()?);
    s.push("untokenizable", skipped);
    s.push("tokens", tokens);
    s.push("unknown", unknown);
    Ok(s)
}

fn distribution(s: &mut Summary, name: &str, values: &mut [usize]) {
    values.sort_unstable();
    let n = values.len();
    let mean = values.iter().sum::<usize>() as f64 / n as f64;
    let median = if n % 2 == 1 { values[n / 2] as f64 } else { (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0 };
    s.push(&format!("{name}_mean"), format!("{mean:.4}"));
    s.push(&format!("{name}_min"), values[0]);
    s.push(&format!("{name}_median"), median);
    s.push(&format!("{name}_max"), values[n - 1]);
}

/// Writes `key=value` lines comparing tokens per molecule with atoms per
/// molecule.
pub fn cmd_stats(args: &TokenizeArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let path = &args.corpus.input;
    let mut ingest = Ingest::open(path, args.corpus.format)?;
    let (mut atoms, mut tokens, mut ringed, mut skipped) = (Vec::new(), Vec::new(), 0usize, 0usize);
    for_each_ordered(
        ingest.by_ref(),
        |rec| {
            let rings = perceive_rings(&rec.molecule);
            let has_ring = (0..rec.molecule.atom_count()).any(|i| rings.is_ring_atom(i));
            (rec.line, rec.molecule.atom_count(), has_ring, tokenize(&rec.molecule, args.order).map(|s| s.len()))
        },
        |(line, a, has_ring, t)| {
            match t {
                Ok(t) => {
                    atoms.push(a);
                    tokens.push(t);
                    ringed += usize::from(has_ring);
                }
                Err(e) => {
                    log::warn!("{}:{line}: skipped: {e}", path.display());
                    skipped += 1;
                }
            }
            Ok(())
        },
    )?;
    let mut s = Summary::default();
    ingest_summary(&mut s, &ingest.finish()?);
    s.push("untokenizable", skipped);
    let mut report = Summary::default();
    let n = atoms.len();
    report.push("molecules", n);
    if n > 0 {
        report.push("with_ring_fraction", format!("{:.4}", ringed as f64 / n as f64));
        let within = atoms.iter().zip(&tokens).filter(|(a, t)| t <= a).count();
        report.push("tokens_le_atoms_fraction", format!("{:.4}", within as f64 / n as f64));
        let ratio = tokens.iter().sum::<usize>() as f64 / atoms.iter().sum::<usize>() as f64;
        report.push("tokens_per_atom", format!("{ratio:.4}"));
        distribution(&mut report, "atoms", &mut atoms);
        distribution(&mut report, "tokens", &mut tokens);
    }
    for (k, v) in report.entries() {
        writeln!(out, "{k}={v}").map_err(out_err)?;
    }
    s.0.extend(report.0);
    Ok(s)
}

/// Writes one `input<TAB>target<TAB>weights` line per molecule.
pub fn cmd_prepare(args: &PrepareArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let enc = &args.encode;
    let vocab = load_vocab(&enc.vocab)?;
    let corpus = &enc.tokenize.corpus;
    let path = &corpus.input;
    let mut ingest = Ingest::open(path, corpus.format)?;
    let (mut n, mut masked, mut total, mut skipped) = (0usize, 0usize, 0usize, 0usize);
    for_each_ordered(
        ingest.by_ref(),
        |rec| {
            let line = rec.line;
            let res = encode_record(&rec, enc.tokenize.order, &vocab).map_err(|e| (true, e.to_string())).and_then(|ids| {
                let pair = span_corrupt(&ids, record_seed(args.seed, line), args.rate, args.mean_span)
                    .map_err(|e| (false, e.to_string()))?;
                let w = importance_weights(&pair.target_ids, &vocab).map_err(|e| (false, e.to_string()))?;
                Ok((ids.len(), pair.target_ids.len() - pair.spans.len(), format_instance(&pair, &w)))
            });
            (line, res)
        },
        |(line, res)| match res {
            Ok((len, m, text)) => {
                n += 1;
                total += len;
                masked += m;
                writeln!(out, "{text}").map_err(out_err)
            }
            Err((true, msg)) => {
                log::warn!("{}:{line}: skipped: {msg}", path.display());
                skipped += 1;
                Ok(())
            }
            Err((false, msg)) => Err(record_err(path, line, msg)),
        },
    )?;
    let mut s = Summary::default();
    ingest_summary(&mut s, &ingest.finish()?);
    s.push("untokenizable", skipped);
    s.push("instances", n);
    s.push("tokens", total);
    s.push("masked", masked);
    s.push("masked_fraction", format!("{:.4}", if total == 0 { 0.0 } else { masked as f64 / total as f64 }));
    Ok(s)
}

/// Parses one evaluation row. A header row yields None.
pub fn parse_eval_row(row: &str) -> Result<Option<(Generated, MolGraph)>, String> {
    let Some((reference, generated)) = row.split_once('\t') else {
        return Err("expected reference<TAB>generated".into());
    };
    let (reference, generated) = (reference.trim(), generated.trim());
    if reference.eq_ignore_ascii_case("reference") && generated.eq_ignore_ascii_case("generated") {
        return Ok(None);
    }
    let reference = parse_smiles(reference).map_err(|e| format!("reference: {e}"))?;
    let generated = if generated == INVALID_MARKER || generated.is_empty() {
        Generated::Invalid
    } else {
        parse_smiles(generated).map_or(Generated::Invalid, Generated::Valid)
    };
    Ok(Some((generated, reference)))
}

/// Writes the metric table.
pub fn cmd_eval(args: &EvalArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let path = &args.input;
    let params = FingerprintParams::from(args.fingerprint);
    let mut scores = Vec::new();
    for_each_ordered(
        text_lines(path)?,
        |(line, row)| {
            let res = parse_eval_row(&row)
                .and_then(|p| p.map(|(g, r)| score_pair(&g, &r, params).map_err(|e| e.to_string())).transpose());
            (line, res)
        },
        |(line, res)| {
            if let Some(score) = res.map_err(|msg| record_err(path, line, msg))? {
                scores.push(score);
            }
            Ok(())
        },
    )?;
    let report = EvalReport::from_scores(&scores)
        .map_err(|e| CliError::Format { path: path.display().to_string(), msg: e.to_string() })?;
    writeln!(out, "{report}").map_err(out_err)?;
    let mut s = Summary::default();
    for line in report.to_key_values().lines() {
        let (k, v) = line.split_once('=').expect("key=value");
        s.push(k, v);
    }
    Ok(s)
}

/// Writes one JSON object per input record.
pub fn cmd_ensemble(args: &EnsembleArgs, out: &mut dyn Write) -> Result<Summary, CliError> {
    let path = &args.input;
    let params = FingerprintParams::from(args.fingerprint);
    let mut counts: Vec<(String, usize)> = Vec::new();
    let mut n = 0;
    for_each_ordered(
        text_lines(path)?,
        |(line, row)| {
            let res = serde_json::from_str::<EnsembleRecord>(&row)
                .map_err(|e| e.to_string())
                .and_then(|rec| process_record(&rec, params).map_err(|e| format!("record {}: {e}", rec.id)));
            (line, res)
        },
        |(line, res)| {
            let output = res.map_err(|msg| record_err(path, line, msg))?;
            n += 1;
            match counts.iter_mut().find(|(m, _)| *m == output.winner.model) {
                Some((_, c)) => *c += 1,
                None => counts.push((output.winner.model.clone(), 1)),
            }
            let json = serde_json::to_string(&output).map_err(|e| record_err(path, line, e))?;
            writeln!(out, "{json}").map_err(out_err)
        },
    )?;
    let mut s = Summary::default();
    s.push("records", n);
    for (model, c) in counts {
        s.push(&format!("wins.{model}"), c);
    }
    Ok(s)
}
