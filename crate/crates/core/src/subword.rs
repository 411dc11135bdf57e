//! Unigram language-model subword tokenizer.
//!
//! A [`SubwordVocab`] assigns every piece an independent log-probability; a
//! segmentation scores the sum of its pieces' log-probabilities. Training
//! seeds a large candidate set from corpus substrings, then alternates EM
//! re-estimation (forward-backward over each word's segmentation lattice)
//! with likelihood-based pruning until the target size is reached.
//!
//! Word starts are marked with [`META_SYMBOL`]. Pieces may begin with the
//! marker but never contain it further in, so a segmentation never crosses
//! a word boundary.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::nfc;

/// Word-boundary marker (U+2581).
pub const META_SYMBOL: char = '\u{2581}';

/// Surface form of the optional unknown-piece entry.
pub const UNK_PIECE: &str = "<unk>";

/// Log-probability penalty below the least likely piece applied to
/// characters the vocabulary does not cover (when it has no `<unk>`).
const UNK_PENALTY: f64 = 10.0;

const HEADER_PREFIX: &str = "#unigram v1 vocab_size=";

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubwordVocab {
    pieces: Vec<(String, f64)>,
    index: HashMap<String, usize>,
    unk_id: Option<usize>,
    max_piece_chars: usize,
}

impl SubwordVocab {
    /// Builds a vocabulary from `(piece, logp)` pairs in id order.
    pub fn from_pieces(pieces: Vec<(String, f64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(pieces.len());
        let mut max_piece_chars = 0;
        for (id, (piece, logp)) in pieces.iter().enumerate() {
            if piece.is_empty() {
                return Err(Error::Format(format!("piece {id} is empty")));
            }
            if piece.contains(['\t', '\n', '\r']) {
                return Err(Error::Format(format!("piece {piece:?} contains a tab or newline")));
            }
            if piece.chars().skip(1).any(|c| c == META_SYMBOL) {
                return Err(Error::Format(format!(
                    "piece {piece:?} contains the word-boundary marker after its first character"
                )));
            }
            if !logp.is_finite() {
                return Err(Error::Format(format!("piece {piece:?} has non-finite logp {logp}")));
            }
            if index.insert(piece.clone(), id).is_some() {
                return Err(Error::Format(format!("duplicate piece {piece:?}")));
            }
            max_piece_chars = max_piece_chars.max(piece.chars().count());
        }
        let unk_id = index.get(UNK_PIECE).copied();
        Ok(SubwordVocab {
            pieces,
            index,
            unk_id,
            max_piece_chars,
        })
    }

    /// Convenience constructor from probabilities rather than log-probabilities.
    pub fn from_probs<S: AsRef<str>>(probs: &[(S, f64)]) -> Result<Self> {
        Self::from_pieces(
            probs
                .iter()
                .map(|(p, prob)| (p.as_ref().to_string(), prob.ln()))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[(String, f64)] {
        &self.pieces
    }

    pub fn piece_id(&self, piece: &str) -> Option<usize> {
        self.index.get(piece).copied()
    }

    pub fn logp(&self, id: usize) -> f64 {
        self.pieces[id].1
    }

    pub fn unk_id(&self) -> Option<usize> {
        self.unk_id
    }

    /// Score given to a single character no piece covers.
    pub fn unknown_logp(&self) -> f64 {
        match self.unk_id {
            Some(id) => self.pieces[id].1,
            None => {
                self.pieces
                    .iter()
                    .map(|(_, lp)| *lp)
                    .fold(f64::INFINITY, f64::min)
                    - UNK_PENALTY
            }
        }
    }

    /// Vocabularies that contain the bare marker also mark the first word
    /// of a text, so every word is spelled the same way wherever it occurs.
    pub fn marks_first_word(&self) -> bool {
        let mut buf = [0u8; 4];
        self.index.contains_key(&*META_SYMBOL.encode_utf8(&mut buf))
    }

    /// Σ exp(logp) over all pieces.
    pub fn total_probability(&self) -> f64 {
        self.pieces.iter().map(|(_, lp)| lp.exp()).sum()
    }

    fn renormalized(mut pieces: Vec<(String, f64)>) -> Result<Self> {
        let z = pieces
            .iter()
            .fold(f64::NEG_INFINITY, |acc, (_, lp)| log_add(acc, *lp));
        for (_, lp) in &mut pieces {
            *lp -= z;
        }
        Self::from_pieces(pieces)
    }

    /// Rewrites `text` into the marker-joined form the lattice runs over:
    /// NFC, whitespace runs collapsed, each space replaced by a marker on
    /// the following word.
    pub fn normalize(&self, text: &str) -> String {
        let normalized = nfc(text);
        let mut out = String::with_capacity(normalized.len() + 8);
        for (i, word) in normalized.split_whitespace().enumerate() {
            if i > 0 || self.marks_first_word() {
                out.push(META_SYMBOL);
            }
            out.push_str(word);
        }
        out
    }

    fn lattice<'a>(&self, text: &'a str, exclude: Option<usize>) -> Lattice<'a> {
        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let n = bounds.len() - 1;
        let unk_logp = self.unknown_logp();
        let mut starting = vec![Vec::new(); n];
        for (start, nodes) in starting.iter_mut().enumerate() {
            let mut has_single = false;
            for len in 1..=self.max_piece_chars.min(n - start) {
                let end = start + len;
                let surface = &text[bounds[start]..bounds[end]];
                if let Some(&id) = self.index.get(surface) {
                    if Some(id) == exclude {
                        continue;
                    }
                    has_single |= len == 1;
                    nodes.push(Node {
                        end,
                        piece: Some(id),
                        logp: self.pieces[id].1,
                    });
                }
            }
            if !has_single {
                nodes.insert(
                    0,
                    Node {
                        end: start + 1,
                        piece: None,
                        logp: unk_logp,
                    },
                );
            }
        }
        Lattice {
            text,
            bounds,
            starting,
        }
    }

    /// Best segmentation of an already-normalized string.
    ///
    /// Maximizes the summed log-probability; equal scores prefer fewer
    /// pieces, then the segmentation whose first differing piece is longer.
    pub fn segment(&self, normalized: &str) -> Segmentation {
        self.segment_excluding(normalized, None)
    }

    fn segment_excluding(&self, normalized: &str, exclude: Option<usize>) -> Segmentation {
        let lattice = self.lattice(normalized, exclude);
        lattice.viterbi()
    }

    /// Encodes text into piece surfaces. Characters the vocabulary does not
    /// cover come out as single-character pieces carrying their own surface,
    /// so [`decode`] still restores them.
    pub fn encode(&self, text: &str) -> Vec<String> {
        let normalized = self.normalize(text);
        self.segment(&normalized)
            .spans
            .into_iter()
            .map(|s| s.surface)
            .collect()
    }

    /// Encodes text into piece ids; uncovered characters map to the
    /// `<unk>` id, or fail when the vocabulary has none.
    pub fn encode_ids(&self, text: &str) -> Result<Vec<usize>> {
        let normalized = self.normalize(text);
        self.segment(&normalized)
            .spans
            .into_iter()
            .map(|s| match s.piece.or(self.unk_id) {
                Some(id) => Ok(id),
                None => Err(Error::Encoding(s.surface.chars().next().unwrap_or(' '))),
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{HEADER_PREFIX}{}", self.pieces.len())?;
        for (piece, logp) in &self.pieces {
            writeln!(w, "{piece}\t{logp}")?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty vocabulary file".into()))??;
        let expected: usize = header
            .strip_prefix(HEADER_PREFIX)
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad vocabulary header {header:?}")))?;
        let mut pieces = Vec::with_capacity(expected);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let (piece, logp) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("line {}: expected piece<TAB>logp", i + 2)))?;
            let logp: f64 = logp
                .parse()
                .map_err(|_| Error::Format(format!("line {}: bad logp {logp:?}", i + 2)))?;
            pieces.push((piece.to_string(), logp));
        }
        if pieces.len() != expected {
            return Err(Error::Format(format!(
                "header announces {expected} pieces, found {}",
                pieces.len()
            )));
        }
        Self::from_pieces(pieces)
    }
}

/// Concatenates pieces, turning markers back into spaces.
pub fn decode<S: AsRef<str>>(pieces: &[S]) -> String {
    let joined: String = pieces
        .iter()
        .flat_map(|p| p.as_ref().chars())
        .map(|c| if c == META_SYMBOL { ' ' } else { c })
        .collect();
    joined.trim_start_matches(' ').to_string()
}

#[derive(Clone, Copy, Debug)]
struct Node {
    end: usize,
    piece: Option<usize>,
    logp: f64,
}

struct Lattice<'a> {
    text: &'a str,
    bounds: Vec<usize>,
    /// Nodes indexed by start position (in characters).
    starting: Vec<Vec<Node>>,
}

#[derive(Clone, Copy)]
struct Best {
    score: f64,
    count: usize,
    start: usize,
    node: Node,
}

/// One piece of a segmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct Span {
    pub surface: String,
    /// `None` for an uncovered character.
    pub piece: Option<usize>,
    pub logp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    pub spans: Vec<Span>,
    pub score: f64,
}

impl Lattice<'_> {
    fn len(&self) -> usize {
        self.starting.len()
    }

    /// Piece lengths (in characters) of the best path ending at `pos`, in
    /// left-to-right order.
    fn path_lengths(best: &[Option<Best>], mut pos: usize) -> Vec<usize> {
        let mut lens = Vec::new();
        while pos > 0 {
            let b = best[pos].expect("reachable position");
            lens.push(pos - b.start);
            pos = b.start;
        }
        lens.reverse();
        lens
    }

    fn viterbi(&self) -> Segmentation {
        let n = self.len();
        let mut best: Vec<Option<Best>> = vec![None; n + 1];
        best[0] = Some(Best {
            score: 0.0,
            count: 0,
            start: 0,
            node: Node {
                end: 0,
                piece: None,
                logp: 0.0,
            },
        });
        for start in 0..n {
            let Some(from) = best[start] else { continue };
            for node in &self.starting[start] {
                let cand = Best {
                    score: from.score + node.logp,
                    count: from.count + 1,
                    start,
                    node: *node,
                };
                let replace = match best[node.end] {
                    None => true,
                    Some(cur) => match cand.score.partial_cmp(&cur.score) {
                        Some(Ordering::Greater) => true,
                        Some(Ordering::Less) | None => false,
                        Some(Ordering::Equal) => match cand.count.cmp(&cur.count) {
                            Ordering::Less => true,
                            Ordering::Greater => false,
                            Ordering::Equal => {
                                let mut a = Self::path_lengths(&best, start);
                                a.push(node.end - start);
                                let mut b = Self::path_lengths(&best, cur.start);
                                b.push(node.end - cur.start);
                                prefers_longer_first(&a, &b)
                            }
                        },
                    },
                };
                if replace {
                    best[node.end] = Some(cand);
                }
            }
        }

        let mut spans = Vec::new();
        let mut pos = n;
        while pos > 0 {
            let b = best[pos].expect("every position is reachable through single characters");
            spans.push(Span {
                surface: self.text[self.bounds[b.start]..self.bounds[pos]].to_string(),
                piece: b.node.piece,
                logp: b.node.logp,
            });
            pos = b.start;
        }
        spans.reverse();
        Segmentation {
            spans,
            score: best[n].map_or(0.0, |b| b.score),
        }
    }

    /// Log-likelihood of the string and per-node log posteriors (added into
    /// `log_counts` with weight `log_weight`).
    fn forward_backward(&self, log_weight: f64, log_counts: &mut [f64]) -> f64 {
        let n = self.len();
        let mut alpha = vec![f64::NEG_INFINITY; n + 1];
        alpha[0] = 0.0;
        for start in 0..n {
            if alpha[start] == f64::NEG_INFINITY {
                continue;
            }
            for node in &self.starting[start] {
                alpha[node.end] = log_add(alpha[node.end], alpha[start] + node.logp);
            }
        }
        let mut beta = vec![f64::NEG_INFINITY; n + 1];
        beta[n] = 0.0;
        for start in (0..n).rev() {
            for node in &self.starting[start] {
                beta[start] = log_add(beta[start], node.logp + beta[node.end]);
            }
        }
        let log_z = alpha[n];
        for start in 0..n {
            for node in &self.starting[start] {
                if let Some(id) = node.piece {
                    let post = alpha[start] + node.logp + beta[node.end] - log_z;
                    log_counts[id] = log_add(log_counts[id], post + log_weight);
                }
            }
        }
        log_z
    }

    fn first_uncovered(&self) -> Option<char> {
        self.starting.iter().enumerate().find_map(|(start, nodes)| {
            nodes
                .iter()
                .any(|n| n.piece.is_none())
                .then(|| self.text[self.bounds[start]..].chars().next().unwrap())
        })
    }
}

/// Leftmost-longest preference between two segmentations of the same span.
fn prefers_longer_first(candidate: &[usize], current: &[usize]) -> bool {
    for (a, b) in candidate.iter().zip(current) {
        if a != b {
            return a > b;
        }
    }
    false
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubwordTrainConfig {
    pub vocab_size: usize,
    pub seed_size: usize,
    pub shrink_factor: f64,
    pub max_piece_len: usize,
    pub em_iters_per_round: usize,
}

impl Default for SubwordTrainConfig {
    fn default() -> Self {
        Self::with_vocab_size(50_000)
    }
}

impl SubwordTrainConfig {
    /// Defaults scaled to a target size: eight seed candidates per final
    /// piece.
    pub fn with_vocab_size(vocab_size: usize) -> Self {
        SubwordTrainConfig {
            vocab_size,
            seed_size: 8 * vocab_size,
            shrink_factor: 0.75,
            max_piece_len: 16,
            em_iters_per_round: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::Config(format!(
                "shrink_factor must lie in (0, 1), got {}",
                self.shrink_factor
            )));
        }
        if self.vocab_size == 0 || self.max_piece_len == 0 || self.em_iters_per_round == 0 {
            return Err(Error::Config(
                "vocab_size, max_piece_len and em_iters_per_round must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Word counts of a training corpus. Words are kept unmarked together with
/// whether they opened their sentence; the marker is applied per vocabulary
/// (see [`SubwordVocab::marks_first_word`]).
#[derive(Clone, Debug, Default)]
pub struct SubwordCorpus {
    words: BTreeMap<(bool, String), u64>,
    sentences: u64,
}

impl SubwordCorpus {
    pub fn from_sentences<I, S>(sentences: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut corpus = SubwordCorpus::default();
        for s in sentences {
            let s = nfc(s.as_ref());
            let mut any = false;
            for (i, word) in s.split_whitespace().enumerate() {
                *corpus.words.entry((i == 0, word.to_string())).or_default() += 1;
                any = true;
            }
            if any {
                corpus.sentences += 1;
            }
        }
        corpus
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn sentence_count(&self) -> u64 {
        self.sentences
    }

    /// Lattice units with their counts, merged and in a fixed order.
    fn units(&self, mark_first: bool) -> Vec<(String, u64)> {
        let mut merged: BTreeMap<String, u64> = BTreeMap::new();
        for ((first, word), count) in &self.words {
            let unit = if *first && !mark_first {
                word.clone()
            } else {
                format!("{META_SYMBOL}{word}")
            };
            *merged.entry(unit).or_default() += count;
        }
        merged.into_iter().collect()
    }

    /// Distinct characters of the marked corpus.
    pub fn alphabet(&self) -> BTreeSet<char> {
        self.units(true)
            .iter()
            .flat_map(|(u, _)| u.chars())
            .collect()
    }
}

/// Initial candidate vocabulary: frequent substrings ranked by
/// frequency × length, plus every single character.
pub fn seed_vocab(corpus: &SubwordCorpus, cfg: &SubwordTrainConfig) -> Result<SubwordVocab> {
    if corpus.is_empty() {
        return Err(Error::Training("empty corpus".into()));
    }
    let mut freq: HashMap<String, u64> = HashMap::new();
    for (unit, count) in corpus.units(true) {
        let bounds: Vec<usize> = unit
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(unit.len()))
            .collect();
        let n = bounds.len() - 1;
        for start in 0..n {
            for end in start + 1..=(start + cfg.max_piece_len).min(n) {
                let sub = &unit[bounds[start]..bounds[end]];
                // The marker may only open a piece.
                if end - start > 1 && sub.chars().skip(1).any(|c| c == META_SYMBOL) {
                    break;
                }
                *freq.entry(sub.to_string()).or_default() += count;
            }
        }
    }

    let (singles, mut multi): (Vec<_>, Vec<_>) =
        freq.into_iter().partition(|(s, _)| s.chars().count() == 1);
    multi.sort_by(|(a, fa), (b, fb)| {
        let sa = fa * a.chars().count() as u64;
        let sb = fb * b.chars().count() as u64;
        sb.cmp(&sa).then_with(|| a.cmp(b))
    });
    multi.truncate(cfg.seed_size);

    let mut candidates: Vec<(String, u64)> = singles.into_iter().chain(multi).collect();
    candidates.sort_by(|(a, fa), (b, fb)| fb.cmp(fa).then_with(|| a.cmp(b)));
    SubwordVocab::renormalized(
        candidates
            .into_iter()
            .map(|(s, f)| (s, (f as f64).ln()))
            .collect(),
    )
}

/// One EM iteration. Returns the re-estimated vocabulary and the corpus
/// log-likelihood under the input vocabulary.
///
/// Pieces that no segmentation can use receive zero probability and are
/// dropped.
pub fn em_step(vocab: &SubwordVocab, corpus: &SubwordCorpus) -> Result<(SubwordVocab, f64)> {
    let mut log_counts = vec![f64::NEG_INFINITY; vocab.len()];
    let mut likelihood = 0.0;
    for (unit, count) in corpus.units(vocab.marks_first_word()) {
        let lattice = vocab.lattice(&unit, None);
        if let Some(c) = lattice.first_uncovered() {
            return Err(Error::Encoding(c));
        }
        let log_z = lattice.forward_backward((count as f64).ln(), &mut log_counts);
        likelihood += count as f64 * log_z;
    }
    let pieces = vocab
        .pieces
        .iter()
        .zip(log_counts)
        .filter(|(_, lc)| lc.is_finite())
        .map(|((p, _), lc)| (p.clone(), lc))
        .collect();
    Ok((SubwordVocab::renormalized(pieces)?, likelihood))
}

/// Corpus log-likelihood (marginal over all segmentations).
pub fn corpus_log_likelihood(vocab: &SubwordVocab, corpus: &SubwordCorpus) -> Result<f64> {
    let mut scratch = vec![f64::NEG_INFINITY; vocab.len()];
    let mut total = 0.0;
    for (unit, count) in corpus.units(vocab.marks_first_word()) {
        let lattice = vocab.lattice(&unit, None);
        if let Some(c) = lattice.first_uncovered() {
            return Err(Error::Encoding(c));
        }
        total += count as f64 * lattice.forward_backward(0.0, &mut scratch);
    }
    Ok(total)
}

/// Shrinks the vocabulary by dropping the multi-character pieces whose
/// removal costs the least corpus likelihood.
///
/// The cost of removing a piece is estimated from Viterbi piece
/// frequencies: its occurrences are re-spelled with its best segmentation
/// among the remaining pieces and the change in log-likelihood is measured
/// under the frequency-implied probabilities. Pieces that never occur in a
/// best segmentation go first. Single characters are always kept.
pub fn prune(
    vocab: &SubwordVocab,
    corpus: &SubwordCorpus,
    cfg: &SubwordTrainConfig,
) -> Result<SubwordVocab> {
    if vocab.len() <= cfg.vocab_size {
        return Ok(vocab.clone());
    }
    let mut freq = vec![0.0f64; vocab.len()];
    for (unit, count) in corpus.units(vocab.marks_first_word()) {
        for span in vocab.segment(&unit).spans {
            if let Some(id) = span.piece {
                freq[id] += count as f64;
            }
        }
    }
    let total: f64 = freq.iter().sum();
    let log_total = total.ln();

    let mut singles = Vec::new();
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for (id, (piece, _)) in vocab.pieces.iter().enumerate() {
        if piece.chars().count() == 1 {
            singles.push(id);
            continue;
        }
        if freq[id] == 0.0 {
            scored.push((id, f64::NEG_INFINITY));
            continue;
        }
        let alt = vocab.segment_excluding(piece, Some(id));
        let alt_ids: Vec<usize> = alt.spans.iter().filter_map(|s| s.piece).collect();
        let f = freq[id];
        let logprob_piece = f.ln() - log_total;
        let log_total_alt = (total + f * (alt_ids.len() as f64 - 1.0)).ln();
        let logprob_alt: f64 = alt_ids
            .iter()
            .map(|&a| (freq[a] + f).ln() - log_total_alt)
            .sum();
        scored.push((id, f * (logprob_piece - logprob_alt)));
    }
    scored.sort_by(|(ia, la), (ib, lb)| {
        lb.partial_cmp(la)
            .unwrap_or(Ordering::Equal)
            .then_with(|| vocab.pieces[*ia].0.cmp(&vocab.pieces[*ib].0))
    });

    let shrunk = (cfg.shrink_factor * vocab.len() as f64).floor() as usize;
    let target = cfg.vocab_size.max(shrunk).min(vocab.len() - 1);
    let keep_multi = target.saturating_sub(singles.len());
    let mut keep: Vec<usize> = singles;
    keep.extend(scored.iter().take(keep_multi).map(|(id, _)| *id));
    keep.sort_unstable();
    SubwordVocab::renormalized(keep.into_iter().map(|id| vocab.pieces[id].clone()).collect())
}

/// Trains a unigram vocabulary of `cfg.vocab_size` pieces on raw sentences.
pub fn train_unigram<I, S>(sentences: I, cfg: &SubwordTrainConfig) -> Result<SubwordVocab>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    cfg.validate()?;
    let corpus = SubwordCorpus::from_sentences(sentences);
    if corpus.is_empty() {
        return Err(Error::Training("empty corpus".into()));
    }
    let alphabet = corpus.alphabet().len();
    if cfg.vocab_size < alphabet {
        return Err(Error::Config(format!(
            "vocab_size {} is smaller than the {alphabet} distinct corpus characters",
            cfg.vocab_size
        )));
    }

    let mut vocab = seed_vocab(&corpus, cfg)?;
    log::info!("seeded {} candidate pieces", vocab.len());
    while vocab.len() > cfg.vocab_size {
        for _ in 0..cfg.em_iters_per_round {
            let (next, ll) = em_step(&vocab, &corpus)?;
            log::debug!("em: {} pieces, log-likelihood {ll:.4}", vocab.len());
            vocab = next;
        }
        let before = vocab.len();
        vocab = prune(&vocab, &corpus, cfg)?;
        log::info!("pruned {before} -> {} pieces", vocab.len());
        if vocab.len() >= before {
            break;
        }
    }
    let (vocab, ll) = em_step(&vocab, &corpus)?;
    log::info!("final vocabulary: {} pieces, log-likelihood {ll:.4}", vocab.len());

    let mut pieces = vocab.pieces;
    pieces.sort_by(|(a, la), (b, lb)| lb.partial_cmp(la).unwrap_or(Ordering::Equal).then_with(|| a.cmp(b)));
    SubwordVocab::from_pieces(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(probs: &[(&str, f64)]) -> SubwordVocab {
        SubwordVocab::from_probs(probs).unwrap()
    }

    #[test]
    fn rejects_bad_pieces() {
        assert!(SubwordVocab::from_probs(&[("a", 0.5), ("a", 0.5)]).is_err());
        assert!(SubwordVocab::from_probs(&[("", 1.0)]).is_err());
        assert!(SubwordVocab::from_probs(&[("a\tb", 1.0)]).is_err());
        assert!(SubwordVocab::from_probs(&[("a\u{2581}", 1.0)]).is_err());
        assert!(SubwordVocab::from_probs(&[("\u{2581}a", 1.0)]).is_ok());
    }

    #[test]
    fn encode_examples() {
        assert_eq!(vocab(&[("a", 1.0)]).encode("a"), ["a"]);
        let v = vocab(&[("a", 0.4), ("b", 0.4), ("ab", 0.2)]);
        assert_eq!(v.encode("ab"), ["ab"]);
        let v = vocab(&[("a", 0.5), ("b", 0.32), ("ab", 0.15)]);
        assert_eq!(v.encode("ab"), ["a", "b"]);
    }

    #[test]
    fn exact_tie_prefers_fewer_pieces() {
        // ln(0.25) + ln(0.25) == ln(0.0625) exactly in binary floating point.
        let v = vocab(&[("a", 0.25), ("b", 0.25), ("ab", 0.0625), ("<unk>", 0.4375)]);
        assert_eq!(v.logp(0) + v.logp(1), v.logp(2));
        assert_eq!(v.encode("ab"), ["ab"]);
    }

    #[test]
    fn exact_tie_prefers_longer_first_piece() {
        // [ab, c] and [a, bc] both score -2 with two pieces.
        let v = SubwordVocab::from_pieces(vec![
            ("a".into(), -1.0),
            ("ab".into(), -1.0),
            ("bc".into(), -1.0),
            ("c".into(), -1.0),
            ("b".into(), -5.0),
        ])
        .unwrap();
        assert_eq!(v.encode("abc"), ["ab", "c"]);
    }

    #[test]
    fn unknown_characters_keep_their_surface() {
        let v = vocab(&[("a", 0.5), ("<unk>", 0.5)]);
        assert_eq!(v.encode("axa"), ["a", "x", "a"]);
        assert_eq!(v.encode_ids("axa").unwrap(), [0, 1, 0]);
        let no_unk = vocab(&[("a", 1.0)]);
        assert!((no_unk.unknown_logp() - (-10.0)).abs() < 1e-12);
        assert!(matches!(no_unk.encode_ids("x"), Err(Error::Encoding('x'))));
    }

    #[test]
    fn marker_placement_follows_vocabulary() {
        let with_marker = vocab(&[("\u{2581}", 0.5), ("a", 0.5)]);
        assert_eq!(with_marker.normalize("  a \t a "), "\u{2581}a\u{2581}a");
        let without = vocab(&[("a", 1.0)]);
        assert_eq!(without.normalize("a  a"), "a\u{2581}a");
    }

    #[test]
    fn decode_examples() {
        assert_eq!(decode::<&str>(&[]), "");
        assert_eq!(decode(&["▁আমি", "▁ভাত"]), "আমি ভাত");
        assert_eq!(decode(&["আমি", "▁ভা", "ত"]), "আমি ভাত");
    }

    #[test]
    fn seed_contains_substrings_and_characters() {
        let corpus = SubwordCorpus::from_sentences(["aa"]);
        let cfg = SubwordTrainConfig {
            max_piece_len: 2,
            ..SubwordTrainConfig::with_vocab_size(10)
        };
        let v = seed_vocab(&corpus, &cfg).unwrap();
        for p in ["a", "aa", "\u{2581}", "\u{2581}a"] {
            assert!(v.piece_id(p).is_some(), "missing {p}");
        }
        assert!((v.total_probability() - 1.0).abs() < 1e-9);
        assert!(seed_vocab(&SubwordCorpus::default(), &cfg).is_err());
    }

    #[test]
    fn seed_ranks_by_frequency_times_length() {
        let corpus = SubwordCorpus::from_sentences(vec!["abab"; 100]);
        let cfg = SubwordTrainConfig {
            max_piece_len: 2,
            seed_size: 1,
            ..SubwordTrainConfig::with_vocab_size(10)
        };
        // "ab": 200 occurrences × 2 beats "ba": 100 × 2 and "▁a": 100 × 2.
        let v = seed_vocab(&corpus, &cfg).unwrap();
        assert!(v.piece_id("ab").is_some());
        assert!(v.piece_id("ba").is_none());
    }

    #[test]
    fn em_step_matches_enumerated_posteriors() {
        let third = 1.0 / 3.0;
        let v = vocab(&[("a", third), ("b", third), ("ab", third)]);
        let corpus = SubwordCorpus::from_sentences(["ab"]);
        let (next, ll) = em_step(&v, &corpus).unwrap();
        // P([ab]) = 1/3, P([a,b]) = 1/9 → posteriors 3/4 and 1/4.
        // Expected counts: ab 0.75, a 0.25, b 0.25 (total 1.25).
        assert!((ll - (third + third * third).ln()).abs() < 1e-12);
        let p = |s: &str| next.logp(next.piece_id(s).unwrap()).exp();
        assert!((p("ab") - 0.6).abs() < 1e-12);
        assert!((p("a") - 0.2).abs() < 1e-12);
        assert!((p("b") - 0.2).abs() < 1e-12);
    }

    #[test]
    fn em_step_forced_piece_gets_full_mass() {
        let v = vocab(&[("x", 0.1), ("y", 0.1), ("z", 0.1), ("xyz", 0.7)]);
        let corpus = SubwordCorpus::from_sentences(["xyz"]);
        let (next, _) = em_step(&v, &corpus).unwrap();
        // Posterior of [xyz] is 0.7 / (0.7 + 0.001).
        let id = next.piece_id("xyz").unwrap();
        let total_count = 0.7 / 0.701 + 3.0 * (0.001 / 0.701);
        assert!((next.logp(id).exp() * total_count - 0.7 / 0.701).abs() < 1e-12);
    }

    #[test]
    fn em_step_rejects_uncovered_characters() {
        let v = vocab(&[("a", 1.0)]);
        let corpus = SubwordCorpus::from_sentences(["ab"]);
        assert!(matches!(em_step(&v, &corpus), Err(Error::Encoding('b'))));
    }

    #[test]
    fn prune_keeps_small_vocab_and_single_characters() {
        let v = vocab(&[("a", 0.3), ("b", 0.3), ("ab", 0.2), ("ba", 0.2)]);
        let corpus = SubwordCorpus::from_sentences(vec!["abab"; 100]);
        let cfg = SubwordTrainConfig::with_vocab_size(4);
        assert_eq!(prune(&v, &corpus, &cfg).unwrap(), v);

        let cfg = SubwordTrainConfig {
            shrink_factor: 0.1,
            ..SubwordTrainConfig::with_vocab_size(2)
        };
        let pruned = prune(&v, &corpus, &cfg).unwrap();
        assert!(pruned.piece_id("a").is_some() && pruned.piece_id("b").is_some());
        assert!((pruned.total_probability() - 1.0).abs() < 1e-9);
    }

    /// Every segmentation of `s` into pieces of `probs`, as piece lists.
    fn enumerate<'a>(s: &str, probs: &[(&'a str, f64)]) -> Vec<Vec<&'a str>> {
        if s.is_empty() {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for &(piece, _) in probs {
            if let Some(rest) = s.strip_prefix(piece) {
                for mut tail in enumerate(rest, probs) {
                    tail.insert(0, piece);
                    out.push(tail);
                }
            }
        }
        out
    }

    fn brute_log_likelihood(s: &str, probs: &[(&str, f64)]) -> f64 {
        let z: f64 = probs.iter().map(|(_, p)| p).sum();
        let p = |piece: &str| probs.iter().find(|(q, _)| *q == piece).unwrap().1 / z;
        enumerate(s, probs)
            .iter()
            .map(|seg| seg.iter().map(|x| p(x)).product::<f64>())
            .sum::<f64>()
            .ln()
    }

    #[test]
    fn prune_drops_the_piece_with_the_smaller_exact_loss() {
        let corpus = SubwordCorpus::from_sentences(vec!["abab"; 100]);
        let mut v = vocab(&[("a", 0.25), ("b", 0.25), ("ab", 0.25), ("ba", 0.25)]);
        for _ in 0..3 {
            v = em_step(&v, &corpus).unwrap().0;
        }
        let probs: Vec<(&str, f64)> = v.pieces().iter().map(|(p, lp)| (p.as_str(), lp.exp())).collect();
        let full = brute_log_likelihood("abab", &probs);
        let without = |x: &str| {
            let rest: Vec<(&str, f64)> = probs.iter().copied().filter(|(p, _)| *p != x).collect();
            100.0 * (full - brute_log_likelihood("abab", &rest))
        };
        let (loss_ab, loss_ba) = (without("ab"), without("ba"));
        assert!(loss_ba < loss_ab, "ba {loss_ba} vs ab {loss_ab}");

        let cfg = SubwordTrainConfig {
            shrink_factor: 0.5,
            ..SubwordTrainConfig::with_vocab_size(3)
        };
        let pruned = prune(&v, &corpus, &cfg).unwrap();
        assert_eq!(pruned.len(), 3);
        assert!(pruned.piece_id("ab").is_some());
        assert!(pruned.piece_id("ba").is_none());
    }

    #[test]
    fn training_to_alphabet_plus_one_keeps_ab() {
        let corpus = vec!["abab"; 100];
        // Alphabet is {▁, a, b}; with two-character pieces the candidates
        // are ▁a, ab and ba.
        let cfg = SubwordTrainConfig {
            max_piece_len: 2,
            ..SubwordTrainConfig::with_vocab_size(4)
        };
        let v = train_unigram(&corpus, &cfg).unwrap();
        let mut multi: Vec<&str> = v
            .pieces()
            .iter()
            .map(|(p, _)| p.as_str())
            .filter(|p| p.chars().count() > 1)
            .collect();
        multi.sort_unstable();
        assert_eq!(v.len(), 4);
        assert_eq!(multi, ["ab"]);
        assert!((v.total_probability() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_agrees_with_em_likelihood() {
        let probs = [("a", 0.3), ("b", 0.2), ("ab", 0.4), ("ba", 0.1)];
        let v = vocab(&probs);
        let corpus = SubwordCorpus::from_sentences(["abab"]);
        let ll = corpus_log_likelihood(&v, &corpus).unwrap();
        assert!((ll - brute_log_likelihood("abab", &probs)).abs() < 1e-12);
    }

    #[test]
    fn abundant_corpus_reaches_exact_size() {
        let corpus = [
            "আমি ভাত খাই",
            "তুমি ভাত খাও",
            "সে মাছ খায়",
            "আমরা বাংলায় কথা বলি",
            "তোমরা বই পড়",
        ];
        for size in [40, 60, 80] {
            let v = train_unigram(corpus, &SubwordTrainConfig::with_vocab_size(size)).unwrap();
            assert_eq!(v.len(), size);
            assert!((v.total_probability() - 1.0).abs() < 1e-6);
        }
    }

    proptest::proptest! {
        #[test]
        fn decode_inverts_encode(words in proptest::collection::vec("[ক-ঘাি]{1,4}", 0..5), gaps in proptest::collection::vec("[ \t]{1,3}", 5)) {
            let v = train_unigram(["কখ গঘ", "কাকি খা", "ঘি"], &SubwordTrainConfig::with_vocab_size(12)).unwrap();
            let mut text = String::new();
            for (w, g) in words.iter().zip(&gaps) {
                text.push_str(g);
                text.push_str(w);
            }
            let expected = words.join(" ");
            proptest::prop_assert_eq!(decode(&v.encode(&text)), nfc(&expected));
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SubwordTrainConfig::with_vocab_size(10);
        assert!(cfg.validate().is_ok());
        cfg.shrink_factor = 1.0;
        assert!(cfg.validate().unwrap_err().is_usage());
        let cfg = SubwordTrainConfig::with_vocab_size(2);
        let err = train_unigram(["abc"], &cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "{err}");
        let err = train_unigram(Vec::<&str>::new(), &SubwordTrainConfig::with_vocab_size(5));
        assert!(matches!(err, Err(Error::Training(_))));
    }

    #[test]
    fn training_without_pruning_keeps_all_candidates() {
        let corpus = ["ab ba", "abc"];
        let cfg = SubwordTrainConfig::with_vocab_size(1000);
        let seeded = seed_vocab(&SubwordCorpus::from_sentences(corpus), &cfg).unwrap();
        let trained = train_unigram(corpus, &cfg).unwrap();
        assert_eq!(trained.len(), seeded.len());
        assert!((trained.total_probability() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn save_load_round_trip() {
        let v = train_unigram(["আমি ভাত খাই", "তুমি ভাত খাও"], &SubwordTrainConfig::with_vocab_size(20))
            .unwrap();
        let mut a = Vec::new();
        v.write(&mut a).unwrap();
        let loaded = SubwordVocab::read(&a[..]).unwrap();
        let mut b = Vec::new();
        loaded.write(&mut b).unwrap();
        assert_eq!(a, b);
        assert_eq!(loaded, v);
    }

    #[test]
    fn load_rejects_malformed_files() {
        assert!(SubwordVocab::read(&b""[..]).is_err());
        assert!(SubwordVocab::read(&b"#unigram v1 vocab_size=2\na\t-0.5\n"[..]).is_err());
        assert!(SubwordVocab::read(&b"#unigram v1 vocab_size=1\na -0.5\n"[..]).is_err());
        assert!(SubwordVocab::read(&b"#unigram v2 vocab_size=1\na\t0\n"[..]).is_err());
    }
}
