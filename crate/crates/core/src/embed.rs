//! Skip-gram word embeddings trained with negative sampling, with an
//! optional character n-gram mode for composing vectors of unseen words.
//!
//! In subword mode a word's input vector is the mean of its own row and
//! the rows of its hashed character n-grams (`<` and `>` mark the word
//! edges). The n-gram rows live after the word rows in the input matrix.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const NOISE_EXPONENT: f64 = 0.75;
const FINAL_LR_FRACTION: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedMode {
    Word,
    Subword,
}

impl FromStr for EmbedMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "word" => Ok(EmbedMode::Word),
            "subword" => Ok(EmbedMode::Subword),
            other => Err(Error::Config(format!("unknown embedding mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for EmbedMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EmbedMode::Word => "word",
            EmbedMode::Subword => "subword",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbedTrainConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub lr: f64,
    pub epochs: usize,
    /// Caps the number of center positions processed over all epochs.
    pub max_steps: Option<u64>,
    pub negatives: usize,
    pub mode: EmbedMode,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: usize,
    pub seed: u64,
    /// More than one thread updates the shared matrices without locking;
    /// results are then no longer reproducible.
    pub threads: usize,
}

impl Default for EmbedTrainConfig {
    fn default() -> Self {
        EmbedTrainConfig {
            dim: 300,
            window: 5,
            min_count: 1,
            lr: 0.05,
            epochs: 5,
            max_steps: None,
            negatives: 5,
            mode: EmbedMode::Word,
            min_n: 3,
            max_n: 6,
            buckets: 1 << 21,
            seed: 1,
            threads: 1,
        }
    }
}

impl EmbedTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if self.window == 0 {
            return fail("window must be at least 1");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail("lr must be positive");
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return fail("need 0 < min_n <= max_n");
        }
        if self.mode == EmbedMode::Subword && self.buckets == 0 {
            return fail("subword mode needs at least one bucket");
        }
        if self.threads == 0 {
            return fail("threads must be at least 1");
        }
        Ok(())
    }

    fn buckets_for_mode(&self) -> usize {
        match self.mode {
            EmbedMode::Word => 0,
            EmbedMode::Subword => self.buckets,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbedVocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl EmbedVocab {
    fn from_entries(entries: Vec<(String, u64)>) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, (w, _)) in entries.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary word `{w}`")));
            }
        }
        let (words, counts) = entries.into_iter().unzip();
        Ok(EmbedVocab {
            words,
            counts,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn count(&self, id: usize) -> u64 {
        self.counts[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Noise distribution for negative sampling, proportional to count^0.75.
#[derive(Clone, Debug)]
pub struct NoiseDistribution {
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

impl NoiseDistribution {
    pub fn new(counts: &[u64]) -> Result<Self> {
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| (c as f64).powf(NOISE_EXPONENT))
            .collect();
        let total: f64 = weights.iter().sum();
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::Training(format!("noise distribution: {e}")))?;
        Ok(NoiseDistribution {
            probs: weights.iter().map(|w| w / total).collect(),
            sampler,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }
}

/// Counts words and keeps those seen at least `min_count` times, most
/// frequent first (ties alphabetical).
pub fn build_vocab<S: AsRef<str>>(
    corpus: &[Vec<S>],
    cfg: &EmbedTrainConfig,
) -> Result<(EmbedVocab, NoiseDistribution)> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for token in corpus.iter().flatten() {
        *counts.entry(token.as_ref()).or_default() += 1;
    }
    if counts.is_empty() {
        return Err(Error::Training("empty corpus".into()));
    }
    let mut entries: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= cfg.min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    if entries.is_empty() {
        return Err(Error::Training(format!(
            "no word occurs at least {} times",
            cfg.min_count
        )));
    }
    entries.sort_by(|(a, ca), (b, cb)| cb.cmp(ca).then_with(|| a.cmp(b)));
    let vocab = EmbedVocab::from_entries(entries)?;
    let noise = NoiseDistribution::new(&vocab.counts)?;
    Ok((vocab, noise))
}

/// Character n-grams of `<word>` with lengths in `min_n..=max_n`, ordered by
/// start position then length. The full wrapped word is not included.
pub fn subword_ngrams(word: &str, min_n: usize, max_n: usize) -> Vec<String> {
    let wrapped: Vec<char> = std::iter::once('<')
        .chain(word.chars())
        .chain(std::iter::once('>'))
        .collect();
    let len = wrapped.len();
    let mut out = Vec::new();
    for start in 0..len {
        for n in min_n..=max_n {
            let end = start + n;
            if end > len {
                break;
            }
            if n == len {
                continue;
            }
            if n == 1 && (start == 0 || end == len) {
                continue;
            }
            out.push(wrapped[start..end].iter().collect());
        }
    }
    out
}

/// 32-bit FNV-1a over the UTF-8 bytes.
pub fn fnv1a(s: &str) -> u32 {
    let mut h: u32 = 0x811c_9dc5;
    for &b in s.as_bytes() {
        h ^= u32::from(b);
        h = h.wrapping_mul(0x0100_0193);
    }
    h
}

fn ngram_rows(word: &str, vocab_len: usize, min_n: usize, max_n: usize, buckets: usize) -> Vec<usize> {
    subword_ngrams(word, min_n, max_n)
        .iter()
        .map(|g| vocab_len + (fnv1a(g) as usize % buckets))
        .collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x) without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one (center, context) pair:
/// −ln σ(u_ctx·v) − Σ ln σ(−u_neg·v).
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    softplus(-dot(context, center))
        + negatives
            .iter()
            .map(|u| softplus(dot(u, center)))
            .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairGradient {
    pub loss: f64,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

/// Loss and gradient of [`pair_loss`] with respect to every vector.
pub fn pair_gradient(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> PairGradient {
    let pos_score = dot(context, center);
    let g_pos = sigmoid(pos_score) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|u| g_pos * u).collect();
    let d_context = center.iter().map(|v| g_pos * v).collect();
    let mut loss = softplus(-pos_score);
    let mut d_negatives = Vec::with_capacity(negatives.len());
    for u in negatives {
        let s = dot(u, center);
        let g = sigmoid(s);
        loss += softplus(s);
        for (dc, ui) in d_center.iter_mut().zip(u.iter()) {
            *dc += g * ui;
        }
        d_negatives.push(center.iter().map(|v| g * v).collect());
    }
    PairGradient {
        loss,
        center: d_center,
        context: d_context,
        negatives: d_negatives,
    }
}

/// Row-major f32 matrix whose cells may be updated from several threads.
/// Relaxed atomics make unsynchronized (lossy) updates well-defined.
struct SharedMatrix {
    cells: Vec<AtomicU32>,
    dim: usize,
}

impl SharedMatrix {
    fn from_values(values: Vec<f32>, dim: usize) -> Self {
        SharedMatrix {
            cells: values.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
            dim,
        }
    }

    fn read_row(&self, row: usize, out: &mut [f64]) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (o, c) in out.iter_mut().zip(cells) {
            *o = f64::from(f32::from_bits(c.load(Ordering::Relaxed)));
        }
    }

    fn add_to_row(&self, row: usize, delta: &[f64], scale: f64) {
        let cells = &self.cells[row * self.dim..(row + 1) * self.dim];
        for (c, d) in cells.iter().zip(delta) {
            let v = f32::from_bits(c.load(Ordering::Relaxed));
            c.store(((f64::from(v) + scale * d) as f32).to_bits(), Ordering::Relaxed);
        }
    }

    fn into_values(self) -> Vec<f32> {
        self.cells
            .into_iter()
            .map(|c| f32::from_bits(c.into_inner()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingModel {
    vocab: EmbedVocab,
    mode: EmbedMode,
    dim: usize,
    buckets: usize,
    min_n: usize,
    max_n: usize,
    /// (|V| + buckets) × dim.
    input: Vec<f32>,
    /// |V| × dim.
    output: Vec<f32>,
}

struct Trainer<'a> {
    input: SharedMatrix,
    output: SharedMatrix,
    noise: &'a NoiseDistribution,
    center_rows: Vec<Vec<usize>>,
    cfg: &'a EmbedTrainConfig,
    planned_steps: u64,
    steps: AtomicU64,
}

struct Scratch {
    center: Vec<f64>,
    context: Vec<f64>,
    negatives: Vec<Vec<f64>>,
    negative_ids: Vec<usize>,
    row: Vec<f64>,
}

impl Trainer<'_> {
    fn run_worker(&self, sentences: &[Vec<usize>], epochs: usize, rng: &mut ChaCha8Rng) {
        let dim = self.cfg.dim;
        let mut scratch = Scratch {
            center: vec![0.0; dim],
            context: vec![0.0; dim],
            negatives: Vec::new(),
            negative_ids: Vec::new(),
            row: vec![0.0; dim],
        };
        for _ in 0..epochs {
            for sentence in sentences {
                for pos in 0..sentence.len() {
                    let step = self.steps.fetch_add(1, Ordering::Relaxed);
                    if step >= self.planned_steps {
                        return;
                    }
                    let progress = step as f64 / self.planned_steps as f64;
                    let lr = self.cfg.lr * (1.0 - (1.0 - FINAL_LR_FRACTION) * progress);
                    let reach = rng.gen_range(1..=self.cfg.window);
                    let lo = pos.saturating_sub(reach);
                    let hi = (pos + reach).min(sentence.len() - 1);
                    for ctx_pos in lo..=hi {
                        if ctx_pos == pos {
                            continue;
                        }
                        self.update(sentence[pos], sentence[ctx_pos], lr, rng, &mut scratch);
                    }
                }
            }
        }
    }

    fn update(&self, center: usize, context: usize, lr: f64, rng: &mut ChaCha8Rng, s: &mut Scratch) {
        let rows = &self.center_rows[center];
        s.center.iter_mut().for_each(|x| *x = 0.0);
        for &r in rows {
            self.input.read_row(r, &mut s.row);
            for (c, v) in s.center.iter_mut().zip(&s.row) {
                *c += v;
            }
        }
        let inv = 1.0 / rows.len() as f64;
        s.center.iter_mut().for_each(|x| *x *= inv);

        self.output.read_row(context, &mut s.context);
        s.negative_ids.clear();
        for _ in 0..self.cfg.negatives {
            let neg = self.noise.sample(rng);
            if neg != context {
                s.negative_ids.push(neg);
            }
        }
        s.negatives.resize_with(s.negative_ids.len(), || vec![0.0; self.cfg.dim]);
        for (buf, &id) in s.negatives.iter_mut().zip(&s.negative_ids) {
            self.output.read_row(id, buf);
        }
        let negs: Vec<&[f64]> = s.negatives.iter().map(Vec::as_slice).collect();
        let grad = pair_gradient(&s.center, &s.context, &negs);

        self.output.add_to_row(context, &grad.context, -lr);
        for (&id, g) in s.negative_ids.iter().zip(&grad.negatives) {
            self.output.add_to_row(id, g, -lr);
        }
        for &r in rows {
            self.input.add_to_row(r, &grad.center, -lr * inv);
        }
    }
}

/// Maps tokens to vocabulary ids, dropping out-of-vocabulary tokens.
fn index_corpus<S: AsRef<str>>(corpus: &[Vec<S>], vocab: &EmbedVocab) -> Vec<Vec<usize>> {
    corpus
        .iter()
        .map(|s| s.iter().filter_map(|t| vocab.id(t.as_ref())).collect::<Vec<_>>())
        .filter(|s: &Vec<usize>| !s.is_empty())
        .collect()
}

/// Trains a skip-gram model on tokenized sentences.
pub fn train_skipgram<S: AsRef<str>>(corpus: &[Vec<S>], cfg: &EmbedTrainConfig) -> Result<EmbeddingModel> {
    cfg.validate()?;
    let (vocab, noise) = build_vocab(corpus, cfg)?;
    let buckets = cfg.buckets_for_mode();
    let n_words = vocab.len();
    let dim = cfg.dim;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 0.5 / dim as f32;
    let input: Vec<f32> = (0..(n_words + buckets) * dim)
        .map(|_| init_rng.gen_range(-bound..bound))
        .collect();
    let output = vec![0.0f32; n_words * dim];

    let center_rows: Vec<Vec<usize>> = (0..n_words)
        .map(|id| {
            let mut rows = vec![id];
            if cfg.mode == EmbedMode::Subword {
                rows.extend(ngram_rows(vocab.word(id), n_words, cfg.min_n, cfg.max_n, buckets));
            }
            rows
        })
        .collect();

    let sentences = index_corpus(corpus, &vocab);
    let tokens: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let full = tokens * cfg.epochs as u64;
    let planned_steps = cfg.max_steps.map_or(full, |m| m.min(full));

    let trainer = Trainer {
        input: SharedMatrix::from_values(input, dim),
        output: SharedMatrix::from_values(output, dim),
        noise: &noise,
        center_rows,
        cfg,
        planned_steps,
        steps: AtomicU64::new(0),
    };

    if cfg.threads == 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        trainer.run_worker(&sentences, cfg.epochs, &mut rng);
    } else {
        let chunk = sentences.len().div_ceil(cfg.threads).max(1);
        std::thread::scope(|scope| {
            for (t, part) in sentences.chunks(chunk).enumerate() {
                let trainer = &trainer;
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(t as u64 + 1);
                    trainer.run_worker(part, cfg.epochs, &mut rng);
                });
            }
        });
    }
    log::info!(
        "trained {} words for {} steps",
        n_words,
        trainer.steps.load(Ordering::Relaxed).min(planned_steps)
    );

    let model = EmbeddingModel {
        vocab,
        mode: cfg.mode,
        dim,
        buckets,
        min_n: cfg.min_n,
        max_n: cfg.max_n,
        input: trainer.input.into_values(),
        output: trainer.output.into_values(),
    };
    if !model.is_finite() {
        return Err(Error::Training(
            "non-finite weights after training; lower the learning rate".into(),
        ));
    }
    Ok(model)
}

/// Cosine of the angle between two vectors.
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64> {
    let (mut ab, mut aa, mut bb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

const HEADER_PREFIX: &str = "#embed v1 ";

impl EmbeddingModel {
    pub fn vocab(&self) -> &EmbedVocab {
        &self.vocab
    }

    pub fn mode(&self) -> EmbedMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    pub fn input_row(&self, row: usize) -> &[f32] {
        &self.input[row * self.dim..(row + 1) * self.dim]
    }

    pub fn output_row(&self, row: usize) -> &[f32] {
        &self.output[row * self.dim..(row + 1) * self.dim]
    }

    /// Input-matrix row of a character n-gram.
    pub fn ngram_row(&self, ngram: &str) -> Option<&[f32]> {
        (self.buckets > 0)
            .then(|| self.input_row(self.vocab.len() + fnv1a(ngram) as usize % self.buckets))
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }

    fn mean_of_rows(&self, rows: &[usize]) -> Vec<f32> {
        let mut acc = vec![0.0f64; self.dim];
        for &r in rows {
            for (a, &x) in acc.iter_mut().zip(self.input_row(r)) {
                *a += f64::from(x);
            }
        }
        let n = rows.len() as f64;
        acc.into_iter().map(|a| (a / n) as f32).collect()
    }

    /// Vector of `word`: its trained row in word mode; the mean of its row
    /// and n-gram rows in subword mode, or of the n-gram rows alone for an
    /// unseen word.
    pub fn word_vector(&self, word: &str) -> Result<Vec<f32>> {
        let id = self.vocab.id(word);
        match (self.mode, id) {
            (EmbedMode::Word, Some(id)) => Ok(self.input_row(id).to_vec()),
            (EmbedMode::Word, None) => Err(Error::NotInVocabulary(word.to_string())),
            (EmbedMode::Subword, _) => {
                let mut rows: Vec<usize> = id.into_iter().collect();
                rows.extend(ngram_rows(word, self.vocab.len(), self.min_n, self.max_n, self.buckets));
                if rows.is_empty() {
                    return Err(Error::NotInVocabulary(word.to_string()));
                }
                Ok(self.mean_of_rows(&rows))
            }
        }
    }

    /// The `k` vocabulary words closest to `word` by cosine similarity,
    /// excluding `word` itself. Candidates whose vector has zero norm score 0.
    pub fn most_similar(&self, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
        if k == 0 {
            return Ok(Vec::new());
        }
        let query = self.word_vector(word)?;
        if query.iter().all(|&x| x == 0.0) {
            return Err(Error::UndefinedSimilarity);
        }
        let mut scored = Vec::with_capacity(self.vocab.len());
        for candidate in self.vocab.words() {
            if candidate == word {
                continue;
            }
            let v = self.word_vector(candidate)?;
            let sim = match cosine_similarity(&query, &v) {
                Ok(s) => s,
                Err(Error::UndefinedSimilarity) => 0.0,
                Err(e) => return Err(e),
            };
            scored.push((candidate.clone(), sim));
        }
        scored.sort_by(|(wa, sa), (wb, sb)| {
            sb.partial_cmp(sa)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| wa.cmp(wb))
        });
        scored.truncate(k);
        Ok(scored)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{HEADER_PREFIX}mode={} dim={} vocab={} buckets={} min_n={} max_n={}",
            self.mode,
            self.dim,
            self.vocab.len(),
            self.buckets,
            self.min_n,
            self.max_n
        )?;
        for (word, count) in self.vocab.words.iter().zip(&self.vocab.counts) {
            writeln!(w, "{word}\t{count}")?;
        }
        for x in self.input.iter().chain(&self.output) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let fields = header
            .trim_end_matches('\n')
            .strip_prefix(HEADER_PREFIX)
            .ok_or_else(|| Error::Format(format!("bad embedding header {header:?}")))?;
        let mut kv: HashMap<&str, &str> = HashMap::new();
        for field in fields.split(' ') {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header field {field:?}")))?;
            kv.insert(k, v);
        }
        let get = |key: &str| -> Result<&str> {
            kv.get(key)
                .copied()
                .ok_or_else(|| Error::Format(format!("header lacks `{key}`")))
        };
        let num = |key: &str| -> Result<usize> {
            get(key)?
                .parse()
                .map_err(|_| Error::Format(format!("header field `{key}` is not a number")))
        };
        let mode: EmbedMode = get("mode")?.parse().map_err(|_| Error::Format("bad mode".into()))?;
        let (dim, n, buckets) = (num("dim")?, num("vocab")?, num("buckets")?);
        let (min_n, max_n) = (num("min_n")?, num("max_n")?);
        if dim == 0 {
            return Err(Error::Format("dim must be positive".into()));
        }

        let mut entries = Vec::with_capacity(n);
        let mut line = String::new();
        for i in 0..n {
            line.clear();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Format(format!("vocabulary ends after {i} of {n} words")));
            }
            let (word, count) = line
                .trim_end_matches('\n')
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("vocabulary line {}: expected word<TAB>count", i + 2)))?;
            let count = count
                .parse()
                .map_err(|_| Error::Format(format!("vocabulary line {}: bad count", i + 2)))?;
            entries.push((word.to_string(), count));
        }
        let vocab = EmbedVocab::from_entries(entries)?;

        let read_block = |r: &mut R, len: usize| -> Result<Vec<f32>> {
            let mut bytes = vec![0u8; len * 4];
            r.read_exact(&mut bytes)
                .map_err(|_| Error::Format("truncated matrix block".into()))?;
            Ok(bytes
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect())
        };
        let input = read_block(&mut r, (n + buckets) * dim)?;
        let output = read_block(&mut r, n * dim)?;
        let mut rest = Vec::new();
        r.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", rest.len())));
        }
        Ok(EmbeddingModel {
            vocab,
            mode,
            dim,
            buckets,
            min_n,
            max_n,
            input,
            output,
        })
    }
}
