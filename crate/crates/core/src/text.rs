//! Bengali text primitives: bundled lexicons, token filters and corpus
//! statistics.
//!
//! All text entering the toolkit is brought to Unicode NFC first. Bengali
//! has several letters (for example `য়`, `ড়`) with both a precomposed and a
//! decomposed spelling, and lexicon lookups only work when both sides agree.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::tokenize::{basic_tokenize, sentence_tokenize};

const STOPWORDS: &str = include_str!("../data/stopwords.txt");
const LETTERS: &str = include_str!("../data/letters.txt");
const PUNCTUATION: &str = include_str!("../data/punctuation.txt");

/// Canonical composed form used throughout the crate.
pub fn nfc(text: &str) -> String {
    text.nfc().collect()
}

/// Whether `c` lies in the Bengali Unicode block (U+0980..=U+09FF).
pub fn is_bengali(c: char) -> bool {
    ('\u{0980}'..='\u{09FF}').contains(&c)
}

pub fn is_bengali_digit(c: char) -> bool {
    ('\u{09E6}'..='\u{09EF}').contains(&c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LexiconKind {
    Stopwords,
    Letters,
    Punctuation,
}

impl LexiconKind {
    pub fn file_name(self) -> &'static str {
        match self {
            LexiconKind::Stopwords => "data/stopwords.txt",
            LexiconKind::Letters => "data/letters.txt",
            LexiconKind::Punctuation => "data/punctuation.txt",
        }
    }

    fn bundled(self) -> &'static str {
        match self {
            LexiconKind::Stopwords => STOPWORDS,
            LexiconKind::Letters => LETTERS,
            LexiconKind::Punctuation => PUNCTUATION,
        }
    }
}

impl fmt::Display for LexiconKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LexiconKind::Stopwords => "stopwords",
            LexiconKind::Letters => "letters",
            LexiconKind::Punctuation => "punctuation",
        })
    }
}

impl FromStr for LexiconKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stopwords" => Ok(LexiconKind::Stopwords),
            "letters" => Ok(LexiconKind::Letters),
            "punctuation" => Ok(LexiconKind::Punctuation),
            other => Err(Error::Usage(format!("unknown lexicon kind `{other}`"))),
        }
    }
}

/// A named, ordered set of NFC-normalized strings.
#[derive(Clone, Debug)]
pub struct Lexicon {
    kind: LexiconKind,
    entries: Vec<String>,
    index: HashSet<String>,
}

impl Lexicon {
    /// Loads the lexicon shipped with the crate.
    pub fn load(kind: LexiconKind) -> Result<Self> {
        Self::parse(kind, kind.file_name(), kind.bundled())
    }

    /// Loads a user-supplied lexicon file in the same line format.
    pub fn from_path(kind: LexiconKind, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = path.display().to_string();
        let bytes = std::fs::read(path).map_err(|e| Error::Lexicon {
            file: file.clone(),
            reason: e.to_string(),
        })?;
        let text = std::str::from_utf8(&bytes).map_err(|e| Error::Lexicon {
            file: file.clone(),
            reason: format!("invalid UTF-8 at byte offset {}", e.valid_up_to()),
        })?;
        Self::parse(kind, &file, text)
    }

    /// One entry per line; `#` lines and blank lines are skipped. Duplicates
    /// (after normalization) keep their first position.
    fn parse(kind: LexiconKind, file: &str, text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut index = HashSet::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.starts_with('#') {
                continue;
            }
            let entry = line.trim();
            if entry.is_empty() {
                continue;
            }
            let entry = nfc(entry);
            if kind == LexiconKind::Letters && !entry.chars().all(is_bengali) {
                return Err(Error::Lexicon {
                    file: file.to_string(),
                    reason: format!(
                        "line {}: letter `{entry}` is outside the Bengali block",
                        lineno + 1
                    ),
                });
            }
            if index.insert(entry.clone()) {
                entries.push(entry);
            }
        }
        if entries.is_empty() {
            return Err(Error::Lexicon {
                file: file.to_string(),
                reason: "no entries".into(),
            });
        }
        Ok(Lexicon {
            kind,
            entries,
            index,
        })
    }

    pub fn kind(&self) -> LexiconKind {
        self.kind
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Exact lookup after NFC normalization of `s`.
    pub fn contains(&self, s: &str) -> bool {
        self.index.contains(s) || self.index.contains(&nfc(s))
    }

    fn contains_char(&self, c: char) -> bool {
        let mut buf = [0u8; 4];
        self.contains(c.encode_utf8(&mut buf))
    }

    fn expect_kind(&self, kind: LexiconKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "expected a {kind} lexicon, got {}",
                self.kind
            )))
        }
    }
}

pub fn load_lexicon(kind: LexiconKind) -> Result<Lexicon> {
    Lexicon::load(kind)
}

/// Drops tokens that are in the stopword lexicon, keeping order.
pub fn remove_stopwords<S: AsRef<str>>(tokens: &[S], lex: &Lexicon) -> Result<Vec<String>> {
    lex.expect_kind(LexiconKind::Stopwords)?;
    Ok(tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !lex.contains(t))
        .map(str::to_owned)
        .collect())
}

/// Drops tokens made up entirely of punctuation characters. Tokens mixing
/// punctuation with other characters are kept as they are.
pub fn remove_punctuation<S: AsRef<str>>(tokens: &[S], lex: &Lexicon) -> Result<Vec<String>> {
    lex.expect_kind(LexiconKind::Punctuation)?;
    Ok(tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| t.is_empty() || !(lex.contains(t) || t.chars().all(|c| lex.contains_char(c))))
        .map(str::to_owned)
        .collect())
}

/// A token is foreign when any of its alphabetic characters lies outside
/// the Bengali block. Digits and punctuation never make a token foreign.
pub fn is_foreign(token: &str) -> bool {
    token.chars().any(|c| c.is_alphabetic() && !is_bengali(c))
}

pub fn remove_foreign_words<S: AsRef<str>>(tokens: &[S]) -> Vec<String> {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !is_foreign(t))
        .map(str::to_owned)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub documents: u64,
    pub sentences: u64,
    pub tokens: u64,
}

impl std::ops::AddAssign for CorpusStats {
    fn add_assign(&mut self, rhs: Self) {
        self.documents += rhs.documents;
        self.sentences += rhs.sentences;
        self.tokens += rhs.tokens;
    }
}

impl CorpusStats {
    /// Statistics of a single decoded document. Blank documents count as
    /// nothing.
    pub fn of_document(doc: &str) -> Self {
        if doc.trim().is_empty() {
            return CorpusStats::default();
        }
        CorpusStats {
            documents: 1,
            sentences: sentence_tokenize(doc).len() as u64,
            tokens: basic_tokenize(doc).len() as u64,
        }
    }
}

/// Counts documents, sentences and tokens over a stream of raw documents.
///
/// Invalid UTF-8 is reported with its byte offset counted from the start of
/// the stream (documents laid end to end).
pub fn corpus_stats<I, D>(corpus: I) -> Result<CorpusStats>
where
    I: IntoIterator<Item = D>,
    D: AsRef<[u8]>,
{
    let mut stats = CorpusStats::default();
    let mut consumed = 0usize;
    for doc in corpus {
        let bytes = doc.as_ref();
        let text = std::str::from_utf8(bytes).map_err(|e| Error::Utf8 {
            offset: consumed + e.valid_up_to(),
        })?;
        stats += CorpusStats::of_document(text);
        consumed += bytes.len();
    }
    Ok(stats)
}

/// Splits a corpus file into documents separated by one or more blank
/// lines.
pub fn split_documents(text: &str) -> Vec<&str> {
    let mut docs = Vec::new();
    let mut start: Option<usize> = None;
    let mut end = 0;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim().is_empty() {
            if let Some(s) = start.take() {
                docs.push(&text[s..end]);
            }
        } else {
            start.get_or_insert(offset);
            end = offset + line.len();
        }
        offset += line.len();
    }
    if let Some(s) = start {
        docs.push(&text[s..end]);
    }
    docs
}

/// Statistics of a whole corpus file (see [`split_documents`]).
pub fn corpus_stats_from_bytes(bytes: &[u8]) -> Result<CorpusStats> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Utf8 {
        offset: e.valid_up_to(),
    })?;
    corpus_stats(split_documents(text))
}
