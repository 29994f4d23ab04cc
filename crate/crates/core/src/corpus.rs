//! Corpus loading, vocabularies, OOV bookkeeping and word-boundary tagging.
//!
//! A corpus file holds one sentence per line with tokens separated by single
//! spaces. Subword corpora mark every non-initial subword with a leading `+`,
//! so `meg +beszél +em` spells the single word `megbeszélem`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Prefix marking a subword that continues the previous word.
pub const CONTINUATION_MARK: char = '+';

pub fn is_reserved(token: &str) -> bool {
    token == BOS || token == EOS || token == UNK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    None,
    #[default]
    NfcLowercase,
}

impl Normalization {
    pub fn apply(self, line: &str) -> String {
        match self {
            Normalization::None => line.to_string(),
            Normalization::NfcLowercase => line.nfc().collect::<String>().to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub normalization: Normalization,
    /// The file is already segmented and tagged, so `+`-prefixed tokens are legal.
    pub subword_input: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("sentence has no tokens".into()));
        }
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("malformed token {t:?}")));
            }
            if is_reserved(t) {
                return Err(Error::InvalidArgument(format!("reserved symbol {t} in corpus text")));
            }
        }
        Ok(Sentence { tokens })
    }

    /// Parses a whitespace separated line, `None` for a blank line.
    pub fn parse(line: &str) -> Result<Option<Self>> {
        let tokens: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Ok(None);
        }
        Sentence::new(tokens).map(Some)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of source words, counting only word-initial tokens.
    pub fn word_count(&self) -> usize {
        self.tokens.iter().filter(|t| !t.starts_with(CONTINUATION_MARK)).count()
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tokens.join(" "))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    sentences: Vec<Sentence>,
    token_count: usize,
    type_count: usize,
}

impl Corpus {
    pub fn from_sentences(sentences: Vec<Sentence>) -> Self {
        let token_count = sentences.iter().map(Sentence::len).sum();
        let type_count = sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(String::as_str))
            .collect::<std::collections::HashSet<_>>()
            .len();
        Corpus {
            sentences,
            token_count,
            type_count,
        }
    }

    /// Builds a corpus from in-memory lines, applying the same validation as
    /// [`load_corpus`].
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>, options: LoadOptions) -> Result<Self> {
        let mut sentences = Vec::new();
        for (i, raw) in lines.into_iter().enumerate() {
            if let Some(s) = parse_line(raw, i + 1, options)? {
                sentences.push(s);
            }
        }
        Ok(Corpus::from_sentences(sentences))
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }

    pub fn type_count(&self) -> usize {
        self.type_count
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn word_count(&self) -> usize {
        self.sentences.iter().map(Sentence::word_count).sum()
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str))
    }

    pub fn frequencies(&self) -> HashMap<&str, u64> {
        let mut freq = HashMap::new();
        for t in self.tokens() {
            *freq.entry(t).or_insert(0) += 1;
        }
        freq
    }

    pub fn concat(&self, other: &Corpus) -> Corpus {
        let mut sentences = self.sentences.clone();
        sentences.extend(other.sentences.iter().cloned());
        Corpus::from_sentences(sentences)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.token_count * 8);
        for s in &self.sentences {
            out.push_str(&s.to_string());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for s in &self.sentences {
            writeln!(w, "{s}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn parse_line(raw: &str, line: usize, options: LoadOptions) -> Result<Option<Sentence>> {
    let text = options.normalization.apply(raw.trim_end_matches('\r'));
    let tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    if tokens.is_empty() {
        return Ok(None);
    }
    for t in &tokens {
        if is_reserved(t) {
            return Err(Error::Format {
                line,
                message: format!("reserved symbol {t} in corpus text"),
            });
        }
        if !options.subword_input && t.starts_with(CONTINUATION_MARK) {
            return Err(Error::Format {
                line,
                message: format!("token {t:?} starts with the reserved `+` mark (pass --subword-input for tagged text)"),
            });
        }
        if options.subword_input && t.len() == CONTINUATION_MARK.len_utf8() && t.starts_with(CONTINUATION_MARK) {
            return Err(Error::Format {
                line,
                message: "bare `+` continuation mark".into(),
            });
        }
    }
    Ok(Some(Sentence { tokens }))
}

pub fn load_corpus(path: impl AsRef<Path>, options: LoadOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut sentences = Vec::new();
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = std::str::from_utf8(raw).map_err(|_| Error::InvalidUtf8 { line: i + 1 })?;
        if let Some(s) = parse_line(line, i + 1, options)? {
            sentences.push(s);
        }
    }
    Ok(Corpus::from_sentences(sentences))
}

/// Frequency-ranked word list, optionally truncated to a size cap.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordVocabulary {
    entries: Vec<(String, u64)>,
    cap: Option<usize>,
    index: HashMap<String, usize>,
}

impl WordVocabulary {
    /// Orders by frequency descending, breaking ties lexicographically, then
    /// truncates to `cap`.
    pub fn from_counts(counts: impl IntoIterator<Item = (String, u64)>, cap: Option<usize>) -> Self {
        let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        if let Some(cap) = cap {
            entries.truncate(cap);
        }
        Self::from_entries(entries, cap)
    }

    fn from_entries(entries: Vec<(String, u64)>, cap: Option<usize>) -> Self {
        let index = entries.iter().enumerate().map(|(i, (w, _))| (w.clone(), i)).collect();
        WordVocabulary { entries, cap, index }
    }

    pub fn entries(&self) -> &[(String, u64)] {
        &self.entries
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn frequency(&self, word: &str) -> Option<u64> {
        self.index.get(word).map(|&i| self.entries[i].1)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(w, _)| w.as_str())
    }

    /// Appends `extra` words not already present, keeping the existing order,
    /// and applies `cap` to the combined list.
    pub fn extended(&self, extra: &WordVocabulary, cap: Option<usize>) -> WordVocabulary {
        let mut entries = self.entries.clone();
        for (w, f) in &extra.entries {
            if !self.contains(w) {
                entries.push((w.clone(), *f));
            }
        }
        if let Some(cap) = cap {
            entries.truncate(cap);
        }
        Self::from_entries(entries, cap)
    }

    /// `word<TAB>frequency` lines in canonical order.
    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(w, f)| format!("{w}\t{f}\n")).collect()
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<WordVocabulary> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<WordVocabulary> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (w, f) = line.split_once('\t').ok_or_else(|| Error::Format {
                line: i + 1,
                message: "expected word<TAB>frequency".into(),
            })?;
            let f: u64 = f.trim().parse().map_err(|_| Error::Format {
                line: i + 1,
                message: format!("bad frequency {f:?}"),
            })?;
            entries.push((w.to_string(), f));
        }
        Ok(Self::from_entries(entries, None))
    }
}

pub fn build_vocabulary(corpus: &Corpus, cap: Option<usize>) -> Result<WordVocabulary> {
    if cap == Some(0) {
        return Err(Error::InvalidArgument("vocabulary cap must be at least 1".into()));
    }
    let counts = corpus.frequencies().into_iter().map(|(w, f)| (w.to_string(), f));
    Ok(WordVocabulary::from_counts(counts, cap))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OovStatistics {
    pub oov_tokens: usize,
    pub oov_rate: f64,
    pub oov_types: BTreeSet<String>,
}

pub fn oov_statistics(vocab: &WordVocabulary, test: &Corpus) -> Result<OovStatistics> {
    if test.token_count() == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    let mut oov_tokens = 0;
    let mut oov_types = BTreeSet::new();
    for t in test.tokens() {
        if !vocab.contains(t) {
            oov_tokens += 1;
            oov_types.insert(t.to_string());
        }
    }
    Ok(OovStatistics {
        oov_tokens,
        oov_rate: oov_tokens as f64 / test.token_count() as f64,
        oov_types,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaggedToken {
    pub surface: String,
    pub word_initial: bool,
}

impl TaggedToken {
    pub fn parse(form: &str) -> TaggedToken {
        match form.strip_prefix(CONTINUATION_MARK) {
            Some(rest) => TaggedToken {
                surface: rest.to_string(),
                word_initial: false,
            },
            None => TaggedToken {
                surface: form.to_string(),
                word_initial: true,
            },
        }
    }
}

impl fmt::Display for TaggedToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.word_initial {
            write!(f, "{CONTINUATION_MARK}")?;
        }
        f.write_str(&self.surface)
    }
}

/// Serialized tagged form of one subword.
pub fn tagged_form(subword: &str, word_initial: bool) -> String {
    if word_initial {
        subword.to_string()
    } else {
        format!("{CONTINUATION_MARK}{subword}")
    }
}

pub fn tag_boundaries<W, S>(segmented_words: &[(W, Vec<S>)]) -> Result<Vec<TaggedToken>>
where
    W: AsRef<str>,
    S: AsRef<str>,
{
    let mut out = Vec::new();
    for (word, pieces) in segmented_words {
        let word = word.as_ref();
        let joined: String = pieces.iter().map(AsRef::as_ref).collect();
        if pieces.is_empty() || joined != word || pieces.iter().any(|p| p.as_ref().is_empty()) {
            return Err(Error::SegmentationMismatch { word: word.to_string() });
        }
        out.extend(pieces.iter().enumerate().map(|(i, p)| TaggedToken {
            surface: p.as_ref().to_string(),
            word_initial: i == 0,
        }));
    }
    Ok(out)
}

pub fn detag_boundaries(tagged: &[TaggedToken]) -> Result<Vec<String>> {
    let mut words: Vec<String> = Vec::new();
    for t in tagged {
        if t.word_initial {
            words.push(t.surface.clone());
        } else {
            words.last_mut().ok_or(Error::DanglingContinuation)?.push_str(&t.surface);
        }
    }
    Ok(words)
}

/// Joins tagged tokens into their serialized, space separated form.
pub fn serialize_tagged(tagged: &[TaggedToken]) -> String {
    tagged.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

/// Rebuilds the word-level corpus from a tagged subword corpus.
pub fn detag_corpus(corpus: &Corpus) -> Result<Corpus> {
    let sentences = corpus
        .sentences()
        .iter()
        .map(|s| {
            let tagged: Vec<TaggedToken> = s.tokens().iter().map(|t| TaggedToken::parse(t)).collect();
            Sentence::new(detag_boundaries(&tagged)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::from_sentences(sentences))
}

/// Picks a sentence uniformly, then a prefix length uniformly in
/// `[min_len, min(max_len, sentence length)]`.
///
/// Sentences shorter than `min_len` yield the whole sentence.
pub fn sample_prefix<R: Rng + ?Sized>(corpus: &Corpus, rng: &mut R, min_len: usize, max_len: usize) -> Result<Vec<String>> {
    if min_len == 0 || min_len > max_len {
        return Err(Error::InvalidArgument(format!(
            "prefix length range [{min_len}, {max_len}] is invalid"
        )));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let sentence = &corpus.sentences[rng.gen_range(0..corpus.sentences.len())];
    let upper = max_len.min(sentence.len());
    let lower = min_len.min(upper);
    let len = rng.gen_range(lower..=upper);
    Ok(sentence.tokens[..len].to_vec())
}
