//! One interface over the two subword tokenizers, plus corpus segmentation
//! into `+`-tagged subword text.

use std::path::Path;

use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};

use crate::bpe::BpeModel;
use crate::corpus::{tagged_form, Corpus, Sentence};
use crate::error::{Error, Result};
use crate::morfseg::MorphLexicon;

#[derive(Debug, Clone, PartialEq)]
pub enum SubwordTokenizer {
    Bpe(BpeModel),
    Morfessor(MorphLexicon),
}

impl SubwordTokenizer {
    pub fn kind(&self) -> &'static str {
        match self {
            SubwordTokenizer::Bpe(_) => "bpe",
            SubwordTokenizer::Morfessor(_) => "morfessor",
        }
    }

    pub fn segment_word(&self, word: &str) -> Vec<String> {
        match self {
            SubwordTokenizer::Bpe(m) => m.encode_word(word),
            SubwordTokenizer::Morfessor(m) => m.segment_word(word),
        }
    }

    /// Alphabet plus merges for BPE, lexicon size for the segmenter.
    pub fn inventory_size(&self) -> usize {
        match self {
            SubwordTokenizer::Bpe(m) => m.inventory_size(),
            SubwordTokenizer::Morfessor(m) => m.len(),
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            SubwordTokenizer::Bpe(m) => m.to_text(),
            SubwordTokenizer::Morfessor(m) => m.to_text(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        match self {
            SubwordTokenizer::Bpe(m) => m.write(path),
            SubwordTokenizer::Morfessor(m) => m.write(path),
        }
    }

    /// Reads either file kind, telling them apart by the header line.
    pub fn read(path: impl AsRef<Path>) -> Result<SubwordTokenizer> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SubwordTokenizer::parse(&text)
    }

    pub fn parse(text: &str) -> Result<SubwordTokenizer> {
        if text.starts_with("#bpe") {
            BpeModel::parse(text).map(SubwordTokenizer::Bpe)
        } else if text.starts_with("#morfseg") {
            MorphLexicon::parse(text).map(SubwordTokenizer::Morfessor)
        } else {
            Err(Error::Format {
                line: 1,
                message: "unrecognized tokenizer header".into(),
            })
        }
    }

    /// Tagged forms for one word. With an inventory, any piece whose tagged
    /// form is missing from it is broken into single characters.
    pub fn tagged_pieces(&self, word: &str, inventory: Option<&FxHashSet<String>>) -> Vec<String> {
        let mut out = Vec::new();
        for piece in self.segment_word(word) {
            let initial = out.is_empty();
            let form = tagged_form(&piece, initial);
            match inventory {
                Some(inv) if !inv.contains(&form) => {
                    for (i, c) in piece.chars().enumerate() {
                        out.push(tagged_form(c.encode_utf8(&mut [0; 4]), initial && i == 0));
                    }
                }
                _ => out.push(form),
            }
        }
        out
    }

    /// Segments and tags every word of the corpus. Each word type is
    /// segmented once.
    pub fn segment_corpus(&self, corpus: &Corpus, inventory: Option<&FxHashSet<String>>) -> Result<Corpus> {
        let mut types: Vec<&str> = corpus.tokens().collect::<FxHashSet<_>>().into_iter().collect();
        types.sort_unstable();
        let table: FxHashMap<&str, Vec<String>> = types
            .par_iter()
            .map(|w| (*w, self.tagged_pieces(w, inventory)))
            .collect();
        let sentences = corpus
            .sentences()
            .iter()
            .map(|s| Sentence::new(s.tokens().iter().flat_map(|w| table[w.as_str()].iter().cloned()).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus::from_sentences(sentences))
    }
}

/// Both tagged forms of every character in the corpus, so any word can be
/// spelled out in an inventory that contains them.
pub fn character_forms(corpus: &Corpus) -> Vec<String> {
    let chars: std::collections::BTreeSet<char> = corpus.tokens().flat_map(str::chars).collect();
    chars
        .into_iter()
        .flat_map(|c| {
            let s = c.to_string();
            [tagged_form(&s, true), tagged_form(&s, false)]
        })
        .collect()
}
