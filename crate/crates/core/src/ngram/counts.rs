use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::corpus::{build_vocabulary, Corpus, WordVocabulary};
use crate::error::Result;
use crate::ngram::model::{NgramTable, TokenId, Vocab, BOS_ID, EOS_ID};

/// Raw n-gram counts over `<s> w1 .. wn </s>` for every order up to `order`.
///
/// Each sentence carries a single `<s>`; n-grams near the start simply have
/// shorter histories.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramCountTable {
    order: usize,
    vocab: Vocab,
    counts: Vec<NgramTable<u64>>,
}

impl NgramCountTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    /// Counts of n-grams of length `n`.
    pub fn counts(&self, n: usize) -> &NgramTable<u64> {
        &self.counts[n - 1]
    }

    pub fn get(&self, ngram: &[TokenId]) -> u64 {
        if ngram.is_empty() || ngram.len() > self.order {
            return 0;
        }
        self.counts[ngram.len() - 1].get(ngram).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts[0].is_empty()
    }
}

fn merge(mut a: Vec<NgramTable<u64>>, b: Vec<NgramTable<u64>>) -> Vec<NgramTable<u64>> {
    for (ta, tb) in a.iter_mut().zip(b) {
        for (k, c) in tb {
            *ta.entry(k).or_insert(0) += c;
        }
    }
    a
}

/// Counts n-grams up to `order`. Tokens outside `vocab` become `<unk>`; with
/// no vocabulary every corpus token is kept.
pub fn count_ngrams(corpus: &Corpus, order: usize, vocab: Option<&WordVocabulary>) -> Result<NgramCountTable> {
    if order == 0 || order > super::model::MAX_ORDER {
        return Err(crate::Error::InvalidArgument(format!(
            "order must be in 1..={}",
            super::model::MAX_ORDER
        )));
    }
    let owned;
    let words = match vocab {
        Some(v) => v,
        None => {
            owned = build_vocabulary(corpus, None)?;
            &owned
        }
    };
    let vocab = Vocab::from_words(words.words());

    let empty = || (0..order).map(|_| FxHashMap::default()).collect::<Vec<NgramTable<u64>>>();
    let counts = corpus
        .sentences()
        .par_chunks(2048)
        .map(|chunk| {
            let mut local = empty();
            let mut seq = Vec::new();
            for s in chunk {
                seq.clear();
                seq.push(BOS_ID);
                seq.extend(s.tokens().iter().map(|t| vocab.id_or_unk(t)));
                seq.push(EOS_ID);
                for n in 1..=order {
                    for w in seq.windows(n) {
                        *local[n - 1].entry(w.into()).or_insert(0) += 1;
                    }
                }
            }
            local
        })
        .reduce(empty, merge);

    Ok(NgramCountTable { order, vocab, counts })
}
