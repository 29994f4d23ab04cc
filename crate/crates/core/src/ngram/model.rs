use rustc_hash::{FxHashMap, FxHashSet};

use crate::corpus::{Corpus, Sentence, BOS, EOS, UNK};
use crate::error::{Error, Result};
use crate::ngram::kn::DiscountSet;

pub type TokenId = u32;

pub const BOS_ID: TokenId = 0;
pub const EOS_ID: TokenId = 1;
pub const UNK_ID: TokenId = 2;

/// log10 probability used for impossible events (`<s>` as a prediction).
pub const LOG_ZERO: f64 = -99.0;

/// Longest n-gram order the fixed-size key buffers support.
pub const MAX_ORDER: usize = 9;

pub type NgramKey = Box<[TokenId]>;
pub type NgramTable<V> = FxHashMap<NgramKey, V>;

/// Token interning with the sentence markers and `<unk>` at fixed ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: FxHashMap<String, TokenId>,
}

impl Default for Vocab {
    fn default() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: FxHashMap::default(),
        };
        for s in [BOS, EOS, UNK] {
            v.insert(s);
        }
        v
    }
}

impl Vocab {
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab::default();
        for w in words {
            v.insert(w);
        }
        v
    }

    pub fn insert(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn id_or_unk(&self, token: &str) -> TokenId {
        self.id(token).unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Number of tokens including `<s>`, `</s>` and `<unk>`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Tokens a model can predict: everything but `<s>`.
    pub fn predictable(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.tokens.len() as TokenId).filter(|&id| id != BOS_ID)
    }

    /// Vocabulary size without the three special symbols.
    pub fn word_inventory(&self) -> usize {
        self.tokens.len() - 3
    }

    pub fn same_tokens(&self, other: &Vocab) -> bool {
        self.len() == other.len() && self.tokens.iter().all(|t| other.contains(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramEntry {
    /// log10 P(w | h)
    pub logprob: f64,
    /// log10 of the backoff weight for this n-gram used as a context.
    pub backoff: f64,
}

impl NgramEntry {
    pub fn new(logprob: f64) -> Self {
        NgramEntry { logprob, backoff: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceScore {
    pub logprob: f64,
    /// Scored events: every token plus `</s>`.
    pub events: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerplexityMode {
    PerToken,
    /// Normalizes by source words (tokens without a `+` mark) plus sentence ends.
    #[default]
    PerWord,
}

/// Back-off n-gram model with log10 probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BackoffModel {
    order: usize,
    vocab: Vocab,
    /// `tables[n - 1]` holds the n-grams.
    tables: Vec<NgramTable<NgramEntry>>,
    discounts: Option<DiscountSet>,
}

pub(crate) fn log10_or_zero(p: f64) -> f64 {
    if p > 0.0 {
        p.log10().max(LOG_ZERO)
    } else {
        LOG_ZERO
    }
}

pub(crate) fn to_prob(logprob: f64) -> f64 {
    if logprob <= LOG_ZERO {
        0.0
    } else {
        10f64.powf(logprob)
    }
}

impl BackoffModel {
    pub fn from_parts(order: usize, vocab: Vocab, tables: Vec<NgramTable<NgramEntry>>) -> Result<Self> {
        if order == 0 || order > MAX_ORDER {
            return Err(Error::InvalidArgument(format!("order must be in 1..={MAX_ORDER}")));
        }
        if tables.len() != order {
            return Err(Error::Inconsistent(format!("{} tables for order {order}", tables.len())));
        }
        Ok(BackoffModel {
            order,
            vocab,
            tables,
            discounts: None,
        })
    }

    pub(crate) fn with_discounts(mut self, discounts: DiscountSet) -> Self {
        self.discounts = Some(discounts);
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn discounts(&self) -> Option<&DiscountSet> {
        self.discounts.as_ref()
    }

    pub fn table(&self, n: usize) -> &NgramTable<NgramEntry> {
        &self.tables[n - 1]
    }

    pub(crate) fn table_mut(&mut self, n: usize) -> &mut NgramTable<NgramEntry> {
        &mut self.tables[n - 1]
    }

    pub fn entry(&self, ngram: &[TokenId]) -> Option<&NgramEntry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        self.tables[ngram.len() - 1].get(ngram)
    }

    pub fn entry_count(&self, n: usize) -> usize {
        self.tables[n - 1].len()
    }

    pub fn total_entries(&self) -> usize {
        self.tables.iter().map(|t| t.len()).sum()
    }

    /// log10 P(w | history) following the back-off chain; only the last
    /// `order - 1` history tokens matter.
    pub fn logprob(&self, history: &[TokenId], w: TokenId) -> f64 {
        let k_max = history.len().min(self.order - 1);
        let mut key = [0 as TokenId; MAX_ORDER];
        let mut acc = 0.0;
        for k in (0..=k_max).rev() {
            let ctx = &history[history.len() - k..];
            key[..k].copy_from_slice(ctx);
            key[k] = w;
            if let Some(e) = self.tables[k].get(&key[..=k]) {
                return acc + e.logprob;
            }
            if k > 0 {
                if let Some(c) = self.tables[k - 1].get(ctx) {
                    acc += c.backoff;
                }
            }
        }
        acc + LOG_ZERO
    }

    pub fn prob(&self, history: &[TokenId], w: TokenId) -> f64 {
        to_prob(self.logprob(history, w))
    }

    pub fn encode(&self, sentence: &Sentence) -> Vec<TokenId> {
        sentence.tokens().iter().map(|t| self.vocab.id_or_unk(t)).collect()
    }

    /// Per-event log10 probabilities of a sentence, `</s>` last.
    pub fn event_logprobs(&self, sentence: &Sentence) -> Vec<f64> {
        let mut seq = Vec::with_capacity(sentence.len() + 2);
        seq.push(BOS_ID);
        seq.extend(self.encode(sentence));
        seq.push(EOS_ID);
        (1..seq.len()).map(|i| self.logprob(&seq[..i], seq[i])).collect()
    }

    pub fn sentence_logprob(&self, sentence: &Sentence) -> SentenceScore {
        let events = self.event_logprobs(sentence);
        SentenceScore {
            logprob: events.iter().sum(),
            events: events.len(),
        }
    }

    pub fn perplexity(&self, corpus: &Corpus, mode: PerplexityMode) -> Result<f64> {
        if corpus.is_empty() {
            return Err(Error::EmptyEvaluationSet);
        }
        let mut total = 0.0;
        let mut events = 0;
        for s in corpus.sentences() {
            let score = self.sentence_logprob(s);
            total += score.logprob;
            events += score.events;
        }
        let denom = match mode {
            PerplexityMode::PerToken => events,
            PerplexityMode::PerWord => corpus.word_count() + corpus.sentences().len(),
        };
        Ok(10f64.powf(-total / denom as f64))
    }

    /// Children of every context at order `n`, keyed by the `(n-1)`-token
    /// context and sorted by token id.
    pub fn children(&self, n: usize) -> NgramTable<Vec<TokenId>> {
        let mut out: NgramTable<Vec<TokenId>> = FxHashMap::default();
        for key in self.tables[n - 1].keys() {
            out.entry(key[..n - 1].into()).or_default().push(key[n - 1]);
        }
        for v in out.values_mut() {
            v.sort_unstable();
        }
        out
    }

    /// Recomputes every backoff weight from the explicit probabilities so that
    /// each context distribution sums to one. Lower orders go first because
    /// higher-order weights depend on the lower-order distributions.
    pub fn recompute_backoffs(&mut self) {
        for n in 1..self.order {
            let children = self.children(n + 1);
            let mut updates: Vec<(NgramKey, f64)> = Vec::with_capacity(self.tables[n - 1].len());
            for ctx in self.tables[n - 1].keys() {
                let bow = match children.get(ctx) {
                    None => 0.0,
                    Some(ws) => self.backoff_for(ctx, ws),
                };
                updates.push((ctx.clone(), bow));
            }
            for (ctx, bow) in updates {
                if let Some(e) = self.tables[n - 1].get_mut(&ctx) {
                    e.backoff = bow;
                }
            }
        }
    }

    /// log10 backoff weight for `ctx` given its explicit children `ws`.
    pub(crate) fn backoff_for(&self, ctx: &[TokenId], ws: &[TokenId]) -> f64 {
        let mut key = [0 as TokenId; MAX_ORDER];
        let n = ctx.len();
        key[..n].copy_from_slice(ctx);
        let mut seen = 0.0;
        let mut seen_lower = 0.0;
        for &w in ws {
            key[n] = w;
            seen += to_prob(self.tables[n][&key[..=n]].logprob);
            seen_lower += self.prob(&ctx[1..], w);
        }
        let num = 1.0 - seen;
        let den = 1.0 - seen_lower;
        if num <= 1e-15 || den <= 1e-15 {
            LOG_ZERO
        } else {
            (num / den).log10()
        }
    }

    /// Every context that has at least one explicit continuation, plus the empty context.
    pub fn contexts(&self) -> Vec<Vec<TokenId>> {
        let mut set: FxHashSet<&[TokenId]> = FxHashSet::default();
        for n in 2..=self.order {
            for key in self.tables[n - 1].keys() {
                set.insert(&key[..n - 1]);
            }
        }
        let mut out: Vec<Vec<TokenId>> = set.into_iter().map(<[TokenId]>::to_vec).collect();
        out.push(Vec::new());
        out.sort();
        out
    }

    /// Sum of P(w | ctx) over every predictable token, by enumeration.
    pub fn context_mass(&self, ctx: &[TokenId]) -> f64 {
        self.vocab.predictable().map(|w| self.prob(ctx, w)).sum()
    }
}
