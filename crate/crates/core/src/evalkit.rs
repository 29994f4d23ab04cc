//! Evaluation and reporting: edit-distance alignment, OOV precision and
//! recall, vocabulary coverage, and report tables.

use std::fmt::Write as _;

use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Serialize, Serializer};

use crate::corpus::{oov_statistics, Corpus, Sentence, WordVocabulary, BOS, CONTINUATION_MARK, EOS, UNK};
use crate::error::{Error, Result};
use crate::mix::MixtureWeights;
use crate::ngram::{BackoffModel, PerplexityMode};
use crate::subword::SubwordTokenizer;

pub use crate::ngram::footprint;

/// One alignment step, with token indices into the reference and hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum EditOp {
    Match { reference: usize, hypothesis: usize },
    Substitute { reference: usize, hypothesis: usize },
    Delete { reference: usize },
    Insert { hypothesis: usize },
}

impl EditOp {
    pub fn cost(self) -> usize {
        usize::from(!matches!(self, EditOp::Match { .. }))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub reference: Sentence,
    pub hypothesis: Sentence,
    pub alignment: Vec<EditOp>,
}

impl AlignedPair {
    pub fn distance(&self) -> usize {
        self.alignment.iter().map(|op| op.cost()).sum()
    }

    /// Rewrites the reference with the alignment.
    pub fn apply(&self) -> Vec<String> {
        let r = self.reference.tokens();
        let h = self.hypothesis.tokens();
        let mut out = Vec::new();
        for op in &self.alignment {
            match *op {
                EditOp::Match { reference, .. } => out.push(r[reference].clone()),
                EditOp::Substitute { hypothesis, .. } | EditOp::Insert { hypothesis } => out.push(h[hypothesis].clone()),
                EditOp::Delete { .. } => {}
            }
        }
        out
    }
}

/// Levenshtein distance over token sequences.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, x) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let next = (diag + usize::from(x != y)).min(row[j] + 1).min(row[j + 1] + 1);
            diag = row[j + 1];
            row[j + 1] = next;
        }
    }
    row[b.len()]
}

/// Minimum-edit alignment under unit costs. Traceback ties are resolved
/// match, then substitute, then delete, then insert.
pub fn align(reference: &Sentence, hypothesis: &Sentence) -> AlignedPair {
    let r = reference.tokens();
    let h = hypothesis.tokens();
    let (n, m) = (r.len(), h.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        d[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let diag = d[i - 1][j - 1] + usize::from(r[i - 1] != h[j - 1]);
            d[i][j] = diag.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let (mut i, mut j) = (n, m);
    let mut ops = Vec::with_capacity(n.max(m));
    while i > 0 || j > 0 {
        let here = d[i][j];
        if i > 0 && j > 0 && r[i - 1] == h[j - 1] && d[i - 1][j - 1] == here {
            ops.push(EditOp::Match {
                reference: i - 1,
                hypothesis: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && d[i - 1][j - 1] + 1 == here {
            ops.push(EditOp::Substitute {
                reference: i - 1,
                hypothesis: j - 1,
            });
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i - 1][j] + 1 == here {
            ops.push(EditOp::Delete { reference: i - 1 });
            i -= 1;
        } else {
            ops.push(EditOp::Insert { hypothesis: j - 1 });
            j -= 1;
        }
    }
    ops.reverse();
    AlignedPair {
        reference: reference.clone(),
        hypothesis: hypothesis.clone(),
        alignment: ops,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OovPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub reference_oov: usize,
    pub hypothesis_oov: usize,
    /// False when no hypothesis token was OOV; precision is then reported as 0.
    pub precision_defined: bool,
    /// False when no reference token was OOV; recall is then reported as 0.
    pub recall_defined: bool,
}

/// Precision and recall of out-of-vocabulary words. A hit is an aligned
/// match of an OOV reference token.
pub fn oov_prf(pairs: &[AlignedPair], training_vocab: &WordVocabulary) -> OovPrf {
    let is_oov = |t: &str| !training_vocab.contains(t);
    let mut tp = 0;
    let mut ref_oov = 0;
    let mut hyp_oov = 0;
    for p in pairs {
        ref_oov += p.reference.tokens().iter().filter(|t| is_oov(t)).count();
        hyp_oov += p.hypothesis.tokens().iter().filter(|t| is_oov(t)).count();
        for op in &p.alignment {
            if let EditOp::Match { reference, .. } = *op {
                if is_oov(&p.reference.tokens()[reference]) {
                    tp += 1;
                }
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, hyp_oov);
    let recall = ratio(tp, ref_oov);
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    OovPrf {
        precision,
        recall,
        f1,
        true_positives: tp,
        reference_oov: ref_oov,
        hypothesis_oov: hyp_oov,
        precision_defined: hyp_oov > 0,
        recall_defined: ref_oov > 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coverage {
    pub oov_rate: f64,
    /// Model token types excluding sentence markers and `<unk>`.
    pub inventory_size: usize,
}

/// The word list a model can emit, without the special symbols.
pub fn model_vocabulary(model: &BackoffModel) -> WordVocabulary {
    WordVocabulary::from_counts(
        model
            .vocab()
            .tokens()
            .iter()
            .filter(|t| !matches!(t.as_str(), BOS | EOS | UNK))
            .map(|t| (t.clone(), 0)),
        None,
    )
}

/// Word models: share of test tokens outside the vocabulary. Subword models:
/// share of test words whose segmentation, with the single-character
/// fallback the pipeline applies, still needs a token outside the vocabulary.
pub fn coverage_report(model: &BackoffModel, tokenizer: Option<&SubwordTokenizer>, test: &Corpus) -> Result<Coverage> {
    let inventory_size = model.vocab().word_inventory();
    let vocab = model_vocabulary(model);
    let oov_rate = match tokenizer {
        None => oov_statistics(&vocab, test)?.oov_rate,
        Some(t) => {
            if test.token_count() == 0 {
                return Err(Error::EmptyEvaluationSet);
            }
            let inv: FxHashSet<String> = vocab.words().map(str::to_string).collect();
            let misses = test
                .tokens()
                .filter(|w| t.tagged_pieces(w, Some(&inv)).iter().any(|p| !inv.contains(p)))
                .count();
            misses as f64 / test.token_count() as f64
        }
    };
    Ok(Coverage {
        oov_rate,
        inventory_size,
    })
}

/// Character unigram model with an end-of-word symbol, add-one smoothed
/// with one extra slot for characters never seen in training. It prices
/// the spelling of words a model can only predict as `<unk>`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpellingModel {
    counts: FxHashMap<char, u64>,
    ends: u64,
    total: u64,
}

impl SpellingModel {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut counts: FxHashMap<char, u64> = FxHashMap::default();
        let mut ends = 0;
        let mut total = 0;
        for w in corpus.tokens() {
            for c in w.chars() {
                *counts.entry(c).or_default() += 1;
                total += 1;
            }
            ends += 1;
            total += 1;
        }
        SpellingModel { counts, ends, total }
    }

    fn slot(&self, count: u64) -> f64 {
        // observed characters, the end symbol and the unseen-character slot
        let outcomes = self.counts.len() as u64 + 2;
        ((count + 1) as f64 / (self.total + outcomes) as f64).log10()
    }

    /// log10 probability of spelling `word` and then ending it.
    pub fn log10_prob(&self, word: &str) -> f64 {
        word.chars()
            .map(|c| self.slot(self.counts.get(&c).copied().unwrap_or(0)))
            .sum::<f64>()
            + self.slot(self.ends)
    }
}

/// Per-word perplexity where every event scored as `<unk>` also pays for
/// spelling the actual token (continuation mark removed). Word and subword
/// models then both assign probability to the exact test text.
pub fn open_vocabulary_perplexity(model: &BackoffModel, spelling: &SpellingModel, corpus: &Corpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mut total = 0.0;
    for s in corpus.sentences() {
        total += model.event_logprobs(s).iter().sum::<f64>();
        for t in s.tokens() {
            if !model.vocab().contains(t) {
                total += spelling.log10_prob(t.strip_prefix(CONTINUATION_MARK).unwrap_or(t));
            }
        }
    }
    let denom = corpus.word_count() + corpus.sentences().len();
    Ok(10f64.powf(-total / denom as f64))
}

fn null<S: Serializer>(_: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_none()
}

/// Per-model evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub model_id: String,
    pub perplexity_per_word: f64,
    /// Per-word perplexity with `<unk>` events charged for their spelling.
    pub perplexity_per_word_open: Option<f64>,
    pub oov_rate: f64,
    pub token_inventory_size: usize,
    pub footprint_bytes: u64,
    pub oov_precision: Option<f64>,
    pub oov_recall: Option<f64>,
    pub oov_f1: Option<f64>,
    pub mixture_weights: Option<MixtureWeights>,
    /// No recognizer is run, so there is never a word error rate.
    #[serde(serialize_with = "null")]
    pub wer: Option<f64>,
}

impl EvalReport {
    /// Perplexity, coverage and footprint of one model. `test` holds words;
    /// subword models get it segmented with `tokenizer`.
    pub fn evaluate(
        model_id: impl Into<String>,
        model: &BackoffModel,
        tokenizer: Option<&SubwordTokenizer>,
        test: &Corpus,
        spelling: Option<&SpellingModel>,
    ) -> Result<EvalReport> {
        let coverage = coverage_report(model, tokenizer, test)?;
        let scored = match tokenizer {
            None => test.clone(),
            Some(t) => {
                let inv: FxHashSet<String> = model_vocabulary(model).words().map(str::to_string).collect();
                t.segment_corpus(test, Some(&inv))?
            }
        };
        Ok(EvalReport {
            model_id: model_id.into(),
            perplexity_per_word: model.perplexity(&scored, PerplexityMode::PerWord)?,
            perplexity_per_word_open: spelling
                .map(|sp| open_vocabulary_perplexity(model, sp, &scored))
                .transpose()?,
            oov_rate: coverage.oov_rate,
            token_inventory_size: coverage.inventory_size,
            footprint_bytes: footprint(model),
            oov_precision: None,
            oov_recall: None,
            oov_f1: None,
            mixture_weights: None,
            wer: None,
        })
    }

    pub fn with_oov_prf(mut self, prf: &OovPrf) -> Self {
        self.oov_precision = Some(prf.precision);
        self.oov_recall = Some(prf.recall);
        self.oov_f1 = Some(prf.f1);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Real(f64),
    Failed(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.4}"),
            Cell::Failed(_) => "FAILED".into(),
            Cell::Empty => "-".into(),
        }
    }

    fn numeric(&self) -> bool {
        matches!(self, Cell::Int(_) | Cell::Real(_))
    }
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Text(v) => s.serialize_str(v),
            Cell::Int(v) => s.serialize_u64(*v),
            Cell::Real(v) => s.serialize_f64(*v),
            Cell::Failed(e) => {
                use serde::ser::SerializeMap;
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("failed", e)?;
                m.end()
            }
            Cell::Empty => s.serialize_none(),
        }
    }
}

/// Rows of labelled cells, written as JSON or as an aligned text table.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ComparisonTable {
    pub fn new(headers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        ComparisonTable {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.headers.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} cells for {} columns",
                row.len(),
                self.headers.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    /// One row per model with its inventory size and one metric column per
    /// budget label. Missing combinations are left empty.
    pub fn by_budget(metric: &str, budgets: &[String], entries: &[(String, u64, String, Cell)]) -> Self {
        let mut headers = vec!["model".to_string(), "vocab".to_string()];
        headers.extend(budgets.iter().map(|b| format!("{metric} @ {b}")));
        let mut table = ComparisonTable {
            headers,
            rows: Vec::new(),
        };
        let mut keys: Vec<(&str, u64)> = Vec::new();
        for (model, vocab, _, _) in entries {
            if !keys.contains(&(model.as_str(), *vocab)) {
                keys.push((model.as_str(), *vocab));
            }
        }
        for (model, vocab) in keys {
            let mut row = vec![Cell::Text(model.to_string()), Cell::Int(vocab)];
            for b in budgets {
                let cell = entries
                    .iter()
                    .find(|e| e.0 == model && e.1 == vocab && &e.2 == b)
                    .map_or(Cell::Empty, |e| e.3.clone());
                row.push(cell);
            }
            table.rows.push(row);
        }
        table
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let obj = self
                    .headers
                    .iter()
                    .zip(r)
                    .map(|(h, c)| (h.clone(), serde_json::to_value(c).expect("cells serialize")))
                    .collect::<serde_json::Map<_, _>>();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::json!({ "columns": self.headers, "rows": serde_json::Value::Array(rows) })
    }

    /// Columns padded to their widest cell; numbers right-aligned.
    pub fn to_text(&self) -> String {
        let rendered: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect();
        let widths: Vec<usize> = (0..self.headers.len())
            .map(|c| {
                rendered
                    .iter()
                    .map(|r| r[c].chars().count())
                    .chain([self.headers[c].chars().count()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, cells: Vec<(String, bool)>| {
            let parts: Vec<String> = cells
                .into_iter()
                .zip(&widths)
                .map(|((s, right), &w)| if right { format!("{s:>w$}") } else { format!("{s:<w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, self.headers.iter().map(|h| (h.clone(), false)).collect());
        let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  "));
        for (r, cells) in self.rows.iter().zip(rendered) {
            line(&mut out, cells.into_iter().zip(r).map(|(s, c)| (s, c.numeric())).collect());
        }
        out
    }
}
