//! Linear interpolation of back-off models: EM weight estimation on a tuning
//! corpus and static merging into one back-off model.

use rayon::prelude::*;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ngram::model::{log10_or_zero, to_prob, BackoffModel, NgramEntry, NgramKey, NgramTable, PerplexityMode};
use crate::ngram::{TokenId, BOS_ID, LOG_ZERO};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
const MAX_EM_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixtureWeights {
    weights: Vec<f64>,
}

impl MixtureWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument("weights must be non-negative and finite".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("weights sum to {sum}, not 1")));
        }
        Ok(MixtureWeights { weights })
    }

    pub fn uniform(k: usize) -> Self {
        MixtureWeights {
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// All weight on component `i`.
    pub fn corner(k: usize, i: usize) -> Self {
        let mut weights = vec![0.0; k];
        weights[i] = 1.0;
        MixtureWeights { weights }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Probability of every scored tuning event under each component, one row
/// per event in corpus order.
pub fn event_probabilities(components: &[BackoffModel], tuning: &Corpus) -> Vec<Vec<f64>> {
    let per_sentence: Vec<Vec<Vec<f64>>> = tuning
        .sentences()
        .par_iter()
        .map(|s| {
            let cols: Vec<Vec<f64>> = components.iter().map(|m| m.event_logprobs(s)).collect();
            (0..cols[0].len())
                .map(|e| cols.iter().map(|c| to_prob(c[e])).collect())
                .collect()
        })
        .collect();
    per_sentence.into_iter().flatten().collect()
}

/// Natural-log likelihood of the events under the mixture.
pub fn log_likelihood(events: &[Vec<f64>], weights: &MixtureWeights) -> f64 {
    events
        .iter()
        .map(|row| row.iter().zip(weights.as_slice()).map(|(p, l)| p * l).sum::<f64>().ln())
        .sum()
}

/// EM result with the per-iteration per-event log-likelihood trace.
#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub weights: MixtureWeights,
    pub trace: Vec<f64>,
    /// A simplex corner beat the EM fixed point and was returned instead.
    pub corner: bool,
}

pub fn optimize_weights(components: &[BackoffModel], tuning: &Corpus, tol: f64) -> Result<MixtureWeights> {
    Ok(optimize_weights_traced(components, tuning, tol)?.weights)
}

pub fn optimize_weights_traced(components: &[BackoffModel], tuning: &Corpus, tol: f64) -> Result<EmResult> {
    if components.len() < 2 {
        return Err(Error::InvalidArgument("interpolation needs at least two components".into()));
    }
    if tuning.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let events = event_probabilities(components, tuning);
    Ok(em(&events, tol))
}

/// EM from the uniform point on a precomputed event matrix.
pub fn em(events: &[Vec<f64>], tol: f64) -> EmResult {
    let k = events[0].len();
    let count = events.len() as f64;
    let mut weights = MixtureWeights::uniform(k);
    let mut ll = log_likelihood(events, &weights) / count;
    let mut trace = vec![ll];
    for _ in 0..MAX_EM_ITERATIONS {
        let mut acc = vec![0.0; k];
        let mut used = 0.0;
        for row in events {
            let total: f64 = row.iter().zip(&weights.weights).map(|(p, l)| p * l).sum();
            if total <= 0.0 {
                continue;
            }
            for i in 0..k {
                acc[i] += weights.weights[i] * row[i] / total;
            }
            used += 1.0;
        }
        if used == 0.0 {
            break;
        }
        let next = MixtureWeights {
            weights: acc.iter().map(|a| a / used).collect(),
        };
        let next_ll = log_likelihood(events, &next) / count;
        let gain = next_ll - ll;
        if gain < 0.0 {
            break;
        }
        weights = next;
        ll = next_ll;
        trace.push(ll);
        if gain < tol {
            break;
        }
    }
    let mut corner = false;
    for i in 0..k {
        let c = MixtureWeights::corner(k, i);
        let cll = log_likelihood(events, &c) / count;
        if cll > ll {
            weights = c;
            ll = cll;
            corner = true;
        }
    }
    EmResult { weights, trace, corner }
}

/// Perplexity of the dynamic (per-event) mixture.
pub fn mixture_perplexity(
    components: &[BackoffModel],
    weights: &MixtureWeights,
    corpus: &Corpus,
    mode: PerplexityMode,
) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let events = event_probabilities(components, corpus);
    let log10_total = log_likelihood(&events, weights) / std::f64::consts::LN_10;
    let denom = match mode {
        PerplexityMode::PerToken => events.len(),
        PerplexityMode::PerWord => corpus.word_count() + corpus.sentences().len(),
    };
    Ok(10f64.powf(-log10_total / denom as f64))
}

fn check_compatible(components: &[BackoffModel]) -> Result<()> {
    let first = &components[0];
    for m in &components[1..] {
        if m.order() != first.order() {
            return Err(Error::OrderMismatch(first.order(), m.order()));
        }
        if !m.vocab().same_tokens(first.vocab()) {
            return Err(Error::VocabularyMismatch);
        }
    }
    Ok(())
}

/// Bakes the mixture into one back-off model over the union of n-grams.
pub fn interpolate_static(components: &[BackoffModel], weights: &MixtureWeights) -> Result<BackoffModel> {
    if components.is_empty() {
        return Err(Error::InvalidArgument("no components to interpolate".into()));
    }
    if weights.len() != components.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} components",
            weights.len(),
            components.len()
        )));
    }
    check_compatible(components)?;
    let base = &components[0];
    let order = base.order();
    let vocab = base.vocab().clone();
    // to_base[i][id in component i] = id in the base vocabulary
    let to_base: Vec<Vec<TokenId>> = components
        .iter()
        .map(|m| m.vocab().tokens().iter().map(|t| vocab.id(t).expect("checked vocabulary")).collect())
        .collect();
    let from_base: Vec<Vec<TokenId>> = components
        .iter()
        .map(|m| vocab.tokens().iter().map(|t| m.vocab().id(t).expect("checked vocabulary")).collect())
        .collect();

    let mut keys: Vec<FxHashSet<NgramKey>> = vec![FxHashSet::default(); order];
    for (m, map) in components.iter().zip(&to_base) {
        for n in 1..=order {
            for k in m.table(n).keys() {
                keys[n - 1].insert(k.iter().map(|&id| map[id as usize]).collect());
            }
        }
    }
    for w in vocab.predictable() {
        keys[0].insert(Box::new([w]));
    }
    // Every context must exist one order down to carry its back-off weight.
    for n in (2..=order).rev() {
        let prefixes: Vec<NgramKey> = keys[n - 1].iter().map(|k| k[..n - 1].into()).collect();
        keys[n - 2].extend(prefixes);
    }

    let lambdas = weights.as_slice();
    let mut tables: Vec<NgramTable<NgramEntry>> = Vec::with_capacity(order);
    for n in 1..=order {
        let mut sorted: Vec<&NgramKey> = keys[n - 1].iter().collect();
        sorted.sort_unstable();
        let rows: Vec<(NgramKey, NgramEntry)> = sorted
            .par_iter()
            .map_init(Vec::new, |buf: &mut Vec<TokenId>, key| {
                if n == 1 && key[0] == BOS_ID {
                    return ((*key).clone(), NgramEntry::new(LOG_ZERO));
                }
                let mut p = 0.0;
                for ((m, map), &l) in components.iter().zip(&from_base).zip(lambdas) {
                    if l == 0.0 {
                        continue;
                    }
                    buf.clear();
                    buf.extend(key.iter().map(|&id| map[id as usize]));
                    p += l * m.prob(&buf[..n - 1], buf[n - 1]);
                }
                ((*key).clone(), NgramEntry::new(log10_or_zero(p)))
            })
            .collect();
        tables.push(rows.into_iter().collect());
    }
    let mut model = BackoffModel::from_parts(order, vocab, tables)?;
    model.recompute_backoffs();
    Ok(model)
}
