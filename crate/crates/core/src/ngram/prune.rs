//! Relative-entropy pruning to a byte budget.
//!
//! Dropping `(h, w)` sends its mass through the back-off of `h`. The cost of
//! the removal is the weighted divergence of the distribution at `h`:
//!
//! ```text
//! D = -P(h) * [ p (ln q + ln a' - ln p) + num (ln a' - ln a) ]
//! ```
//!
//! where `p = P(w|h)`, `q = P(w|h')`, `num` and `den` are the left-over
//! masses at `h` and `h'`, `a = num / den` and `a' = (num + p) / (den + q)`.
//! All costs are taken from the unpruned model. An n-gram that is the
//! context of a surviving longer n-gram is never removed, so its effective
//! cost is the largest cost among itself and its extensions. Back-off
//! weights are recomputed once after removal.

use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{Error, Result};
use crate::ngram::model::{BackoffModel, NgramKey, TokenId, BOS_ID, MAX_ORDER};

/// Serialized size in bytes: 4 bytes of log-probability plus 4 bytes per
/// token index for every entry, 4 more for each stored non-zero back-off
/// weight, and the vocabulary string table with one terminator per token.
pub fn footprint(model: &BackoffModel) -> u64 {
    let mut bytes = 0u64;
    for n in 1..=model.order() {
        let table = model.table(n);
        bytes += table.len() as u64 * (4 + 4 * n as u64);
        if n < model.order() {
            bytes += 4 * table.values().filter(|e| e.backoff != 0.0).count() as u64;
        }
    }
    bytes + vocab_bytes(model)
}

fn vocab_bytes(model: &BackoffModel) -> u64 {
    model.vocab().tokens().iter().map(|t| t.len() as u64 + 1).sum()
}

/// Footprint of the unigram-only model with the same vocabulary.
pub fn skeleton_footprint(model: &BackoffModel) -> u64 {
    model.entry_count(1) as u64 * 8 + vocab_bytes(model)
}

/// Probability of the history itself, by the chain rule. A leading `<s>`
/// is given, not predicted.
pub fn history_probability(model: &BackoffModel, h: &[TokenId]) -> f64 {
    let start = usize::from(h.first() == Some(&BOS_ID));
    (start..h.len()).map(|i| model.prob(&h[..i], h[i])).product()
}

/// Pruning cost of every removable n-gram of length `n`, sorted by key.
/// N-grams that are contexts of longer n-grams are left out.
pub fn pruning_deltas(model: &BackoffModel, n: usize) -> Vec<(NgramKey, f64)> {
    assert!((2..=model.order()).contains(&n));
    let protected: FxHashSet<&[TokenId]> = if n < model.order() {
        model.table(n + 1).keys().map(|k| &k[..n]).collect()
    } else {
        FxHashSet::default()
    };
    let mut out: Vec<(NgramKey, f64)> = all_deltas(model, n)
        .into_iter()
        .filter(|(k, _)| !protected.contains(&k[..]))
        .collect();
    out.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Pruning cost of every n-gram of length `n`.
fn all_deltas(model: &BackoffModel, n: usize) -> Vec<(NgramKey, f64)> {
    let mut out = Vec::with_capacity(model.entry_count(n));
    let mut key = [0 as TokenId; MAX_ORDER];
    for (ctx, ws) in model.children(n) {
        let lower = &ctx[1..];
        key[..n - 1].copy_from_slice(&ctx);
        let mut seen = 0.0;
        let mut seen_lower = 0.0;
        let mut rows = Vec::with_capacity(ws.len());
        for &w in &ws {
            let p = model.prob(&ctx, w);
            let q = model.prob(lower, w);
            seen += p;
            seen_lower += q;
            rows.push((w, p, q));
        }
        let num = (1.0 - seen).max(0.0);
        let den = (1.0 - seen_lower).max(0.0);
        let ph = history_probability(model, &ctx);
        for (w, p, q) in rows {
            key[n - 1] = w;
            out.push((key[..n].into(), kl_delta(ph, p, q, num, den)));
        }
    }
    out
}

/// Weighted divergence caused by removing one explicit n-gram.
pub fn kl_delta(p_h: f64, p: f64, q: f64, num: f64, den: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    let a_new = (num + p) / (den + q);
    let mut inner = p * (q.ln() + a_new.ln() - p.ln());
    if num > 0.0 && den > 0.0 {
        inner += num * (a_new.ln() - (num / den).ln());
    }
    -p_h * inner
}

/// Effective cost of every entry and the largest effective cost among its
/// extensions (`-inf` without any), per order; `plan[n - 1]` covers n-grams.
struct PruningPlan {
    entries: Vec<FxHashMap<NgramKey, (f64, f64)>>,
}

impl PruningPlan {
    fn new(model: &BackoffModel) -> Self {
        let order = model.order();
        let mut entries: Vec<FxHashMap<NgramKey, (f64, f64)>> = vec![FxHashMap::default(); order];
        let mut child_max: FxHashMap<NgramKey, f64> = FxHashMap::default();
        for n in (1..=order).rev() {
            let costs: Vec<(NgramKey, f64)> = if n == 1 {
                model.table(1).keys().map(|k| (k.clone(), f64::INFINITY)).collect()
            } else {
                all_deltas(model, n)
            };
            let mut next: FxHashMap<NgramKey, f64> = FxHashMap::default();
            let mut table = FxHashMap::default();
            for (k, d) in costs {
                let below = child_max.get(&k).copied().unwrap_or(f64::NEG_INFINITY);
                let eff = d.max(below);
                if n > 1 {
                    let slot = next.entry(k[..n - 1].into()).or_insert(f64::NEG_INFINITY);
                    *slot = slot.max(eff);
                }
                table.insert(k, (eff, below));
            }
            entries[n - 1] = table;
            child_max = next;
        }
        PruningPlan { entries }
    }

    /// Byte contributions that vanish once the threshold exceeds their value.
    fn removals(&self, order: usize) -> Vec<(f64, u64)> {
        let mut out = Vec::new();
        for (i, table) in self.entries.iter().enumerate() {
            let n = i + 1;
            for &(eff, below) in table.values() {
                if n > 1 {
                    out.push((eff, 4 + 4 * n as u64));
                }
                if n < order && below > f64::NEG_INFINITY {
                    out.push((below, 4));
                }
            }
        }
        out.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    fn apply(&self, model: &BackoffModel, theta: f64) -> BackoffModel {
        let mut m = model.clone();
        for n in 2..=m.order() {
            let doomed: Vec<NgramKey> = self.entries[n - 1]
                .iter()
                .filter(|(_, (eff, _))| *eff < theta)
                .map(|(k, _)| k.clone())
                .collect();
            let table = m.table_mut(n);
            for k in doomed {
                table.remove(&k);
            }
        }
        m.recompute_backoffs();
        m
    }
}

/// Removes every n-gram whose pruning cost is below `theta`, unless it is
/// the context of an n-gram that stays.
pub fn prune_with_threshold(model: &BackoffModel, theta: f64) -> BackoffModel {
    PruningPlan::new(model).apply(model, theta)
}

/// Smallest-threshold pruned model whose footprint fits in `budget`.
pub fn prune_to_budget(model: &BackoffModel, budget: u64) -> Result<BackoffModel> {
    let skeleton = skeleton_footprint(model);
    if budget < skeleton {
        return Err(Error::BudgetTooSmall { budget, skeleton });
    }
    let full = footprint(model);
    if full <= budget || model.order() == 1 {
        return Ok(model.clone());
    }
    let plan = PruningPlan::new(model);
    let removals = plan.removals(model.order());
    // Candidate thresholds are the distinct effective costs; the predicted
    // size at each one is confirmed on the pruned model.
    let mut predicted = full;
    let mut i = 0;
    while i < removals.len() {
        let v = removals[i].0;
        while i < removals.len() && removals[i].0 == v {
            predicted = predicted.saturating_sub(removals[i].1);
            i += 1;
        }
        if predicted > budget {
            continue;
        }
        let theta = removals.get(i).map_or(f64::INFINITY, |r| r.0);
        let pruned = plan.apply(model, theta);
        let bytes = footprint(&pruned);
        if bytes <= budget {
            log::debug!("pruned at theta={theta:e}: {full} -> {bytes} bytes");
            return Ok(pruned);
        }
        predicted = bytes;
    }
    Ok(plan.apply(model, f64::INFINITY))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, LoadOptions};
    use crate::ngram::{count_ngrams, train_kn};

    fn toy() -> BackoffModel {
        let c = Corpus::from_lines(["a b c a b", "b c a", "c a b c", "a a b"], LoadOptions::default()).unwrap();
        train_kn(&count_ngrams(&c, 3, None).unwrap()).unwrap()
    }

    #[test]
    fn skeleton_by_hand() {
        let m = toy();
        // 6 unigrams (3 words + 3 specials) of 8 bytes, strings a b c <s> </s> <unk>.
        assert_eq!(skeleton_footprint(&m), 6 * 8 + (2 + 2 + 2 + 4 + 5 + 6));
    }

    #[test]
    fn infinite_threshold_leaves_unigrams() {
        let m = prune_with_threshold(&toy(), f64::INFINITY);
        assert_eq!(m.entry_count(2), 0);
        assert_eq!(m.entry_count(3), 0);
        assert_eq!(footprint(&m), skeleton_footprint(&m));
    }

    #[test]
    fn generous_budget_is_a_no_op() {
        let m = toy();
        assert_eq!(prune_to_budget(&m, footprint(&m)).unwrap(), m);
    }

    #[test]
    fn budget_below_skeleton_fails() {
        let m = toy();
        let s = skeleton_footprint(&m);
        assert!(matches!(prune_to_budget(&m, s - 1), Err(Error::BudgetTooSmall { .. })));
    }
}
