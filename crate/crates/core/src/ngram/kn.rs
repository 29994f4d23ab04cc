//! Interpolated modified Kneser-Ney estimation.
//!
//! The highest order, and any n-gram starting with `<s>`, uses raw counts.
//! Other lower-order n-grams use continuation counts, the number of distinct
//! tokens seen immediately to their left. Each order has three discounts
//! (for counts 1, 2 and 3+) derived from the count-of-counts of whichever
//! counts that order uses. The unigram level interpolates with a uniform
//! distribution over every predictable token, which is how `<unk>` and
//! unseen vocabulary words receive mass.

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::ngram::counts::NgramCountTable;
use crate::ngram::model::{log10_or_zero, BackoffModel, NgramEntry, NgramTable, BOS_ID, LOG_ZERO};

/// Absolute discount used for an order whose count-of-counts has a zero in n1..n4.
pub const FALLBACK_DISCOUNT: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discount {
    pub d1: f64,
    pub d2: f64,
    pub d3plus: f64,
    /// The modified estimate was not computable and the single fallback value is in use.
    pub fallback: bool,
}

impl Discount {
    pub fn for_count(&self, c: u64) -> f64 {
        match c {
            0 => 0.0,
            1 => self.d1,
            2 => self.d2,
            _ => self.d3plus,
        }
    }

    /// Chen-Goodman estimates from the count-of-counts `[n1, n2, n3, n4]`.
    pub fn from_count_of_counts(n: [u64; 4]) -> Discount {
        if n.contains(&0) {
            return Discount {
                d1: FALLBACK_DISCOUNT,
                d2: FALLBACK_DISCOUNT,
                d3plus: FALLBACK_DISCOUNT,
                fallback: true,
            };
        }
        let [n1, n2, n3, n4] = n.map(|x| x as f64);
        let y = n1 / (n1 + 2.0 * n2);
        Discount {
            d1: (1.0 - 2.0 * y * n2 / n1).max(0.0),
            d2: (2.0 - 3.0 * y * n3 / n2).max(0.0),
            d3plus: (3.0 - 4.0 * y * n4 / n3).max(0.0),
            fallback: false,
        }
    }
}

/// Discounts for orders `1..=N`, indexed by `order - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSet {
    pub per_order: Vec<Discount>,
}

impl DiscountSet {
    pub fn order(&self, n: usize) -> &Discount {
        &self.per_order[n - 1]
    }
}

/// The counts each order is estimated from: raw counts at the top order and
/// for `<s>`-initial n-grams, continuation counts elsewhere. `<s>` itself is
/// never predicted and is left out of the unigram table.
pub fn kn_counts(counts: &NgramCountTable) -> Vec<NgramTable<u64>> {
    let order = counts.order();
    let mut out = Vec::with_capacity(order);
    for n in 1..=order {
        let raw = counts.counts(n);
        let mut used: NgramTable<u64> = FxHashMap::default();
        if n == order {
            for (k, &c) in raw {
                if !(n == 1 && k[0] == BOS_ID) {
                    used.insert(k.clone(), c);
                }
            }
        } else {
            let mut continuation: FxHashMap<&[u32], u64> = FxHashMap::default();
            for k in counts.counts(n + 1).keys() {
                *continuation.entry(&k[1..]).or_insert(0) += 1;
            }
            for (k, &c) in raw {
                if k[0] == BOS_ID {
                    if n > 1 {
                        used.insert(k.clone(), c);
                    }
                } else {
                    used.insert(k.clone(), continuation.get(&k[..]).copied().unwrap_or(0));
                }
            }
        }
        out.push(used);
    }
    out
}

fn count_of_counts(table: &NgramTable<u64>) -> [u64; 4] {
    let mut n = [0u64; 4];
    for &c in table.values() {
        if (1..=4).contains(&c) {
            n[c as usize - 1] += 1;
        }
    }
    n
}

pub fn estimate_discounts(counts: &NgramCountTable) -> DiscountSet {
    discounts_for(&kn_counts(counts))
}

fn discounts_for(used: &[NgramTable<u64>]) -> DiscountSet {
    DiscountSet {
        per_order: used
            .iter()
            .map(|t| Discount::from_count_of_counts(count_of_counts(t)))
            .collect(),
    }
}

#[derive(Default, Clone, Copy)]
struct ContextStats {
    total: u64,
    n1: u64,
    n2: u64,
    n3plus: u64,
}

impl ContextStats {
    fn add(&mut self, c: u64) {
        self.total += c;
        match c {
            0 => {}
            1 => self.n1 += 1,
            2 => self.n2 += 1,
            _ => self.n3plus += 1,
        }
    }

    /// Interpolation weight: discounted mass over the context total.
    fn gamma(&self, d: &Discount) -> f64 {
        (d.d1 * self.n1 as f64 + d.d2 * self.n2 as f64 + d.d3plus * self.n3plus as f64) / self.total as f64
    }
}

pub fn estimate_kn_model(counts: &NgramCountTable, discounts: &DiscountSet) -> Result<BackoffModel> {
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let order = counts.order();
    if discounts.per_order.len() != order {
        return Err(Error::Inconsistent(format!(
            "{} discount orders for an order-{order} model",
            discounts.per_order.len()
        )));
    }
    let vocab = counts.vocab().clone();
    let used = kn_counts(counts);

    // Linear probabilities, then log10 at the end.
    let mut probs: Vec<NgramTable<f64>> = Vec::with_capacity(order);
    let mut gammas: Vec<FxHashMap<Box<[u32]>, f64>> = Vec::with_capacity(order);

    // Unigrams: interpolate with the uniform distribution.
    let d = discounts.order(1);
    let mut stats = ContextStats::default();
    for &c in used[0].values() {
        stats.add(c);
    }
    if stats.total == 0 {
        return Err(Error::EmptyCorpus);
    }
    let gamma = stats.gamma(d);
    let uniform = 1.0 / (vocab.len() - 1) as f64;
    let mut unigrams: NgramTable<f64> = FxHashMap::default();
    for w in vocab.predictable() {
        let c = used[0].get(&[w][..]).copied().unwrap_or(0);
        let p = (c as f64 - d.for_count(c)).max(0.0) / stats.total as f64 + gamma * uniform;
        unigrams.insert(Box::new([w]), p);
    }
    probs.push(unigrams);
    gammas.push(FxHashMap::default());

    for n in 2..=order {
        let d = discounts.order(n);
        let mut ctx_stats: FxHashMap<&[u32], ContextStats> = FxHashMap::default();
        for (k, &c) in &used[n - 1] {
            ctx_stats.entry(&k[..n - 1]).or_default().add(c);
        }
        let mut table: NgramTable<f64> = FxHashMap::default();
        for (k, &c) in &used[n - 1] {
            let st = &ctx_stats[&k[..n - 1]];
            let lower = probs[n - 2][&k[1..]];
            let p = (c as f64 - d.for_count(c)).max(0.0) / st.total as f64 + st.gamma(d) * lower;
            table.insert(k.clone(), p);
        }
        gammas.push(ctx_stats.iter().map(|(h, st)| (Box::<[u32]>::from(*h), st.gamma(d))).collect());
        probs.push(table);
    }

    let mut tables: Vec<NgramTable<NgramEntry>> = probs
        .into_iter()
        .map(|t| t.into_iter().map(|(k, p)| (k, NgramEntry::new(log10_or_zero(p)))).collect())
        .collect();
    tables[0].insert(Box::new([BOS_ID]), NgramEntry::new(LOG_ZERO));
    for n in 2..=order {
        for (ctx, &g) in &gammas[n - 1] {
            let e = tables[n - 2]
                .get_mut(ctx)
                .ok_or_else(|| Error::Inconsistent("context missing from lower order".into()))?;
            e.backoff = log10_or_zero(g);
        }
    }
    Ok(BackoffModel::from_parts(order, vocab, tables)?.with_discounts(discounts.clone()))
}

/// Counts, discounts and estimation in one step.
pub fn train_kn(counts: &NgramCountTable) -> Result<BackoffModel> {
    let discounts = discounts_for(&kn_counts(counts));
    estimate_kn_model(counts, &discounts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discount_formulas() {
        let d = Discount::from_count_of_counts([4, 2, 1, 1]);
        assert!(!d.fallback);
        assert_eq!(d.d1, 0.5);
        assert_eq!(d.d2, 1.25);
        assert_eq!(d.d3plus, 1.0);
    }

    #[test]
    fn zero_count_of_counts_falls_back() {
        for n in [[0, 2, 1, 1], [3, 0, 1, 1], [3, 2, 1, 0]] {
            let d = Discount::from_count_of_counts(n);
            assert!(d.fallback);
            assert_eq!((d.d1, d.d2, d.d3plus), (0.75, 0.75, 0.75));
        }
    }

    #[test]
    fn negative_estimates_are_clamped() {
        // Many 3-counts relative to 2-counts push D2 below zero.
        let d = Discount::from_count_of_counts([10, 1, 50, 1]);
        assert_eq!(d.d2, 0.0);
        assert!(d.d1 > 0.0 && d.d3plus > 0.0);
    }
}
