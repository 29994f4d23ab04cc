// Literal transcription of interpolated modified Kneser-Ney over string
// n-grams, kept free of any code from the library under test.

use std::collections::{BTreeMap, BTreeSet};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

type Gram = Vec<String>;

pub struct Oracle {
    pub order: usize,
    /// Every token except `<s>`.
    pub predictable: Vec<String>,
    /// Modified counts per order, index n-1.
    counts: Vec<BTreeMap<Gram, u64>>,
    pub discounts: Vec<[f64; 3]>,
}

fn discount(n: [u64; 4]) -> [f64; 3] {
    if n.iter().any(|&x| x == 0) {
        return [0.75; 3];
    }
    let (n1, n2, n3, n4) = (n[0] as f64, n[1] as f64, n[2] as f64, n[3] as f64);
    let y = n1 / (n1 + 2.0 * n2);
    [
        f64::max(0.0, 1.0 - 2.0 * y * n2 / n1),
        f64::max(0.0, 2.0 - 3.0 * y * n3 / n2),
        f64::max(0.0, 3.0 - 4.0 * y * n4 / n3),
    ]
}

impl Oracle {
    pub fn new(sentences: &[Vec<String>], order: usize) -> Oracle {
        let mut raw: BTreeMap<Gram, u64> = BTreeMap::new();
        let mut words = BTreeSet::new();
        for s in sentences {
            let mut seq = vec![BOS.to_string()];
            seq.extend(s.iter().cloned());
            seq.push(EOS.to_string());
            words.extend(s.iter().cloned());
            for i in 0..seq.len() {
                for j in i + 1..=(i + order).min(seq.len()) {
                    *raw.entry(seq[i..j].to_vec()).or_default() += 1;
                }
            }
        }
        let mut counts = vec![BTreeMap::new(); order];
        for (g, &c) in &raw {
            let n = g.len();
            if n == 1 && g[0] == BOS {
                continue;
            }
            let v = if n == order || g[0] == BOS {
                c
            } else {
                raw.keys().filter(|k| k.len() == n + 1 && k[1..] == g[..]).count() as u64
            };
            counts[n - 1].insert(g.clone(), v);
        }
        let discounts = counts
            .iter()
            .map(|t| {
                let mut n = [0u64; 4];
                for &c in t.values() {
                    if (1..=4).contains(&c) {
                        n[c as usize - 1] += 1;
                    }
                }
                discount(n)
            })
            .collect();
        let mut predictable: Vec<String> = words.into_iter().collect();
        predictable.push(EOS.to_string());
        predictable.push(UNK.to_string());
        Oracle {
            order,
            predictable,
            counts,
            discounts,
        }
    }

    fn d(&self, n: usize, c: u64) -> f64 {
        match c {
            0 => 0.0,
            1 => self.discounts[n - 1][0],
            2 => self.discounts[n - 1][1],
            _ => self.discounts[n - 1][2],
        }
    }

    fn level(&self, h: &[String], w: &str) -> f64 {
        let n = h.len() + 1;
        let table = &self.counts[n - 1];
        let mut total = 0u64;
        let mut n_by = [0u64; 3];
        let mut c_hw = 0u64;
        for (g, &c) in table {
            if g[..n - 1] == *h {
                total += c;
                match c {
                    0 => {}
                    1 => n_by[0] += 1,
                    2 => n_by[1] += 1,
                    _ => n_by[2] += 1,
                }
                if g[n - 1] == w {
                    c_hw = c;
                }
            }
        }
        let lower = if n == 1 {
            1.0 / self.predictable.len() as f64
        } else {
            self.level(&h[1..], w)
        };
        if total == 0 {
            return lower;
        }
        let dm = &self.discounts[n - 1];
        let gamma = (dm[0] * n_by[0] as f64 + dm[1] * n_by[1] as f64 + dm[2] * n_by[2] as f64) / total as f64;
        f64::max(c_hw as f64 - self.d(n, c_hw), 0.0) / total as f64 + gamma * lower
    }

    /// P(w | history) using only the last order-1 history tokens.
    pub fn prob(&self, history: &[String], w: &str) -> f64 {
        let k = history.len().min(self.order - 1);
        self.level(&history[history.len() - k..], w)
    }

    /// Every history of length < order drawn from the predictable tokens
    /// other than `</s>`, with and without a leading `<s>`.
    pub fn histories(&self) -> Vec<Vec<String>> {
        let alphabet: Vec<&String> = self.predictable.iter().filter(|t| *t != EOS).collect();
        let mut out = vec![vec![]];
        let mut frontier: Vec<Vec<String>> = vec![vec![]];
        for _ in 1..self.order {
            let mut next = Vec::new();
            for h in &frontier {
                for a in &alphabet {
                    let mut g = h.clone();
                    g.push((*a).clone());
                    next.push(g);
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        let with_bos: Vec<Vec<String>> = out
            .iter()
            .filter(|h| h.len() + 2 <= self.order)
            .map(|h| std::iter::once(BOS.to_string()).chain(h.iter().cloned()).collect())
            .collect();
        out.extend(with_bos);
        out
    }
}

/// All restricted-growth strings of length `len` (set partitions in
/// canonical order), mapped to token names `w0`, `w1`, ...
pub fn restricted_growth(len: usize, max_types: usize) -> Vec<Vec<String>> {
    fn rec(cur: &mut Vec<usize>, len: usize, max_types: usize, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        let top = cur.iter().copied().max().map_or(0, |m| m + 1);
        for v in 0..=top.min(max_types - 1) {
            cur.push(v);
            rec(cur, len, max_types, out);
            cur.pop();
        }
    }
    let mut raw = Vec::new();
    rec(&mut Vec::new(), len, max_types, &mut raw);
    raw.into_iter()
        .map(|s| s.into_iter().map(|i| format!("w{i}")).collect())
        .collect()
}

/// Every way to cut a token string into consecutive non-empty sentences.
pub fn sentence_splits(tokens: &[String]) -> Vec<Vec<Vec<String>>> {
    let cuts = tokens.len().saturating_sub(1);
    (0u32..(1 << cuts))
        .map(|mask| {
            let mut sents = vec![vec![tokens[0].clone()]];
            for (i, t) in tokens.iter().enumerate().skip(1) {
                if mask & (1 << (i - 1)) != 0 {
                    sents.push(Vec::new());
                }
                sents.last_mut().unwrap().push(t.clone());
            }
            sents
        })
        .collect()
}
