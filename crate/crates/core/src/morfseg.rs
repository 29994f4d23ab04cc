//! Unsupervised morphological segmentation driven by a two-part description
//! length: the cost of coding the corpus as a morph sequence plus the cost of
//! spelling out the morph lexicon.
//!
//! All costs are in nats. For a lexicon with morph counts `c(m)` summing to
//! `T`, the total cost is
//!
//! ```text
//! alpha * sum_m c(m) * -ln(c(m) / T)  +  sum_m [ sum_{ch in m} -ln P_char(ch)  - ln P_end ]
//! ```
//!
//! where `P_char` is the character unigram distribution of the training
//! corpus and `P_end = 1 / (1 + mean word-type length)` terminates each morph.
//! Word types are analysed once; their frequency weights the corpus term.
//!
//! Training alternates two kinds of move. The first re-splits one word type
//! recursively. The second picks a shared prefix `x` and suffix `y` and splits
//! every lexicon morph that starts with `x` or ends with `y` at once, then
//! splits any remaining morph that has become the concatenation of two lexicon
//! morphs. Single splits cannot leave a lexicon of whole words when each stem
//! and affix only pays off once it is shared; the joint move can.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Character unigram statistics and the morph terminator probability.
#[derive(Debug, Clone, PartialEq)]
pub struct LexiconCoder {
    char_counts: BTreeMap<char, u64>,
    total_chars: u64,
    p_end: f64,
}

impl LexiconCoder {
    pub fn from_corpus(corpus: &Corpus) -> Self {
        let mut char_counts = BTreeMap::new();
        for t in corpus.tokens() {
            for c in t.chars() {
                *char_counts.entry(c).or_insert(0) += 1;
            }
        }
        let types = corpus.frequencies();
        let mean_len = if types.is_empty() {
            1.0
        } else {
            types.keys().map(|w| w.chars().count()).sum::<usize>() as f64 / types.len() as f64
        };
        LexiconCoder {
            total_chars: char_counts.values().sum(),
            char_counts,
            p_end: 1.0 / (1.0 + mean_len),
        }
    }

    pub fn p_end(&self) -> f64 {
        self.p_end
    }

    /// `-ln P_char(c)`; characters never seen in training cost `ln(N + 1)`.
    pub fn char_cost(&self, c: char) -> f64 {
        match self.char_counts.get(&c) {
            Some(&n) => (self.total_chars as f64 / n as f64).ln(),
            None => ((self.total_chars + 1) as f64).ln(),
        }
    }

    /// Cost of spelling one morph in the lexicon, terminator included.
    pub fn morph_cost(&self, morph: &str) -> f64 {
        morph.chars().map(|c| self.char_cost(c)).sum::<f64>() - self.p_end.ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MorphLexicon {
    morphs: BTreeMap<String, u64>,
    total_morph_tokens: u64,
    corpus_weight: f64,
    coder: LexiconCoder,
}

impl MorphLexicon {
    pub fn morphs(&self) -> &BTreeMap<String, u64> {
        &self.morphs
    }

    pub fn total_morph_tokens(&self) -> u64 {
        self.total_morph_tokens
    }

    pub fn corpus_weight(&self) -> f64 {
        self.corpus_weight
    }

    pub fn coder(&self) -> &LexiconCoder {
        &self.coder
    }

    pub fn len(&self) -> usize {
        self.morphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.morphs.is_empty()
    }

    /// Penalty added to a single character absent from the lexicon: the corpus
    /// cost of a morph seen once more than the lexicon holds.
    pub fn unseen_penalty(&self) -> f64 {
        ((self.total_morph_tokens + 1) as f64).ln()
    }

    pub fn from_counts(morphs: BTreeMap<String, u64>, corpus_weight: f64, coder: LexiconCoder) -> Result<Self> {
        if morphs.iter().any(|(m, &c)| m.is_empty() || c == 0) {
            return Err(Error::Inconsistent("lexicon morphs must be non-empty with count >= 1".into()));
        }
        Ok(MorphLexicon {
            total_morph_tokens: morphs.values().sum(),
            morphs,
            corpus_weight,
            coder,
        })
    }

    /// Viterbi segmentation over lexicon morphs and single-character fallbacks.
    ///
    /// A known morph costs `-ln(c(m)/T)`; a character missing from the lexicon
    /// costs its spelling cost plus [`unseen_penalty`](Self::unseen_penalty).
    /// Ties go to fewer morphs, then to the lexicographically smaller sequence.
    pub fn segment_word(&self, word: &str) -> Vec<String> {
        let bounds: Vec<usize> = word.char_indices().map(|(i, _)| i).chain([word.len()]).collect();
        let n = bounds.len() - 1;
        if n == 0 {
            return Vec::new();
        }
        let total = self.total_morph_tokens as f64;
        let penalty = self.unseen_penalty();

        // best[j] = (cost, morph count, pieces) for word[..bounds[j]]
        let mut best: Vec<Option<(f64, usize, Vec<String>)>> = vec![None; n + 1];
        best[0] = Some((0.0, 0, Vec::new()));
        for j in 1..=n {
            for i in 0..j {
                let Some((prev_cost, prev_n, prev)) = &best[i] else { continue };
                let piece = &word[bounds[i]..bounds[j]];
                let cost = match self.morphs.get(piece) {
                    Some(&c) => (total / c as f64).ln(),
                    None if j == i + 1 => self.coder.morph_cost(piece) + penalty,
                    None => continue,
                };
                let cand_cost = prev_cost + cost;
                let replace = match &best[j] {
                    None => true,
                    Some((bc, bn, bp)) => {
                        let tol = 1e-12 * bc.abs().max(1.0);
                        if (cand_cost - bc).abs() > tol {
                            cand_cost < *bc
                        } else if prev_n + 1 != *bn {
                            prev_n + 1 < *bn
                        } else {
                            prev.iter().map(String::as_str).chain([piece]).lt(bp.iter().map(String::as_str))
                        }
                    }
                };
                if replace {
                    let mut pieces = prev.clone();
                    pieces.push(piece.to_string());
                    best[j] = Some((cand_cost, prev_n + 1, pieces));
                }
            }
        }
        best[n].take().map(|(_, _, p)| p).unwrap_or_default()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "#morfseg v1 corpus_weight={} p_end={} unseen_penalty={}\n",
            self.corpus_weight,
            self.coder.p_end,
            self.unseen_penalty()
        );
        for (c, n) in &self.coder.char_counts {
            out.push_str(&format!("#char\t{c}\t{n}\n"));
        }
        for (m, n) in &self.morphs {
            out.push_str(&format!("{m}\t{n}\n"));
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<MorphLexicon> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<MorphLexicon> {
        let fmt_err = |line: usize, message: String| Error::Format { line, message };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| fmt_err(1, "missing #morfseg header".into()))?;
        let mut fields = header.split(' ');
        if fields.next() != Some("#morfseg") || fields.next() != Some("v1") {
            return Err(fmt_err(1, format!("malformed header {header:?}")));
        }
        let mut params = HashMap::new();
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| fmt_err(1, format!("bad header field {f:?}")))?;
            let v: f64 = v.parse().map_err(|_| fmt_err(1, format!("bad number in {f:?}")))?;
            params.insert(k, v);
        }
        let param = |k: &str| params.get(k).copied().ok_or_else(|| fmt_err(1, format!("header lacks {k}")));
        let corpus_weight = param("corpus_weight")?;
        let p_end = param("p_end")?;

        let mut char_counts = BTreeMap::new();
        let mut morphs = BTreeMap::new();
        for (i, line) in lines {
            let count = |s: &str| s.parse::<u64>().map_err(|_| fmt_err(i + 1, format!("bad count {s:?}")));
            if let Some(rest) = line.strip_prefix("#char\t") {
                let (c, n) = rest.split_once('\t').ok_or_else(|| fmt_err(i + 1, "expected #char<TAB>c<TAB>count".into()))?;
                let mut chars = c.chars();
                let (Some(ch), None) = (chars.next(), chars.next()) else {
                    return Err(fmt_err(i + 1, format!("expected a single character, got {c:?}")));
                };
                char_counts.insert(ch, count(n)?);
            } else if !line.is_empty() {
                let (m, n) = line.split_once('\t').ok_or_else(|| fmt_err(i + 1, "expected morph<TAB>count".into()))?;
                morphs.insert(m.to_string(), count(n)?);
            }
        }
        let coder = LexiconCoder {
            total_chars: char_counts.values().sum(),
            char_counts,
            p_end,
        };
        MorphLexicon::from_counts(morphs, corpus_weight, coder)
    }
}

/// Word analyses and the cost they were last evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationState {
    pub analyses: BTreeMap<String, Vec<String>>,
    /// Frequency of each analysed word type.
    pub word_counts: BTreeMap<String, u64>,
    pub cost: f64,
}

/// Recomputes the total description length from scratch.
pub fn model_cost(state: &SegmentationState, lexicon: &MorphLexicon) -> Result<f64> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for (word, pieces) in &state.analyses {
        if pieces.concat() != *word {
            return Err(Error::SegmentationMismatch { word: word.clone() });
        }
        let f = *state
            .word_counts
            .get(word)
            .ok_or_else(|| Error::Inconsistent(format!("no frequency for {word}")))?;
        for p in pieces {
            *counts.entry(p.as_str()).or_insert(0) += f;
        }
    }
    let consistent = counts.len() == lexicon.morphs.len()
        && counts.iter().all(|(m, c)| lexicon.morphs.get(*m) == Some(c));
    if !consistent {
        return Err(Error::Inconsistent("lexicon counts do not match the analyses".into()));
    }
    let total = lexicon.total_morph_tokens as f64;
    let corpus: f64 = lexicon
        .morphs
        .values()
        .map(|&c| c as f64 * (total / c as f64).ln())
        .sum();
    let lex: f64 = lexicon.morphs.keys().map(|m| lexicon.coder.morph_cost(m)).sum();
    Ok(lexicon.corpus_weight * corpus + lex)
}

#[derive(Debug, Clone)]
pub struct MorfessorTrainer {
    pub corpus_weight: f64,
    pub seed: u64,
    pub max_epochs: usize,
    /// Training stops once an epoch improves the cost by less than this fraction.
    pub min_relative_improvement: f64,
}

impl Default for MorfessorTrainer {
    fn default() -> Self {
        MorfessorTrainer {
            corpus_weight: 1.0,
            seed: 0,
            max_epochs: 15,
            min_relative_improvement: 0.005,
        }
    }
}

/// Outcome of training, including the cost after each accepted move.
#[derive(Debug, Clone)]
pub struct TrainedSegmenter {
    pub state: SegmentationState,
    pub lexicon: MorphLexicon,
    pub initial_cost: f64,
    pub accepted_costs: Vec<f64>,
    pub epochs: usize,
}

/// Incrementally maintained description length.
struct CostTracker<'a> {
    coder: &'a LexiconCoder,
    alpha: f64,
    counts: HashMap<String, u64>,
    total: u64,
    sum_c_ln_c: f64,
    lexicon_cost: f64,
}

fn c_ln_c(c: u64) -> f64 {
    if c == 0 {
        0.0
    } else {
        c as f64 * (c as f64).ln()
    }
}

impl<'a> CostTracker<'a> {
    fn new(coder: &'a LexiconCoder, alpha: f64) -> Self {
        CostTracker {
            coder,
            alpha,
            counts: HashMap::new(),
            total: 0,
            sum_c_ln_c: 0.0,
            lexicon_cost: 0.0,
        }
    }

    fn add(&mut self, morph: &str, f: u64) {
        let c = self.counts.entry(morph.to_string()).or_insert(0);
        if *c == 0 {
            self.lexicon_cost += self.coder.morph_cost(morph);
        }
        self.sum_c_ln_c += c_ln_c(*c + f) - c_ln_c(*c);
        *c += f;
        self.total += f;
    }

    fn remove(&mut self, morph: &str, f: u64) {
        let c = self.counts.get_mut(morph).expect("removing an absent morph");
        self.sum_c_ln_c += c_ln_c(*c - f) - c_ln_c(*c);
        *c -= f;
        self.total -= f;
        if *c == 0 {
            self.counts.remove(morph);
            self.lexicon_cost -= self.coder.morph_cost(morph);
        }
    }

    fn cost(&self) -> f64 {
        self.alpha * (c_ln_c(self.total) - self.sum_c_ln_c) + self.lexicon_cost
    }

    /// Re-derives the floating sums to stop drift.
    fn refresh(&mut self) {
        self.sum_c_ln_c = self.counts.values().map(|&c| c_ln_c(c)).sum();
        self.lexicon_cost = self.counts.keys().map(|m| self.coder.morph_cost(m)).sum();
    }

    /// On entry `s` is absent from the counts; on exit its chosen analysis is added.
    fn split_recursively(&mut self, s: &str, f: u64) -> Vec<String> {
        self.add(s, f);
        let mut best_cost = self.cost();
        self.remove(s, f);
        let mut best_split = None;
        for (i, _) in s.char_indices().skip(1) {
            let (prefix, suffix) = s.split_at(i);
            self.add(prefix, f);
            self.add(suffix, f);
            let cost = self.cost();
            self.remove(suffix, f);
            self.remove(prefix, f);
            if cost < best_cost - 1e-12 {
                best_cost = cost;
                best_split = Some(i);
            }
        }
        match best_split {
            None => {
                self.add(s, f);
                vec![s.to_string()]
            }
            Some(i) => {
                let (prefix, suffix) = s.split_at(i);
                let mut out = self.split_recursively(prefix, f);
                out.extend(self.split_recursively(suffix, f));
                out
            }
        }
    }
}

/// Lexicon morphs keyed by each of their proper prefixes and suffixes.
#[derive(Default)]
struct AffixIndex {
    prefixes: HashMap<String, BTreeSet<String>>,
    suffixes: HashMap<String, BTreeSet<String>>,
}

impl AffixIndex {
    fn insert(&mut self, m: &str) {
        for (i, _) in m.char_indices().skip(1) {
            self.prefixes.entry(m[..i].to_string()).or_default().insert(m.to_string());
            self.suffixes.entry(m[i..].to_string()).or_default().insert(m.to_string());
        }
    }

    fn remove(&mut self, m: &str) {
        for (i, _) in m.char_indices().skip(1) {
            for (map, key) in [(&mut self.prefixes, &m[..i]), (&mut self.suffixes, &m[i..])] {
                if let Some(set) = map.get_mut(key) {
                    set.remove(m);
                    if set.is_empty() {
                        map.remove(key);
                    }
                }
            }
        }
    }

    fn with_prefix(&self, x: &str) -> Vec<String> {
        self.prefixes.get(x).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }

    fn with_suffix(&self, y: &str) -> Vec<String> {
        self.suffixes.get(y).map(|s| s.iter().cloned().collect()).unwrap_or_default()
    }

    fn shared(&self, x: &str, y: &str) -> bool {
        self.prefixes.get(x).is_some_and(|s| s.len() >= 2) && self.suffixes.get(y).is_some_and(|s| s.len() >= 2)
    }
}

type MorphSplit = (String, (String, String));

impl CostTracker<'_> {
    fn apply_split(&mut self, m: &str, parts: &(String, String)) -> u64 {
        let c = self.counts[m];
        self.remove(m, c);
        self.add(&parts.0, c);
        self.add(&parts.1, c);
        c
    }

    /// Tries the joint move for prefix `x` and suffix `y`. Keeps it and
    /// returns the morph splits made if the cost drops, otherwise restores
    /// the counts.
    fn joint_split(&mut self, index: &AffixIndex, x: &str, y: &str) -> Option<Vec<MorphSplit>> {
        let before = self.cost();
        let mut plan: Vec<MorphSplit> = Vec::new();
        let mut planned: HashSet<String> = HashSet::new();
        for m in index.with_prefix(x) {
            let parts = (x.to_string(), m[x.len()..].to_string());
            planned.insert(m.clone());
            plan.push((m, parts));
        }
        for m in index.with_suffix(y) {
            if planned.insert(m.clone()) {
                let parts = (m[..m.len() - y.len()].to_string(), y.to_string());
                plan.push((m, parts));
            }
        }
        // A part that is itself being split would make the rewrite ambiguous.
        plan.retain(|(_, (a, b))| !planned.contains(a) && !planned.contains(b));
        let mut applied: Vec<(MorphSplit, u64)> = Vec::new();
        let mut fresh: BTreeSet<String> = BTreeSet::new();
        for (m, parts) in plan {
            for p in [&parts.0, &parts.1] {
                if !self.counts.contains_key(p) {
                    fresh.insert(p.clone());
                }
            }
            let c = self.apply_split(&m, &parts);
            applied.push(((m, parts), c));
        }
        let splitting: HashSet<String> = applied.iter().map(|((m, _), _)| m.clone()).collect();
        let mut parts_used: HashSet<String> = applied
            .iter()
            .flat_map(|((_, (a, b)), _)| [a.clone(), b.clone()])
            .collect();
        let mut closure = Vec::new();
        for n in &fresh {
            for m in index.with_prefix(n) {
                closure.push((m.clone(), (n.clone(), m[n.len()..].to_string())));
            }
            for m in index.with_suffix(n) {
                closure.push((m.clone(), (m[..m.len() - n.len()].to_string(), n.clone())));
            }
        }
        closure.sort();
        for (m, parts) in closure {
            let usable = self.counts.contains_key(&m)
                && !splitting.contains(&m)
                && self.counts.contains_key(&parts.0)
                && self.counts.contains_key(&parts.1)
                && !splitting.contains(&parts.0)
                && !splitting.contains(&parts.1)
                && !parts_used.contains(&m);
            if usable {
                parts_used.extend([parts.0.clone(), parts.1.clone()]);
                let c = self.apply_split(&m, &parts);
                applied.push(((m, parts), c));
            }
        }
        if !applied.is_empty() && self.cost() < before - 1e-9 * before.abs().max(1.0) {
            return Some(applied.into_iter().map(|(s, _)| s).collect());
        }
        for ((m, (a, b)), c) in applied.into_iter().rev() {
            self.remove(&b, c);
            self.remove(&a, c);
            self.add(&m, c);
        }
        None
    }
}

impl MorfessorTrainer {
    pub fn train(&self, corpus: &Corpus) -> Result<TrainedSegmenter> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if !(self.corpus_weight > 0.0 && self.corpus_weight.is_finite()) {
            return Err(Error::InvalidArgument("corpus weight must be positive".into()));
        }
        let coder = LexiconCoder::from_corpus(corpus);
        let word_counts: BTreeMap<String, u64> = corpus
            .frequencies()
            .into_iter()
            .map(|(w, f)| (w.to_string(), f))
            .collect();

        let mut tracker = CostTracker::new(&coder, self.corpus_weight);
        let mut analyses: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (w, &f) in &word_counts {
            tracker.add(w, f);
            analyses.insert(w.clone(), vec![w.clone()]);
        }
        let initial_cost = tracker.cost();
        let mut accepted_costs = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut order: Vec<&String> = word_counts.keys().collect();

        let mut epochs = 0;
        let mut epoch_start = initial_cost;
        while epochs < self.max_epochs {
            epochs += 1;
            order.shuffle(&mut rng);
            for &word in &order {
                let f = word_counts[word];
                let before = tracker.cost();
                let old = analyses[word].clone();
                for m in &old {
                    tracker.remove(m, f);
                }
                let new = tracker.split_recursively(word, f);
                let after = tracker.cost();
                if after < before - 1e-9 * before.abs().max(1.0) {
                    accepted_costs.push(after);
                    analyses.insert(word.clone(), new);
                } else if new != old {
                    for m in &new {
                        tracker.remove(m, f);
                    }
                    for m in &old {
                        tracker.add(m, f);
                    }
                }
            }
            self.joint_pass(&mut tracker, &mut analyses, &mut accepted_costs);
            tracker.refresh();
            let end = tracker.cost();
            debug!("morfseg epoch {epochs}: cost {end:.3} ({} morphs)", tracker.counts.len());
            let improvement = (epoch_start - end) / epoch_start.abs().max(f64::MIN_POSITIVE);
            epoch_start = end;
            if improvement < self.min_relative_improvement {
                break;
            }
        }

        let morphs: BTreeMap<String, u64> = tracker.counts.into_iter().collect();
        let lexicon = MorphLexicon::from_counts(morphs, self.corpus_weight, coder.clone())?;
        let mut state = SegmentationState {
            analyses,
            word_counts,
            cost: 0.0,
        };
        state.cost = model_cost(&state, &lexicon)?;
        Ok(TrainedSegmenter {
            state,
            lexicon,
            initial_cost,
            accepted_costs,
            epochs,
        })
    }
}

impl MorfessorTrainer {
    /// One sweep of joint prefix/suffix moves over the current lexicon.
    fn joint_pass(
        &self,
        tracker: &mut CostTracker,
        analyses: &mut BTreeMap<String, Vec<String>>,
        accepted_costs: &mut Vec<f64>,
    ) {
        let mut index = AffixIndex::default();
        let mut lexicon: Vec<&String> = tracker.counts.keys().collect();
        lexicon.sort_unstable();
        for m in &lexicon {
            index.insert(m);
        }
        let mut candidates: BTreeSet<(String, String)> = BTreeSet::new();
        for m in lexicon {
            for (i, _) in m.char_indices().skip(1) {
                if index.shared(&m[..i], &m[i..]) {
                    candidates.insert((m[..i].to_string(), m[i..].to_string()));
                }
            }
        }
        for (x, y) in candidates {
            if !index.shared(&x, &y) {
                continue;
            }
            let Some(splits) = tracker.joint_split(&index, &x, &y) else {
                continue;
            };
            accepted_costs.push(tracker.cost());
            let table: HashMap<&str, &(String, String)> = splits.iter().map(|(m, p)| (m.as_str(), p)).collect();
            for pieces in analyses.values_mut() {
                if pieces.iter().any(|p| table.contains_key(p.as_str())) {
                    *pieces = pieces
                        .iter()
                        .flat_map(|p| match table.get(p.as_str()) {
                            Some((a, b)) => vec![a.clone(), b.clone()],
                            None => vec![p.clone()],
                        })
                        .collect();
                }
            }
            for (m, (a, b)) in &splits {
                if !tracker.counts.contains_key(m) {
                    index.remove(m);
                }
                for p in [a, b] {
                    index.insert(p);
                }
            }
        }
    }
}

pub fn train_segmenter(corpus: &Corpus, corpus_weight: f64, seed: u64) -> Result<(SegmentationState, MorphLexicon)> {
    let trained = MorfessorTrainer {
        corpus_weight,
        seed,
        ..Default::default()
    }
    .train(corpus)?;
    Ok((trained.state, trained.lexicon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LoadOptions;

    fn corpus(lines: &[&str]) -> Corpus {
        Corpus::from_lines(lines.iter().copied(), LoadOptions::default()).unwrap()
    }

    fn repeat(words: &[(&str, usize)]) -> Corpus {
        let line: Vec<&str> = words.iter().flat_map(|&(w, n)| std::iter::repeat_n(w, n)).collect();
        corpus(&[&line.join(" ")])
    }

    #[test]
    fn single_word_cost_closed_form() {
        let c = corpus(&["a"]);
        let (state, lex) = train_segmenter(&c, 1.0, 0).unwrap();
        assert_eq!(state.analyses["a"], ["a"]);
        // One character type seen once: -ln P_char = 0, P_end = 1/2, corpus term 1 * ln(1/1) = 0.
        let expected = 2f64.ln();
        assert!((model_cost(&state, &lex).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn one_word_once_is_never_split() {
        let trained = MorfessorTrainer::default().train(&corpus(&["elmegyünk"])).unwrap();
        assert_eq!(trained.state.analyses["elmegyünk"], ["elmegyünk"]);
        assert!(trained.accepted_costs.is_empty());
    }

    #[test]
    fn shared_halves_lower_the_corpus_term() {
        // With "ab" and "cd" frequent, re-analysing "abcd" as ab+cd adds to
        // existing counts instead of keeping a singleton.
        let coder = LexiconCoder::from_corpus(&corpus(&["ab cd abcd"]));
        let corpus_cost = |counts: &[u64]| {
            let total: u64 = counts.iter().sum();
            counts.iter().map(|&c| c as f64 * (total as f64 / c as f64).ln()).sum::<f64>()
        };
        let whole = corpus_cost(&[10, 10, 1]);
        let split = corpus_cost(&[11, 11]);
        assert!(split < whole);
        assert!(coder.morph_cost("abcd") > 0.0);
    }

    #[test]
    fn inconsistent_lexicon_is_rejected() {
        let c = corpus(&["ab ab"]);
        let (mut state, lex) = train_segmenter(&c, 1.0, 0).unwrap();
        state.analyses.insert("ab".into(), vec!["a".into(), "b".into()]);
        assert!(matches!(model_cost(&state, &lex), Err(Error::Inconsistent(_))));
        state.analyses.insert("ab".into(), vec!["a".into(), "c".into()]);
        assert!(matches!(model_cost(&state, &lex), Err(Error::SegmentationMismatch { .. })));
    }

    #[test]
    fn viterbi_prefers_frequent_halves() {
        let coder = LexiconCoder::from_corpus(&corpus(&["abcd"]));
        let morphs: BTreeMap<String, u64> = [("ab", 10), ("cd", 10), ("abcd", 1)]
            .into_iter()
            .map(|(m, c)| (m.to_string(), c))
            .collect();
        let lex = MorphLexicon::from_counts(morphs, 1.0, coder).unwrap();
        assert!(2.0 * (21f64 / 10.0).ln() < 21f64.ln());
        assert_eq!(lex.segment_word("abcd"), ["ab", "cd"]);
        assert_eq!(lex.segment_word("ab"), ["ab"]);
        // Unseen characters fall back to single characters.
        assert_eq!(lex.segment_word("xyz"), ["x", "y", "z"]);
        assert_eq!(lex.segment_word("abq"), ["ab", "q"]);
    }

    #[test]
    fn accepted_costs_never_increase() {
        let c = repeat(&[
            ("házban", 4),
            ("házak", 3),
            ("kertben", 4),
            ("kertek", 2),
            ("ház", 5),
            ("kert", 5),
            ("kertekben", 2),
            ("házakban", 1),
        ]);
        let t = MorfessorTrainer::default().train(&c).unwrap();
        let mut prev = t.initial_cost;
        for &c in &t.accepted_costs {
            assert!(c <= prev + 1e-9, "{c} > {prev}");
            prev = c;
        }
        assert!(t.state.cost <= t.initial_cost + 1e-9);
        let recomputed = model_cost(&t.state, &t.lexicon).unwrap();
        assert!((recomputed - t.state.cost).abs() <= 1e-6 * recomputed);
    }

    #[test]
    fn lexicon_file_round_trip() {
        let c = repeat(&[("abab", 3), ("ab", 4), ("cdab", 2)]);
        let (_, lex) = train_segmenter(&c, 1.0, 3).unwrap();
        let text = lex.to_text();
        assert!(text.starts_with("#morfseg v1 corpus_weight=1 p_end="));
        let back = MorphLexicon::parse(&text).unwrap();
        assert_eq!(back, lex);
        for w in ["abab", "cdcd", "xab"] {
            assert_eq!(back.segment_word(w), lex.segment_word(w));
        }
        assert!(MorphLexicon::parse("#morfseg v1\nab\tx\n").is_err());
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let c = repeat(&[("walkab", 5), ("runab", 5), ("walkcd", 5), ("runcd", 5), ("jumpab", 2)]);
        let a = train_segmenter(&c, 1.0, 7).unwrap();
        let b = train_segmenter(&c, 1.0, 7).unwrap();
        assert_eq!(a.0.analyses, b.0.analyses);
        assert_eq!(a.1.to_text(), b.1.to_text());
    }
}
