//! Generation-based augmentation: the sampling contract for sequence models,
//! the prefix and temperature driven generation loop, ingestion of text
//! produced elsewhere, and the word and subword augmentation pipelines.

use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::bpe::BpeTrainer;
use crate::corpus::{build_vocabulary, load_corpus, sample_prefix, Corpus, LoadOptions, Sentence, WordVocabulary};
use crate::error::{Error, Result};
use crate::mix::{interpolate_static, optimize_weights, MixtureWeights, DEFAULT_TOLERANCE};
use crate::morfseg::MorfessorTrainer;
use crate::ngram::model::{to_prob, NgramKey};
use crate::ngram::{
    count_ngrams, footprint, prune_to_budget, train_kn, BackoffModel, PerplexityMode, TokenId, BOS_ID, EOS_ID,
    UNK_ID,
};
use crate::subword::{character_forms, SubwordTokenizer};

/// Tolerance on the sum of a returned next-token distribution.
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-6;

/// A generator that predicts the next token from the tokens so far.
pub trait SequenceModel: Sync {
    /// Every token the model can emit, including the end-of-sentence symbol.
    fn inventory(&self) -> &[String];

    /// Index of the end-of-sentence symbol in [`SequenceModel::inventory`].
    fn end_of_sentence(&self) -> usize;

    /// Probabilities over the inventory, summing to one.
    fn next_token_distribution(&self, context: &[String]) -> Vec<f64>;

    /// A sampler for `p(w)^(1/T) / Z`. The default draws from the full
    /// distribution; models may provide something faster.
    fn tempered(&self, temperature: f64) -> Result<Box<dyn TemperedSampler + '_>> {
        check_temperature(temperature)?;
        Ok(Box::new(ExplicitSampler {
            model: self,
            beta: 1.0 / temperature,
        }))
    }
}

/// Draws inventory indices from a temperature-scaled model.
pub trait TemperedSampler {
    fn sample(&self, context: &[String], rng: &mut dyn RngCore) -> Result<usize>;
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {t}")));
    }
    Ok(())
}

/// Validates a distribution and rescales it to `p^beta`, normalized.
pub fn tempered_distribution(p: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    if p.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(Error::ContractViolation("negative or non-finite probability".into()));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(Error::ContractViolation(format!("distribution sums to {sum}")));
    }
    if temperature == 1.0 {
        return Ok(p.iter().map(|x| x / sum).collect());
    }
    let beta = 1.0 / temperature;
    let scaled: Vec<f64> = p.iter().map(|x| if *x > 0.0 { x.powf(beta) } else { 0.0 }).collect();
    let z: f64 = scaled.iter().sum();
    Ok(scaled.into_iter().map(|x| x / z).collect())
}

fn draw(weights: &[f64], total: f64, rng: &mut dyn RngCore) -> usize {
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return i;
            }
            u -= w;
            last = i;
        }
    }
    last
}

struct ExplicitSampler<'a, M: SequenceModel + ?Sized> {
    model: &'a M,
    beta: f64,
}

impl<M: SequenceModel + ?Sized> TemperedSampler for ExplicitSampler<'_, M> {
    fn sample(&self, context: &[String], rng: &mut dyn RngCore) -> Result<usize> {
        let p = self.model.next_token_distribution(context);
        if p.len() != self.model.inventory().len() {
            return Err(Error::ContractViolation(format!(
                "distribution has {} entries for an inventory of {}",
                p.len(),
                self.model.inventory().len()
            )));
        }
        let t = tempered_distribution(&p, 1.0 / self.beta)?;
        Ok(draw(&t, 1.0, rng))
    }
}

/// Extends `prefix` by sampling until end of sentence or `max_tokens`.
/// The prefix is part of the result and counts toward the cap.
pub fn sample_sentence(
    model: &dyn SequenceModel,
    prefix: &[String],
    temperature: f64,
    max_tokens: usize,
    rng: &mut dyn RngCore,
) -> Result<Sentence> {
    let sampler = model.tempered(temperature)?;
    sample_with(model, sampler.as_ref(), prefix, max_tokens, rng)
}

fn sample_with(
    model: &dyn SequenceModel,
    sampler: &dyn TemperedSampler,
    prefix: &[String],
    max_tokens: usize,
    rng: &mut dyn RngCore,
) -> Result<Sentence> {
    if max_tokens == 0 {
        return Err(Error::InvalidArgument("max_tokens must be at least 1".into()));
    }
    let mut tokens: Vec<String> = prefix.iter().take(max_tokens).cloned().collect();
    let eos = model.end_of_sentence();
    while tokens.len() < max_tokens {
        let i = sampler.sample(&tokens, rng)?;
        if i == eos {
            break;
        }
        tokens.push(model.inventory()[i].clone());
    }
    if tokens.is_empty() {
        return Err(Error::ContractViolation("generated an empty sentence".into()));
    }
    Sentence::new(tokens)
}

fn default_prefix_min() -> usize {
    1
}
fn default_prefix_max() -> usize {
    7
}
fn default_temperature_min() -> f64 {
    1.0
}
fn default_temperature_max() -> f64 {
    1.5
}
fn default_max_tokens() -> usize {
    64
}
fn default_workers() -> usize {
    1
}

/// Generation controls; the JSON form is shared with external generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    #[serde(default = "default_prefix_min")]
    pub prefix_len_min: usize,
    #[serde(default = "default_prefix_max")]
    pub prefix_len_max: usize,
    #[serde(default = "default_temperature_min")]
    pub temperature_min: f64,
    #[serde(default = "default_temperature_max")]
    pub temperature_max: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens_per_sentence: usize,
    pub target_token_count: u64,
    #[serde(default)]
    pub seed: u64,
    /// Independent sampling streams; part of the output's identity.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl GenerationConfig {
    pub fn new(target_token_count: u64, seed: u64) -> Self {
        GenerationConfig {
            prefix_len_min: default_prefix_min(),
            prefix_len_max: default_prefix_max(),
            temperature_min: default_temperature_min(),
            temperature_max: default_temperature_max(),
            max_tokens_per_sentence: default_max_tokens(),
            target_token_count,
            seed,
            workers: default_workers(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prefix_len_min == 0 || self.prefix_len_min > self.prefix_len_max {
            return Err(Error::InvalidArgument("need 1 <= prefix_len_min <= prefix_len_max".into()));
        }
        if !(self.temperature_min > 0.0 && self.temperature_min <= self.temperature_max) {
            return Err(Error::InvalidArgument("need 0 < temperature_min <= temperature_max".into()));
        }
        if self.max_tokens_per_sentence == 0 {
            return Err(Error::InvalidArgument("max_tokens_per_sentence must be at least 1".into()));
        }
        if self.target_token_count == 0 {
            return Err(Error::InvalidArgument("target_token_count must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Seed of sampling stream `index`.
    pub fn worker_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    InternalSampler,
    ExternalFile { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedCorpusSet {
    pub generated: Corpus,
    pub provenance: Provenance,
    pub config: Option<GenerationConfig>,
}

/// Samples sentences seeded by corpus prefixes until the token target is met.
pub fn generate_corpus(
    model: &dyn SequenceModel,
    source: &Corpus,
    config: &GenerationConfig,
) -> Result<AugmentedCorpusSet> {
    config.validate()?;
    if source.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let workers = config.workers as u64;
    let quotas: Vec<u64> = (0..workers)
        .map(|i| config.target_token_count / workers + u64::from(i < config.target_token_count % workers))
        .collect();
    let parts: Vec<Vec<Sentence>> = quotas
        .par_iter()
        .enumerate()
        .map(|(i, &quota)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.worker_seed(i));
            let mut out = Vec::new();
            let mut produced = 0u64;
            while produced < quota {
                let prefix = sample_prefix(source, &mut rng, config.prefix_len_min, config.prefix_len_max)?;
                let t = if config.temperature_min < config.temperature_max {
                    rng.gen_range(config.temperature_min..=config.temperature_max)
                } else {
                    config.temperature_min
                };
                let s = sample_sentence(model, &prefix, t, config.max_tokens_per_sentence, &mut rng)?;
                produced += s.len() as u64;
                out.push(s);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(AugmentedCorpusSet {
        generated: Corpus::from_sentences(parts.into_iter().flatten().collect()),
        provenance: Provenance::InternalSampler,
        config: Some(config.clone()),
    })
}

/// Loads generated text written by another tool.
pub fn ingest_external_text(path: impl AsRef<Path>, options: LoadOptions) -> Result<AugmentedCorpusSet> {
    let path = path.as_ref();
    Ok(AugmentedCorpusSet {
        generated: load_corpus(path, options)?,
        provenance: Provenance::ExternalFile { path: path.to_path_buf() },
        config: None,
    })
}

/// A back-off model used as a generator. `<s>` and `<unk>` are never
/// emitted; the remaining tokens are renormalized.
pub struct NgramSequenceModel {
    model: BackoffModel,
    inventory: Vec<String>,
    ids: Vec<TokenId>,
    eos: usize,
    /// `children[n]`: explicit `(token, probability)` continuations of each
    /// `n`-token context, sorted by token.
    children: Vec<FxHashMap<NgramKey, Vec<(TokenId, f64)>>>,
    /// Linear back-off weight of each context.
    backoffs: Vec<FxHashMap<NgramKey, f64>>,
    /// Inventory index of each token id.
    position: Vec<Option<usize>>,
    /// Inventory entries grouped by identical unigram probability, so a
    /// tempered unigram costs one power per distinct value.
    groups: Vec<(f64, Vec<usize>)>,
    group_of: Vec<usize>,
}

pub fn ngram_backed_model(model: BackoffModel) -> NgramSequenceModel {
    NgramSequenceModel::new(model)
}

impl NgramSequenceModel {
    pub fn new(model: BackoffModel) -> Self {
        let ids: Vec<TokenId> = model.vocab().predictable().filter(|&id| id != UNK_ID).collect();
        let inventory = ids.iter().map(|&id| model.vocab().token(id).to_string()).collect();
        let eos = ids.iter().position(|&id| id == EOS_ID).expect("</s> is always present");
        let order = model.order();
        let mut children = vec![FxHashMap::default(); order];
        let mut backoffs = vec![FxHashMap::default(); order];
        for n in 2..=order {
            let map: &mut FxHashMap<NgramKey, Vec<(TokenId, f64)>> = &mut children[n - 1];
            for (k, e) in model.table(n) {
                map.entry(k[..n - 1].into()).or_default().push((k[n - 1], to_prob(e.logprob)));
            }
            for v in map.values_mut() {
                v.sort_unstable_by_key(|x| x.0);
            }
            for ctx in map.keys() {
                let b = model.entry(ctx).map_or(1.0, |e| 10f64.powf(e.backoff));
                backoffs[n - 1].insert(ctx.clone(), b);
            }
        }
        let mut position = vec![None; model.vocab().len()];
        for (i, &id) in ids.iter().enumerate() {
            position[id as usize] = Some(i);
        }
        let mut by_value: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
        for (i, &w) in ids.iter().enumerate() {
            by_value.entry(model.prob(&[], w).to_bits()).or_default().push(i);
        }
        let mut group_of = vec![0; ids.len()];
        let groups: Vec<(f64, Vec<usize>)> = by_value
            .into_iter()
            .enumerate()
            .map(|(g, (bits, members))| {
                for &i in &members {
                    group_of[i] = g;
                }
                (f64::from_bits(bits), members)
            })
            .collect();
        NgramSequenceModel {
            model,
            inventory,
            ids,
            eos,
            children,
            backoffs,
            position,
            groups,
            group_of,
        }
    }

    pub fn backoff_model(&self) -> &BackoffModel {
        &self.model
    }

    fn history(&self, context: &[String]) -> Vec<TokenId> {
        let keep = self.model.order() - 1;
        let mut h: Vec<TokenId> = Vec::with_capacity(keep + 1);
        if context.len() < keep {
            h.push(BOS_ID);
        }
        let start = context.len().saturating_sub(keep);
        h.extend(context[start..].iter().map(|t| self.model.vocab().id_or_unk(t)));
        h
    }
}

impl SequenceModel for NgramSequenceModel {
    fn inventory(&self) -> &[String] {
        &self.inventory
    }

    fn end_of_sentence(&self) -> usize {
        self.eos
    }

    fn next_token_distribution(&self, context: &[String]) -> Vec<f64> {
        let h = self.history(context);
        let p: Vec<f64> = self.ids.iter().map(|&w| self.model.prob(&h, w)).collect();
        let z: f64 = p.iter().sum();
        p.into_iter().map(|x| x / z).collect()
    }

    fn tempered(&self, temperature: f64) -> Result<Box<dyn TemperedSampler + '_>> {
        check_temperature(temperature)?;
        let beta = 1.0 / temperature;
        let power: Vec<f64> = self.groups.iter().map(|(p, _)| p.powf(beta)).collect();
        let mut cdf = Vec::with_capacity(power.len());
        let mut acc = 0.0;
        for ((_, members), w) in self.groups.iter().zip(&power) {
            acc += w * members.len() as f64;
            cdf.push(acc);
        }
        Ok(Box::new(NgramTempered {
            model: self,
            beta,
            power,
            cdf,
        }))
    }
}

/// Exact tempered sampling over the back-off structure. Each explicit level
/// contributes the tokens first seen there, scaled by the product of the
/// back-off weights above it; the unigram level covers the rest and is
/// sampled by rejection.
struct NgramTempered<'a> {
    model: &'a NgramSequenceModel,
    beta: f64,
    /// Tempered unigram probability of each group member.
    power: Vec<f64>,
    /// Cumulative tempered mass over groups.
    cdf: Vec<f64>,
}

const MAX_REJECTIONS: usize = 10_000;

impl NgramTempered<'_> {
    fn unigram_power(&self, i: usize) -> f64 {
        self.power[self.model.group_of[i]]
    }
}

impl TemperedSampler for NgramTempered<'_> {
    fn sample(&self, context: &[String], rng: &mut dyn RngCore) -> Result<usize> {
        let m = self.model;
        let h = m.history(context);
        let mut seen: FxHashSet<TokenId> = FxHashSet::default();
        let mut items: Vec<(usize, f64)> = Vec::new();
        let mut scale = 1.0;
        for k in (1..=h.len()).rev() {
            let ctx = &h[h.len() - k..];
            let Some(kids) = m.children[k].get(ctx) else {
                scale *= m.model.entry(ctx).map_or(1.0, |e| 10f64.powf(e.backoff));
                continue;
            };
            let s = scale.powf(self.beta);
            for &(w, p) in kids {
                if seen.insert(w) && p > 0.0 {
                    if let Some(i) = m.position[w as usize] {
                        items.push((i, s * p.powf(self.beta)));
                    }
                }
            }
            scale *= m.backoffs[k][ctx];
        }
        let covered: f64 = seen
            .iter()
            .filter_map(|&w| m.position[w as usize])
            .map(|i| self.unigram_power(i))
            .sum();
        let total_unigram = *self.cdf.last().unwrap_or(&0.0);
        let rest = scale.powf(self.beta) * (total_unigram - covered).max(0.0);
        let explicit: f64 = items.iter().map(|x| x.1).sum();
        let total = explicit + rest;
        if !(total > 0.0) {
            return Err(Error::ContractViolation("no probability mass to sample from".into()));
        }
        let mut u = rng.gen::<f64>() * total;
        for &(i, w) in &items {
            if u < w {
                return Ok(i);
            }
            u -= w;
        }
        if items.is_empty() || rest > 0.0 {
            for _ in 0..MAX_REJECTIONS {
                let r = rng.gen::<f64>() * total_unigram;
                let g = self.cdf.partition_point(|&c| c <= r).min(self.cdf.len() - 1);
                let members = &m.groups[g].1;
                let i = members[rng.gen_range(0..members.len())];
                if !seen.contains(&m.ids[i]) {
                    return Ok(i);
                }
            }
            // Nearly all unigram mass is explicit above; enumerate what is left.
            let left: Vec<f64> = (0..m.ids.len())
                .map(|i| if seen.contains(&m.ids[i]) { 0.0 } else { self.unigram_power(i) })
                .collect();
            let z: f64 = left.iter().sum();
            if z > 0.0 {
                return Ok(draw(&left, z, rng));
            }
        }
        Ok(items.last().map_or(m.eos, |x| x.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    Word,
    SubwordBpe,
    SubwordMorfessor,
}

impl PipelineMode {
    pub fn is_subword(self) -> bool {
        self != PipelineMode::Word
    }
}

fn default_order() -> usize {
    4
}
fn default_inventory() -> usize {
    2000
}
fn default_corpus_weight() -> f64 {
    1.0
}
fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub mode: PipelineMode,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Cap on the word list (word mode) or on the subword list before the
    /// single-character forms are added (subword modes).
    #[serde(default)]
    pub vocab_cap: Option<usize>,
    #[serde(default)]
    pub budget_bytes: Option<u64>,
    /// BPE target inventory.
    #[serde(default = "default_inventory")]
    pub inventory: usize,
    /// Segmenter corpus weight.
    #[serde(default = "default_corpus_weight")]
    pub corpus_weight: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl PipelineConfig {
    pub fn new(mode: PipelineMode) -> Self {
        PipelineConfig {
            mode,
            order: default_order(),
            vocab_cap: None,
            budget_bytes: None,
            inventory: default_inventory(),
            corpus_weight: default_corpus_weight(),
            seed: 0,
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub mode: PipelineMode,
    pub order: usize,
    /// LM token types excluding sentence markers and `<unk>`.
    pub token_inventory_size: usize,
    pub tokenizer_inventory_size: Option<usize>,
    pub mixture_weights: MixtureWeights,
    pub footprint_bnlm: u64,
    pub footprint_tr_bnlm: u64,
    pub footprint_mixed: u64,
    pub tuning_perplexity_bnlm: f64,
    pub tuning_perplexity_tr_bnlm: f64,
    pub tuning_perplexity_mixed: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub bnlm: BackoffModel,
    pub tr_bnlm: BackoffModel,
    pub mixed: BackoffModel,
    pub weights: MixtureWeights,
    pub tokenizer: Option<SubwordTokenizer>,
    /// Token list shared by all three models.
    pub vocabulary: WordVocabulary,
    pub report: PipelineReport,
}

impl PipelineOutput {
    /// Maps a word-level corpus onto the models' tokens.
    pub fn prepare(&self, corpus: &Corpus) -> Result<Corpus> {
        match &self.tokenizer {
            None => Ok(corpus.clone()),
            Some(t) => {
                let inv: FxHashSet<String> = self.vocabulary.words().map(str::to_string).collect();
                t.segment_corpus(corpus, Some(&inv))
            }
        }
    }
}

pub fn train_tokenizer(in_domain: &Corpus, config: &PipelineConfig) -> Result<Option<SubwordTokenizer>> {
    Ok(match config.mode {
        PipelineMode::Word => None,
        PipelineMode::SubwordBpe => Some(SubwordTokenizer::Bpe(BpeTrainer::new(config.inventory).train(in_domain)?)),
        PipelineMode::SubwordMorfessor => {
            let trainer = MorfessorTrainer {
                corpus_weight: config.corpus_weight,
                seed: config.seed,
                ..MorfessorTrainer::default()
            };
            Some(SubwordTokenizer::Morfessor(trainer.train(in_domain)?.lexicon))
        }
    })
}

/// Builds the in-domain model, the model on generated text and their
/// interpolation, all over one shared token list.
pub fn run_pipeline(
    in_domain: &Corpus,
    generated: &AugmentedCorpusSet,
    tuning: &Corpus,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if in_domain.is_empty() || generated.generated.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if tuning.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let tokenizer = train_tokenizer(in_domain, config)?;
    let vocabulary = pipeline_vocabulary(tokenizer.as_ref(), in_domain, &generated.generated, config.vocab_cap)?;
    let partial = PipelineOutput {
        bnlm: BackoffModel::from_parts(1, Default::default(), vec![Default::default()])?,
        tr_bnlm: BackoffModel::from_parts(1, Default::default(), vec![Default::default()])?,
        mixed: BackoffModel::from_parts(1, Default::default(), vec![Default::default()])?,
        weights: MixtureWeights::uniform(2),
        tokenizer,
        vocabulary,
        report: PipelineReport {
            mode: config.mode,
            order: config.order,
            token_inventory_size: 0,
            tokenizer_inventory_size: None,
            mixture_weights: MixtureWeights::uniform(2),
            footprint_bnlm: 0,
            footprint_tr_bnlm: 0,
            footprint_mixed: 0,
            tuning_perplexity_bnlm: 0.0,
            tuning_perplexity_tr_bnlm: 0.0,
            tuning_perplexity_mixed: 0.0,
        },
    };
    let in_tok = partial.prepare(in_domain)?;
    let gen_tok = partial.prepare(&generated.generated)?;
    let tune_tok = partial.prepare(tuning)?;
    let PipelineOutput {
        tokenizer, vocabulary, ..
    } = partial;

    let bnlm = train_kn(&count_ngrams(&in_tok, config.order, Some(&vocabulary))?)?;
    let tr_bnlm = train_kn(&count_ngrams(&gen_tok, config.order, Some(&vocabulary))?)?;
    let components = [bnlm, tr_bnlm];
    let weights = optimize_weights(&components, &tune_tok, config.tolerance)?;
    let mixed = interpolate_static(&components, &weights)?;
    let [mut bnlm, mut tr_bnlm] = components;
    let mut mixed = mixed;
    if let Some(budget) = config.budget_bytes {
        bnlm = prune_to_budget(&bnlm, budget)?;
        tr_bnlm = prune_to_budget(&tr_bnlm, budget)?;
        mixed = prune_to_budget(&mixed, budget)?;
    }
    let ppl = |m: &BackoffModel| m.perplexity(&tune_tok, PerplexityMode::PerWord);
    let report = PipelineReport {
        mode: config.mode,
        order: config.order,
        token_inventory_size: mixed.vocab().word_inventory(),
        tokenizer_inventory_size: tokenizer.as_ref().map(SubwordTokenizer::inventory_size),
        mixture_weights: weights.clone(),
        footprint_bnlm: footprint(&bnlm),
        footprint_tr_bnlm: footprint(&tr_bnlm),
        footprint_mixed: footprint(&mixed),
        tuning_perplexity_bnlm: ppl(&bnlm)?,
        tuning_perplexity_tr_bnlm: ppl(&tr_bnlm)?,
        tuning_perplexity_mixed: ppl(&mixed)?,
    };
    Ok(PipelineOutput {
        bnlm,
        tr_bnlm,
        mixed,
        weights,
        tokenizer,
        vocabulary,
        report,
    })
}

/// Token list shared by the in-domain and generated models. Subword lists
/// are built from the segmented corpora and then given both tagged forms of
/// every character, so any word can still be spelled out.
pub fn pipeline_vocabulary(
    tokenizer: Option<&SubwordTokenizer>,
    in_domain: &Corpus,
    generated: &Corpus,
    cap: Option<usize>,
) -> Result<WordVocabulary> {
    let Some(t) = tokenizer else {
        return shared_vocabulary(in_domain, generated, cap);
    };
    let a = t.segment_corpus(in_domain, None)?;
    let b = t.segment_corpus(generated, None)?;
    let ranked = shared_vocabulary(&a, &b, cap)?;
    let forms = WordVocabulary::from_counts(character_forms(&in_domain.concat(generated)).into_iter().map(|f| (f, 0)), None);
    Ok(ranked.extended(&forms, None))
}

/// In-domain tokens by frequency, then tokens seen only in generated text
/// by frequency, cut to `cap`.
pub fn shared_vocabulary(in_domain: &Corpus, generated: &Corpus, cap: Option<usize>) -> Result<WordVocabulary> {
    let a = build_vocabulary(in_domain, None)?;
    let b = build_vocabulary(generated, None)?;
    Ok(a.extended(&b, cap))
}
