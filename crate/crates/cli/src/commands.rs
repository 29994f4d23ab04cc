//! Single-stage subcommands. Each one is a thin wrapper over the library
//! and leaves a manifest next to its main output.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::Parser;
use log::info;
use rustc_hash::FxHashSet;
use serde::Serialize;
use serde_json::json;

use subaug::bpe::BpeTrainer;
use subaug::corpus::{build_vocabulary, detag_corpus, load_corpus, Corpus, LoadOptions, WordVocabulary};
use subaug::evalkit::{align, oov_prf, EvalReport, SpellingModel};
use subaug::genaug::{
    generate_corpus, ingest_external_text, pipeline_vocabulary, GenerationConfig, NgramSequenceModel,
};
use subaug::mix::{interpolate_static, optimize_weights, MixtureWeights};
use subaug::morfseg::MorfessorTrainer;
use subaug::ngram::{
    count_ngrams, footprint, prune_to_budget, prune_with_threshold, read_arpa, train_kn, write_arpa, BackoffModel,
    PerplexityMode,
};
use subaug::subword::SubwordTokenizer;
use subaug::synth::{write_dataset, SynthConfig, SPLIT_NAMES};

use crate::args::{
    Algo, Cli, DetagArgs, EvalArgs, GenerateArgs, LmCommand, LmPruneArgs, LmScoreArgs, LmTrainArgs, MixArgs,
    ReplayArgs, SynthArgs, TokenizeApplyArgs, TokenizeCommand, TokenizeTrainArgs,
};
use crate::manifest::{config_hash, manifest_path, FileDigest, Manifest};
use crate::{DataError, InternalError, UsageError};

pub struct Context {
    pub seed: Option<u64>,
    pub json: bool,
    pub argv: Vec<String>,
}

impl Context {
    /// Prints `text`, or `value` as JSON under `--json`.
    pub fn emit(&self, text: impl AsRef<str>, value: serde_json::Value) {
        if self.json {
            println!("{}", serde_json::to_string_pretty(&value).expect("values serialize"));
        } else {
            println!("{}", text.as_ref());
        }
    }

    /// Writes the manifest for a run whose first output is the main one.
    pub fn record<C: Serialize>(&self, config: &C, seed: Option<u64>, inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<()> {
        self.record_to(&manifest_path(&outputs[0]), config, seed, inputs, outputs)
    }

    pub fn record_to<C: Serialize>(
        &self,
        path: &Path,
        config: &C,
        seed: Option<u64>,
        inputs: &[PathBuf],
        outputs: &[PathBuf],
    ) -> Result<()> {
        let hash = config_hash(&json!({ "command": config, "seed": seed }));
        Manifest::new(self.argv.clone(), seed, hash, inputs, outputs)?.write(path)
    }
}

pub fn load_words(path: &Path) -> Result<Corpus> {
    load_corpus(path, LoadOptions::default()).with_context(|| format!("loading {}", path.display()))
}

fn load_tokenizer(path: &Path) -> Result<SubwordTokenizer> {
    SubwordTokenizer::read(path).with_context(|| format!("loading tokenizer {}", path.display()))
}

fn load_model(path: &Path) -> Result<BackoffModel> {
    read_arpa(path).with_context(|| format!("loading model {}", path.display()))
}

fn write_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    corpus.write(path).with_context(|| format!("writing {}", path.display()))
}

fn inventory_of(vocab: &WordVocabulary) -> FxHashSet<String> {
    vocab.words().map(str::to_string).collect()
}

/// Maps a word corpus onto a model's tokens, falling back to characters for
/// subwords the model does not know.
pub fn model_tokens(model: &BackoffModel, tokenizer: Option<&SubwordTokenizer>, words: &Corpus) -> Result<Corpus> {
    match tokenizer {
        None => Ok(words.clone()),
        Some(t) => {
            let inv: FxHashSet<String> = model.vocab().tokens().iter().cloned().collect();
            Ok(t.segment_corpus(words, Some(&inv))?)
        }
    }
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        seed: ctx.seed.unwrap_or(SynthConfig::default().seed),
        train_tokens: a.train_tokens,
        valid_tokens: a.valid_tokens,
        eval_tokens: a.eval_tokens,
        heldout_tokens: a.heldout_tokens,
        ..SynthConfig::default()
    };
    let manifest = write_dataset(&a.out, &config)?;
    let mut outputs = vec![a.out.join("manifest.json")];
    outputs.extend(SPLIT_NAMES.iter().map(|n| a.out.join(format!("{n}.txt"))));
    let lines: Vec<String> = manifest
        .splits
        .iter()
        .map(|s| format!("{}\t{} sentences\t{} tokens\t{} types", s.file, s.sentences, s.tokens, s.types))
        .collect();
    ctx.record_to(&a.out.join("synth.manifest.json"), a, Some(config.seed), &[], &outputs)?;
    ctx.emit(lines.join("\n"), serde_json::to_value(&manifest)?);
    Ok(())
}

pub fn tokenize(ctx: &Context, c: &TokenizeCommand) -> Result<()> {
    match c {
        TokenizeCommand::Train(a) => tokenize_train(ctx, a),
        TokenizeCommand::Apply(a) => tokenize_apply(ctx, a),
        TokenizeCommand::Detag(a) => detag(ctx, a),
    }
}

fn tokenize_train(ctx: &Context, a: &TokenizeTrainArgs) -> Result<()> {
    let corpus = load_words(&a.input)?;
    let seed = ctx.seed.unwrap_or(0);
    let tokenizer = match a.algo {
        Algo::Bpe => {
            let target = a.inventory.ok_or_else(|| UsageError("--inventory is required for bpe".into()))?;
            SubwordTokenizer::Bpe(BpeTrainer::new(target).train(&corpus)?)
        }
        Algo::Morfessor => {
            let trainer = MorfessorTrainer {
                corpus_weight: a.corpus_weight,
                seed,
                ..MorfessorTrainer::default()
            };
            SubwordTokenizer::Morfessor(trainer.train(&corpus)?.lexicon)
        }
    };
    tokenizer.write(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    ctx.record(a, Some(seed), &[a.input.clone()], &[a.out.clone()])?;
    let size = tokenizer.inventory_size();
    ctx.emit(
        format!("{} inventory {size}", tokenizer.kind()),
        json!({ "algo": tokenizer.kind(), "inventory_size": size, "out": a.out }),
    );
    Ok(())
}

fn tokenize_apply(ctx: &Context, a: &TokenizeApplyArgs) -> Result<()> {
    let tokenizer = load_tokenizer(&a.model)?;
    let corpus = load_words(&a.input)?;
    let tagged = tokenizer.segment_corpus(&corpus, None)?;
    write_corpus(&tagged, &a.out)?;
    ctx.record(a, None, &[a.model.clone(), a.input.clone()], &[a.out.clone()])?;
    ctx.emit(
        format!("{} words -> {} subwords", corpus.token_count(), tagged.token_count()),
        json!({ "words": corpus.token_count(), "subwords": tagged.token_count() }),
    );
    Ok(())
}

fn detag(ctx: &Context, a: &DetagArgs) -> Result<()> {
    let tagged = load_corpus(&a.input, LoadOptions { subword_input: true, ..LoadOptions::default() })
        .with_context(|| format!("loading {}", a.input.display()))?;
    let words = detag_corpus(&tagged)?;
    write_corpus(&words, &a.out)?;
    ctx.record(a, None, &[a.input.clone()], &[a.out.clone()])?;
    ctx.emit(format!("{} words", words.token_count()), json!({ "words": words.token_count() }));
    Ok(())
}

pub fn lm(ctx: &Context, c: &LmCommand) -> Result<()> {
    match c {
        LmCommand::Train(a) => lm_train(ctx, a),
        LmCommand::Prune(a) => lm_prune(ctx, a),
        LmCommand::Score(a) => lm_score(ctx, a),
    }
}

fn model_summary(model: &BackoffModel) -> serde_json::Value {
    let counts: Vec<usize> = (1..=model.order()).map(|n| model.entry_count(n)).collect();
    json!({ "order": model.order(), "ngrams": counts, "footprint_bytes": footprint(model) })
}

fn lm_train(ctx: &Context, a: &LmTrainArgs) -> Result<()> {
    let options = LoadOptions { subword_input: a.subword_input, ..LoadOptions::default() };
    let load = |p: &PathBuf| load_corpus(p, options).with_context(|| format!("loading {}", p.display()));
    let input = load(&a.input)?;
    let tokenizer = a.tokenizer.as_deref().map(load_tokenizer).transpose()?;
    let sources: Vec<Corpus> = if a.vocab_from.is_empty() {
        vec![input.clone()]
    } else {
        a.vocab_from.iter().map(load).collect::<Result<_>>()?
    };
    let second = sources.get(1).cloned().unwrap_or_default();
    let vocab = pipeline_vocabulary(tokenizer.as_ref(), &sources[0], &second, a.vocab_cap)?;
    let training = match &tokenizer {
        Some(t) => t.segment_corpus(&input, Some(&inventory_of(&vocab)))?,
        None => input,
    };
    let model = train_kn(&count_ngrams(&training, a.order, Some(&vocab))?)?;
    write_arpa(&model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut inputs = vec![a.input.clone()];
    inputs.extend(a.vocab_from.iter().cloned());
    inputs.extend(a.tokenizer.iter().cloned());
    ctx.record(a, None, &inputs, &[a.out.clone()])?;
    ctx.emit(
        format!(
            "order {} with {} tokens, footprint {} bytes",
            model.order(),
            model.vocab().word_inventory(),
            footprint(&model)
        ),
        model_summary(&model),
    );
    Ok(())
}

fn lm_prune(ctx: &Context, a: &LmPruneArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let before = footprint(&model);
    let pruned = match (a.budget, a.threshold) {
        (Some(b), _) => prune_to_budget(&model, b)?,
        (None, Some(t)) => prune_with_threshold(&model, t),
        (None, None) => bail!(UsageError("give --budget or --threshold".into())),
    };
    write_arpa(&pruned, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    ctx.record(a, None, &[a.model.clone()], &[a.out.clone()])?;
    let after = footprint(&pruned);
    ctx.emit(format!("footprint {before} -> {after} bytes"), model_summary(&pruned));
    Ok(())
}

fn lm_score(ctx: &Context, a: &LmScoreArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let tokenizer = a.tokenizer.as_deref().map(load_tokenizer).transpose()?;
    let test = model_tokens(&model, tokenizer.as_ref(), &load_words(&a.test)?)?;
    let mode = if a.per_token { PerplexityMode::PerToken } else { PerplexityMode::PerWord };
    let ppl = model.perplexity(&test, mode)?;
    let logprob: f64 = test.sentences().iter().map(|s| model.sentence_logprob(s).logprob).sum();
    let value = json!({ "perplexity": ppl, "mode": mode, "log10_prob": logprob, "sentences": test.sentences().len() });
    if let Some(out) = &a.out {
        crate::manifest::write_if_changed(out, (serde_json::to_string_pretty(&value)? + "\n").as_bytes())?;
        let mut inputs = vec![a.model.clone(), a.test.clone()];
        inputs.extend(a.tokenizer.iter().cloned());
        ctx.record(a, None, &inputs, &[out.clone()])?;
    }
    ctx.emit(format!("perplexity {ppl:.4}"), value);
    Ok(())
}

pub fn generate(ctx: &Context, a: &GenerateArgs) -> Result<()> {
    if let Some(ext) = &a.external {
        let set = ingest_external_text(ext, LoadOptions::default())
            .with_context(|| format!("ingesting {}", ext.display()))?;
        write_corpus(&set.generated, &a.out)?;
        ctx.record(a, None, &[ext.clone()], &[a.out.clone()])?;
        let n = set.generated.token_count();
        ctx.emit(format!("ingested {n} tokens"), json!({ "tokens": n, "provenance": set.provenance }));
        return Ok(());
    }
    let (Some(model_path), Some(source_path)) = (&a.model, &a.source) else {
        bail!(UsageError("--model needs --source".into()));
    };
    let mut config = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<GenerationConfig>(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => {
            let tokens = a.tokens.ok_or_else(|| UsageError("give --tokens or --config".into()))?;
            GenerationConfig::new(tokens, 0)
        }
    };
    if let Some(t) = a.tokens {
        config.target_token_count = t;
    }
    if let Some(w) = a.workers {
        config.workers = w;
    }
    if let Some(s) = ctx.seed {
        config.seed = s;
    }
    let generator = NgramSequenceModel::new(load_model(model_path)?);
    let source = load_words(source_path)?;
    let set = generate_corpus(&generator, &source, &config)?;
    write_corpus(&set.generated, &a.out)?;
    let mut inputs = vec![model_path.clone(), source_path.clone()];
    inputs.extend(a.config.iter().cloned());
    ctx.record(&json!({ "args": a, "config": config }), Some(config.seed), &inputs, &[a.out.clone()])?;
    let n = set.generated.token_count();
    ctx.emit(
        format!("generated {n} tokens in {} sentences", set.generated.sentences().len()),
        json!({ "tokens": n, "sentences": set.generated.sentences().len(), "config": config }),
    );
    Ok(())
}

pub fn mix(ctx: &Context, a: &MixArgs) -> Result<()> {
    let models: Vec<BackoffModel> = a.models.iter().map(|p| load_model(p)).collect::<Result<_>>()?;
    let weights = match (&a.weights, &a.tune) {
        (Some(w), _) => {
            if w.len() != models.len() {
                bail!(UsageError(format!("{} weights for {} models", w.len(), models.len())));
            }
            MixtureWeights::new(w.clone())?
        }
        (None, Some(tune)) => {
            let tokenizer = a.tokenizer.as_deref().map(load_tokenizer).transpose()?;
            let tuning = model_tokens(&models[0], tokenizer.as_ref(), &load_words(tune)?)?;
            optimize_weights(&models, &tuning, a.tolerance)?
        }
        (None, None) => bail!(UsageError("give --tune or --weights".into())),
    };
    let mixed = interpolate_static(&models, &weights)?;
    write_arpa(&mixed, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let mut inputs = a.models.clone();
    inputs.extend(a.tune.iter().cloned());
    inputs.extend(a.tokenizer.iter().cloned());
    ctx.record(a, None, &inputs, &[a.out.clone()])?;
    let listed: Vec<String> = weights.as_slice().iter().map(|w| format!("{w:.6}")).collect();
    ctx.emit(
        format!("weights {}", listed.join(" ")),
        json!({ "weights": weights.as_slice(), "model": model_summary(&mixed) }),
    );
    Ok(())
}

pub fn eval(ctx: &Context, a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let tokenizer = a.tokenizer.as_deref().map(load_tokenizer).transpose()?;
    let test = load_words(&a.test)?;
    let train = a.train.as_deref().map(load_words).transpose()?;
    let spelling = train.as_ref().map(SpellingModel::from_corpus);
    let id = a.model.display().to_string();
    let mut report = EvalReport::evaluate(id, &model, tokenizer.as_ref(), &test, spelling.as_ref())?;
    if let (Some(refs), Some(hyps), Some(train)) = (&a.references, &a.hypotheses, &train) {
        let r = load_words(refs)?;
        let h = load_words(hyps)?;
        if r.sentences().len() != h.sentences().len() {
            bail!(DataError(format!(
                "{} reference lines but {} hypothesis lines",
                r.sentences().len(),
                h.sentences().len()
            )));
        }
        let pairs: Vec<_> = r.sentences().iter().zip(h.sentences()).map(|(x, y)| align(x, y)).collect();
        report = report.with_oov_prf(&oov_prf(&pairs, &build_vocabulary(train, None)?));
    }
    let mut value = serde_json::to_value(&report)?;
    if a.per_token {
        let scored = model_tokens(&model, tokenizer.as_ref(), &test)?;
        value["perplexity_per_token"] = json!(model.perplexity(&scored, PerplexityMode::PerToken)?);
    }
    let text = serde_json::to_string_pretty(&value)? + "\n";
    if let Some(out) = &a.out {
        crate::manifest::write_if_changed(out, text.as_bytes())?;
        let mut inputs = vec![a.model.clone(), a.test.clone()];
        for p in [&a.tokenizer, &a.train, &a.references, &a.hypotheses].into_iter().flatten() {
            inputs.push(p.clone());
        }
        ctx.record(a, None, &inputs, &[out.clone()])?;
    }
    print!("{text}");
    Ok(())
}

pub fn replay(ctx: &Context, a: &ReplayArgs) -> Result<()> {
    let manifest = Manifest::read(&a.manifest)?;
    let here = std::env::current_dir()?;
    std::env::set_current_dir(&manifest.working_dir)
        .with_context(|| format!("entering {}", manifest.working_dir.display()))?;
    let result = replay_in_place(&manifest);
    std::env::set_current_dir(here)?;
    let outputs = result?;
    let mut lines = Vec::new();
    let mut failed = Vec::new();
    for (want, got) in manifest.outputs.iter().zip(&outputs) {
        let ok = want.sha256 == got.sha256;
        lines.push(format!("{}\t{}", if ok { "ok" } else { "MISMATCH" }, want.path.display()));
        if !ok {
            failed.push(want.path.display().to_string());
        }
    }
    ctx.emit(
        lines.join("\n"),
        json!({ "manifest": a.manifest, "outputs": outputs, "reproduced": failed.is_empty() }),
    );
    if !failed.is_empty() {
        bail!(InternalError(format!("replay did not reproduce {}", failed.join(", "))));
    }
    Ok(())
}

/// Re-runs the recorded command from the manifest's working directory and
/// returns fresh digests of the recorded outputs.
fn replay_in_place(manifest: &Manifest) -> Result<Vec<FileDigest>> {
    for input in &manifest.inputs {
        if !input.matches_disk() {
            bail!(DataError(format!("input {} changed since the run", input.path.display())));
        }
    }
    let argv = manifest.command.clone();
    let cli = Cli::try_parse_from(std::iter::once("subaug".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| UsageError(format!("manifest command does not parse: {e}")))?;
    if matches!(cli.command, crate::args::Command::Replay(_)) {
        bail!(UsageError("a manifest cannot replay another replay".into()));
    }
    info!("replaying {}", argv.join(" "));
    crate::execute(&cli, &argv)?;
    manifest.outputs.iter().map(|d| FileDigest::of(&d.path)).collect()
}
