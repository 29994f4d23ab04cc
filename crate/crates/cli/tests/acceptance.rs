//! Acceptance checks. Prints one PASS or FAIL line per criterion and exits
//! non-zero if any criterion fails. Tolerances are pinned below.

#[path = "../../core/tests/support/kn_oracle.rs"]
#[allow(dead_code)]
mod kn_oracle;

use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kn_oracle::{restricted_growth, sentence_splits, Oracle};
use subaug::bpe::{decode, BpeTrainer};
use subaug::corpus::{
    build_vocabulary, detag_boundaries, detag_corpus, load_corpus, serialize_tagged, tag_boundaries, Corpus,
    LoadOptions, Sentence, TaggedToken, WordVocabulary,
};
use subaug::evalkit::{align, coverage_report, oov_prf, AlignedPair, EvalReport, SpellingModel};
use subaug::genaug::{
    generate_corpus, run_pipeline, GenerationConfig, NgramSequenceModel, PipelineConfig, PipelineMode,
};
use subaug::mix::{interpolate_static, mixture_perplexity, optimize_weights, MixtureWeights, DEFAULT_TOLERANCE};
use subaug::morfseg::MorfessorTrainer;
use subaug::ngram::prune::{history_probability, pruning_deltas};
use subaug::ngram::{
    count_ngrams, footprint, prune_to_budget, prune_with_threshold, read_arpa, skeleton_footprint, train_kn,
    write_arpa, BackoffModel, Discount, PerplexityMode, TokenId,
};
use subaug::subword::SubwordTokenizer;
use subaug::synth::{SynthConfig, SynthSplits};

/// Agreement with the brute-force estimator.
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_TIME: Duration = Duration::from_secs(60);
/// Probability mass of every context.
const MASS_TOL: f64 = 1e-6;
/// Score identity after a round trip or at a mixture corner.
const SCORE_TOL: f64 = 1e-9;
/// Required ratio of augmented to in-domain per-word perplexity.
const AUGMENT_RATIO: f64 = 0.98;
const AUGMENT_TIME: Duration = Duration::from_secs(600);
const AUGMENT_BUDGET: u64 = 20_000_000;
const DISCOUNT_TOL: f64 = 1e-12;
const PRF_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn mini(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mini").join(name)
}

fn load_mini(name: &str) -> Corpus {
    load_corpus(mini(name), LoadOptions::default()).expect("bundled mini corpus")
}

fn corpus_of(sentences: &[Vec<String>]) -> Corpus {
    Corpus::from_sentences(sentences.iter().map(|s| Sentence::new(s.clone()).unwrap()).collect())
}

fn words(line: &str) -> Sentence {
    Sentence::parse(line).unwrap().unwrap()
}

fn max_mass_gap(m: &BackoffModel) -> f64 {
    m.contexts().iter().map(|c| (m.context_mass(c) - 1.0).abs()).fold(0.0, f64::max)
}

fn oracle_gap(sentences: &[Vec<String>], order: usize) -> f64 {
    let model = train_kn(&count_ngrams(&corpus_of(sentences), order, None).unwrap()).unwrap();
    let oracle = Oracle::new(sentences, order);
    let ids = |toks: &[String]| toks.iter().map(|t| model.vocab().id(t).unwrap()).collect::<Vec<_>>();
    let mut worst: f64 = 0.0;
    for h in oracle.histories() {
        let hid = ids(&h);
        for w in &oracle.predictable {
            let p = model.prob(&hid, model.vocab().id(w).unwrap());
            worst = worst.max((p - oracle.prob(&h, w)).abs());
        }
    }
    worst
}

fn kn_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut exhaustive = 0;
    for len in 1..=6 {
        for tokens in restricted_growth(len, 6) {
            for sentences in sentence_splits(&tokens) {
                for order in [2, 3] {
                    worst = worst.max(oracle_gap(&sentences, order));
                }
                exhaustive += 1;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let len = rng.gen_range(1..=12);
        let types = rng.gen_range(1..=6);
        let mut sentences: Vec<Vec<String>> = vec![Vec::new()];
        for i in 0..len {
            if i > 0 && rng.gen_bool(0.3) {
                sentences.push(Vec::new());
            }
            sentences.last_mut().unwrap().push(format!("w{}", rng.gen_range(0..types)));
        }
        worst = worst.max(oracle_gap(&sentences, rng.gen_range(1..=4)));
    }
    let elapsed = start.elapsed();
    check(worst < ORACLE_TOL, || format!("max gap {worst:e}"))?;
    check(elapsed < ORACLE_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{exhaustive} exhaustive corpora and 200 random ones, max gap {worst:.1e}, {:.1}s",
        elapsed.as_secs_f64()
    ))
}

/// The first `n` sentences.
fn head(c: &Corpus, n: usize) -> Corpus {
    Corpus::from_sentences(c.sentences().iter().take(n).cloned().collect())
}

fn normalization() -> Outcome {
    // Every context is summed over the whole vocabulary, so a slice keeps this quick.
    let train = head(&load_mini("train.txt"), 1500);
    let valid = load_mini("valid.txt");
    let vocab = build_vocabulary(&train.concat(&valid), None).unwrap();
    let a = train_kn(&count_ngrams(&train, 4, Some(&vocab)).unwrap()).unwrap();
    let b = train_kn(&count_ngrams(&valid, 4, Some(&vocab)).unwrap()).unwrap();
    let pruned = prune_to_budget(&a, footprint(&a) / 2).unwrap();
    let mixed = interpolate_static(&[a.clone(), b.clone()], &MixtureWeights::new(vec![0.7, 0.3]).unwrap()).unwrap();
    let pruned_mixed = prune_to_budget(&mixed, footprint(&mixed) / 4).unwrap();
    let mut worst: f64 = 0.0;
    let mut contexts = 0;
    for m in [&a, &b, &pruned, &mixed, &pruned_mixed] {
        worst = worst.max(max_mass_gap(m));
        contexts += m.contexts().len();
    }
    check(worst <= MASS_TOL, || format!("a context sums to 1 ± {worst:e}"))?;
    Ok(format!("{contexts} contexts over trained, pruned and interpolated models, max |sum - 1| {worst:.1e}"))
}

fn split_word(word: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut pieces = vec![String::new()];
    let n = word.chars().count();
    for (i, c) in word.chars().enumerate() {
        pieces.last_mut().unwrap().push(c);
        if i + 1 < n && rng.gen_bool(0.4) {
            pieces.push(String::new());
        }
    }
    pieces
}

fn round_trips() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let train = load_mini("train.txt");
    let test = load_mini("eval.txt");
    let model = train_kn(&count_ngrams(&train, 4, None).unwrap()).unwrap();
    let path = dir.path().join("m.arpa");
    write_arpa(&model, &path).unwrap();
    let back = read_arpa(&path).unwrap();
    let gap = test
        .sentences()
        .iter()
        .map(|s| (model.sentence_logprob(s).logprob - back.sentence_logprob(s).logprob).abs())
        .fold(0.0, f64::max);
    check(gap <= SCORE_TOL, || format!("ARPA round trip moved a score by {gap:e}"))?;

    let bpe = BpeTrainer::new(2000).train(&train).unwrap();
    let types: std::collections::BTreeSet<&str> = train.tokens().chain(test.tokens()).collect();
    for w in &types {
        check(decode(&bpe.encode_word(w)) == *w, || format!("BPE does not round-trip `{w}`"))?;
    }
    let tok = SubwordTokenizer::Bpe(bpe);
    let tagged = tok.segment_corpus(&test, None).unwrap();
    check(detag_corpus(&tagged).unwrap() == test, || "detagged BPE text differs".into())?;

    let segmented = [
        ("megbeszélem", vec!["meg", "beszél", "em"]),
        ("a", vec!["a"]),
        ("nejemmel", vec!["nejem", "mel"]),
    ];
    let text = serialize_tagged(&tag_boundaries(&segmented).unwrap());
    check(text == "meg +beszél +em a nejem +mel", || format!("tagged as `{text}`"))?;
    let parsed: Vec<TaggedToken> = text.split(' ').map(TaggedToken::parse).collect();
    let joined = detag_boundaries(&parsed).unwrap().join(" ");
    check(joined == "megbeszélem a nejemmel", || format!("detagged as `{joined}`"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let vocabulary: Vec<&str> = types.iter().copied().collect();
    for _ in 0..1000 {
        let sentence: Vec<&str> = (0..rng.gen_range(1..10)).map(|_| vocabulary[rng.gen_range(0..vocabulary.len())]).collect();
        let seg: Vec<(&str, Vec<String>)> = sentence.iter().map(|w| (*w, split_word(w, &mut rng))).collect();
        let text = serialize_tagged(&tag_boundaries(&seg).unwrap());
        let parsed: Vec<TaggedToken> = text.split(' ').map(TaggedToken::parse).collect();
        check(detag_boundaries(&parsed).unwrap() == sentence, || format!("`{text}` does not detag"))?;
    }
    Ok(format!(
        "ARPA max gap {gap:.1e}; BPE on {} word types; Hungarian example; 1000 random segmentations",
        types.len()
    ))
}

fn discounts() -> Outcome {
    let d = Discount::from_count_of_counts([4, 2, 1, 1]);
    let want = [0.5, 1.25, 1.0];
    let got = [d.d1, d.d2, d.d3plus];
    let ok = got.iter().zip(want).all(|(g, w)| (g - w).abs() < DISCOUNT_TOL) && !d.fallback;
    check(ok, || format!("got {got:?}"))?;
    Ok(format!("n1..n4 = 4,2,1,1 gives D1={} D2={} D3+={}", d.d1, d.d2, d.d3plus))
}

fn subword_coverage() -> Outcome {
    let train = load_mini("train.txt");
    let test = load_mini("eval.txt");
    let mut rates = Vec::new();
    let bpe = SubwordTokenizer::Bpe(BpeTrainer::new(2000).train(&train).unwrap());
    let morf = SubwordTokenizer::Morfessor(MorfessorTrainer::default().train(&train).unwrap().lexicon);
    for tok in [&bpe, &morf] {
        let vocab = subaug::genaug::pipeline_vocabulary(Some(tok), &train, &Corpus::default(), None).unwrap();
        let inv = vocab.words().map(str::to_string).collect();
        let seg = tok.segment_corpus(&train, Some(&inv)).unwrap();
        let model = train_kn(&count_ngrams(&seg, 3, Some(&vocab)).unwrap()).unwrap();
        let rate = coverage_report(&model, Some(tok), &test).unwrap().oov_rate;
        check(rate == 0.0, || format!("{} oov rate {rate}", tok.kind()))?;
        rates.push(rate);
    }
    let vocab = build_vocabulary(&train, Some(5000)).unwrap();
    let word = train_kn(&count_ngrams(&train, 3, Some(&vocab)).unwrap()).unwrap();
    let word_rate = coverage_report(&word, None, &test).unwrap().oov_rate;
    check(word_rate > 0.0, || "capped word model has no OOVs".into())?;
    Ok(format!("bpe {} and morfessor {} vs word (5000 words) {word_rate:.4}", rates[0], rates[1]))
}

fn augmentation() -> Outcome {
    let start = Instant::now();
    let splits = SynthSplits::generate(&SynthConfig {
        heldout_tokens: 1_000_000,
        ..SynthConfig::default()
    });
    let generator = NgramSequenceModel::new(train_kn(&count_ngrams(&splits.heldout, 4, None).unwrap()).unwrap());
    let generated = generate_corpus(&generator, &splits.train, &GenerationConfig::new(500_000, 7)).unwrap();
    let spelling = SpellingModel::from_corpus(&splits.train);
    let mut lines = Vec::new();
    let mut open = Vec::new();
    for mode in [PipelineMode::Word, PipelineMode::SubwordMorfessor] {
        let mut config = PipelineConfig::new(mode);
        config.budget_bytes = Some(AUGMENT_BUDGET);
        let out = run_pipeline(&splits.train, &generated, &splits.valid, &config).unwrap();
        let tok = out.tokenizer.as_ref();
        let mixed = EvalReport::evaluate("mixed", &out.mixed, tok, &splits.eval, Some(&spelling)).unwrap();
        let base = EvalReport::evaluate("bnlm", &out.bnlm, tok, &splits.eval, Some(&spelling)).unwrap();
        let ratio = mixed.perplexity_per_word / base.perplexity_per_word;
        check(ratio <= AUGMENT_RATIO, || format!("{mode:?}: mixed/in-domain = {ratio:.4}"))?;
        check(mixed.footprint_bytes <= AUGMENT_BUDGET, || format!("{mode:?} over budget"))?;
        lines.push(format!(
            "{mode:?} {:.1}/{:.1}={ratio:.3}",
            mixed.perplexity_per_word, base.perplexity_per_word
        ));
        open.push(mixed.perplexity_per_word_open.unwrap());
    }
    check(open[1] <= open[0], || format!("morfessor {:.1} vs word {:.1} (open vocabulary)", open[1], open[0]))?;
    let elapsed = start.elapsed();
    check(elapsed < AUGMENT_TIME, || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{}; open-vocabulary morfessor {:.1} <= word {:.1} at 20MB; {:.0}s",
        lines.join(", "),
        open[1],
        open[0],
        elapsed.as_secs_f64()
    ))
}

fn without(m: &BackoffModel, key: &[TokenId]) -> BackoffModel {
    let mut tables: Vec<_> = (1..=m.order()).map(|n| m.table(n).clone()).collect();
    tables[key.len() - 1].remove(key);
    let mut out = BackoffModel::from_parts(m.order(), m.vocab().clone(), tables).unwrap();
    out.recompute_backoffs();
    out
}

fn exhaustive_kl(m: &BackoffModel, key: &[TokenId]) -> f64 {
    let h = &key[..key.len() - 1];
    let after = without(m, key);
    let kl: f64 = m
        .vocab()
        .predictable()
        .map(|w| {
            let (p, q) = (m.prob(h, w), after.prob(h, w));
            if p > 0.0 {
                p * (p / q).ln()
            } else {
                0.0
            }
        })
        .sum();
    history_probability(m, h) * kl
}

fn pruning() -> Outcome {
    let train = load_mini("train.txt");
    let m = train_kn(&count_ngrams(&train, 4, None).unwrap()).unwrap();
    let full = footprint(&m);
    let skeleton = skeleton_footprint(&m);
    let mut sizes = Vec::new();
    for budget in [skeleton, full / 4, full / 2, full] {
        let p = prune_to_budget(&m, budget).unwrap();
        let f = footprint(&p);
        check(f <= budget, || format!("footprint {f} over budget {budget}"))?;
        sizes.push(format!("{f}/{budget}"));
    }

    let toy = Corpus::from_lines(
        ["a b c a b d", "b c a", "c a b c a", "a a b d d", "c c b a", "b b d a c", "d"],
        LoadOptions::default(),
    )
    .unwrap();
    let m = train_kn(&count_ngrams(&toy, 3, None).unwrap()).unwrap();
    let mut oracle: Vec<(f64, Vec<TokenId>)> = m.table(3).keys().map(|k| (exhaustive_kl(&m, k), k.to_vec())).collect();
    oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let deltas = pruning_deltas(&m, 3);
    let first = deltas.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
    check(first.0.to_vec() == oracle[0].1, || "first pruned trigram differs from the oracle".into())?;
    let pruned = prune_with_threshold(&m, (oracle[0].0 + oracle[1].0) / 2.0);
    check(pruned.entry_count(3) + 1 == m.entry_count(3), || "threshold removed more than one trigram".into())?;
    Ok(format!("footprint/budget {}; first pruned trigram matches exhaustive KL", sizes.join(" ")))
}

fn interpolation() -> Outcome {
    let splits = SynthSplits::generate(&SynthConfig {
        train_tokens: 20_000,
        heldout_tokens: 60_000,
        ..SynthConfig::default()
    });
    let vocab = build_vocabulary(&splits.train, None).unwrap().extended(&build_vocabulary(&splits.heldout, None).unwrap(), None);
    let components = [
        train_kn(&count_ngrams(&splits.train, 3, Some(&vocab)).unwrap()).unwrap(),
        train_kn(&count_ngrams(&splits.heldout, 3, Some(&vocab)).unwrap()).unwrap(),
    ];
    let weights = optimize_weights(&components, &splits.valid, DEFAULT_TOLERANCE).unwrap();
    let ppl = |w: &MixtureWeights| mixture_perplexity(&components, w, &splits.valid, PerplexityMode::PerWord).unwrap();
    let em = ppl(&weights);
    let corners = [ppl(&MixtureWeights::corner(2, 0)), ppl(&MixtureWeights::corner(2, 1))];
    check(corners.iter().all(|c| em < *c), || format!("EM {em} vs corners {corners:?}"))?;
    let mut gap: f64 = 0.0;
    for (i, c) in components.iter().enumerate() {
        let corner = interpolate_static(&components, &MixtureWeights::corner(2, i)).unwrap();
        for s in splits.eval.sentences() {
            gap = gap.max((corner.sentence_logprob(s).logprob - c.sentence_logprob(s).logprob).abs());
        }
    }
    check(gap <= SCORE_TOL, || format!("corner score gap {gap:e}"))?;
    Ok(format!(
        "EM {em:.2} < corners {:.2}, {:.2}; corner score gap {gap:.1e}",
        corners[0], corners[1]
    ))
}

fn aligned(list: &[(&str, &str)]) -> Vec<AlignedPair> {
    list.iter().map(|(r, h)| align(&words(r), &words(h))).collect()
}

fn oov_metrics() -> Outcome {
    let training =
        WordVocabulary::from_counts(["the", "cat", "sat", "on", "mat", "a", "dog", "ran"].map(|w| (w.to_string(), 1)), None);
    let fixture = [
        ("the cat sat", "the cat sat"),
        ("the zebra sat", "the zebra sat"),
        ("a dog ran home", "a dog ran home"),
        ("the quokka ran", "the cat ran"),
        ("on the veranda", "on the mat"),
        ("the cat sat on a mat", "the cat sat on a mats"),
        ("a dog sat", "a dog"),
        ("the mat", "the mat"),
        ("cat on mat", "cat on a mat"),
        ("dog", "dog"),
    ];
    let prf = oov_prf(&aligned(&fixture), &training);
    let close = |a: f64, b: f64| (a - b).abs() < PRF_TOL;
    check(
        close(prf.precision, 2.0 / 3.0) && close(prf.recall, 0.5) && close(prf.f1, 4.0 / 7.0),
        || format!("{prf:?}"),
    )?;
    // A closed-vocabulary recognizer replaces every unknown word.
    let closed: Vec<(String, String)> = fixture
        .iter()
        .map(|(r, _)| {
            let h: Vec<&str> = r.split(' ').map(|w| if training.contains(w) { w } else { "mat" }).collect();
            (r.to_string(), h.join(" "))
        })
        .collect();
    let closed: Vec<(&str, &str)> = closed.iter().map(|(r, h)| (r.as_str(), h.as_str())).collect();
    let closed_prf = oov_prf(&aligned(&closed), &training);
    check(closed_prf.recall == 0.0, || format!("closed-vocabulary recall {}", closed_prf.recall))?;
    Ok(format!(
        "P={:.4} R={:.4} F1={:.4}; closed-vocabulary recall {}",
        prf.precision, prf.recall, prf.f1, closed_prf.recall
    ))
}

fn subaug(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_subaug"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim())
    })
}

fn manifests(dir: &Path, out: &mut Vec<PathBuf>) {
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            manifests(&p, out);
        } else if p.file_name().unwrap().to_str().unwrap().ends_with("manifest.json") {
            out.push(p);
        }
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let plan = r#"{
      "train": "d/train.txt", "valid": "d/valid.txt", "eval": "d/eval.txt",
      "defaults": { "order": 3, "inventory": 200, "budget_bytes": 300000, "corpus_weight": 1.0, "seed": 0,
        "generation": { "kind": "ngram", "corpus": "d/heldout.txt", "order": 2,
                        "config": { "target_token_count": 8000, "seed": 1 } } },
      "runs": [ { "id": "word", "mode": "word" }, { "id": "morf", "mode": "subword-morfessor" } ]
    }"#;
    let steps: &[&[&str]] = &[
        &["--seed", "9", "synth", "--out", "d", "--train-tokens", "4000", "--valid-tokens", "800", "--eval-tokens", "800", "--heldout-tokens", "20000"],
        &["tokenize", "train", "--algo", "bpe", "--inventory", "200", "--in", "d/train.txt", "--out", "bpe.txt"],
        &["--seed", "3", "tokenize", "train", "--algo", "morfessor", "--in", "d/train.txt", "--out", "morf.txt"],
        &["tokenize", "apply", "--model", "morf.txt", "--in", "d/eval.txt", "--out", "eval.seg"],
        &["tokenize", "detag", "--in", "eval.seg", "--out", "eval.words"],
        &["lm", "train", "--in", "d/heldout.txt", "--order", "2", "--out", "gen.arpa"],
        &["--seed", "4", "generate", "--model", "gen.arpa", "--source", "d/train.txt", "--tokens", "6000", "--workers", "2", "--out", "gen.txt"],
        &["lm", "train", "--in", "d/train.txt", "--order", "3", "--tokenizer", "bpe.txt", "--vocab-from", "d/train.txt", "gen.txt", "--out", "a.arpa"],
        &["lm", "train", "--in", "gen.txt", "--order", "3", "--tokenizer", "bpe.txt", "--vocab-from", "d/train.txt", "gen.txt", "--out", "b.arpa"],
        &["mix", "--models", "a.arpa", "b.arpa", "--tune", "d/valid.txt", "--tokenizer", "bpe.txt", "--out", "m.arpa"],
        &["lm", "prune", "--model", "m.arpa", "--budget", "60K", "--out", "p.arpa"],
        &["lm", "score", "--model", "p.arpa", "--test", "d/eval.txt", "--tokenizer", "bpe.txt", "--out", "score.json"],
        &["eval", "--model", "p.arpa", "--test", "d/eval.txt", "--tokenizer", "bpe.txt", "--train", "d/train.txt", "--out", "eval.json"],
        &["experiment", "--plan", "plan.json", "--out-dir", "exp"],
    ];
    fs::write(d.join("plan.json"), plan).unwrap();
    for args in steps {
        subaug(d, args)?;
    }
    let mut found = Vec::new();
    manifests(d, &mut found);
    found.sort();
    let mut outputs = 0;
    let mut replayed = 0;
    for m in &found {
        let before: serde_json::Value = serde_json::from_str(&fs::read_to_string(m).unwrap()).unwrap();
        // The dataset description written by `synth` is not a run manifest.
        let Some(listed) = before["outputs"].as_array() else { continue };
        outputs += listed.len();
        replayed += 1;
        subaug(d, &["replay", m.to_str().unwrap()])?;
    }
    check(replayed == steps.len() + 2, || format!("found {replayed} run manifests"))?;
    Ok(format!("{replayed} manifests replayed, {outputs} output checksums reproduced"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("kn-oracle-equivalence", kn_oracle_equivalence),
        ("normalization", normalization),
        ("round-trips", round_trips),
        ("discounts", discounts),
        ("subword-coverage", subword_coverage),
        ("augmentation", augmentation),
        ("pruning", pruning),
        ("interpolation", interpolation),
        ("oov-precision-recall", oov_metrics),
        ("determinism", determinism),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut stdout = std::io::stdout();
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let line = match outcome {
            Ok(detail) => format!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                format!("FAIL {:>2} {name}: {detail}", i + 1)
            }
        };
        writeln!(stdout, "{line}").unwrap();
        stdout.flush().unwrap();
    }
    if failed > 0 {
        writeln!(stdout, "{failed} acceptance criteria failed").unwrap();
        std::process::exit(1);
    }
}
