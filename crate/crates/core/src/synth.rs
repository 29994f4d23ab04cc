//! A small agglutinative toy language for fixtures and desk-scale
//! experiments. Stems take stacked suffixes whose vowels follow front/back
//! harmony, verbs agree with their subject and select the case of their
//! argument, and stems are drawn with Zipfian frequencies.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};
use crate::error::{Error, Result};

const BACK: [&str; 6] = ["a", "o", "u", "á", "ó", "ú"];
const FRONT: [&str; 6] = ["e", "i", "ö", "ü", "é", "ő"];
const ONSETS: [&str; 17] = ["b", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v", "sz", "gy"];
const CODAS: [&str; 8] = ["", "", "", "l", "n", "r", "s", "t"];

const PRONOUNS: [&str; 6] = ["én", "te", "ő", "mi", "ti", "ők"];
const PREVERBS: [&str; 5] = ["meg", "el", "ki", "be", "fel"];
const ADVERBS: [&str; 6] = ["nem", "már", "még", "is", "nagyon", "mindig"];

/// Suffix templates. Capital letters are harmony slots:
/// A a/e, O o/e, Á á/é, Ó ó/ő, U u/ü.
const CASES: [&str; 10] = ["t", "nAk", "bAn", "bÓl", "vAl", "rÓl", "rA", "hOz", "tÓl", "ig"];
const POSSESSIVE: [&str; 6] = ["Om", "Od", "A", "Unk", "AtOk", "Uk"];
const PRESENT: [&str; 6] = ["Ok", "sz", "", "Unk", "tOk", "nAk"];
const PAST: [&str; 6] = ["tAm", "tÁl", "Ott", "tUnk", "tAtOk", "tAk"];

fn harmonize(template: &str, front: bool) -> String {
    template
        .chars()
        .map(|c| match (c, front) {
            ('A', false) => 'a',
            ('A', true) => 'e',
            ('O', false) => 'o',
            ('O', true) => 'e',
            ('Á', false) => 'á',
            ('Á', true) => 'é',
            ('Ó', false) => 'ó',
            ('Ó', true) => 'ő',
            ('U', false) => 'u',
            ('U', true) => 'ü',
            _ => c,
        })
        .collect()
}

fn is_vowel(c: char) -> bool {
    "aeiouáéíóöőúüű".contains(c)
}

fn ends_with_vowel(s: &str) -> bool {
    s.chars().last().is_some_and(is_vowel)
}

/// Joins a suffix, dropping a linking vowel after a vowel-final stem.
fn attach(stem: &str, suffix: &str) -> String {
    if ends_with_vowel(stem) {
        if let Some(rest) = suffix.strip_prefix(|c: char| "aeoöuü".contains(c)) {
            if !rest.is_empty() {
                return format!("{stem}{rest}");
            }
        }
    }
    format!("{stem}{suffix}")
}

#[derive(Debug, Clone)]
struct Stem {
    form: String,
    front: bool,
}

#[derive(Debug, Clone)]
struct Verb {
    stem: Stem,
    /// Case index of the argument.
    frame: usize,
    preverb: Option<usize>,
}

/// Sizes of the generated lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LexiconSizes {
    pub nouns: usize,
    pub verbs: usize,
    pub adjectives: usize,
}

impl Default for LexiconSizes {
    fn default() -> Self {
        LexiconSizes {
            nouns: 900,
            verbs: 250,
            adjectives: 150,
        }
    }
}

/// A randomly drawn lexicon plus the sentence templates over it.
#[derive(Debug, Clone)]
pub struct Grammar {
    nouns: Vec<Stem>,
    verbs: Vec<Verb>,
    adjectives: Vec<Stem>,
    noun_cdf: Vec<f64>,
    verb_cdf: Vec<f64>,
    adjective_cdf: Vec<f64>,
}

fn zipf_cdf(n: usize, exponent: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = (1..=n)
        .map(|r| {
            acc += 1.0 / (r as f64).powf(exponent);
            acc
        })
        .collect();
    for c in &mut cdf {
        *c /= acc;
    }
    cdf
}

fn zipf_draw<R: Rng>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

fn random_stem<R: Rng>(rng: &mut R, syllables: usize) -> Stem {
    let front = rng.gen_bool(0.5);
    let vowels = if front { &FRONT } else { &BACK };
    let mut form = String::new();
    for i in 0..syllables {
        if i == 0 && rng.gen_bool(0.2) {
            // vowel-initial stem
        } else {
            form.push_str(ONSETS.choose(rng).expect("non-empty"));
        }
        form.push_str(vowels.choose(rng).expect("non-empty"));
    }
    form.push_str(CODAS.choose(rng).expect("non-empty"));
    Stem { form, front }
}

fn distinct_stems<R: Rng>(rng: &mut R, n: usize, taken: &mut std::collections::HashSet<String>) -> Vec<Stem> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = if rng.gen_bool(0.6) { 2 } else { rng.gen_range(1..=3) };
        let s = random_stem(rng, syllables);
        if taken.insert(s.form.clone()) {
            out.push(s);
        }
    }
    out
}

impl Grammar {
    pub fn new(seed: u64, sizes: LexiconSizes) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut taken: std::collections::HashSet<String> = PRONOUNS
            .iter()
            .chain(&PREVERBS)
            .chain(&ADVERBS)
            .chain(&["a", "az", "és", "hogy"])
            .map(|s| s.to_string())
            .collect();
        let nouns = distinct_stems(&mut rng, sizes.nouns, &mut taken);
        let adjectives = distinct_stems(&mut rng, sizes.adjectives, &mut taken);
        let verbs = distinct_stems(&mut rng, sizes.verbs, &mut taken)
            .into_iter()
            .map(|stem| Verb {
                stem,
                frame: rng.gen_range(0..CASES.len()),
                preverb: rng.gen_bool(0.4).then(|| rng.gen_range(0..PREVERBS.len())),
            })
            .collect();
        Grammar {
            noun_cdf: zipf_cdf(sizes.nouns, 1.0),
            verb_cdf: zipf_cdf(sizes.verbs, 1.0),
            adjective_cdf: zipf_cdf(sizes.adjectives, 1.0),
            nouns,
            verbs,
            adjectives,
        }
    }

    fn noun_phrase<R: Rng>(&self, rng: &mut R, case: Option<usize>, out: &mut Vec<String>) {
        let noun = &self.nouns[zipf_draw(&self.noun_cdf, rng)];
        let possessor = rng.gen_bool(0.2).then(|| rng.gen_range(0..6));
        if possessor.is_none() && rng.gen_bool(0.6) {
            let article = if noun.form.starts_with(is_vowel) { "az" } else { "a" };
            out.push(article.to_string());
        }
        if rng.gen_bool(0.3) {
            out.push(self.adjectives[zipf_draw(&self.adjective_cdf, rng)].form.clone());
        }
        let mut form = noun.form.clone();
        if rng.gen_bool(0.25) {
            form = attach(&form, &harmonize("Ok", noun.front));
        }
        if let Some(p) = possessor {
            form = attach(&form, &harmonize(POSSESSIVE[p], noun.front));
        }
        if let Some(c) = case {
            form = attach(&form, &harmonize(CASES[c], noun.front));
        }
        out.push(form);
    }

    fn clause<R: Rng>(&self, rng: &mut R, out: &mut Vec<String>) {
        let person = if rng.gen_bool(0.55) { 2 } else { rng.gen_range(0..6) };
        let mut subject = Vec::new();
        if person == 2 && rng.gen_bool(0.7) {
            self.noun_phrase(rng, None, &mut subject);
        } else if person == 5 && rng.gen_bool(0.5) {
            self.noun_phrase(rng, None, &mut subject);
            let last = subject.pop().expect("noun phrase has a noun");
            subject.push(if last.ends_with('k') { last } else { format!("{last}k") });
        } else if rng.gen_bool(0.5) {
            subject.push(PRONOUNS[person].to_string());
        }
        let verb = &self.verbs[zipf_draw(&self.verb_cdf, rng)];
        let tense = if rng.gen_bool(0.6) { &PRESENT } else { &PAST };
        let mut form = verb.stem.form.clone();
        if let Some(p) = verb.preverb {
            form = format!("{}{form}", PREVERBS[p]);
        }
        let mut v = vec![attach(&form, &harmonize(tense[person], verb.stem.front))];
        if rng.gen_bool(0.2) {
            v.insert(0, ADVERBS.choose(rng).expect("non-empty").to_string());
        }
        let mut argument = Vec::new();
        self.noun_phrase(rng, Some(verb.frame), &mut argument);
        let mut parts = if rng.gen_bool(0.7) {
            vec![subject, v, argument]
        } else {
            vec![subject, argument, v]
        };
        if rng.gen_bool(0.25) {
            let mut place = Vec::new();
            let case = *[2usize, 6, 7].choose(rng).expect("non-empty");
            self.noun_phrase(rng, Some(case), &mut place);
            parts.push(place);
        }
        out.extend(parts.into_iter().flatten());
    }

    pub fn sentence<R: Rng>(&self, rng: &mut R) -> Sentence {
        let mut tokens = Vec::new();
        self.clause(rng, &mut tokens);
        if rng.gen_bool(0.2) {
            tokens.push(if rng.gen_bool(0.6) { "és" } else { "hogy" }.to_string());
            self.clause(rng, &mut tokens);
        }
        Sentence::new(tokens).expect("generated tokens are well formed")
    }

    /// Sentences until at least `tokens` tokens are produced.
    pub fn corpus<R: Rng>(&self, rng: &mut R, tokens: usize) -> Corpus {
        let mut out = Vec::new();
        let mut n = 0;
        while n < tokens {
            let s = self.sentence(rng);
            n += s.len();
            out.push(s);
        }
        Corpus::from_sentences(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub train_tokens: usize,
    pub valid_tokens: usize,
    pub eval_tokens: usize,
    /// Text reserved for training the stand-in generator.
    pub heldout_tokens: usize,
    #[serde(default)]
    pub lexicon: LexiconSizes,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 2024,
            train_tokens: 50_000,
            valid_tokens: 5_000,
            eval_tokens: 5_000,
            heldout_tokens: 250_000,
            lexicon: LexiconSizes::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSplits {
    pub train: Corpus,
    pub valid: Corpus,
    pub eval: Corpus,
    pub heldout: Corpus,
}

pub const SPLIT_NAMES: [&str; 4] = ["train", "valid", "eval", "heldout"];

impl SynthSplits {
    pub fn generate(config: &SynthConfig) -> Self {
        let grammar = Grammar::new(config.seed, config.lexicon);
        let split = |i: u64, n: usize| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(31).wrapping_add(i + 1));
            grammar.corpus(&mut rng, n)
        };
        SynthSplits {
            train: split(0, config.train_tokens),
            valid: split(1, config.valid_tokens),
            eval: split(2, config.eval_tokens),
            heldout: split(3, config.heldout_tokens),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Corpus> {
        match name {
            "train" => Some(&self.train),
            "valid" => Some(&self.valid),
            "eval" => Some(&self.eval),
            "heldout" => Some(&self.heldout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub file: String,
    pub sentences: usize,
    pub tokens: usize,
    pub types: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub splits: Vec<SplitCounts>,
}

/// Writes `<split>.txt` for each split plus `manifest.json` into `dir`.
pub fn write_dataset(dir: impl AsRef<Path>, config: &SynthConfig) -> Result<SynthManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let splits = SynthSplits::generate(config);
    let mut counts = Vec::new();
    for name in SPLIT_NAMES {
        let corpus = splits.get(name).expect("known split");
        let file = format!("{name}.txt");
        corpus.write(dir.join(&file))?;
        counts.push(SplitCounts {
            file,
            sentences: corpus.sentences().len(),
            tokens: corpus.token_count(),
            types: corpus.type_count(),
        });
    }
    let manifest = SynthManifest {
        config: *config,
        splits: counts,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
