use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subaug::corpus::{Corpus, LoadOptions, WordVocabulary};
use subaug::mix::{
    em, interpolate_static, log_likelihood, mixture_perplexity, optimize_weights, optimize_weights_traced,
    MixtureWeights, DEFAULT_TOLERANCE,
};
use subaug::ngram::{count_ngrams, train_kn, BackoffModel, PerplexityMode};
use subaug::Error;

fn corpus(lines: &[&str]) -> Corpus {
    Corpus::from_lines(lines.iter().copied(), LoadOptions::default()).unwrap()
}

fn random_corpus(seed: u64, sentences: usize, skew: f64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines: Vec<String> = (0..sentences)
        .map(|_| {
            (0..rng.gen_range(2..9))
                .map(|_| format!("w{}", (rng.gen::<f64>().powf(skew) * 12.0) as usize))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    Corpus::from_lines(lines.iter().map(String::as_str), LoadOptions::default()).unwrap()
}

fn vocabulary(corpora: &[&Corpus]) -> WordVocabulary {
    let words = corpora.iter().flat_map(|c| c.tokens()).map(|w| (w.to_string(), 1));
    WordVocabulary::from_counts(words, None)
}

fn models(corpora: &[&Corpus], order: usize) -> Vec<BackoffModel> {
    let vocab = vocabulary(corpora);
    corpora
        .iter()
        .map(|c| train_kn(&count_ngrams(c, order, Some(&vocab)).unwrap()).unwrap())
        .collect()
}

fn assert_normalized(m: &BackoffModel) {
    for ctx in m.contexts() {
        let mass = m.context_mass(&ctx);
        assert!((mass - 1.0).abs() < 1e-6, "context {ctx:?} sums to {mass}");
    }
}

#[test]
fn em_matches_grid_search_on_unigram_pair() {
    let a = corpus(&["x x x y", "x z"]);
    let b = corpus(&["y y z", "z z y"]);
    let ms = models(&[&a, &b], 1);
    let tuning = corpus(&["x y z y", "z x y", "y"]);
    assert_eq!(tuning.token_count(), 8);
    let weights = optimize_weights(&ms, &tuning, 1e-12).unwrap();
    let events = subaug::mix::event_probabilities(&ms, &tuning);
    assert_eq!(events.len(), 11);
    let best = (0..=1000)
        .map(|i| i as f64 / 1000.0)
        .max_by(|x, y| {
            let f = |l: f64| log_likelihood(&events, &MixtureWeights::new(vec![l, 1.0 - l]).unwrap());
            f(*x).total_cmp(&f(*y))
        })
        .unwrap();
    assert!((weights.as_slice()[0] - best).abs() <= 1e-3, "{weights:?} vs {best}");
}

#[test]
fn symmetric_events_give_equal_weights() {
    // Maximizing ln(l) + ln(1 - l) puts l at one half.
    let events = vec![vec![0.8, 0.0], vec![0.0, 0.8]];
    let r = em(&events, 1e-12);
    assert!((r.weights.as_slice()[0] - 0.5).abs() < 1e-12);
    assert!(!r.corner);
}

#[test]
fn em_beats_every_corner_on_tuning_set() {
    let a = random_corpus(1, 200, 1.0);
    let b = random_corpus(2, 200, 3.0);
    let tuning = random_corpus(3, 60, 2.0);
    let ms = models(&[&a, &b], 3);
    let r = optimize_weights_traced(&ms, &tuning, DEFAULT_TOLERANCE).unwrap();
    assert!(!r.corner);
    assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
    let ppl = |w: &MixtureWeights| mixture_perplexity(&ms, w, &tuning, PerplexityMode::PerWord).unwrap();
    let mixed = ppl(&r.weights);
    for i in 0..2 {
        assert!(mixed < ppl(&MixtureWeights::corner(2, i)));
    }
}

#[test]
fn corner_weights_reproduce_the_component() {
    let a = random_corpus(4, 150, 1.0);
    let b = random_corpus(5, 150, 2.5);
    let ms = models(&[&a, &b], 3);
    let test = random_corpus(6, 40, 1.5);
    for i in 0..2 {
        let baked = interpolate_static(&ms, &MixtureWeights::corner(2, i)).unwrap();
        for s in test.sentences() {
            let got = baked.sentence_logprob(s).logprob;
            let want = ms[i].sentence_logprob(s).logprob;
            assert!((got - want).abs() < 1e-9, "component {i}: {got} vs {want}");
        }
    }
}

#[test]
fn static_mixture_tracks_dynamic_mixture() {
    let a = random_corpus(7, 300, 1.0);
    let b = random_corpus(8, 300, 2.0);
    let tuning = random_corpus(9, 80, 1.5);
    let ms = models(&[&a, &b], 3);
    let w = optimize_weights(&ms, &tuning, DEFAULT_TOLERANCE).unwrap();
    let baked = interpolate_static(&ms, &w).unwrap();
    let dynamic = mixture_perplexity(&ms, &w, &tuning, PerplexityMode::PerWord).unwrap();
    let fixed = baked.perplexity(&tuning, PerplexityMode::PerWord).unwrap();
    assert!((fixed / dynamic - 1.0).abs() < 0.02, "static {fixed} dynamic {dynamic}");
    assert_normalized(&baked);
}

#[test]
fn three_way_mixture_is_normalized_and_sums_to_one() {
    let cs = [random_corpus(10, 120, 1.0), random_corpus(11, 120, 2.0), random_corpus(12, 120, 4.0)];
    let refs: Vec<&Corpus> = cs.iter().collect();
    let ms = models(&refs, 2);
    let tuning = random_corpus(13, 50, 2.0);
    let w = optimize_weights(&ms, &tuning, DEFAULT_TOLERANCE).unwrap();
    assert_eq!(w.len(), 3);
    assert!((w.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(w.as_slice().iter().all(|&l| l >= 0.0));
    assert_normalized(&interpolate_static(&ms, &w).unwrap());
}

#[test]
fn mismatched_components_are_rejected() {
    let a = corpus(&["a b"]);
    let b = corpus(&["c d"]);
    let separate: Vec<BackoffModel> = [&a, &b]
        .iter()
        .map(|c| train_kn(&count_ngrams(c, 2, None).unwrap()).unwrap())
        .collect();
    assert!(matches!(
        interpolate_static(&separate, &MixtureWeights::uniform(2)),
        Err(Error::VocabularyMismatch)
    ));
    let shared = vocabulary(&[&a, &b]);
    let mixed_orders = vec![
        train_kn(&count_ngrams(&a, 2, Some(&shared)).unwrap()).unwrap(),
        train_kn(&count_ngrams(&b, 3, Some(&shared)).unwrap()).unwrap(),
    ];
    assert!(matches!(
        interpolate_static(&mixed_orders, &MixtureWeights::uniform(2)),
        Err(Error::OrderMismatch(2, 3))
    ));
    assert!(MixtureWeights::new(vec![0.7, 0.7]).is_err());
}
