use charsurp::codec::{train_bpe, Codec};
use charsurp::lm::toy::SeededLm;
use charsurp::marginal::oracle::{beam_prefix_logprob, oracle_check, OracleConfig, ViolationKind};
use charsurp::marginal::MarginalError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_codec(rng: &mut ChaCha8Rng) -> Codec {
    let alphabet: Vec<char> = "abc "[..rng.random_range(2..=4)].chars().collect();
    let corpus: Vec<String> = (0..6)
        .map(|_| (0..rng.random_range(4..30)).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect())
        .collect();
    let mut base: Vec<char> = corpus.concat().chars().collect();
    base.sort();
    base.dedup();
    train_bpe(&corpus, base.len() + rng.random_range(0..25)).unwrap()
}

#[test]
fn beam_agrees_with_exact_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut violations = Vec::new();
    for model in 0..100 {
        let codec = random_codec(&mut rng);
        // sharp conditionals are where plain top-B pruning loses monotonicity
        let lm = SeededLm::new(codec.vocab_size(), model)
            .with_eos_boost(rng.random_range(-1.0..2.0))
            .with_sharpness(rng.random_range(1.0..6.0));
        let cfg = OracleConfig { trials: 30, max_len: 10, max_width: 6, seed: model, ..Default::default() };
        let report = oracle_check(&codec, &lm, &cfg, &beam_prefix_logprob).unwrap();
        violations.extend(report.violations.into_iter().map(|v| (model, v)));
    }
    assert!(violations.is_empty(), "{:?}", &violations[..violations.len().min(5)]);
}

#[test]
fn broken_beam_is_caught() {
    let codec = train_bpe(&["abab abba baab"], 9).unwrap();
    let lm = SeededLm::new(codec.vocab_size(), 3);
    let cfg = OracleConfig { trials: 50, seed: 1, ..Default::default() };
    let inflated = |c: &Codec, l: &SeededLm, t: &str, w: usize| -> Result<f64, MarginalError> {
        Ok(beam_prefix_logprob(c, l, t, w)? + 1e-3)
    };
    let report = oracle_check(&codec, &lm, &cfg, &inflated).unwrap();
    assert!(!report.passed());
    let v = &report.violations[0];
    assert_eq!(v.kind, ViolationKind::Unbounded);
    assert!(!v.query.is_empty());
}

#[test]
fn zero_trials_is_vacuous() {
    let codec = train_bpe(&["ab"], 3).unwrap();
    let lm = SeededLm::new(codec.vocab_size(), 0);
    let report = oracle_check(&codec, &lm, &OracleConfig { trials: 0, ..Default::default() }, &beam_prefix_logprob).unwrap();
    assert!(report.passed());
    assert_eq!(report.trials, 0);
}
