use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use topicsent::corpus::TweetRecord;
use topicsent::vocab::{build_label_matrix, RepeatCounting, TopicIndex, Vocabulary};

fn random_corpus(rng: &mut ChaCha8Rng) -> Vec<TweetRecord> {
    let tweets = rng.random_range(1..=50);
    let words = rng.random_range(1..=20);
    let topics = rng.random_range(1..=5);
    (0..tweets)
        .map(|i| {
            let len = rng.random_range(1..=8);
            let text: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..words))).collect();
            let topic = format!("topic{}", rng.random_range(0..topics));
            TweetRecord::new(i.to_string(), text.join(" "), topic, rng.random_range(-2..=2))
        })
        .collect()
}

/// Direct definition: for every cell, scan every tweet.
fn oracle(records: &[TweetRecord], vocab: &Vocabulary, topics: &TopicIndex, per_token: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for w in vocab.words() {
        for a in topics.names() {
            let (mut sum, mut count) = (0.0, 0.0);
            for r in records.iter().filter(|r| &r.topic == a) {
                let hits = r.tokens.iter().filter(|t| *t == w).count();
                let hits = if per_token { hits } else { hits.min(1) };
                sum += f64::from(r.score) * hits as f64;
                count += hits as f64;
            }
            out.push(if count == 0.0 { 0.0 } else { sum / count / 2.0 });
        }
    }
    out
}

#[test]
fn matches_triple_loop_on_random_corpora() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let records = random_corpus(&mut rng);
        let vocab = Vocabulary::build(&records, 1).unwrap();
        let topics = TopicIndex::build(&records).unwrap();
        for (counting, per_token) in [(RepeatCounting::PerTweet, false), (RepeatCounting::PerToken, true)] {
            let m = build_label_matrix(&records, &vocab, &topics, counting).unwrap();
            assert_eq!(m.values, oracle(&records, &vocab, &topics, per_token));
        }
    }
}

proptest! {
    #[test]
    fn cells_are_bounded_and_zero_without_support(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = random_corpus(&mut rng);
        let vocab = Vocabulary::build(&records, 1).unwrap();
        let topics = TopicIndex::build(&records).unwrap();
        let m = build_label_matrix(&records, &vocab, &topics, RepeatCounting::PerTweet).unwrap();
        for (v, s) in m.values.iter().zip(&m.support) {
            prop_assert!((-1.0..=1.0).contains(v));
            if *s == 0 {
                prop_assert_eq!(*v, 0.0);
            }
        }
    }
}
