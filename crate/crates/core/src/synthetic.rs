//! Synthetic corpora with planted, topic-dependent sentiment.
//!
//! Every topic owns a few positive and negative marker words. A tweet's
//! score is `clamp(#positive - #negative, -2, 2)`, counting only markers
//! that belong to the tweet's own topic; markers of other topics may appear
//! as distractors and carry no weight. Some markers are shared between two
//! topics with opposite polarity, so the same word must be read differently
//! depending on the topic.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};

const TOPIC_NAMES: [&str; 12] = [
    "apple", "amazon", "tesla", "netflix", "starbucks", "nike", "google", "uber", "disney", "samsung", "spotify",
    "twitter",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub tweets: usize,
    pub topics: usize,
    /// Total distinct words, topic names and markers included.
    pub vocab_size: usize,
    /// Positive and, separately, negative markers owned by each topic.
    pub markers_per_topic: usize,
    /// Words positive for one topic and negative for another.
    pub shared_markers: usize,
    /// Probability of adding one marker of a different topic.
    pub distractor_rate: f64,
    /// Probability that a neutral tweet carries one positive and one
    /// negative marker of its topic instead of none.
    pub neutral_pair_rate: f64,
    pub min_fillers: usize,
    pub max_fillers: usize,
    /// Probabilities of raw scores -2..=2.
    pub score_weights: [f64; 5],
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            tweets: 3000,
            topics: 8,
            vocab_size: 300,
            markers_per_topic: 3,
            shared_markers: 2,
            distractor_rate: 0.1,
            neutral_pair_rate: 0.15,
            min_fillers: 0,
            max_fillers: 3,
            score_weights: [0.1, 0.15, 0.3, 0.3, 0.15],
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Marker {
    pub word: String,
    pub topic: String,
    /// `1` or `-1`.
    pub sign: i8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlantedCorpus {
    pub records: Vec<TweetRecord>,
    pub topics: Vec<String>,
    pub markers: Vec<Marker>,
    pub fillers: Vec<String>,
}

impl PlantedCorpus {
    fn markers_of(&self, topic: &str, sign: i8) -> Vec<&str> {
        self.markers
            .iter()
            .filter(|m| m.topic == topic && m.sign == sign)
            .map(|m| m.word.as_str())
            .collect()
    }

    /// Score a token list against `topic` with the planting rule.
    pub fn score(&self, tokens: &[String], topic: &str) -> i8 {
        let mut net = 0i32;
        for tok in tokens {
            for m in &self.markers {
                if m.topic == topic && &m.word == tok {
                    net += i32::from(m.sign);
                }
            }
        }
        net.clamp(-2, 2) as i8
    }

    /// A tweet with two positive markers of `praised` and two negative
    /// markers of `bashed`, using no shared words.
    pub fn contrast_tweet(&self, praised: &str, bashed: &str) -> String {
        let own = |topic: &str, sign: i8| -> Vec<&str> {
            self.markers_of(topic, sign)
                .into_iter()
                .filter(|w| self.markers.iter().filter(|m| &m.word == w).count() == 1)
                .take(2)
                .collect()
        };
        let mut words = own(praised, 1);
        words.extend(own(bashed, -1));
        words.push(&self.fillers[0]);
        words.join(" ")
    }
}

pub fn planted_corpus(config: &PlantedConfig) -> Result<PlantedCorpus> {
    let c = config;
    if c.topics < 2 || c.topics > TOPIC_NAMES.len() {
        return Err(Error::InvalidArgument(format!(
            "topics must be in 2..={}",
            TOPIC_NAMES.len()
        )));
    }
    if c.markers_per_topic < 2 || 2 * c.shared_markers > c.topics {
        return Err(Error::InvalidArgument(
            "need at least two markers per sign and two topics per shared marker".into(),
        ));
    }
    let rate_ok = |r: f64| (0.0..=1.0).contains(&r);
    if c.min_fillers > c.max_fillers || !rate_ok(c.distractor_rate) || !rate_ok(c.neutral_pair_rate) {
        return Err(Error::InvalidArgument("bad filler range or rates".into()));
    }
    let topics: Vec<String> = TOPIC_NAMES[..c.topics].iter().map(|s| s.to_string()).collect();
    let mut markers = Vec::new();
    for (a, topic) in topics.iter().enumerate() {
        for j in 0..c.markers_per_topic {
            for (sign, tag) in [(1, "up"), (-1, "down")] {
                markers.push(Marker {
                    word: format!("{tag}{a}x{j}"),
                    topic: topic.clone(),
                    sign,
                });
            }
        }
    }
    for s in 0..c.shared_markers {
        let word = format!("flip{s}");
        markers.push(Marker {
            word: word.clone(),
            topic: topics[2 * s].clone(),
            sign: 1,
        });
        markers.push(Marker {
            word,
            topic: topics[2 * s + 1].clone(),
            sign: -1,
        });
    }
    let reserved = c.topics + c.topics * 2 * c.markers_per_topic + c.shared_markers;
    if c.vocab_size <= reserved {
        return Err(Error::InvalidArgument(format!("vocab_size must exceed {reserved}")));
    }
    let fillers: Vec<String> = (0..c.vocab_size - reserved).map(|i| format!("w{i}")).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let scores = [-2i8, -1, 0, 1, 2];
    let mut corpus = PlantedCorpus {
        records: Vec::with_capacity(c.tweets),
        topics,
        markers,
        fillers,
    };
    for i in 0..c.tweets {
        let a = rng.random_range(0..c.topics);
        let topic = corpus.topics[a].clone();
        let target = *scores
            .choose_weighted(&mut rng, |s| c.score_weights[(s + 2) as usize])
            .map_err(|e| Error::InvalidArgument(format!("bad score weights: {e}")))?;
        let pos = corpus.markers_of(&topic, 1);
        let neg = corpus.markers_of(&topic, -1);
        let mut words: Vec<String> = Vec::new();
        let mut take = |from: &[&str], k: usize, rng: &mut ChaCha8Rng| {
            for w in from.choose_multiple(rng, k) {
                words.push(w.to_string());
            }
        };
        match target {
            s if s > 0 => take(&pos, s as usize, &mut rng),
            s if s < 0 => take(&neg, (-s) as usize, &mut rng),
            _ => {
                if rng.random_bool(c.neutral_pair_rate) {
                    take(&pos, 1, &mut rng);
                    take(&neg, 1, &mut rng);
                }
            }
        }
        if rng.random_bool(c.distractor_rate) {
            let others: Vec<&Marker> = corpus
                .markers
                .iter()
                .filter(|m| corpus.markers.iter().all(|o| o.word != m.word || o.topic != topic))
                .collect();
            words.push(others.choose(&mut rng).expect("other topics exist").word.clone());
        }
        if rng.random_bool(0.7) {
            words.push(topic.clone());
        }
        let n_fill = rng.random_range(c.min_fillers..=c.max_fillers);
        for _ in 0..n_fill {
            words.push(corpus.fillers.choose(&mut rng).expect("fillers").clone());
        }
        words.shuffle(&mut rng);
        let score = corpus.score(&words, &topic);
        debug_assert_eq!(score, target);
        let mut text = String::new();
        if rng.random_bool(0.2) {
            text.push_str(&format!("@user{} ", rng.random_range(0..50)));
        }
        text.push_str(&words.join(" "));
        if rng.random_bool(0.1) {
            text.push_str(" http://t.co/x");
        }
        corpus
            .records
            .push(TweetRecord::new(format!("p{i}"), text, topic, score));
    }
    Ok(corpus)
}
