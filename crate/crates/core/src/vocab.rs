//! Word and topic indices, tweet encoding and the word-topic label matrix.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TweetRecord;
use crate::error::{Error, Result};

pub type WordId = usize;

/// Padding slot in encoded tweets. It lies outside every vocabulary's id range
/// and always embeds to zeros.
pub const PAD: WordId = usize::MAX;

/// Surface form accepted wherever a word string stands for [`PAD`].
pub const PAD_TOKEN: &str = "<pad>";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    word_to_id: HashMap<String, WordId>,
    id_to_word: Vec<String>,
    freqs: Vec<u64>,
    min_freq: u64,
}

impl Vocabulary {
    /// Words occurring at least `min_freq` times across `records`, ordered by
    /// descending frequency and then lexicographically.
    pub fn build(records: &[TweetRecord], min_freq: u64) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("cannot build a vocabulary from no records".into()));
        }
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for r in records {
            for t in &r.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_freq).collect();
        if kept.is_empty() {
            return Err(Error::Empty(format!("no word occurs at least {min_freq} times")));
        }
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_entries(
            kept.into_iter().map(|(w, c)| (w.to_string(), c)).collect(),
            min_freq,
        ))
    }

    fn from_entries(entries: Vec<(String, u64)>, min_freq: u64) -> Self {
        let word_to_id = entries.iter().enumerate().map(|(i, (w, _))| (w.clone(), i)).collect();
        let (id_to_word, freqs) = entries.into_iter().unzip();
        Vocabulary {
            word_to_id,
            id_to_word,
            freqs,
            min_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_word.is_empty()
    }

    pub fn min_freq(&self) -> u64 {
        self.min_freq
    }

    pub fn id(&self, word: &str) -> Option<WordId> {
        self.word_to_id.get(word).copied()
    }

    pub fn word(&self, id: WordId) -> Option<&str> {
        self.id_to_word.get(id).map(String::as_str)
    }

    pub fn freq(&self, id: WordId) -> Option<u64> {
        self.freqs.get(id).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.id_to_word
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.id_to_word.iter().map(String::as_str).zip(self.freqs.iter().copied())
    }

    /// Known tokens in order, truncated or right-padded with [`PAD`] to
    /// exactly `pad_len` slots.
    pub fn encode(&self, tokens: &[String], pad_len: usize) -> Vec<WordId> {
        let mut ids: Vec<WordId> = tokens
            .iter()
            .filter_map(|t| self.id(t))
            .take(pad_len)
            .collect();
        ids.resize(pad_len, PAD);
        ids
    }

    /// Inverse of [`Vocabulary::encode`] on the non-padding prefix.
    pub fn decode(&self, ids: &[WordId]) -> Vec<&str> {
        ids.iter().filter_map(|&i| self.word(i)).collect()
    }

    pub fn to_tsv(&self) -> String {
        index_tsv(self.entries())
    }

    pub fn from_tsv(text: &str, min_freq: u64) -> Result<Self> {
        Ok(Self::from_entries(parse_index_tsv(text)?, min_freq))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::files::write_atomic(path, self.to_tsv())
    }

    pub fn load(path: &Path, min_freq: u64) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_tsv(&text, min_freq)
    }
}

pub fn encode_tweet(tokens: &[String], vocab: &Vocabulary, pad_len: usize) -> Vec<WordId> {
    vocab.encode(tokens, pad_len)
}

/// Topic strings in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopicIndex {
    topic_to_id: HashMap<String, usize>,
    id_to_topic: Vec<String>,
    counts: Vec<u64>,
}

impl TopicIndex {
    pub fn build(records: &[TweetRecord]) -> Result<Self> {
        let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
        for r in records {
            *counts.entry(r.topic.as_str()).or_default() += 1;
        }
        if counts.is_empty() {
            return Err(Error::Empty("no topics".into()));
        }
        Ok(Self::from_entries(
            counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect(),
        ))
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let mut sorted: Vec<String> = names.iter().map(|s| s.as_ref().to_string()).collect();
        sorted.sort();
        sorted.dedup();
        if sorted.is_empty() {
            return Err(Error::Empty("no topics".into()));
        }
        Ok(Self::from_entries(sorted.into_iter().map(|t| (t, 0)).collect()))
    }

    fn from_entries(entries: Vec<(String, u64)>) -> Self {
        let topic_to_id = entries.iter().enumerate().map(|(i, (t, _))| (t.clone(), i)).collect();
        let (id_to_topic, counts) = entries.into_iter().unzip();
        TopicIndex {
            topic_to_id,
            id_to_topic,
            counts,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_topic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_topic.is_empty()
    }

    pub fn id(&self, topic: &str) -> Option<usize> {
        self.topic_to_id.get(topic).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.id_to_topic.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.id_to_topic
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u64)> {
        self.id_to_topic.iter().map(String::as_str).zip(self.counts.iter().copied())
    }

    pub fn to_tsv(&self) -> String {
        index_tsv(self.entries())
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        Ok(Self::from_entries(parse_index_tsv(text)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::files::write_atomic(path, self.to_tsv())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_tsv(&text)
    }
}

fn index_tsv<'a>(entries: impl Iterator<Item = (&'a str, u64)>) -> String {
    let mut out = String::new();
    for (id, (name, freq)) in entries.enumerate() {
        out.push_str(&format!("{name}\t{id}\t{freq}\n"));
    }
    out
}

fn parse_index_tsv(text: &str) -> Result<Vec<(String, u64)>> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = |reason: &str| Error::MalformedRow {
            line: i + 1,
            reason: reason.to_string(),
        };
        let mut fields = line.split('\t');
        let (Some(name), Some(id), Some(freq), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(bad("expected name<TAB>id<TAB>freq"));
        };
        let id: usize = id.parse().map_err(|_| bad("id is not an integer"))?;
        if id != i {
            return Err(bad("ids must be dense and in order"));
        }
        let freq: u64 = freq.parse().map_err(|_| bad("freq is not an integer"))?;
        entries.push((name.to_string(), freq));
    }
    Ok(entries)
}

/// How often a word repeated inside one tweet contributes to its cell.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepeatCounting {
    /// Once per tweet.
    #[default]
    PerTweet,
    /// Once per occurrence.
    PerToken,
}

/// Normalized mean tweet sentiment per (word, topic) cell.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    pub words: usize,
    pub topics: usize,
    /// Row-major `words x topics`, each in `[-1, 1]`.
    pub values: Vec<f64>,
    /// Contributing tweets (or tokens) per cell.
    pub support: Vec<u32>,
}

impl LabelMatrix {
    pub fn value(&self, word: WordId, topic: usize) -> f64 {
        self.values[word * self.topics + topic]
    }

    pub fn support(&self, word: WordId, topic: usize) -> u32 {
        self.support[word * self.topics + topic]
    }

    pub fn row(&self, word: WordId) -> &[f64] {
        &self.values[word * self.topics..(word + 1) * self.topics]
    }
}

/// Cell `(w, a)` is the mean score of the records with topic `a` containing
/// `w`, divided by 2. Cells without support are zero.
pub fn build_label_matrix(
    records: &[TweetRecord],
    vocab: &Vocabulary,
    topics: &TopicIndex,
    counting: RepeatCounting,
) -> Result<LabelMatrix> {
    let (n, t) = (vocab.len(), topics.len());
    let mut sums = vec![0i64; n * t];
    let mut support = vec![0u32; n * t];
    let mut seen = HashSet::new();
    for r in records {
        let a = topics
            .id(&r.topic)
            .ok_or_else(|| Error::UnknownTopic(r.topic.clone()))?;
        seen.clear();
        for tok in &r.tokens {
            let Some(w) = vocab.id(tok) else { continue };
            if counting == RepeatCounting::PerTweet && !seen.insert(w) {
                continue;
            }
            sums[w * t + a] += i64::from(r.score);
            support[w * t + a] += 1;
        }
    }
    let values = sums
        .iter()
        .zip(&support)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { (s as f64 / c as f64) / 2.0 })
        .collect();
    Ok(LabelMatrix {
        words: n,
        topics: t,
        values,
        support,
    })
}

/// A tweet ready for a model: padded word ids, topic id and raw score.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedTweet {
    pub ids: Vec<WordId>,
    pub topic_id: usize,
    pub score: i8,
}

pub fn encode_records(
    records: &[TweetRecord],
    vocab: &Vocabulary,
    topics: &TopicIndex,
    pad_len: usize,
) -> Result<Vec<EncodedTweet>> {
    records
        .iter()
        .map(|r| {
            Ok(EncodedTweet {
                ids: vocab.encode(&r.tokens, pad_len),
                topic_id: topics
                    .id(&r.topic)
                    .ok_or_else(|| Error::UnknownTopic(r.topic.clone()))?,
                score: r.score,
            })
        })
        .collect()
}
