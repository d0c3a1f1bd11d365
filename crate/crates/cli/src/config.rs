//! Run configuration, read from a TOML file. Every field has a default, so an
//! empty file (or no file) is a valid configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use topicsent::baseline::LogRegConfig;
use topicsent::classifier::{ClassifierConfig, ConcatMode};
use topicsent::vocab::RepeatCounting;
use topicsent::word2topic::{Arch, Word2TopicConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Base seed; every stage derives its own seed from it.
    pub seed: u64,
    pub data: DataSection,
    pub vocab: VocabSection,
    pub word2topic: EmbedSection,
    pub classifier: ClassifierSection,
    pub baseline: BaselineSection,
    pub insight: InsightSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// TSV corpus; may be overridden on the command line.
    pub input: Option<PathBuf>,
    /// Share of positive and of neutral tweets removed before splitting.
    pub drop_fraction: f64,
    /// Exact split sizes. When absent the fractions below are used.
    pub train_size: Option<usize>,
    pub validation_size: Option<usize>,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            input: None,
            drop_fraction: 1.0 / 3.0,
            train_size: None,
            validation_size: None,
            validation_fraction: 0.05,
            test_fraction: 0.15,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VocabSection {
    pub min_freq: u64,
    pub repeat_counting: RepeatCounting,
}

impl Default for VocabSection {
    fn default() -> Self {
        VocabSection {
            min_freq: 3,
            repeat_counting: RepeatCounting::PerTweet,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedSection {
    pub arch: Arch,
    pub embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for EmbedSection {
    fn default() -> Self {
        let d = Word2TopicConfig::default();
        EmbedSection {
            arch: d.arch,
            embed_dim: d.embed_dim,
            epochs: d.epochs,
            lr: d.lr,
            batch_size: d.batch_size,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub num_classes: usize,
    pub pad_len: usize,
    pub sentence_hidden: usize,
    pub topic_proj: usize,
    pub stack_hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub concat: ConcatMode,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let d = ClassifierConfig::default();
        ClassifierSection {
            num_classes: d.num_classes,
            pad_len: d.pad_len,
            sentence_hidden: d.sentence_hidden,
            topic_proj: d.topic_proj,
            stack_hidden: d.stack_hidden,
            lr: d.lr,
            batch_size: d.batch_size,
            epochs: d.epochs,
            concat: d.concat,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSection {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub batch_size: usize,
    /// `word<TAB>floats` table to compare against. When absent a seeded
    /// random table of the same width is used.
    pub vectors: Option<PathBuf>,
}

impl Default for BaselineSection {
    fn default() -> Self {
        let d = LogRegConfig::default();
        BaselineSection {
            epochs: d.epochs,
            lr: d.lr,
            l2: d.l2,
            batch_size: d.batch_size,
            vectors: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InsightSection {
    pub k: usize,
    /// Rank words that never co-occurred with the topic in training.
    pub include_unsupported: bool,
}

impl Default for InsightSection {
    fn default() -> Self {
        InsightSection {
            k: 10,
            include_unsupported: false,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if !(0.0..1.0).contains(&d.drop_fraction) {
            bail!("data.drop_fraction must be in [0, 1)");
        }
        if !(0.0..1.0).contains(&d.validation_fraction)
            || !(0.0..1.0).contains(&d.test_fraction)
            || d.validation_fraction + d.test_fraction >= 1.0
        {
            bail!("data.validation_fraction and data.test_fraction must be in [0, 1) and sum below 1");
        }
        if d.validation_size.is_some() && d.train_size.is_none() {
            bail!("data.validation_size needs data.train_size");
        }
        let e = &self.word2topic;
        if e.embed_dim == 0 || e.batch_size == 0 || !(e.lr >= 0.0) {
            bail!("word2topic.embed_dim and batch_size must be positive and lr non-negative");
        }
        self.classifier_config().validate()?;
        let b = &self.baseline;
        if b.batch_size == 0 || !(b.lr > 0.0) || !(b.l2 >= 0.0) {
            bail!("baseline.batch_size and lr must be positive and l2 non-negative");
        }
        if self.insight.k == 0 {
            bail!("insight.k must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, with defaults filled in.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seeds(&self) -> Seeds {
        Seeds {
            rebalance: self.seed,
            split: self.seed.wrapping_add(1),
            word2topic: self.seed.wrapping_add(2),
            classifier: self.seed.wrapping_add(3),
            logreg: self.seed.wrapping_add(4),
            random_vectors: self.seed.wrapping_add(5),
        }
    }

    pub fn word2topic_config(&self) -> Word2TopicConfig {
        let e = &self.word2topic;
        Word2TopicConfig {
            arch: e.arch,
            embed_dim: e.embed_dim,
            epochs: e.epochs,
            lr: e.lr,
            batch_size: e.batch_size,
            seed: self.seeds().word2topic,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        let c = &self.classifier;
        ClassifierConfig {
            num_classes: c.num_classes,
            pad_len: c.pad_len,
            embed_dim: self.word2topic.embed_dim,
            sentence_hidden: c.sentence_hidden,
            topic_proj: c.topic_proj,
            stack_hidden: c.stack_hidden,
            lr: c.lr,
            batch_size: c.batch_size,
            epochs: c.epochs,
            seed: self.seeds().classifier,
            concat: c.concat,
        }
    }

    pub fn logreg_config(&self) -> LogRegConfig {
        let b = &self.baseline;
        LogRegConfig {
            epochs: b.epochs,
            lr: b.lr,
            l2: b.l2,
            batch_size: b.batch_size,
            seed: self.seeds().logreg,
        }
    }

    /// `(train, validation)` counts for a corpus of `n` records.
    pub fn split_sizes(&self, n: usize) -> Result<(usize, usize)> {
        let d = &self.data;
        let (train, val) = match d.train_size {
            Some(train) => (train, d.validation_size.unwrap_or(0)),
            None => {
                let val = (n as f64 * d.validation_fraction).round() as usize;
                let test = (n as f64 * d.test_fraction).round() as usize;
                (n.saturating_sub(val + test), val)
            }
        };
        if train == 0 || train + val > n {
            bail!("cannot split {n} records into {train} train and {val} validation");
        }
        Ok((train, val))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub rebalance: u64,
    pub split: u64,
    pub word2topic: u64,
    pub classifier: u64,
    pub logreg: u64,
    pub random_vectors: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = Config::parse("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.vocab.min_freq, 3);
        assert_eq!(cfg.classifier.pad_len, 30);
        assert_eq!(cfg.word2topic.embed_dim, 100);
        assert_eq!(cfg.classifier.lr, 0.0005);
        assert_eq!(cfg.classifier.batch_size, 64);
        assert_eq!(cfg.classifier.epochs, 40);
        assert!((cfg.data.drop_fraction - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = Config::parse("seed = 7\n[classifier]\nnum_classes = 5\nconcat = \"final_state\"\n").unwrap();
        assert_eq!(cfg.classifier.num_classes, 5);
        assert_eq!(cfg.classifier_config().concat, ConcatMode::FinalState);
        assert_eq!(cfg.seeds().rebalance, 7);
        assert_eq!(cfg.classifier.epochs, 40);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(Config::parse("[classifier]\nlearning_rate = 1.0\n").is_err());
        assert!(Config::parse("[classifier]\nnum_classes = 4\n").is_err());
        assert!(Config::parse("[data]\ndrop_fraction = 1.5\n").is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn split_sizes() {
        let mut cfg = Config::default();
        assert_eq!(cfg.split_sizes(100).unwrap(), (80, 5));
        cfg.data.train_size = Some(13300);
        cfg.data.validation_size = Some(700);
        assert_eq!(cfg.split_sizes(16895).unwrap(), (13300, 700));
        assert!(cfg.split_sizes(10000).is_err());
    }
}
