//! Tweet ingestion, cleaning, class rebalancing and seeded splits.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled tweet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub topic: String,
    /// Sentiment in `-2..=2`.
    pub score: i8,
    /// Set when cleaning left no tokens.
    pub dropped: bool,
}

impl TweetRecord {
    pub fn new(id: impl Into<String>, raw_text: impl Into<String>, topic: impl Into<String>, score: i8) -> Self {
        let raw_text = raw_text.into();
        let tokens = clean_tweet(&raw_text);
        TweetRecord {
            id: id.into(),
            dropped: tokens.is_empty(),
            raw_text,
            tokens,
            topic: topic.into(),
            score,
        }
    }

    pub fn polarity(&self) -> std::cmp::Ordering {
        self.score.cmp(&0)
    }
}

/// Reads `id<TAB>text<TAB>topic<TAB>score` rows. Row order is preserved and
/// the text is kept verbatim next to its cleaned tokens.
pub fn load_dataset(path: &Path) -> Result<Vec<TweetRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<TweetRecord>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::MalformedRow {
                line: line_no,
                reason: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let score: i64 = fields[3].trim().parse().map_err(|_| Error::MalformedRow {
            line: line_no,
            reason: format!("score {:?} is not an integer", fields[3]),
        })?;
        if !(-2..=2).contains(&score) {
            return Err(Error::ScoreOutOfRange {
                line: line_no,
                score,
            });
        }
        if fields[0].is_empty() || fields[2].is_empty() {
            return Err(Error::MalformedRow {
                line: line_no,
                reason: "empty id or topic".into(),
            });
        }
        records.push(TweetRecord::new(fields[0], fields[1], fields[2], score as i8));
    }
    if records.is_empty() {
        return Err(Error::Empty("dataset has no rows".into()));
    }
    Ok(records)
}

/// Serializes records back into the input TSV layout.
pub fn to_tsv(records: &[TweetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.id, r.raw_text, r.topic, r.score));
    }
    out
}

/// Tokenizes a raw tweet.
///
/// HTML tags and entities, URLs and `@mentions` are removed. Hashtags keep
/// their word unless they belong to the run of hashtags ending the tweet, in
/// which case they are dropped. Tokens are lowercased and reduced to
/// `[a-z0-9']`; empty tokens are discarded.
pub fn clean_tweet(raw_text: &str) -> Vec<String> {
    let text = strip_html(raw_text);
    let mut words: Vec<&str> = text
        .split_whitespace()
        .filter(|w| !is_url(w) && !w.starts_with('@'))
        .collect();
    while words.last().is_some_and(|w| w.starts_with('#')) {
        words.pop();
    }
    words
        .into_iter()
        .filter_map(|w| {
            let token: String = w
                .chars()
                .flat_map(char::to_lowercase)
                .filter(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '\'')
                .collect();
            (!token.is_empty()).then_some(token)
        })
        .collect()
}

fn is_url(word: &str) -> bool {
    let lower = word.to_ascii_lowercase();
    lower.starts_with("http://")
        || lower.starts_with("https://")
        || lower.starts_with("www.")
        || lower.contains("://")
}

/// Removes `<tag ...>` markup and `&entity;` references. Apostrophe entities
/// become `'`; every other removal leaves a space so neighbouring words stay
/// apart.
fn strip_html(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut i = 0;
    while i < chars.len() {
        match chars[i] {
            '<' => {
                if let Some(end) = tag_end(&chars, i) {
                    out.push(' ');
                    i = end + 1;
                    continue;
                }
            }
            '&' => {
                if let Some((end, name)) = entity_end(&chars, i) {
                    let name = name.to_ascii_lowercase();
                    if matches!(name.as_str(), "#39" | "#x27" | "apos" | "rsquo") {
                        out.push('\'');
                    } else {
                        out.push(' ');
                    }
                    i = end + 1;
                    continue;
                }
            }
            _ => {}
        }
        out.push(chars[i]);
        i += 1;
    }
    out
}

fn tag_end(chars: &[char], start: usize) -> Option<usize> {
    let mut j = start + 1;
    if chars.get(j) == Some(&'/') {
        j += 1;
    }
    if !chars.get(j)?.is_ascii_alphabetic() {
        return None;
    }
    chars[j..].iter().position(|&c| c == '>').map(|p| j + p)
}

fn entity_end(chars: &[char], start: usize) -> Option<(usize, String)> {
    const MAX_NAME: usize = 10;
    let rest = &chars[start + 1..];
    let semi = rest.iter().take(MAX_NAME + 1).position(|&c| c == ';')?;
    let name: String = rest[..semi].iter().collect();
    let valid = match name.strip_prefix('#') {
        Some(num) => {
            !num.is_empty()
                && (num.chars().all(|c| c.is_ascii_digit())
                    || num
                        .strip_prefix(['x', 'X'])
                        .is_some_and(|h| !h.is_empty() && h.chars().all(|c| c.is_ascii_hexdigit())))
        }
        None => !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric()),
    };
    valid.then(|| (start + 1 + semi, name))
}

/// Removes `floor(drop_fraction * count)` randomly chosen records from the
/// positive class and, separately, from the neutral class. Negative records
/// and the relative order of survivors are untouched.
pub fn rebalance(records: &[TweetRecord], drop_fraction: f64, seed: u64) -> Result<Vec<TweetRecord>> {
    if !(0.0..1.0).contains(&drop_fraction) {
        return Err(Error::InvalidArgument(format!(
            "drop_fraction must be in [0, 1), got {drop_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut removed = vec![false; records.len()];
    for class in [std::cmp::Ordering::Greater, std::cmp::Ordering::Equal] {
        let members: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.polarity() == class)
            .map(|(i, _)| i)
            .collect();
        // The epsilon absorbs representation error such as (1/3) * 9 < 3.
        let k = (drop_fraction * members.len() as f64 + 1e-9).floor() as usize;
        for pick in index::sample(&mut rng, members.len(), k) {
            removed[members[pick]] = true;
        }
    }
    Ok(records
        .iter()
        .zip(removed)
        .filter(|(_, gone)| !gone)
        .map(|(r, _)| r.clone())
        .collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSet {
    pub train: Vec<TweetRecord>,
    pub validation: Vec<TweetRecord>,
    pub test: Vec<TweetRecord>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

pub const TRAIN_FILE: &str = "train.tsv";
pub const VALIDATION_FILE: &str = "validation.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const SPLIT_MANIFEST_FILE: &str = "manifest.json";

impl SplitSet {
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            seed: self.seed,
            train: self.train.len(),
            validation: self.validation.len(),
            test: self.test.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Writes the three TSV files and a JSON manifest into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        for (name, part) in [
            (TRAIN_FILE, &self.train),
            (VALIDATION_FILE, &self.validation),
            (TEST_FILE, &self.test),
        ] {
            let path = dir.join(name);
            crate::files::write_atomic(&path, to_tsv(part))?;
        }
        let path = dir.join(SPLIT_MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest())?;
        crate::files::write_atomic(&path, json + "\n")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SPLIT_MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
        let manifest: SplitManifest = serde_json::from_str(&text)?;
        let part = |name: &str, expected: usize| -> Result<Vec<TweetRecord>> {
            let path = dir.join(name);
            let text = fs::read_to_string(&path).map_err(|e| Error::file(&path, e))?;
            let records = if text.is_empty() {
                Vec::new()
            } else {
                parse_dataset(&text)?
            };
            if records.len() != expected {
                return Err(Error::InvalidArgument(format!(
                    "{name} has {} rows, manifest says {expected}",
                    records.len()
                )));
            }
            Ok(records)
        };
        Ok(SplitSet {
            train: part(TRAIN_FILE, manifest.train)?,
            validation: part(VALIDATION_FILE, manifest.validation)?,
            test: part(TEST_FILE, manifest.test)?,
            seed: manifest.seed,
        })
    }
}

/// Seeded shuffle, then the first `train_n` records train, the next `val_n`
/// validate and the remainder test.
pub fn split(records: &[TweetRecord], train_n: usize, val_n: usize, seed: u64) -> Result<SplitSet> {
    if train_n + val_n > records.len() {
        return Err(Error::InvalidArgument(format!(
            "train ({train_n}) + validation ({val_n}) exceeds corpus size {}",
            records.len()
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok(SplitSet {
        train: pick(&order[..train_n]),
        validation: pick(&order[train_n..train_n + val_n]),
        test: pick(&order[train_n + val_n..]),
        seed,
    })
}

/// Ids occurring more than once, in first-seen order.
pub fn duplicate_ids(records: &[TweetRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for r in records {
        if !seen.insert(r.id.as_str()) && !dups.contains(&r.id) {
            dups.push(r.id.clone());
        }
    }
    dups
}
