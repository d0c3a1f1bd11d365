//! Versioned JSON container for trained artifacts.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "config": { "<section>": { ... } },
//!   "tensors": { "<name>": { "shape": [r, c], "data": "<base64>" } },
//!   "vocab": { "min_freq": 3, "entries": [["word", 17], ...] },
//!   "topics": { "entries": [["topic", 120], ...] }
//! }
//! ```
//!
//! Tensor data is the row-major sequence of little-endian IEEE 754 doubles,
//! base64 encoded with the standard alphabet and padding. Maps are ordered,
//! so the same contents always serialize to the same bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::autograd::{ParamSet, Tensor};
use crate::error::{Error, Result};
use crate::vocab::{LabelMatrix, TopicIndex, Vocabulary};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: String,
}

impl TensorRecord {
    pub fn encode(t: &Tensor) -> Self {
        let mut bytes = Vec::with_capacity(t.len() * 8);
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        TensorRecord {
            shape: t.shape().to_vec(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Tensor> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Checkpoint(format!("bad base64 tensor data: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Checkpoint("tensor byte length is not a multiple of 8".into()));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Tensor::new(self.shape.clone(), data)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabRecord {
    pub min_freq: u64,
    pub entries: Vec<(String, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRecord {
    pub entries: Vec<(String, u64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    #[serde(default)]
    pub config: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    pub tensors: BTreeMap<String, TensorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocab: Option<VocabRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topics: Option<TopicRecord>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            config: BTreeMap::new(),
            tensors: BTreeMap::new(),
            vocab: None,
            topics: None,
        }
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint::default()
    }

    pub fn put_tensor(&mut self, name: impl Into<String>, t: &Tensor) {
        self.tensors.insert(name.into(), TensorRecord::encode(t));
    }

    pub fn tensor(&self, name: &str) -> Result<Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name:?}")))?
            .decode()
    }

    pub fn has_tensor(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn put_params(&mut self, prefix: &str, params: &ParamSet) {
        for (name, t) in params.iter() {
            self.put_tensor(format!("{prefix}/{name}"), t);
        }
    }

    /// Overwrites every tensor of `params` from `prefix/<name>` entries.
    pub fn load_params(&self, prefix: &str, params: &mut ParamSet) -> Result<()> {
        let values = params
            .names()
            .iter()
            .map(|name| self.tensor(&format!("{prefix}/{name}")))
            .collect::<Result<Vec<_>>>()?;
        params.assign(values)
    }

    pub fn put_config<T: Serialize>(&mut self, section: &str, value: &T) -> Result<()> {
        self.config.insert(section.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn config<T: DeserializeOwned>(&self, section: &str) -> Result<T> {
        let v = self
            .config
            .get(section)
            .ok_or_else(|| Error::Checkpoint(format!("missing config section {section:?}")))?;
        Ok(T::deserialize(v)?)
    }

    pub fn has_config(&self, section: &str) -> bool {
        self.config.contains_key(section)
    }

    pub fn set_vocab(&mut self, vocab: &Vocabulary) {
        self.vocab = Some(VocabRecord {
            min_freq: vocab.min_freq(),
            entries: vocab.entries().map(|(w, f)| (w.to_string(), f)).collect(),
        });
    }

    pub fn vocabulary(&self) -> Result<Vocabulary> {
        let rec = self
            .vocab
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("no vocabulary stored".into()))?;
        Vocabulary::from_tsv(&index_lines(&rec.entries), rec.min_freq)
    }

    pub fn set_topics(&mut self, topics: &TopicIndex) {
        self.topics = Some(TopicRecord {
            entries: topics.entries().map(|(t, c)| (t.to_string(), c)).collect(),
        });
    }

    pub fn topic_index(&self) -> Result<TopicIndex> {
        let rec = self
            .topics
            .as_ref()
            .ok_or_else(|| Error::Checkpoint("no topic index stored".into()))?;
        TopicIndex::from_tsv(&index_lines(&rec.entries))
    }

    /// Stores values and support as `labels/values` and `labels/support`,
    /// both `[words, topics]`.
    pub fn put_labels(&mut self, labels: &LabelMatrix) {
        let shape = |data: Vec<f64>| Tensor::matrix(labels.words, labels.topics, data).expect("label shape");
        self.put_tensor("labels/values", &shape(labels.values.clone()));
        self.put_tensor("labels/support", &shape(labels.support.iter().map(|&c| f64::from(c)).collect()));
    }

    pub fn labels(&self) -> Result<LabelMatrix> {
        let values = self.tensor("labels/values")?;
        let support = self.tensor("labels/support")?;
        if values.shape().len() != 2 || values.shape() != support.shape() {
            return Err(Error::Checkpoint("label tensors have inconsistent shapes".into()));
        }
        if support.data().iter().any(|&c| c < 0.0 || c.fract() != 0.0 || c > f64::from(u32::MAX)) {
            return Err(Error::Checkpoint("label support must hold counts".into()));
        }
        Ok(LabelMatrix {
            words: values.rows(),
            topics: values.cols(),
            values: values.data().to_vec(),
            support: support.data().iter().map(|&c| c as u32).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::files::write_atomic(path, self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }
}

fn index_lines(entries: &[(String, u64)]) -> String {
    entries
        .iter()
        .enumerate()
        .map(|(i, (name, f))| format!("{name}\t{i}\t{f}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_encoding() {
        let rec = TensorRecord::encode(&Tensor::vector(vec![1.0]));
        // 1.0f64 little-endian: 00 00 00 00 00 00 f0 3f
        assert_eq!(rec.data, "AAAAAAAA8D8=");
        assert_eq!(rec.shape, vec![1]);
    }

    #[test]
    fn version_is_checked() {
        let mut ck = Checkpoint::new();
        ck.format_version = 99;
        let json = serde_json::to_string(&ck).unwrap();
        assert!(Checkpoint::from_json(&json).is_err());
    }

    #[test]
    fn labels_round_trip() {
        let labels = LabelMatrix {
            words: 2,
            topics: 3,
            values: vec![0.5, 0.0, -1.0, 0.25, 1.0, 0.0],
            support: vec![2, 0, 1, 4, 1, 0],
        };
        let mut ck = Checkpoint::new();
        ck.put_labels(&labels);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap().labels().unwrap();
        assert_eq!(back, labels);
    }

    #[test]
    fn missing_tensor_is_descriptive() {
        let err = Checkpoint::new().tensor("nope").unwrap_err();
        assert!(err.to_string().contains("nope"));
    }

    proptest! {
        #[test]
        fn tensors_round_trip_bit_exactly(values in prop::collection::vec(prop::num::f64::ANY, 1..40)) {
            let t = Tensor::vector(values);
            let mut ck = Checkpoint::new();
            ck.put_tensor("x", &t);
            let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap().tensor("x").unwrap();
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&t));
            prop_assert_eq!(back.shape(), t.shape());
        }
    }
}
