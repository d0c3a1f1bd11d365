//! Logistic-regression baseline over concatenated word embeddings.
//!
//! A tweet becomes the concatenation of its 30 padded embedding rows
//! followed by a one-hot topic vector; a multinomial logistic regression is
//! trained on those features. Running it over two embedding tables on the
//! same split compares how much topic sentiment each table carries.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{softmax, uniform, Adam, AdamConfig, Tape, Tensor};
use crate::classifier::{argmax, label_of};
use crate::corpus::{SplitSet, TweetRecord};
use crate::error::{Error, Result};
use crate::evalkit::{class_names, confusion, ConfusionMatrix};
use crate::exec::Execution;
use crate::vocab::{TopicIndex, Vocabulary, WordId};
use crate::word2topic::WordVectors;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub epochs: usize,
    pub lr: f64,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            epochs: 30,
            lr: 0.01,
            l2: 1e-4,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// `30 * d` embedding slots in tweet order, then a `t`-wide topic one-hot.
pub fn featurize(ids: &[WordId], topic_id: usize, vectors: &WordVectors, num_topics: usize) -> Result<Vec<f64>> {
    if topic_id >= num_topics {
        return Err(Error::InvalidArgument(format!(
            "topic id {topic_id} outside 0..{num_topics}"
        )));
    }
    let d = vectors.dim();
    let mut out = Vec::with_capacity(ids.len() * d + num_topics);
    for &id in ids {
        out.extend_from_slice(vectors.row(id));
    }
    let start = out.len();
    out.resize(start + num_topics, 0.0);
    out[start + topic_id] = 1.0;
    Ok(out)
}

/// Feature matrix `[N, 30 * d + t]` and 3-class labels for `records`.
pub fn featurize_records(
    records: &[TweetRecord],
    vocab: &Vocabulary,
    topics: &TopicIndex,
    vectors: &WordVectors,
    pad_len: usize,
) -> Result<(Tensor, Vec<usize>)> {
    if records.is_empty() {
        return Err(Error::Empty("no records to featurize".into()));
    }
    let width = pad_len * vectors.dim() + topics.len();
    let mut data = Vec::with_capacity(records.len() * width);
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        let topic = topics.id(&r.topic).ok_or_else(|| Error::UnknownTopic(r.topic.clone()))?;
        data.extend(featurize(&vocab.encode(&r.tokens, pad_len), topic, vectors, topics.len())?);
        labels.push(label_of(r.score, 3));
    }
    Ok((Tensor::matrix(records.len(), width, data)?, labels))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogReg {
    /// `[D, C]`.
    pub weight: Tensor,
    /// `[C]`.
    pub bias: Tensor,
}

impl LogReg {
    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn predict_proba(&self, features: &Tensor) -> Vec<Vec<f64>> {
        let mut tape = Tape::new();
        let x = tape.constant(features.clone());
        let w = tape.constant(self.weight.clone());
        let b = tape.constant(self.bias.clone());
        let z = tape.matmul(x, w);
        let z = tape.add_bias(z, b);
        tape.value(z)
            .data()
            .chunks_exact(self.num_classes())
            .map(softmax)
            .collect()
    }

    pub fn predict(&self, features: &Tensor) -> Vec<usize> {
        self.predict_proba(features).iter().map(|p| argmax(p)).collect()
    }
}

fn rows(features: &Tensor, idx: &[usize]) -> Tensor {
    let d = features.cols();
    let mut data = Vec::with_capacity(idx.len() * d);
    for &i in idx {
        data.extend_from_slice(features.row(i));
    }
    Tensor::matrix(idx.len(), d, data).expect("shape")
}

/// Minibatch Adam on mean cross-entropy plus `l2 * ||W||^2`.
pub fn train_logreg(features: &Tensor, labels: &[usize], num_classes: usize, config: &LogRegConfig) -> Result<LogReg> {
    if features.rows() != labels.len() || features.is_empty() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if config.batch_size == 0 || !(config.lr > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::InvalidArgument("batch_size and lr must be positive, l2 non-negative".into()));
    }
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::InvalidArgument(format!("label {l} outside 0..{num_classes}")));
        }
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::InvalidArgument(format!(
            "class {missing} has no training examples"
        )));
    }
    let d = features.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = crate::autograd::ParamSet::new();
    let w_id = params.add("weight", uniform(&mut rng, &[d, num_classes], 0.01));
    let b_id = params.add("bias", Tensor::zeros(&[num_classes]));
    let mut adam = Adam::new(&params, AdamConfig::with_lr(config.lr));
    let mut order: Vec<usize> = (0..labels.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for (bi, idx) in order.chunks(config.batch_size).enumerate() {
            let mut tape = Tape::new();
            let p = params.bind(&mut tape);
            let x = tape.constant(rows(features, idx));
            let z = tape.matmul(x, p.var(w_id));
            let z = tape.add_bias(z, p.var(b_id));
            let batch_labels: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
            let ce = tape.softmax_cross_entropy(z, &batch_labels);
            let reg = tape.sum_squares(p.var(w_id));
            let reg = tape.scale(reg, config.l2);
            let loss = tape.add(ce, reg);
            let diverged = || Error::Diverged {
                epoch,
                batch: Some(bi + 1),
            };
            if !tape.value(loss).is_finite() {
                return Err(diverged());
            }
            let grads = p.collect(tape.backward(loss).map_err(|_| diverged())?)?;
            adam.step(&mut params, &grads).map_err(|_| diverged())?;
        }
    }
    let mut t = params.tensors().iter().cloned();
    Ok(LogReg {
        weight: t.next().expect("weight"),
        bias: t.next().expect("bias"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub name: String,
    pub accuracy: f64,
    /// Fraction of each gold class predicted correctly (the normalized
    /// confusion-matrix diagonal).
    pub diagonal: Vec<f64>,
    pub confusion: ConfusionMatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub class_names: Vec<String>,
    pub train_size: usize,
    pub test_size: usize,
    pub seeds: BTreeMap<String, u64>,
    pub arms: Vec<ArmReport>,
}

impl ComparisonReport {
    pub fn arm(&self, name: &str) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.name == name)
    }
}

/// Trains one logistic model per embedding table on the training split and
/// scores each on the test split. Both arms see the same records, order and
/// logistic-regression seed.
pub fn compare_embeddings(
    arms: &[(&str, &WordVectors)],
    vocab: &Vocabulary,
    topics: &TopicIndex,
    splits: &SplitSet,
    pad_len: usize,
    config: &LogRegConfig,
    exec: Execution,
) -> Result<ComparisonReport> {
    let results = exec.map(arms, |&(name, vectors)| -> Result<ArmReport> {
        if vectors.num_words() != vocab.len() {
            return Err(Error::Shape(format!(
                "embedding table {name:?} has {} rows for {} words",
                vectors.num_words(),
                vocab.len()
            )));
        }
        let (x_train, y_train) = featurize_records(&splits.train, vocab, topics, vectors, pad_len)?;
        let (x_test, y_test) = featurize_records(&splits.test, vocab, topics, vectors, pad_len)?;
        let model = train_logreg(&x_train, &y_train, 3, config)?;
        let cm = confusion(&y_test, &model.predict(&x_test), 3)?;
        let metrics = cm.metrics()?;
        Ok(ArmReport {
            name: name.to_string(),
            accuracy: metrics.accuracy,
            diagonal: metrics.per_class.iter().map(|m| m.recall).collect(),
            confusion: cm,
        })
    });
    let mut seeds = BTreeMap::new();
    seeds.insert("split".to_string(), splits.seed);
    seeds.insert("logreg".to_string(), config.seed);
    Ok(ComparisonReport {
        class_names: class_names(3),
        train_size: splits.train.len(),
        test_size: splits.test.len(),
        seeds,
        arms: results.into_iter().collect::<Result<_>>()?,
    })
}
