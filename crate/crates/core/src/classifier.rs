//! Phase-2 topic-conditioned sentiment classifier.
//!
//! A tweet is 30 padded word ids, embedded through the phase-1
//! [`EmbeddingTable`] (padding embeds to zeros, no masking). A sentence
//! BiLSTM reads the sequence; a topic block (dense + ReLU) projects the topic
//! embedding. By default the projected topic is appended to every timestep
//! of the sentence output, two more BiLSTM layers read that sequence, and the
//! final forward and backward states feed a softmax layer.
//! [`ConcatMode::FinalState`] instead runs all three BiLSTMs over the
//! sentence alone and joins the topic only before the softmax.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{softmax, Adam, AdamConfig, BiLstm, Bound, Dense, ParamSet, Tape, Tensor, Var};
use crate::checkpoint::Checkpoint;
use crate::corpus::{clean_tweet, TweetRecord};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::vocab::WordId;
use crate::word2topic::{add_grads, EmbeddingTable};

/// Examples per data-parallel work unit.
const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConcatMode {
    #[default]
    PerTimestep,
    FinalState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub num_classes: usize,
    pub pad_len: usize,
    pub embed_dim: usize,
    pub sentence_hidden: usize,
    pub topic_proj: usize,
    pub stack_hidden: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub concat: ConcatMode,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            num_classes: 3,
            pad_len: 30,
            embed_dim: 100,
            sentence_hidden: 64,
            topic_proj: 64,
            stack_hidden: 64,
            lr: 0.0005,
            batch_size: 64,
            epochs: 40,
            seed: 0,
            concat: ConcatMode::PerTimestep,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.num_classes != 3 && self.num_classes != 5 {
            return bad("num_classes must be 3 or 5");
        }
        if self.pad_len == 0 || self.embed_dim == 0 {
            return bad("pad_len and embed_dim must be positive");
        }
        if self.sentence_hidden == 0 || self.topic_proj == 0 || self.stack_hidden == 0 {
            return bad("layer widths must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.batch_size == 0 {
            return bad("lr and batch_size must be positive");
        }
        Ok(())
    }
}

/// Maps a raw score in `-2..=2` to a class index. Three classes collapse by
/// sign (negative, neutral, positive); five keep the raw score, shifted.
pub fn label_of(score: i8, num_classes: usize) -> usize {
    match num_classes {
        3 => match score.signum() {
            -1 => 0,
            0 => 1,
            _ => 2,
        },
        _ => (score + 2) as usize,
    }
}

/// Mean of the embeddings of the topic's in-vocabulary tokens after tweet
/// cleaning; zeros when none are known.
pub fn topic_vector(topic: &str, table: &EmbeddingTable) -> Vec<f64> {
    let d = table.embed_dim();
    let mut sum = vec![0.0; d];
    let mut n = 0usize;
    for tok in clean_tweet(topic) {
        if let Some(id) = table.vocab().id(&tok) {
            for (s, v) in sum.iter_mut().zip(table.embedding(id)) {
                *s += v;
            }
            n += 1;
        }
    }
    if n > 0 {
        for s in &mut sum {
            *s /= n as f64;
        }
    }
    sum
}

/// One model input: padded ids, topic vector and, for training, a class.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub ids: Vec<WordId>,
    pub topic: Vec<f64>,
    pub label: usize,
}

pub fn make_examples(records: &[TweetRecord], table: &EmbeddingTable, config: &ClassifierConfig) -> Vec<Example> {
    let mut topic_cache: std::collections::HashMap<&str, Vec<f64>> = Default::default();
    records
        .iter()
        .map(|r| Example {
            ids: table.encode(&r.tokens, config.pad_len),
            topic: topic_cache
                .entry(r.topic.as_str())
                .or_insert_with(|| topic_vector(&r.topic, table))
                .clone(),
            label: label_of(r.score, config.num_classes),
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct ClassifierModel {
    config: ClassifierConfig,
    params: ParamSet,
    sentence: BiLstm,
    topic: Dense,
    stack1: BiLstm,
    stack2: BiLstm,
    out: Dense,
}

impl ClassifierModel {
    pub fn new(config: ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let c = &config;
        let sentence = BiLstm::new(&mut params, "sentence", c.embed_dim, c.sentence_hidden, &mut rng);
        let topic = Dense::new(&mut params, "topic", c.embed_dim, c.topic_proj, &mut rng);
        let (stack_in, out_in) = match c.concat {
            ConcatMode::PerTimestep => (2 * c.sentence_hidden + c.topic_proj, 2 * c.stack_hidden),
            ConcatMode::FinalState => (2 * c.sentence_hidden, 2 * c.stack_hidden + c.topic_proj),
        };
        let stack1 = BiLstm::new(&mut params, "stack1", stack_in, c.stack_hidden, &mut rng);
        let stack2 = BiLstm::new(&mut params, "stack2", 2 * c.stack_hidden, c.stack_hidden, &mut rng);
        let out = Dense::new(&mut params, "out", out_in, c.num_classes, &mut rng);
        Ok(ClassifierModel {
            config,
            params,
            sentence,
            topic,
            stack1,
            stack2,
            out,
        })
    }

    pub fn config(&self) -> &ClassifierConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn check_input(&self, table: &EmbeddingTable, ids: &[WordId], topic: &[f64]) -> Result<()> {
        if ids.len() != self.config.pad_len {
            return Err(Error::Shape(format!(
                "expected {} word ids, got {}",
                self.config.pad_len,
                ids.len()
            )));
        }
        if topic.len() != self.config.embed_dim || table.embed_dim() != self.config.embed_dim {
            return Err(Error::Shape(format!(
                "model embeds to {}, table has {} and topic vector {}",
                self.config.embed_dim,
                table.embed_dim(),
                topic.len()
            )));
        }
        if let Some(&bad) = ids.iter().find(|&&w| w != crate::vocab::PAD && w >= table.num_words()) {
            return Err(Error::Shape(format!("word id {bad} outside the table")));
        }
        Ok(())
    }

    /// Logits `[B, num_classes]` for a batch of examples.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, table: &EmbeddingTable, batch: &[&Example]) -> Result<Var> {
        if batch.is_empty() {
            return Err(Error::Empty("empty batch".into()));
        }
        for ex in batch {
            self.check_input(table, &ex.ids, &ex.topic)?;
        }
        let c = &self.config;
        let b = batch.len();
        let d = c.embed_dim;
        let steps: Vec<Var> = (0..c.pad_len)
            .map(|t| {
                let mut data = Vec::with_capacity(b * d);
                for ex in batch {
                    data.extend_from_slice(table.embedding(ex.ids[t]));
                }
                tape.constant(Tensor::matrix(b, d, data).expect("shape"))
            })
            .collect();
        let mut topic = Vec::with_capacity(b * d);
        for ex in batch {
            topic.extend_from_slice(&ex.topic);
        }
        let topic = tape.constant(Tensor::matrix(b, d, topic)?);
        let topic = self.topic.forward(tape, p, topic);
        let topic = tape.relu(topic);

        let sentence = self.sentence.run(tape, p, &steps);
        let final_state = match c.concat {
            ConcatMode::PerTimestep => {
                let joined: Vec<Var> = sentence
                    .sequence
                    .iter()
                    .map(|&h| tape.concat_cols(&[h, topic]))
                    .collect();
                let s1 = self.stack1.run(tape, p, &joined);
                let s2 = self.stack2.run(tape, p, &s1.sequence);
                tape.concat_cols(&[s2.last_forward, s2.last_backward])
            }
            ConcatMode::FinalState => {
                let s1 = self.stack1.run(tape, p, &sentence.sequence);
                let s2 = self.stack2.run(tape, p, &s1.sequence);
                tape.concat_cols(&[s2.last_forward, s2.last_backward, topic])
            }
        };
        Ok(self.out.forward(tape, p, final_state))
    }

    /// Mean cross-entropy over `batch` and its gradient for every parameter,
    /// in [`ParamSet`] order. Chunks are reduced in batch order, so the
    /// result does not depend on `exec`.
    pub fn batch_gradient(
        &self,
        table: &EmbeddingTable,
        batch: &[&Example],
        exec: Execution,
    ) -> Result<(f64, Vec<Tensor>)> {
        if batch.is_empty() {
            return Err(Error::Empty("empty batch".into()));
        }
        let scale = 1.0 / batch.len() as f64;
        let parts = exec.map_chunks(batch, CHUNK, |chunk| -> Result<(f64, Vec<Tensor>)> {
            let mut tape = Tape::new();
            let p = self.params.bind(&mut tape);
            let logits = self.forward(&mut tape, &p, table, chunk)?;
            let labels: Vec<usize> = chunk.iter().map(|e| e.label).collect();
            let ce = tape.softmax_cross_entropy(logits, &labels);
            let loss = tape.scale(ce, chunk.len() as f64 * scale);
            let value = tape.value(loss).item();
            Ok((value, p.collect(tape.backward(loss)?)?))
        });
        let mut loss = 0.0;
        let mut total: Option<Vec<Tensor>> = None;
        for part in parts {
            let (l, g) = part?;
            loss += l;
            total = Some(match total {
                None => g,
                Some(acc) => add_grads(acc, &g),
            });
        }
        Ok((loss, total.expect("nonempty batch")))
    }

    /// Class distributions for many examples, in input order.
    pub fn predict_probs(&self, table: &EmbeddingTable, examples: &[Example], exec: Execution) -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&Example> = examples.iter().collect();
        let k = self.config.num_classes;
        let parts = exec.map_chunks(&refs, CHUNK, |chunk| -> Result<Vec<Vec<f64>>> {
            let mut tape = Tape::new();
            let p = self.params.bind_frozen(&mut tape);
            let logits = self.forward(&mut tape, &p, table, chunk)?;
            Ok(tape.value(logits).data().chunks_exact(k).map(softmax).collect())
        });
        let mut out = Vec::with_capacity(examples.len());
        for part in parts {
            out.extend(part?);
        }
        Ok(out)
    }

    pub fn forward_probs(&self, table: &EmbeddingTable, ids: &[WordId], topic_vec: &[f64]) -> Result<Vec<f64>> {
        let ex = Example {
            ids: ids.to_vec(),
            topic: topic_vec.to_vec(),
            label: 0,
        };
        Ok(self
            .predict_probs(table, std::slice::from_ref(&ex), Execution::Sequential)?
            .remove(0))
    }

    /// Mean cross-entropy over `examples`.
    pub fn loss(&self, table: &EmbeddingTable, examples: &[Example], exec: Execution) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Empty("no examples".into()));
        }
        let probs = self.predict_probs(table, examples, exec)?;
        let total: f64 = probs.iter().zip(examples).map(|(p, ex)| -p[ex.label].ln()).sum();
        Ok(total / examples.len() as f64)
    }

    pub fn accuracy(&self, table: &EmbeddingTable, examples: &[Example], exec: Execution) -> Result<f64> {
        if examples.is_empty() {
            return Err(Error::Empty("no examples".into()));
        }
        let probs = self.predict_probs(table, examples, exec)?;
        let hits = probs
            .iter()
            .zip(examples)
            .filter(|(p, ex)| argmax(p) == ex.label)
            .count();
        Ok(hits as f64 / examples.len() as f64)
    }

    pub fn predict(&self, table: &EmbeddingTable, tokens: &[String], topic: &str) -> Result<Prediction> {
        let ids = table.encode(tokens, self.config.pad_len);
        let probs = self.forward_probs(table, &ids, &topic_vector(topic, table))?;
        Ok(Prediction::new(probs, topic))
    }

    pub fn to_checkpoint(&self, ck: &mut Checkpoint) -> Result<()> {
        ck.put_config("classifier", &self.config)?;
        ck.put_params("classifier", &self.params);
        Ok(())
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: ClassifierConfig = ck.config("classifier")?;
        let mut model = ClassifierModel::new(config)?;
        ck.load_params("classifier", &mut model.params)?;
        Ok(model)
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub probs: Vec<f64>,
    pub topic: String,
}

impl Prediction {
    pub fn new(probs: Vec<f64>, topic: &str) -> Self {
        Prediction {
            label: argmax(&probs),
            probs,
            topic: topic.to_string(),
        }
    }
}

/// Row `a` is the class distribution of the tweet under topic `a`, for every
/// topic of the table in id order.
pub fn predict_all_topics(model: &ClassifierModel, table: &EmbeddingTable, ids: &[WordId]) -> Result<Tensor> {
    predict_all_topics_with(model, table, ids, Execution::default())
}

pub fn predict_all_topics_with(
    model: &ClassifierModel,
    table: &EmbeddingTable,
    ids: &[WordId],
    exec: Execution,
) -> Result<Tensor> {
    let examples: Vec<Example> = table
        .topics()
        .names()
        .iter()
        .map(|name| Example {
            ids: ids.to_vec(),
            topic: topic_vector(name, table),
            label: 0,
        })
        .collect();
    let probs = model.predict_probs(table, &examples, exec)?;
    let k = model.config.num_classes;
    Tensor::matrix(probs.len(), k, probs.concat())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean training loss of the initialized model; `None` when no epoch ran.
    pub initial_train_loss: Option<f64>,
    pub epochs: Vec<EpochStats>,
    /// Epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochStats> {
        self.best_epoch.map(|e| &self.epochs[e - 1])
    }
}

#[derive(Clone, Debug)]
pub struct ClassifierTraining {
    pub model: ClassifierModel,
    pub history: TrainHistory,
}

pub fn train_classifier(
    train: &[TweetRecord],
    validation: &[TweetRecord],
    table: &EmbeddingTable,
    config: &ClassifierConfig,
) -> Result<ClassifierTraining> {
    train_classifier_with(train, validation, table, config, Execution::default())
}

/// Minibatch Adam on categorical cross-entropy. Returns the parameters of
/// the epoch with the best validation accuracy (earliest on ties), or of the
/// last epoch when there is no validation data.
pub fn train_classifier_with(
    train: &[TweetRecord],
    validation: &[TweetRecord],
    table: &EmbeddingTable,
    config: &ClassifierConfig,
    exec: Execution,
) -> Result<ClassifierTraining> {
    if train.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    let mut model = ClassifierModel::new(config.clone())?;
    if table.embed_dim() != config.embed_dim {
        return Err(Error::Shape(format!(
            "table embeds to {}, config expects {}",
            table.embed_dim(),
            config.embed_dim
        )));
    }
    let train_ex = make_examples(train, table, config);
    let val_ex = make_examples(validation, table, config);
    let mut history = TrainHistory::default();
    if config.epochs == 0 {
        return Ok(ClassifierTraining { model, history });
    }
    history.initial_train_loss = Some(model.loss(table, &train_ex, exec)?);

    let mut adam = Adam::new(&model.params, AdamConfig::with_lr(config.lr));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<usize> = (0..train_ex.len()).collect();
    let mut best: Option<(f64, ParamSet)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (bi, batch_idx) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Example> = batch_idx.iter().map(|&i| &train_ex[i]).collect();
            let diverged = || Error::Diverged {
                epoch,
                batch: Some(bi + 1),
            };
            let (batch_loss, grads) = model
                .batch_gradient(table, &batch, exec)
                .map_err(|e| match e {
                    Error::NonFinite(_) => diverged(),
                    e => e,
                })?;
            if !batch_loss.is_finite() {
                return Err(diverged());
            }
            loss_sum += batch_loss * batch.len() as f64;
            adam.step(&mut model.params, &grads)
                .map_err(|_| diverged())?;
        }
        let train_loss = loss_sum / train_ex.len() as f64;
        let val_accuracy = if val_ex.is_empty() {
            None
        } else {
            Some(model.accuracy(table, &val_ex, exec)?)
        };
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_accuracy,
        });
        log::info!("epoch {epoch}: train loss {train_loss:.4}, validation accuracy {val_accuracy:?}");
        match val_accuracy {
            Some(acc) => {
                if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    best = Some((acc, model.params.clone()));
                    history.best_epoch = Some(epoch);
                }
            }
            None => history.best_epoch = Some(epoch),
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(ClassifierTraining { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::grad_check_many;
    use crate::vocab::{TopicIndex, Vocabulary, PAD};

    fn tiny_table(dim: usize) -> EmbeddingTable {
        let recs = vec![
            TweetRecord::new("1", "good apple day", "apple", 1),
            TweetRecord::new("2", "bad pear day", "pear", -1),
        ];
        let vocab = Vocabulary::build(&recs, 1).unwrap();
        let topics = TopicIndex::build(&recs).unwrap();
        let n = vocab.len();
        let mut emb: Vec<f64> = (0..n * dim).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        emb.extend(vec![0.0; dim]);
        let out = vec![0.0; (n + 1) * topics.len()];
        EmbeddingTable::new(
            vocab,
            topics.clone(),
            Tensor::matrix(n + 1, dim, emb).unwrap(),
            Tensor::matrix(n + 1, topics.len(), out).unwrap(),
        )
        .unwrap()
    }

    fn tiny_config(concat: ConcatMode) -> ClassifierConfig {
        ClassifierConfig {
            num_classes: 3,
            pad_len: 4,
            embed_dim: 5,
            sentence_hidden: 3,
            topic_proj: 3,
            stack_hidden: 3,
            batch_size: 4,
            epochs: 3,
            lr: 0.01,
            seed: 9,
            concat,
        }
    }

    #[test]
    fn label_mapping_depends_on_sign_only() {
        assert_eq!([-2, -1, 0, 1, 2].map(|s| label_of(s, 3)), [0, 0, 1, 2, 2]);
        assert_eq!([-2, -1, 0, 1, 2].map(|s| label_of(s, 5)), [0, 1, 2, 3, 4]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn topic_vector_rules() {
        let table = tiny_table(5);
        let apple = table.vocab().id("apple").unwrap();
        assert_eq!(topic_vector("Apple", &table), table.embedding(apple));
        let day = table.vocab().id("day").unwrap();
        let mean: Vec<f64> = table
            .embedding(apple)
            .iter()
            .zip(table.embedding(day))
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        assert_eq!(topic_vector("apple day zzz", &table), mean);
        assert_eq!(topic_vector("unknown words", &table), vec![0.0; 5]);
    }

    #[test]
    fn probabilities_sum_to_one_and_padding_is_constant() {
        let table = tiny_table(5);
        for concat in [ConcatMode::PerTimestep, ConcatMode::FinalState] {
            let model = ClassifierModel::new(tiny_config(concat)).unwrap();
            let p = model.forward_probs(&table, &[0, 2, 1, PAD], &[0.3, -0.1, 0.2, 0.0, 1.0]).unwrap();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let a = model.forward_probs(&table, &[PAD; 4], &[0.0; 5]).unwrap();
            let b = model.forward_probs(&table, &[PAD; 4], &[0.0; 5]).unwrap();
            assert_eq!(a, b);
            assert!(model.forward_probs(&table, &[0, 1], &[0.0; 5]).is_err());
        }
    }

    #[test]
    fn full_network_gradient_check() {
        let table = tiny_table(5);
        for concat in [ConcatMode::PerTimestep, ConcatMode::FinalState] {
            let model = ClassifierModel::new(tiny_config(concat)).unwrap();
            let examples = [
                Example {
                    ids: vec![0, 1, 2, PAD],
                    topic: topic_vector("apple", &table),
                    label: 2,
                },
                Example {
                    ids: vec![3, 4, PAD, PAD],
                    topic: topic_vector("pear", &table),
                    label: 0,
                },
            ];
            let refs: Vec<&Example> = examples.iter().collect();
            let err = grad_check_many(
                |tape, vars| {
                    let p = Bound::from_vars(vars.to_vec());
                    let logits = model.forward(tape, &p, &table, &refs).unwrap();
                    tape.softmax_cross_entropy(logits, &[2, 0])
                },
                model.params().tensors(),
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-4, "{concat:?}: {err}");
        }
    }

    fn toy_records() -> Vec<TweetRecord> {
        let mut recs = Vec::new();
        for i in 0..12 {
            let (text, topic, score) = match i % 3 {
                0 => ("good apple day", "apple", 2),
                1 => ("bad pear day", "pear", -1),
                _ => ("apple pear", "pear", 0),
            };
            recs.push(TweetRecord::new(i.to_string(), text, topic, score));
        }
        recs
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let table = tiny_table(5);
        let cfg = ClassifierConfig {
            epochs: 0,
            ..tiny_config(ConcatMode::PerTimestep)
        };
        let run = train_classifier(&toy_records(), &[], &table, &cfg).unwrap();
        assert_eq!(run.history, TrainHistory::default());
        assert_eq!(run.model.params(), ClassifierModel::new(cfg).unwrap().params());
    }

    #[test]
    fn training_is_deterministic_and_strategy_independent() {
        let table = tiny_table(5);
        let recs = toy_records();
        let cfg = ClassifierConfig {
            batch_size: 12,
            ..tiny_config(ConcatMode::PerTimestep)
        };
        let a = train_classifier_with(&recs, &recs[..3], &table, &cfg, Execution::Sequential).unwrap();
        let b = train_classifier_with(&recs, &recs[..3], &table, &cfg, Execution::Parallel).unwrap();
        let c = train_classifier_with(&recs, &recs[..3], &table, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(b.history, c.history);
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.history.epochs.len(), 3);
    }

    #[test]
    fn learns_a_trivial_task_and_round_trips() {
        let table = tiny_table(5);
        let recs = toy_records();
        let cfg = ClassifierConfig {
            epochs: 60,
            ..tiny_config(ConcatMode::PerTimestep)
        };
        let run = train_classifier(&recs, &recs, &table, &cfg).unwrap();
        let best = run.history.best().unwrap();
        assert!(best.train_loss < run.history.initial_train_loss.unwrap());
        let ex = make_examples(&recs, &table, &cfg);
        assert_eq!(run.model.accuracy(&table, &ex, Execution::Sequential).unwrap(), 1.0);

        let mut ck = Checkpoint::new();
        run.model.to_checkpoint(&mut ck).unwrap();
        let back = ClassifierModel::from_checkpoint(&Checkpoint::from_json(&ck.to_json().unwrap()).unwrap()).unwrap();
        let tokens = clean_tweet("good apple day");
        assert_eq!(
            back.predict(&table, &tokens, "apple").unwrap(),
            run.model.predict(&table, &tokens, "apple").unwrap()
        );

        let ids = table.encode(&tokens, 4);
        let all = predict_all_topics(&run.model, &table, &ids).unwrap();
        assert_eq!(all.shape(), &[2, 3]);
        for (a, name) in table.topics().names().iter().enumerate() {
            let direct = run.model.forward_probs(&table, &ids, &topic_vector(name, &table)).unwrap();
            assert_eq!(all.row(a), &direct[..]);
            assert!((all.row(a).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
