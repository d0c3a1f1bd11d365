//! Phase-1 word-topic model.
//!
//! Every vocabulary word is fed to the network as a one-hot vector and
//! regressed onto its row of the [`LabelMatrix`] with mean squared error.
//! The 100-wide penultimate layer is the word embedding used by the
//! classifier; the final `t`-wide layer is the word's sentiment score per
//! topic.
//!
//! Two architectures share that contract. `Conv` runs two padded 1-D
//! convolutions (width 5, 8 then 16 filters, ReLU) along the one-hot axis,
//! then `dense(100)` and a linear `dense(t)`. `Dense` is
//! `n -> 512 -> 256 -> 128 -> 100 -> t` with ReLU on the first three.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::{
    Adam, AdamConfig, Bound, Conv1d, Conv1dGeometry, Dense, ParamSet, Tape, Tensor, Var,
};
use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::vocab::{LabelMatrix, TopicIndex, Vocabulary, WordId, PAD, PAD_TOKEN};

pub const EMBED_DIM: usize = 100;
const CONV_WIDTH: usize = 5;
const CONV_FILTERS: [usize; 2] = [8, 16];
const DENSE_HIDDEN: [usize; 3] = [512, 256, 128];
/// Rows per data-parallel work unit.
const CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    #[default]
    Conv,
    Dense,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Word2TopicConfig {
    pub arch: Arch,
    pub embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Word2TopicConfig {
    fn default() -> Self {
        Word2TopicConfig {
            arch: Arch::Conv,
            embed_dim: EMBED_DIM,
            epochs: 300,
            lr: 1e-3,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
enum Net {
    Conv {
        conv1: Conv1d,
        conv2: Conv1d,
        embed: Dense,
        out: Dense,
    },
    Dense {
        hidden: Vec<Dense>,
        embed: Dense,
        out: Dense,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ModelRecord {
    arch: Arch,
    words: usize,
    topics: usize,
    embed_dim: usize,
}

#[derive(Clone, Debug)]
pub struct Word2TopicModel {
    arch: Arch,
    words: usize,
    topics: usize,
    embed_dim: usize,
    params: ParamSet,
    net: Net,
}

impl Word2TopicModel {
    pub fn new(arch: Arch, words: usize, topics: usize, embed_dim: usize, seed: u64) -> Result<Self> {
        if words == 0 || topics == 0 || embed_dim == 0 {
            return Err(Error::InvalidArgument(
                "word2topic needs at least one word, topic and embedding unit".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let net = match arch {
            Arch::Conv => {
                let pad = CONV_WIDTH / 2;
                let conv1 = Conv1d::new(
                    &mut params,
                    "conv1",
                    Conv1dGeometry {
                        channels: 1,
                        length: words,
                        width: CONV_WIDTH,
                        padding: pad,
                    },
                    CONV_FILTERS[0],
                    &mut rng,
                );
                let conv2 = Conv1d::new(
                    &mut params,
                    "conv2",
                    Conv1dGeometry {
                        channels: CONV_FILTERS[0],
                        length: words,
                        width: CONV_WIDTH,
                        padding: pad,
                    },
                    CONV_FILTERS[1],
                    &mut rng,
                );
                let embed = Dense::new(&mut params, "embed", conv2.output_width(), embed_dim, &mut rng);
                let out = Dense::new(&mut params, "out", embed_dim, topics, &mut rng);
                Net::Conv {
                    conv1,
                    conv2,
                    embed,
                    out,
                }
            }
            Arch::Dense => {
                let mut hidden = Vec::new();
                let mut width = words;
                for (i, &h) in DENSE_HIDDEN.iter().enumerate() {
                    hidden.push(Dense::new(&mut params, &format!("hidden{i}"), width, h, &mut rng));
                    width = h;
                }
                let embed = Dense::new(&mut params, "embed", width, embed_dim, &mut rng);
                let out = Dense::new(&mut params, "out", embed_dim, topics, &mut rng);
                Net::Dense { hidden, embed, out }
            }
        };
        Ok(Word2TopicModel {
            arch,
            words,
            topics,
            embed_dim,
            params,
            net,
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn num_words(&self) -> usize {
        self.words
    }

    pub fn num_topics(&self) -> usize {
        self.topics
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn one_hot(&self, ids: &[WordId]) -> Result<Tensor> {
        let mut data = vec![0.0; ids.len() * self.words];
        for (r, &w) in ids.iter().enumerate() {
            if w >= self.words {
                return Err(Error::InvalidArgument(format!(
                    "word id {w} outside vocabulary of {}",
                    self.words
                )));
            }
            data[r * self.words + w] = 1.0;
        }
        Tensor::matrix(ids.len(), self.words, data)
    }

    /// Builds the graph for a batch of words. Returns `(embedding, output)`,
    /// shaped `[B, embed_dim]` and `[B, topics]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, ids: &[WordId]) -> Result<(Var, Var)> {
        let x = tape.constant(self.one_hot(ids)?);
        let (embed, out, h) = match &self.net {
            Net::Conv {
                conv1,
                conv2,
                embed,
                out,
            } => {
                let h = conv1.forward(tape, p, x)?;
                let h = tape.relu(h);
                let h = conv2.forward(tape, p, h)?;
                (embed, out, tape.relu(h))
            }
            Net::Dense { hidden, embed, out } => {
                let mut h = x;
                for layer in hidden {
                    h = layer.forward(tape, p, h);
                    h = tape.relu(h);
                }
                (embed, out, h)
            }
        };
        let e = embed.forward(tape, p, h);
        let y = out.forward(tape, p, e);
        Ok((e, y))
    }

    /// Inference-only pass for one word.
    pub fn forward_word(&self, word: WordId) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut tape = Tape::new();
        let p = self.params.bind_frozen(&mut tape);
        let (e, y) = self.forward(&mut tape, &p, &[word])?;
        Ok((tape.value(e).data().to_vec(), tape.value(y).data().to_vec()))
    }

    fn forward_rows(&self, ids: &[WordId], exec: Execution) -> Result<(Vec<f64>, Vec<f64>)> {
        let parts = exec.map_chunks(ids, CHUNK, |chunk| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut tape = Tape::new();
            let p = self.params.bind_frozen(&mut tape);
            let (e, y) = self.forward(&mut tape, &p, chunk)?;
            Ok((tape.value(e).data().to_vec(), tape.value(y).data().to_vec()))
        });
        let mut emb = Vec::with_capacity(ids.len() * self.embed_dim);
        let mut out = Vec::with_capacity(ids.len() * self.topics);
        for part in parts {
            let (e, y) = part?;
            emb.extend(e);
            out.extend(y);
        }
        Ok((emb, out))
    }

    /// Mean squared error against every row of `labels`, in word-id order.
    pub fn mse(&self, labels: &LabelMatrix, exec: Execution) -> Result<f64> {
        self.check_labels(labels)?;
        let ids: Vec<WordId> = (0..self.words).collect();
        let (_, out) = self.forward_rows(&ids, exec)?;
        let total: f64 = out
            .iter()
            .zip(&labels.values)
            .map(|(p, t)| (p - t) * (p - t))
            .sum();
        Ok(total / out.len() as f64)
    }

    fn check_labels(&self, labels: &LabelMatrix) -> Result<()> {
        if labels.words != self.words || labels.topics != self.topics {
            return Err(Error::Shape(format!(
                "model is {}x{}, labels are {}x{}",
                self.words, self.topics, labels.words, labels.topics
            )));
        }
        Ok(())
    }

    /// Per-word squared error (averaged over topics) for `words`, and the
    /// gradient of their mean for every parameter in [`ParamSet`] order.
    /// Chunks are reduced in order, so the result does not depend on `exec`.
    pub fn batch_gradient(
        &self,
        labels: &LabelMatrix,
        words: &[WordId],
        exec: Execution,
    ) -> Result<(Vec<f64>, Vec<Tensor>)> {
        if words.is_empty() {
            return Err(Error::Empty("empty batch".into()));
        }
        let t = labels.topics;
        let scale = 1.0 / words.len() as f64;
        let parts = exec.map_chunks(words, CHUNK, |chunk| -> Result<_> {
            let mut target = Vec::with_capacity(chunk.len() * t);
            for &w in chunk {
                target.extend_from_slice(labels.row(w));
            }
            let target = Tensor::matrix(chunk.len(), t, target)?;
            let mut tape = Tape::new();
            let p = self.params.bind(&mut tape);
            let (_, y) = self.forward(&mut tape, &p, chunk)?;
            let per_row: Vec<f64> = tape
                .value(y)
                .data()
                .chunks_exact(t)
                .zip(target.data().chunks_exact(t))
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / t as f64)
                .collect();
            let mse = tape.mse(y, target);
            let loss = tape.scale(mse, chunk.len() as f64 * scale);
            Ok((per_row, p.collect(tape.backward(loss)?)?))
        });
        let mut rows = Vec::with_capacity(words.len());
        let mut total: Option<Vec<Tensor>> = None;
        for part in parts {
            let (per_row, grads) = part?;
            rows.extend(per_row);
            total = Some(match total {
                None => grads,
                Some(acc) => add_grads(acc, &grads),
            });
        }
        Ok((rows, total.expect("nonempty batch")))
    }

    pub fn to_checkpoint(&self, ck: &mut Checkpoint) -> Result<()> {
        ck.put_config(
            "word2topic_model",
            &ModelRecord {
                arch: self.arch,
                words: self.words,
                topics: self.topics,
                embed_dim: self.embed_dim,
            },
        )?;
        ck.put_params("word2topic", &self.params);
        Ok(())
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let rec: ModelRecord = ck.config("word2topic_model")?;
        let mut model = Word2TopicModel::new(rec.arch, rec.words, rec.topics, rec.embed_dim, 0)?;
        ck.load_params("word2topic", &mut model.params)?;
        Ok(model)
    }
}

/// A trained model plus the mean training loss of every epoch.
#[derive(Clone, Debug)]
pub struct Word2TopicTraining {
    pub model: Word2TopicModel,
    pub losses: Vec<f64>,
}

pub fn train_word2topic(labels: &LabelMatrix, config: &Word2TopicConfig) -> Result<Word2TopicTraining> {
    train_word2topic_with(labels, config, Execution::default())
}

/// Minibatch Adam on the per-word MSE. Each epoch visits every word once in
/// a seeded order; the recorded epoch loss is the mean of the per-word
/// losses seen during that epoch, summed in word-id order.
pub fn train_word2topic_with(
    labels: &LabelMatrix,
    config: &Word2TopicConfig,
    exec: Execution,
) -> Result<Word2TopicTraining> {
    if labels.words == 0 || labels.topics == 0 {
        return Err(Error::Empty("label matrix is empty".into()));
    }
    if config.batch_size == 0 || !(config.lr >= 0.0) {
        return Err(Error::InvalidArgument("batch_size must be positive and lr non-negative".into()));
    }
    let mut model = Word2TopicModel::new(config.arch, labels.words, labels.topics, config.embed_dim, config.seed)?;
    let mut adam = Adam::new(&model.params, AdamConfig::with_lr(config.lr));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut order: Vec<WordId> = (0..labels.words).collect();
    let mut losses = Vec::with_capacity(config.epochs);
    let mut row_loss = vec![0.0; labels.words];

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let (per_row, grads) = model.batch_gradient(labels, batch, exec).map_err(|e| match e {
                Error::NonFinite(_) => Error::Diverged { epoch, batch: None },
                e => e,
            })?;
            for (&w, l) in batch.iter().zip(per_row) {
                row_loss[w] = l;
            }
            adam.step(&mut model.params, &grads).map_err(|_| Error::Diverged {
                epoch,
                batch: None,
            })?;
        }
        let loss = row_loss.iter().sum::<f64>() / labels.words as f64;
        if !loss.is_finite() || !model.params.is_finite() {
            return Err(Error::Diverged { epoch, batch: None });
        }
        log::debug!("word2topic epoch {epoch}: loss {loss:.6}");
        losses.push(loss);
    }
    Ok(Word2TopicTraining { model, losses })
}

/// Elementwise sum of two gradient lists, accumulating into `acc`.
pub(crate) fn add_grads(mut acc: Vec<Tensor>, other: &[Tensor]) -> Vec<Tensor> {
    for (a, b) in acc.iter_mut().zip(other) {
        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
            *x += y;
        }
    }
    acc
}

/// Per-word embeddings and topic scores materialized from a trained model,
/// with an all-zero row standing in for [`PAD`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    vocab: Vocabulary,
    topics: TopicIndex,
    /// `[n + 1, d]`, last row zero.
    embeddings: Tensor,
    /// `[n + 1, t]`, last row zero.
    outputs: Tensor,
    support: Option<Vec<u32>>,
}

pub fn export_table(model: &Word2TopicModel, vocab: &Vocabulary, topics: &TopicIndex) -> Result<EmbeddingTable> {
    export_table_with(model, vocab, topics, Execution::default())
}

pub fn export_table_with(
    model: &Word2TopicModel,
    vocab: &Vocabulary,
    topics: &TopicIndex,
    exec: Execution,
) -> Result<EmbeddingTable> {
    if model.words != vocab.len() {
        return Err(Error::Shape(format!(
            "model was trained on {} words, vocabulary has {}",
            model.words,
            vocab.len()
        )));
    }
    if model.topics != topics.len() {
        return Err(Error::Shape(format!(
            "model was trained on {} topics, index has {}",
            model.topics,
            topics.len()
        )));
    }
    let ids: Vec<WordId> = (0..model.words).collect();
    let (mut emb, mut out) = model.forward_rows(&ids, exec)?;
    emb.extend(std::iter::repeat_n(0.0, model.embed_dim));
    out.extend(std::iter::repeat_n(0.0, model.topics));
    EmbeddingTable::new(
        vocab.clone(),
        topics.clone(),
        Tensor::matrix(model.words + 1, model.embed_dim, emb)?,
        Tensor::matrix(model.words + 1, model.topics, out)?,
    )
}

impl EmbeddingTable {
    /// `embeddings` and `outputs` must carry one row per word plus the zero
    /// padding row.
    pub fn new(vocab: Vocabulary, topics: TopicIndex, embeddings: Tensor, outputs: Tensor) -> Result<Self> {
        let rows = vocab.len() + 1;
        if embeddings.rows() != rows || outputs.rows() != rows || outputs.cols() != topics.len() {
            return Err(Error::Shape(format!(
                "table needs {rows} rows and {} output columns, got {:?} and {:?}",
                topics.len(),
                embeddings.shape(),
                outputs.shape()
            )));
        }
        if embeddings.row(rows - 1).iter().chain(outputs.row(rows - 1)).any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument("padding row must be zero".into()));
        }
        Ok(EmbeddingTable {
            vocab,
            topics,
            embeddings,
            outputs,
            support: None,
        })
    }

    /// Attaches label-matrix support counts, used to tell observed
    /// (word, topic) cells from extrapolated ones.
    pub fn with_support(mut self, labels: &LabelMatrix) -> Result<Self> {
        if labels.words != self.vocab.len() || labels.topics != self.topics.len() {
            return Err(Error::Shape("label matrix does not match the table".into()));
        }
        self.support = Some(labels.support.clone());
        Ok(self)
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn topics(&self) -> &TopicIndex {
        &self.topics
    }

    pub fn num_words(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.cols()
    }

    fn row_of(&self, id: WordId) -> usize {
        if id == PAD {
            self.vocab.len()
        } else {
            assert!(id < self.vocab.len(), "word id {id} out of range");
            id
        }
    }

    pub fn embedding(&self, id: WordId) -> &[f64] {
        self.embeddings.row(self.row_of(id))
    }

    pub fn outputs(&self, id: WordId) -> &[f64] {
        self.outputs.row(self.row_of(id))
    }

    pub fn embeddings_tensor(&self) -> &Tensor {
        &self.embeddings
    }

    pub fn outputs_tensor(&self) -> &Tensor {
        &self.outputs
    }

    pub fn score(&self, id: WordId, topic: usize) -> f64 {
        self.outputs(id)[topic]
    }

    /// `None` when no support counts are attached.
    pub fn support(&self, id: WordId, topic: usize) -> Option<u32> {
        let t = self.topics.len();
        self.support.as_ref().map(|s| s[id * t + topic])
    }

    pub fn has_support(&self) -> bool {
        self.support.is_some()
    }

    /// Resolves a word string, accepting [`PAD_TOKEN`].
    pub fn word_id(&self, word: &str) -> Result<WordId> {
        if word == PAD_TOKEN {
            return Ok(PAD);
        }
        self.vocab.id(word).ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    pub fn topic_id(&self, topic: &str) -> Result<usize> {
        self.topics.id(topic).ok_or_else(|| Error::UnknownTopic(topic.to_string()))
    }

    pub fn word_topic_score(&self, word: &str, topic: &str) -> Result<f64> {
        let w = self.word_id(word)?;
        let a = self.topic_id(topic)?;
        Ok(self.score(w, a))
    }

    pub fn encode(&self, tokens: &[String], pad_len: usize) -> Vec<WordId> {
        self.vocab.encode(tokens, pad_len)
    }

    /// `word<TAB>v1..vd`, one line per vocabulary word.
    pub fn embeddings_tsv(&self) -> String {
        self.matrix_tsv(&self.embeddings)
    }

    /// `word<TAB>s1..st`, one line per vocabulary word.
    pub fn outputs_tsv(&self) -> String {
        self.matrix_tsv(&self.outputs)
    }

    fn matrix_tsv(&self, m: &Tensor) -> String {
        let mut out = String::new();
        for (i, word) in self.vocab.words().iter().enumerate() {
            out.push_str(word);
            for v in m.row(i) {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn to_checkpoint(&self, ck: &mut Checkpoint) {
        ck.set_vocab(&self.vocab);
        ck.set_topics(&self.topics);
        ck.put_tensor("table/embeddings", &self.embeddings);
        ck.put_tensor("table/outputs", &self.outputs);
        if let Some(s) = &self.support {
            let t = Tensor::matrix(
                self.vocab.len(),
                self.topics.len(),
                s.iter().map(|&c| f64::from(c)).collect(),
            )
            .expect("support shape");
            ck.put_tensor("table/support", &t);
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let mut table = EmbeddingTable::new(
            ck.vocabulary()?,
            ck.topic_index()?,
            ck.tensor("table/embeddings")?,
            ck.tensor("table/outputs")?,
        )?;
        if ck.has_tensor("table/support") {
            let s = ck.tensor("table/support")?;
            if s.len() != table.vocab.len() * table.topics.len() {
                return Err(Error::Checkpoint("support tensor has the wrong size".into()));
            }
            table.support = Some(s.data().iter().map(|&v| v as u32).collect());
        }
        Ok(table)
    }
}

pub fn word_topic_score(table: &EmbeddingTable, word: &str, topic: &str) -> Result<f64> {
    table.word_topic_score(word, topic)
}

/// Word vectors aligned to a [`Vocabulary`], with a zero [`PAD`] row. Used
/// wherever only embeddings are needed, including tables loaded from outside.
#[derive(Clone, Debug, PartialEq)]
pub struct WordVectors {
    /// `[n + 1, d]`, last row zero.
    rows: Tensor,
}

impl WordVectors {
    pub fn from_table(table: &EmbeddingTable) -> Self {
        WordVectors {
            rows: table.embeddings.clone(),
        }
    }

    /// Uniform in `[-1, 1]`, seeded.
    pub fn random(words: usize, dim: usize, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data: Vec<f64> = (0..words * dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        data.extend(std::iter::repeat_n(0.0, dim));
        WordVectors {
            rows: Tensor::matrix(words + 1, dim, data).expect("shape"),
        }
    }

    /// Parses `word<TAB>floats` lines and aligns them to `vocab`; words the
    /// file does not cover get zero rows.
    pub fn from_tsv(text: &str, vocab: &Vocabulary) -> Result<Self> {
        let mut found: HashMap<&str, Vec<f64>> = HashMap::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| Error::MalformedRow { line: i + 1, reason };
            let mut fields = line.split('\t');
            let word = fields.next().unwrap_or_default();
            let values = fields
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(e.to_string()))?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(bad(format!("expected {d} values, found {}", values.len())))
                }
                _ => {}
            }
            found.insert(word, values);
        }
        let dim = dim.filter(|&d| d > 0).ok_or_else(|| Error::Empty("embedding file has no vectors".into()))?;
        let mut data = Vec::with_capacity((vocab.len() + 1) * dim);
        for w in vocab.words() {
            match found.get(w.as_str()) {
                Some(v) => data.extend_from_slice(v),
                None => data.extend(std::iter::repeat_n(0.0, dim)),
            }
        }
        data.extend(std::iter::repeat_n(0.0, dim));
        Ok(WordVectors {
            rows: Tensor::matrix(vocab.len() + 1, dim, data)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn num_words(&self) -> usize {
        self.rows.rows() - 1
    }

    pub fn row(&self, id: WordId) -> &[f64] {
        let r = if id == PAD { self.rows.rows() - 1 } else { id };
        self.rows.row(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TweetRecord;
    use crate::vocab::{build_label_matrix, RepeatCounting};

    fn toy_labels(n: usize, t: usize) -> LabelMatrix {
        let mut values = Vec::new();
        for w in 0..n {
            for a in 0..t {
                let sign = if (w < n / 2) == (a % 2 == 0) { 1.0 } else { -1.0 };
                values.push(sign);
            }
        }
        LabelMatrix {
            words: n,
            topics: t,
            values,
            support: vec![1; n * t],
        }
    }

    fn small_config(arch: Arch, epochs: usize) -> Word2TopicConfig {
        Word2TopicConfig {
            arch,
            embed_dim: 100,
            epochs,
            lr: 1e-3,
            batch_size: 4,
            seed: 5,
        }
    }

    #[test]
    fn zero_lr_keeps_params_and_loss() {
        let labels = toy_labels(8, 2);
        let init = Word2TopicModel::new(Arch::Conv, 8, 2, 100, 5).unwrap();
        let cfg = Word2TopicConfig {
            lr: 0.0,
            ..small_config(Arch::Conv, 4)
        };
        let run = train_word2topic(&labels, &cfg).unwrap();
        assert_eq!(run.model.params(), init.params());
        assert!(run.losses.windows(2).all(|w| w[0] == w[1]), "{:?}", run.losses);
    }

    #[test]
    fn same_seed_same_losses() {
        let labels = toy_labels(8, 2);
        for arch in [Arch::Conv, Arch::Dense] {
            let cfg = small_config(arch, 5);
            let a = train_word2topic(&labels, &cfg).unwrap();
            let b = train_word2topic(&labels, &cfg).unwrap();
            assert_eq!(a.losses, b.losses);
            assert_eq!(a.model.params(), b.model.params());
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let labels = toy_labels(40, 3);
        let cfg = Word2TopicConfig {
            batch_size: 40,
            ..small_config(Arch::Conv, 2)
        };
        let a = train_word2topic_with(&labels, &cfg, Execution::Sequential).unwrap();
        let b = train_word2topic_with(&labels, &cfg, Execution::Parallel).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.model.params(), b.model.params());
    }

    #[test]
    fn penultimate_width_is_embed_dim() {
        for arch in [Arch::Conv, Arch::Dense] {
            let m = Word2TopicModel::new(arch, 7, 3, 100, 1).unwrap();
            let (e, y) = m.forward_word(2).unwrap();
            assert_eq!((e.len(), y.len()), (100, 3));
        }
    }

    #[test]
    fn table_rows_match_fresh_forward_passes() {
        let recs = vec![
            TweetRecord::new("1", "good fun day", "a", 2),
            TweetRecord::new("2", "bad day", "b", -1),
            TweetRecord::new("3", "fun times", "a", 1),
        ];
        let vocab = Vocabulary::build(&recs, 1).unwrap();
        let topics = TopicIndex::build(&recs).unwrap();
        let labels = build_label_matrix(&recs, &vocab, &topics, RepeatCounting::PerTweet).unwrap();
        let model = train_word2topic(&labels, &small_config(Arch::Conv, 3)).unwrap().model;
        let table = export_table(&model, &vocab, &topics).unwrap().with_support(&labels).unwrap();
        for w in 0..vocab.len() {
            let (e, y) = model.forward_word(w).unwrap();
            assert_eq!(table.embedding(w), &e[..]);
            assert_eq!(table.outputs(w), &y[..]);
        }
        assert!(table.embedding(PAD).iter().all(|&v| v == 0.0));
        assert!(table.outputs(PAD).iter().all(|&v| v == 0.0));
        assert_eq!(table.word_topic_score(PAD_TOKEN, "a").unwrap(), 0.0);
        assert!(matches!(table.word_topic_score("nope", "a"), Err(Error::UnknownWord(_))));
        assert!(matches!(table.word_topic_score("fun", "zzz"), Err(Error::UnknownTopic(_))));
        let fun = vocab.id("fun").unwrap();
        assert_eq!(table.word_topic_score("fun", "b").unwrap(), table.outputs(fun)[1]);
        assert_eq!(table.support(fun, 0), Some(2));

        let mut ck = Checkpoint::new();
        table.to_checkpoint(&mut ck);
        model.to_checkpoint(&mut ck).unwrap();
        let ck = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(EmbeddingTable::from_checkpoint(&ck).unwrap(), table);
        assert_eq!(Word2TopicModel::from_checkpoint(&ck).unwrap().params(), model.params());
    }

    #[test]
    fn export_rejects_size_mismatch() {
        let recs = vec![TweetRecord::new("1", "a b", "t", 0)];
        let vocab = Vocabulary::build(&recs, 1).unwrap();
        let topics = TopicIndex::build(&recs).unwrap();
        let model = Word2TopicModel::new(Arch::Dense, 3, 1, 100, 0).unwrap();
        assert!(matches!(export_table(&model, &vocab, &topics), Err(Error::Shape(_))));
    }

    #[test]
    fn word_vectors_from_tsv_align_to_vocab() {
        let recs = vec![TweetRecord::new("1", "a b c", "t", 0)];
        let vocab = Vocabulary::build(&recs, 1).unwrap();
        let wv = WordVectors::from_tsv("b\t1.5\t2\nzzz\t9\t9\n", &vocab).unwrap();
        assert_eq!(wv.dim(), 2);
        assert_eq!(wv.row(vocab.id("b").unwrap()), &[1.5, 2.0]);
        assert_eq!(wv.row(vocab.id("a").unwrap()), &[0.0, 0.0]);
        assert_eq!(wv.row(PAD), &[0.0, 0.0]);
        assert!(WordVectors::from_tsv("a\t1\nb\t1\t2\n", &vocab).is_err());
    }
}
