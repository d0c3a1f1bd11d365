//! Randomized finite-difference checks over every differentiable building
//! block and both full networks. Each case draws fresh inputs and parameters
//! from the seed and reports the worst relative error over all coordinates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{
    grad_check_many, uniform, BiLstm, Bound, Conv1dGeometry, Dense, LstmCell, ParamSet, Tape, Tensor, Var,
};
use crate::classifier::{ClassifierConfig, ClassifierModel, ConcatMode, Example};
use crate::corpus::TweetRecord;
use crate::vocab::{TopicIndex, Vocabulary, PAD};
use crate::word2topic::{Arch, EmbeddingTable, Word2TopicModel};
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct CaseResult {
    pub name: &'static str,
    pub max_rel_err: f64,
    /// Scalars perturbed.
    pub coords: usize,
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, limit: f64) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::matrix(rows, cols, data).expect("sizes agree")
}

fn randomize(params: &mut ParamSet, rng: &mut ChaCha8Rng, limit: f64) {
    for t in params.tensors_mut() {
        let shape = t.shape().to_vec();
        *t = uniform(rng, &shape, limit);
    }
}

/// Inputs followed by parameters, as one flat list of leaves.
fn leaves(inputs: Vec<Tensor>, params: &ParamSet) -> Vec<Tensor> {
    let mut all = inputs;
    all.extend(params.tensors().iter().cloned());
    all
}

/// Weighted sum with fixed random weights, so every output coordinate
/// reaches the loss with a different coefficient.
fn project(tape: &mut Tape, v: Var, weights: &Tensor) -> Var {
    let w = tape.constant(weights.clone());
    let m = tape.mul(v, w);
    tape.sum(m)
}

fn case(name: &'static str, inputs: &[Tensor], eps: f64, f: impl Fn(&mut Tape, &[Var]) -> Var) -> Result<CaseResult> {
    let max_rel_err = grad_check_many(f, inputs, eps)?;
    Ok(CaseResult {
        name,
        max_rel_err,
        coords: inputs.iter().map(Tensor::len).sum(),
    })
}

fn dense_case(rng: &mut ChaCha8Rng, eps: f64) -> Result<CaseResult> {
    let mut params = ParamSet::new();
    let layer = Dense::new(&mut params, "d", 4, 5, rng);
    randomize(&mut params, rng, 0.8);
    let x = rand_matrix(rng, 3, 4, 1.0);
    let w = rand_matrix(rng, 3, 5, 1.0);
    case("dense", &leaves(vec![x], &params), eps, |tape, v| {
        let p = Bound::from_vars(v[1..].to_vec());
        let y = layer.forward(tape, &p, v[0]);
        let y = tape.tanh(y);
        project(tape, y, &w)
    })
}

fn conv_case(rng: &mut ChaCha8Rng, eps: f64) -> Result<CaseResult> {
    let geom = Conv1dGeometry {
        channels: 2,
        length: 7,
        width: 3,
        padding: 1,
    };
    let filters = 3;
    let x = rand_matrix(rng, 2, geom.channels * geom.length, 1.0);
    let kernel = rand_matrix(rng, filters, geom.channels * geom.width, 0.8);
    let bias = Tensor::vector((0..filters).map(|_| rng.random_range(-0.5..0.5)).collect());
    let w = rand_matrix(rng, 2, filters * geom.out_len(), 1.0);
    case("conv1d", &[x, kernel, bias], eps, |tape, v| {
        let y = tape.conv1d(v[0], v[1], Some(v[2]), geom).expect("valid geometry");
        let y = tape.tanh(y);
        project(tape, y, &w)
    })
}

fn lstm_step_case(rng: &mut ChaCha8Rng, eps: f64) -> Result<CaseResult> {
    let mut params = ParamSet::new();
    let cell = LstmCell::new(&mut params, "cell", 3, 4, rng);
    randomize(&mut params, rng, 0.8);
    let x = rand_matrix(rng, 2, 3, 1.0);
    let h = rand_matrix(rng, 2, 4, 0.9);
    let c = rand_matrix(rng, 2, 4, 1.0);
    let wh = rand_matrix(rng, 2, 4, 1.0);
    let wc = rand_matrix(rng, 2, 4, 1.0);
    case("lstm_step", &leaves(vec![x, h, c], &params), eps, |tape, v| {
        let p = Bound::from_vars(v[3..].to_vec());
        let (h2, c2) = cell.step(tape, &p, v[0], v[1], v[2]);
        let a = project(tape, h2, &wh);
        let b = project(tape, c2, &wc);
        tape.add(a, b)
    })
}

fn bilstm_case(rng: &mut ChaCha8Rng, eps: f64) -> Result<CaseResult> {
    let steps = 4;
    let mut params = ParamSet::new();
    let bi = BiLstm::new(&mut params, "bi", 3, 2, rng);
    randomize(&mut params, rng, 0.8);
    let xs: Vec<Tensor> = (0..steps).map(|_| rand_matrix(rng, 2, 3, 1.0)).collect();
    let ws: Vec<Tensor> = (0..steps).map(|_| rand_matrix(rng, 2, 4, 1.0)).collect();
    let wf = rand_matrix(rng, 2, 2, 1.0);
    let wb = rand_matrix(rng, 2, 2, 1.0);
    case("bilstm_sequence", &leaves(xs, &params), eps, |tape, v| {
        let p = Bound::from_vars(v[steps..].to_vec());
        let out = bi.run(tape, &p, &v[..steps]);
        let mut total = project(tape, out.last_forward, &wf);
        let b = project(tape, out.last_backward, &wb);
        total = tape.add(total, b);
        for (s, w) in out.sequence.iter().zip(&ws) {
            let term = project(tape, *s, w);
            total = tape.add(total, term);
        }
        total
    })
}

fn softmax_ce_case(rng: &mut ChaCha8Rng, eps: f64) -> Result<CaseResult> {
    let logits = rand_matrix(rng, 4, 5, 3.0);
    let targets: Vec<usize> = (0..4).map(|_| rng.random_range(0..5)).collect();
    let w = rand_matrix(rng, 4, 5, 1.0);
    case("softmax_cross_entropy", &[logits], eps, |tape, v| {
        let ce = tape.softmax_cross_entropy(v[0], &targets);
        let probs = tape.softmax(v[0]);
        let extra = project(tape, probs, &w);
        tape.add(ce, extra)
    })
}

fn phase1_case(rng: &mut ChaCha8Rng, eps: f64) -> Result<CaseResult> {
    let (n, t) = (6, 3);
    let mut model = Word2TopicModel::new(Arch::Conv, n, t, 100, rng.random())?;
    randomize(model.params_mut(), rng, 0.3);
    let target = rand_matrix(rng, n, t, 1.0);
    let ids: Vec<usize> = (0..n).collect();
    case("phase1_net", model.params().tensors(), eps, |tape, v| {
        let p = Bound::from_vars(v.to_vec());
        let (_, y) = model.forward(tape, &p, &ids).expect("ids in range");
        tape.mse(y, target.clone())
    })
}

fn tiny_table(rng: &mut ChaCha8Rng, dim: usize) -> Result<EmbeddingTable> {
    let recs = [
        TweetRecord::new("1", "good apple day", "apple", 1),
        TweetRecord::new("2", "bad pear night", "pear", -1),
    ];
    let vocab = Vocabulary::build(&recs, 1)?;
    let topics = TopicIndex::build(&recs)?;
    let n = vocab.len();
    let mut emb = rand_matrix(rng, n, dim, 1.0).data().to_vec();
    emb.extend(vec![0.0; dim]);
    let mut out = rand_matrix(rng, n, topics.len(), 1.0).data().to_vec();
    out.extend(vec![0.0; topics.len()]);
    EmbeddingTable::new(
        vocab,
        topics.clone(),
        Tensor::matrix(n + 1, dim, emb)?,
        Tensor::matrix(n + 1, topics.len(), out)?,
    )
}

fn phase2_case(rng: &mut ChaCha8Rng, eps: f64, concat: ConcatMode) -> Result<CaseResult> {
    let dim = 5;
    let table = tiny_table(rng, dim)?;
    let config = ClassifierConfig {
        num_classes: 3,
        pad_len: 4,
        embed_dim: dim,
        sentence_hidden: 3,
        topic_proj: 3,
        stack_hidden: 3,
        seed: rng.random(),
        concat,
        ..ClassifierConfig::default()
    };
    let mut model = ClassifierModel::new(config)?;
    randomize(model.params_mut(), rng, 0.6);
    let n = table.num_words();
    let examples: Vec<Example> = (0..3)
        .map(|_| {
            let len = rng.random_range(1..=4);
            let ids = (0..4).map(|i| if i < len { rng.random_range(0..n) } else { PAD }).collect();
            let topic = table.embedding(rng.random_range(0..n)).to_vec();
            Example {
                ids,
                topic,
                label: rng.random_range(0..3),
            }
        })
        .collect();
    let refs: Vec<&Example> = examples.iter().collect();
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();
    let name = match concat {
        ConcatMode::PerTimestep => "phase2_net",
        ConcatMode::FinalState => "phase2_net_final_state",
    };
    case(name, model.params().tensors(), eps, |tape, v| {
        let p = Bound::from_vars(v.to_vec());
        let logits = model.forward(tape, &p, &table, &refs).expect("well-formed batch");
        tape.softmax_cross_entropy(logits, &labels)
    })
}

/// Runs every case once with inputs drawn from `seed`.
pub fn run_suite(seed: u64, eps: f64) -> Result<Vec<CaseResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(vec![
        dense_case(&mut rng, eps)?,
        conv_case(&mut rng, eps)?,
        lstm_step_case(&mut rng, eps)?,
        bilstm_case(&mut rng, eps)?,
        softmax_ce_case(&mut rng, eps)?,
        phase1_case(&mut rng, eps)?,
        phase2_case(&mut rng, eps, ConcatMode::PerTimestep)?,
        phase2_case(&mut rng, eps, ConcatMode::FinalState)?,
    ])
}
