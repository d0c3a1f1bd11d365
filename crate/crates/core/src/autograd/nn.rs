//! Named parameter storage and the layers both models are built from.

use rand::Rng;

use crate::autograd::tape::{Conv1dGeometry, Gradients, Tape, Var};
use crate::autograd::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

/// Ordered, named collection of trainable tensors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }

    /// Replaces every tensor, keeping names and requiring identical shapes.
    pub fn assign(&mut self, values: Vec<Tensor>) -> Result<()> {
        if values.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                self.tensors.len(),
                values.len()
            )));
        }
        for ((name, old), new) in self.names.iter().zip(&self.tensors).zip(&values) {
            if old.shape() != new.shape() {
                return Err(Error::Shape(format!(
                    "parameter {name}: expected {:?}, got {:?}",
                    old.shape(),
                    new.shape()
                )));
            }
        }
        self.tensors = values;
        Ok(())
    }

    /// Pushes every parameter onto `tape` as a differentiable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.tensors.iter().map(|t| tape.param(t.clone())).collect())
    }

    /// Pushes every parameter as a constant, for inference-only graphs.
    pub fn bind_frozen(&self, tape: &mut Tape) -> Bound {
        Bound(self.tensors.iter().map(|t| tape.constant(t.clone())).collect())
    }
}

/// Parameters of one [`ParamSet`] living on a particular tape.
pub struct Bound(Vec<Var>);

impl Bound {
    /// Wraps vars already on a tape, in [`ParamSet`] order. Lets callers such
    /// as gradient checkers own the leaves.
    pub fn from_vars(vars: Vec<Var>) -> Self {
        Bound(vars)
    }

    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    /// Gradients in parameter order.
    pub fn collect(&self, mut grads: Gradients) -> Result<Vec<Tensor>> {
        self.0
            .iter()
            .map(|&v| {
                grads
                    .take(v)
                    .ok_or_else(|| Error::Shape("parameter was bound as a constant".into()))
            })
            .collect()
    }
}

/// Uniform in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rng: &mut impl Rng, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    uniform(rng, shape, limit)
}

pub fn uniform(rng: &mut impl Rng, shape: &[usize], limit: f64) -> Tensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape")
}

/// `y = x W + b` with `W` stored as `[in, out]`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Dense {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let weight = params.add(
            format!("{name}.weight"),
            glorot_uniform(rng, &[input_dim, output_dim], input_dim, output_dim),
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[output_dim]));
        Dense {
            weight,
            bias,
            input_dim,
            output_dim,
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let xw = tape.matmul(x, p.var(self.weight));
        tape.add_bias(xw, p.var(self.bias))
    }
}

/// Convolution layer with zero "same"-style padding configured by the caller.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub kernel: ParamId,
    pub bias: ParamId,
    pub geom: Conv1dGeometry,
    pub filters: usize,
}

impl Conv1d {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        geom: Conv1dGeometry,
        filters: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let kcols = geom.channels * geom.width;
        let kernel = params.add(
            format!("{name}.kernel"),
            glorot_uniform(rng, &[filters, kcols], kcols, filters * geom.width),
        );
        let bias = params.add(format!("{name}.bias"), Tensor::zeros(&[filters]));
        Conv1d {
            kernel,
            bias,
            geom,
            filters,
        }
    }

    pub fn output_width(&self) -> usize {
        self.filters * self.geom.out_len()
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        tape.conv1d(x, p.var(self.kernel), Some(p.var(self.bias)), self.geom)
    }
}

/// One LSTM cell. Gate blocks are laid out `[input, forget, candidate, output]`
/// along the `4 * hidden` axis of both weight matrices and the bias.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let w_input = params.add(
            format!("{name}.w_input"),
            glorot_uniform(rng, &[input_dim, 4 * hidden], input_dim, 4 * hidden),
        );
        let w_hidden = params.add(
            format!("{name}.w_hidden"),
            uniform(rng, &[hidden, 4 * hidden], 1.0 / (hidden as f64).sqrt()),
        );
        let mut b = vec![0.0; 4 * hidden];
        b[hidden..2 * hidden].fill(1.0);
        let bias = params.add(format!("{name}.bias"), Tensor::vector(b));
        LstmCell {
            w_input,
            w_hidden,
            bias,
            input_dim,
            hidden,
        }
    }

    /// One timestep over a batch: `x` is `[B, input_dim]`, `h` and `c` are
    /// `[B, hidden]`.
    pub fn step(&self, tape: &mut Tape, p: &Bound, x: Var, h: Var, c: Var) -> (Var, Var) {
        let hd = self.hidden;
        let zx = tape.matmul(x, p.var(self.w_input));
        let zh = tape.matmul(h, p.var(self.w_hidden));
        let z = tape.add(zx, zh);
        let z = tape.add_bias(z, p.var(self.bias));
        let i = tape.slice_cols(z, 0, hd);
        let i = tape.sigmoid(i);
        let f = tape.slice_cols(z, hd, hd);
        let f = tape.sigmoid(f);
        let g = tape.slice_cols(z, 2 * hd, hd);
        let g = tape.tanh(g);
        let o = tape.slice_cols(z, 3 * hd, hd);
        let o = tape.sigmoid(o);
        let kept = tape.mul(f, c);
        let written = tape.mul(i, g);
        let c_next = tape.add(kept, written);
        let squashed = tape.tanh(c_next);
        let h_next = tape.mul(o, squashed);
        (h_next, c_next)
    }

    /// Runs the cell over `xs` in order, starting from zero state. Returns the
    /// hidden state after every step.
    pub fn run(&self, tape: &mut Tape, p: &Bound, xs: &[Var]) -> Vec<Var> {
        let Some(&first) = xs.first() else {
            return Vec::new();
        };
        let batch = tape.value(first).rows();
        let mut h = tape.constant(Tensor::zeros(&[batch, self.hidden]));
        let mut c = tape.constant(Tensor::zeros(&[batch, self.hidden]));
        let mut out = Vec::with_capacity(xs.len());
        for &x in xs {
            (h, c) = self.step(tape, p, x, h, c);
            out.push(h);
        }
        out
    }
}

/// Output of a bidirectional pass.
pub struct BiOutput {
    /// `[B, 2 * hidden]` per timestep: forward state then backward state.
    pub sequence: Vec<Var>,
    /// Forward direction after the last timestep.
    pub last_forward: Var,
    /// Backward direction after consuming the first timestep.
    pub last_backward: Var,
}

#[derive(Clone, Debug)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input_dim: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Self {
        BiLstm {
            forward: LstmCell::new(params, &format!("{name}.fwd"), input_dim, hidden, rng),
            backward: LstmCell::new(params, &format!("{name}.bwd"), input_dim, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    /// Panics on an empty sequence.
    pub fn run(&self, tape: &mut Tape, p: &Bound, xs: &[Var]) -> BiOutput {
        assert!(!xs.is_empty(), "BiLSTM needs at least one timestep");
        let fwd = self.forward.run(tape, p, xs);
        let reversed: Vec<Var> = xs.iter().rev().copied().collect();
        let mut bwd = self.backward.run(tape, p, &reversed);
        bwd.reverse();
        let sequence = fwd
            .iter()
            .zip(&bwd)
            .map(|(&f, &b)| tape.concat_cols(&[f, b]))
            .collect();
        BiOutput {
            sequence,
            last_forward: *fwd.last().expect("nonempty"),
            last_backward: bwd[0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lstm_zero_weights_and_input() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::new(&mut params, "cell", 3, 2, &mut rng);
        let zeroed = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        params.assign(zeroed).unwrap();

        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let x = tape.constant(Tensor::zeros(&[1, 3]));
        let h = tape.constant(Tensor::zeros(&[1, 2]));
        let c = tape.constant(Tensor::zeros(&[1, 2]));
        let (h1, c1) = cell.step(&mut tape, &p, x, h, c);
        assert_eq!(tape.value(h1).data(), &[0.0, 0.0]);
        assert_eq!(tape.value(c1).data(), &[0.0, 0.0]);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cell = LstmCell::new(&mut params, "cell", 3, 2, &mut rng);
        assert_eq!(params.get(cell.bias).data(), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn assign_checks_shapes() {
        let mut params = ParamSet::new();
        params.add("a", Tensor::zeros(&[2, 2]));
        assert!(params.assign(vec![Tensor::zeros(&[4])]).is_err());
        assert!(params.assign(vec![Tensor::zeros(&[2, 2])]).is_ok());
    }

    #[test]
    fn bilstm_sequence_layout() {
        let mut params = ParamSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bi = BiLstm::new(&mut params, "bi", 2, 3, &mut rng);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let xs: Vec<Var> = (0..4)
            .map(|i| tape.constant(Tensor::matrix(1, 2, vec![i as f64, 1.0]).unwrap()))
            .collect();
        let out = bi.run(&mut tape, &p, &xs);
        assert_eq!(out.sequence.len(), 4);
        assert_eq!(tape.value(out.sequence[0]).cols(), 6);
        let last = tape.value(out.sequence[3]).data()[..3].to_vec();
        assert_eq!(tape.value(out.last_forward).data(), &last[..]);
        let first = tape.value(out.sequence[0]).data()[3..].to_vec();
        assert_eq!(tape.value(out.last_backward).data(), &first[..]);
    }
}
