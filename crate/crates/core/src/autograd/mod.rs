//! Reverse-mode differentiation and the neural-network numerics built on it.

pub mod check;
pub mod nn;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use check::{grad_check, grad_check_many};
pub use nn::{glorot_uniform, uniform, BiLstm, BiOutput, Bound, Conv1d, Dense, LstmCell, ParamId, ParamSet};
pub use optim::{adam_step, Adam, AdamConfig, AdamState};
pub use tape::{log_sum_exp, sigmoid, softmax, Conv1dGeometry, Gradients, Tape, Var};
pub use tensor::Tensor;
