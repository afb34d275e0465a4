//! Toy query encoder: hashed-token table, mean pooling and a tanh MLP, with
//! hand-written backpropagation. The mean-pooled vector stands in for a
//! transformer's aggregate `[CLS]` representation.

mod adam;
mod gradcheck;
mod model;
mod tokenizer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_grad, relative_error};
pub use model::{Checkpoint, EncoderParams, Forward, INIT_SCALE};
pub use tokenizer::{Tokenizer, CLS, CLS_ID, OOV_ID, SEP, SEP_ID};

/// A query embedding `E(q)`.
pub type Embedding<T> = Vec<T>;

pub const DEFAULT_VOCAB: usize = 32768;
pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_HIDDEN: usize = 128;
