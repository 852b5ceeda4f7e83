//! Dense f64 tensors with tape-based reverse-mode differentiation and Adam.

mod checkpoint;
mod dense;
pub mod gradcheck;
mod optim;
mod tape;

pub use checkpoint::{Checkpoint, StoredTensor, CHECKPOINT_FORMAT};
pub use dense::Tensor;
pub use optim::{Adam, AdamConfig};
pub use tape::{concat_columns, sigmoid, Tape, Var, LOG_CLAMP};
