//! Dense matrices, a recording tape for reverse-mode differentiation, and the
//! Adam optimizer.

mod adam;
mod matrix;
mod tape;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};

pub use tape::row_softmax_of;
