//! Dense matrices and a matrix-level reverse-mode tape.

mod adam;
mod matrix;
mod tape;

pub use adam::{Adam, AdamState};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var, NORM_EPS};
