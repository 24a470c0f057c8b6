//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every forward primitive applied to its [`Var`]s;
//! [`Tape::backward`] walks the record in reverse and returns a
//! [`Gradients`] map. Tapes are cheap and meant to be rebuilt per step.
//!
//! ```
//! use perturblab::autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.leaf(Tensor::vector(vec![3.0])).unwrap();
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.get(&tape, x).data(), &[6.0]);
//! ```

mod check;
mod tape;
mod tensor;

pub use check::finite_difference_check;
pub use tape::{Gradients, Op, Tape, Var};
pub use tensor::Tensor;
