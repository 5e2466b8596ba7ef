//! Decoupling: splitting eigendirections off a Gaussian degree-2
//! polynomial, and the iterated reduction to a decoupled junta.

mod critical;
mod decompose;
mod junta;

pub use critical::{critical_index, CriticalIndexInput};
pub use decompose::{approximate_decompose, DecomposeKind, DecomposeResult};
pub use junta::{
    check_trace_invariants, construct_junta, JuntaBranch, JuntaExit, JuntaIteration, JuntaParams,
    JuntaTrace,
};
