//! Numerics for Fisher-KPP pulled fronts: dispersion relations, the critical
//! travelling wave and its first-order correction, a log-space lattice
//! simulator, an exactly solvable front, and asymptotic fitting.

// `!(x > 0.0)` style guards are deliberate: they reject NaN along with the range
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod dispersion;
pub mod lattice_sim;
pub mod numerics;
pub mod ode;
pub mod solvable;
pub mod wave;
