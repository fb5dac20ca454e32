//! Computer algebra for the Morse theory of closed 1-forms: truncated
//! Novikov-ring arithmetic, Reidemeister torsion of based free complexes,
//! zeta functions of gradient flows, the combined invariant `I = T_m * zeta`,
//! bifurcation moves as exact verifiable transformations, and finite cyclic
//! covers via Norm and Trace.
//!
//! The crate is organized bottom-up:
//!
//! - [`grading`]: graded abelian groups `Z^r (+) Z/n` and cyclic quotients;
//! - [`cyclotomic`]: exact arithmetic in `Q(zeta_d)` and the splitting of
//!   `Q[Z/n]` into cyclotomic fields;
//! - [`series`]: truncated Novikov series, inversion, `exp`/`log`, and
//!   canonical representatives modulo the `+-1` / `+-H` ambiguities;
//! - [`complex`]: based free chain complexes and their torsion;
//! - [`orbit`]: closed-orbit bookkeeping and the zeta function in its
//!   exponential, product, and Lefschetz forms; the invariant `I`;
//! - [`moves`]: the five bifurcation moves with per-move verification;
//! - [`cover`]: finite cyclic covers, Norm/Trace, and the exact-form
//!   embedding trick;
//! - [`scenario`]: the scenario file format and built-in generators.

pub mod complex;
pub mod cover;
pub mod cyclotomic;
pub mod error;
pub mod grading;
pub mod matrix;
pub mod moves;
pub mod orbit;
pub mod scenario;
pub mod series;
pub mod text;

pub use error::{Error, Result};
