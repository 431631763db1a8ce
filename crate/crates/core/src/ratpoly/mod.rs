//! Numeric algebra for polynomials, rational functions and 2x2 rational
//! matrices - the substrate every transfer-function construction sits on.

pub mod dd;
pub mod factored;
mod matrix;
mod poly;
mod rational;
mod roots;

pub use matrix::RatMatrix2;
pub use poly::{Polynomial, COEFF_FLUSH_REL};
pub use rational::{PoleZeroSet, RationalFunction};
pub use roots::{expand_from_roots, roots};
