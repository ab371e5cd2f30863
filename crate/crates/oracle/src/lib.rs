//! Reference implementations that the engine is tested against.
//!
//! Nothing here shares code paths with the engine beyond the expression
//! types and the component expander. Each oracle is the slow, obvious
//! version of one engine operation.

pub mod calculus;
pub mod generate;
pub mod matcher;
pub mod normal;
pub mod toy;
