pub mod expr;
pub mod pattern;
pub mod rules;
pub mod physics;
pub mod search;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/expressions.md")]
mod book_expressions {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/rules.md")]
mod book_rules {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/search.md")]
mod book_search {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/physics.md")]
mod book_physics {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
