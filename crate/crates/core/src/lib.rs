//! Best-of-both-worlds fair division over exact rationals.
//!
//! Solvers produce lotteries over integral allocations; every claimed
//! property can be re-checked with the predicates in [`checkers`].

pub mod checkers;
pub mod cli;
pub mod efx_fpo;
pub mod error;
pub mod exante;
pub mod matching;
pub mod mixed_bobw;
pub mod model;
pub mod rational;
pub mod simplex;
pub mod two_agent;


pub use error::{Error, Result};
pub use rational::Rational;
