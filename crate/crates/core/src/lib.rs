//! Dynamic inventory routing under stochastic supply and demand.
//!
//! One supplier, `N` customers, a homogeneous fleet. The crate provides the
//! environment ([`instance`], [`dynamics`]), exact per-state action
//! selection ([`action_solver`]), average-cost TD(λ) training ([`crl`]), a
//! scenario lookahead on top of the trained weights ([`lcrl`]), relative
//! value iteration for small instances ([`vi`]), (s,S) and power-of-two
//! baselines ([`heuristics`]) and an experiment harness ([`bench`]).
//!
//! ```
//! use dirp::crl::{greedy_policy, train, TrainerConfig};
//! use dirp::dynamics::{simulate, SimOptions};
//! use dirp::instance::gen_toy;
//!
//! let inst = gen_toy(2, 1, 0).unwrap();
//! let trained = train(&inst, &TrainerConfig { periods: 5000, ..TrainerConfig::default() }).unwrap();
//! let mut policy = greedy_policy(&inst, &trained.weights);
//! let report = simulate(&inst, &mut policy, 2000, 100, 0, &SimOptions::default()).unwrap();
//! assert!(report.average_cost().is_finite());
//! ```

pub mod action_solver;
pub mod bench;
pub mod crl;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod heuristics;
pub mod instance;
pub mod lcrl;
pub mod rng;
pub mod vi;

pub use error::{Error, Result, Violation};

// The guide's code blocks run as doc-tests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/action-selection.md")]
    mod action_selection {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/lookahead.md")]
    mod lookahead {}
    #[doc = include_str!("../../../book/src/value-iteration.md")]
    mod value_iteration {}
    #[doc = include_str!("../../../book/src/heuristics.md")]
    mod heuristics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
