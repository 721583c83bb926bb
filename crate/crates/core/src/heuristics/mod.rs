//! Benchmark policies: the iterative (s,S) heuristic and the power-of-two
//! cyclic heuristic.

pub mod mckp;
pub mod po2;
pub mod ss;

pub use po2::{po2_expected_cost, po2_heuristic, Po2Candidate, Po2Config, Po2Outcome, Po2Policy, Schedule};
pub use ss::{eval_ss_candidate, select_policies, ss_heuristic, EvalProtocol, SsCandidate, SsConfig, SsOutcome, SsPolicy};
