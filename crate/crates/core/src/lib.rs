//! A deterministic partitioning classifier on the circle whose expected
//! error is non-increasing in the sample size, together with the numerical
//! objects its construction rests on and a harness that checks them.
//!
//! Points live on `[0, 1)` with wraparound. Learning problems are finite
//! mixtures of atoms and uniform arcs, so every risk is computed exactly.

pub mod cli;
pub mod cyclic;
pub mod error;
pub mod error_function;
pub mod harness;
pub mod problems;
pub mod rules;
pub mod schedule;

pub use cyclic::{cyclic_between, successor, transport_from_uniform, ArcPartition, CyclicPoint, HalfOpenArc};
pub use error::{Error, Result};
pub use error_function::{
    bayes_binary, binomial_inside, concave_envelope, find_n, majority_error, monotone_gap, taylor_coeff,
    FindNOptions, FindNResult, PiecewiseLinearEnvelope,
};
pub use problems::{Component, Entry, Hypothesis, Label, LabeledSample, LearningProblem};
pub use rules::{histogram_fit, nn1_predict, Rule, RuleState, SmartRule};
pub use schedule::{exact_schedule, practical_schedule, vc_sample_size, PracticalParams, Schedule, ScheduleMode};
