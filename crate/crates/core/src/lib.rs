//! Entire radial solutions of `Δu = p₁(|x|) f₁(u, v)`, `Δv = p₂(|x|) f₂(u, v)` on `ℝᴺ`.
//!
//! The crate builds radial solutions by monotone successive approximation,
//! tabulates the Keller–Osserman type functionals that govern their growth,
//! classifies solutions as entire large, entire bounded or mixed, and checks
//! the construction against a direct initial-value integrator.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`, which is what the CLI uses.

// `!(x > 0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifier;
pub mod config;
pub mod grid;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod report;
pub mod scalar;
pub mod solver;
pub mod transforms;

pub use classifier::{classify, verify_sandwich, ClassificationReport, Theorem, Verdict};
pub use grid::{Grading, RadialGrid, SampledFn};
pub use model::{Component, NonlinearityPair, ProblemSpec, WeightFn};
pub use scalar::Scalar;
pub use solver::{picard_solve, IterationConfig, SolutionPair};
pub use transforms::{FunctionTable, IntegralProfile, LimitClass, TailPolicy};

pub type Grid = grid::RadialGrid<f64>;
pub type Sampled = grid::SampledFn<f64>;
pub type Problem = model::ProblemSpec<f64>;
pub type Nonlinearity = model::NonlinearityPair<f64>;
pub type Weight = model::WeightFn<f64>;
pub type Table = transforms::FunctionTable<f64>;
pub type Profile = transforms::IntegralProfile<f64>;
pub type Limit = transforms::LimitClass<f64>;
pub type Solution = solver::SolutionPair<f64>;
pub type Report = classifier::ClassificationReport<f64>;
