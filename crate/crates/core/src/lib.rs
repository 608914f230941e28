//! Buy-and-hold super-replication of Markovian claims `g(S_T)`.
//!
//! In a fully incomplete market the cheapest super-hedge of `g(S_T)` is a
//! static position: hold `∂₊ĝ(S₀)` shares and `ĝ(S₀) − ∂₊ĝ(S₀)·S₀` cash,
//! where `ĝ` is the concave envelope of `g`. This crate computes that price
//! and hedge exactly for payoffs written in a piecewise-affine expression
//! language, and checks the claim numerically against simulated stochastic
//! and rough volatility markets.
//!
//! * [`payoff`]: payoff language, parser, exact piecewise-affine form.
//! * [`envelope`]: concave envelope, hedge, contact set, Lipschitz regularization.
//! * [`models`]: path simulation (GBM, Heston, Hull–White, Scott, rough fOU).
//! * [`stopping`]: optimal-stopping oracle for the envelope.
//! * [`duality`]: Monte Carlo verification experiments.
//! * [`cli`]: command-line front end.

// validation reads `!(x > 0.0)` on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod duality;
pub mod envelope;
pub mod exec;
pub mod models;
pub mod payoff;
pub mod stopping;

pub use envelope::{buy_and_hold_price, concave_envelope, ConcaveEnvelope, HedgePair};
pub use exec::Execution;
pub use models::{ModelKind, ModelSpec, PathBatch};
pub use payoff::{parse_payoff, PayoffAst, PiecewiseAffine};
