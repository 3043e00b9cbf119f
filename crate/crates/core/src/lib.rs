//! Adaptive optimizer recursion, stochastic test objectives, convergence
//! bounds and exact checks of the lemmas behind them.

pub mod bounds;
pub mod error;
pub mod lemma_lab;
pub mod objectives;
pub mod optim;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use objectives::{Atom, FiniteSupportObjective, HuberTerm, StochasticObjective, ToyProblem};
pub use optim::{
    adaptive_step, run_trajectory, sgd_hb_step, step_size, Algorithm, FinalState, HyperParams, OptimizerState,
    SgdState, Trajectory, DEFAULT_EPSILON,
};
pub use rng::{stream_rng, StreamRng, PRNG_NAME};
pub use sampler::{effective_n, sample_tau, tau_weights, EffectiveN, TauDistribution};
