//! Positive-real RBM wavefunction `ψ(v) = sqrt(p(v))` over {0,1} units.

mod exact;
mod params;
mod sampler;
mod train;

pub use exact::{
    exact_distribution, exact_log_likelihood_gradient, kl_divergence, log_likelihood, log_unnormalized, ExactRbmStats,
    MAX_ENUM_VISIBLE,
};
pub use params::{FreezeMask, Gradient, RbmParams};
pub use sampler::{chain_rng, gibbs_step, gibbs_sweep, sample_model, ChainConfig, GibbsScratch};
pub use train::{cd_gradient, train, EpochLog, TrainConfig, TrainOutcome, Trainer};
