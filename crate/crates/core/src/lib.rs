//! Bivariate normal inference mixing conjugate-style Bayesian conditionals for
//! the means and variances with a fiducial conditional for the correlation,
//! combined in a Metropolis-within-Gibbs sampler.
//!
//! Modules, bottom up:
//!
//! - [`model`]: observations, sufficient statistics, parameters, priors, likelihood.
//! - [`conditionals`]: prior and full-conditional log densities.
//! - [`fiducial`]: the MLE of `rho`, the variance-stabilized pivot and its truncated law.
//! - [`sampler`]: transition kernels, chains, trace I/O.
//! - [`analysis`]: summaries, Gelman-Rubin, histograms, reference curves.
//! - [`config`]: the JSON run configuration.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod conditionals;
pub mod config;
pub mod densities;
pub mod error;
pub mod fiducial;
pub mod model;
pub mod quadrature;
pub mod sampler;

pub use analysis::{
    compare_scan_orders, gelman_rubin, histogram, summarize, ChainSummary, ConvergenceReport, CurveKind,
    DensityCurve, ScanComparison,
};
pub use conditionals::{log_full_conditional, log_prior_mu, log_prior_sigma2, ParamId};
pub use config::RunConfig;
pub use error::{FusionError, Result};
pub use fiducial::{
    fiducial_logdensity_rho, max_alpha, rho_mle, rho_support, sample_rho, FiducialRho, RhoSupport,
    TruncationConfig,
};
pub use model::{
    compute_sufficient_stats, log_likelihood, synthesize_matching_dataset, ModelParams, Observation,
    ObservationSet, PriorSpec, SampleMoments, Side, SufficientStats,
};
pub use sampler::{
    gibbs_transition, metropolis_update, run_chain, run_multi_chain, ChainState, ChainTrace, SamplerConfig,
    ScanPolicy, Target, TruncPolicy,
};

/// The worked example used throughout the tests and the CLI defaults: its
/// prior constants and the summary statistics of its 100 observations.
pub mod reference {
    use crate::model::{PriorSpec, SampleMoments};

    pub const N: usize = 100;

    pub fn prior() -> PriorSpec {
        PriorSpec::new(0.3, 1.2, 50.0, 0.2, 0.75, 100.0).expect("valid constants")
    }

    pub fn moments() -> SampleMoments {
        SampleMoments {
            mean_x: 0.0925,
            mean_y: 0.0400,
            sd_x: 1.053,
            sd_y: 0.866,
            corr: 0.780,
        }
    }
}
