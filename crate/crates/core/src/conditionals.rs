//! Conditional priors on the means and variances, the joint prior they imply,
//! and the unnormalized full conditional posteriors used by the sampler.
//!
//! For one side, the conditionals
//!
//! ```text
//! mu      | sigma^2 ~ N(mu', sigma^2 / n')
//! sigma^2 | mu      ~ Inv-Gamma(n' / 2, beta(mu)),
//! beta(mu) = (n' - 1) sigma'^2 / 2 + n' (mu - mu')^2 / 2
//! ```
//!
//! are exactly the conditionals of the normal-inverse-gamma joint
//!
//! ```text
//! sigma^2 ~ Inv-Gamma((n' - 1) / 2, (n' - 1) sigma'^2 / 2),   mu | sigma^2 as above,
//! ```
//!
//! whose density is proportional to `(sigma^2)^-(n'/2 + 1) exp(-beta(mu) / sigma^2)`.
//! Integrating out `sigma^2` leaves `beta(mu)^(-n'/2)`, a location-scale t law
//! with `n' - 1` degrees of freedom and scale `sigma' / sqrt(n')`. This is the
//! joint fiducial law of a normal sample of size `n'` with mean `mu'` and
//! standard deviation `sigma'`. The X and Y blocks are independent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densities::{normal_ln_pdf, InverseGammaParams, LocationScaleT, ScaledInvChiSquareSigma};
use crate::error::{FusionError, Result};
use crate::model::{log_likelihood_unchecked, ModelParams, PriorSpec, Side, SufficientStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamId {
    MuX,
    MuY,
    Sigma2X,
    Sigma2Y,
    Rho,
}

impl ParamId {
    pub const ALL: [ParamId; 5] = [
        ParamId::MuX,
        ParamId::MuY,
        ParamId::Sigma2X,
        ParamId::Sigma2Y,
        ParamId::Rho,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamId::MuX => "mu_x",
            ParamId::MuY => "mu_y",
            ParamId::Sigma2X => "sigma2_x",
            ParamId::Sigma2Y => "sigma2_y",
            ParamId::Rho => "rho",
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            ParamId::MuX | ParamId::Sigma2X => Some(Side::X),
            ParamId::MuY | ParamId::Sigma2Y => Some(Side::Y),
            ParamId::Rho => None,
        }
    }

    pub fn is_variance(self) -> bool {
        matches!(self, ParamId::Sigma2X | ParamId::Sigma2Y)
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParamId {
    type Err = FusionError;

    fn from_str(s: &str) -> Result<Self> {
        ParamId::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| {
                FusionError::config(
                    "scan",
                    format!("unknown parameter `{s}` (expected one of mu_x, mu_y, sigma2_x, sigma2_y, rho)"),
                )
            })
    }
}

pub fn beta_scale(prior: &PriorSpec, side: Side, mu: f64) -> f64 {
    let n = prior.n_prime(side);
    let sp = prior.sigma_prime(side);
    let d = mu - prior.mu_prime(side);
    0.5 * (n - 1.0) * sp * sp + 0.5 * n * d * d
}

/// Conditional prior law of `sigma^2` on `side` given the mean.
pub fn sigma2_prior_params(prior: &PriorSpec, side: Side, mu: f64) -> InverseGammaParams {
    InverseGammaParams {
        shape: 0.5 * prior.n_prime(side),
        scale: beta_scale(prior, side, mu),
    }
}

/// Log density of `N(mu', sigma2 / n')` at `mu`.
pub fn log_prior_mu(side: Side, mu: f64, sigma2: f64, prior: &PriorSpec) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(FusionError::domain(format!("sigma2 must be > 0, got {sigma2}")));
    }
    Ok(normal_ln_pdf(mu, prior.mu_prime(side), sigma2 / prior.n_prime(side)))
}

/// Log density of `Inv-Gamma(n' / 2, beta(mu))` at `sigma2`.
pub fn log_prior_sigma2(side: Side, sigma2: f64, mu: f64, prior: &PriorSpec) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(FusionError::domain(format!("sigma2 must be > 0, got {sigma2}")));
    }
    Ok(sigma2_prior_params(prior, side, mu).ln_pdf(sigma2))
}

/// Unnormalized log full conditional posterior of a mean or variance: the
/// conditional prior plus the conditional likelihood, with `param` set to
/// `value`. Values outside the parameter's domain give `-inf`.
pub fn log_full_conditional(
    param: ParamId,
    value: f64,
    params: &ModelParams,
    stats: &SufficientStats,
    prior: &PriorSpec,
) -> Result<f64> {
    if param == ParamId::Rho {
        return Err(FusionError::Precondition(
            "rho has a fiducial conditional, not a Bayesian one".into(),
        ));
    }
    params.validate()?;
    Ok(log_full_conditional_unchecked(param, value, params, stats, prior))
}

pub(crate) fn log_full_conditional_unchecked(
    param: ParamId,
    value: f64,
    params: &ModelParams,
    stats: &SufficientStats,
    prior: &PriorSpec,
) -> f64 {
    if !value.is_finite() || (param.is_variance() && value <= 0.0) {
        return f64::NEG_INFINITY;
    }
    let p = params.with(param, value);
    let side = param.side().expect("not rho");
    let log_prior = if param.is_variance() {
        sigma2_prior_params(prior, side, p.mu(side)).ln_pdf(value)
    } else {
        normal_ln_pdf(value, prior.mu_prime(side), p.sigma2(side) / prior.n_prime(side))
    };
    log_prior + log_likelihood_unchecked(&p, stats)
}

/// The normal-inverse-gamma joint prior of `(mu, sigma^2)` on one side.
#[derive(Clone, Copy, Debug)]
pub struct JointPrior {
    pub mu_prime: f64,
    pub sigma_prime: f64,
    pub n_prime: f64,
}

impl JointPrior {
    pub fn new(prior: &PriorSpec, side: Side) -> Self {
        Self {
            mu_prime: prior.mu_prime(side),
            sigma_prime: prior.sigma_prime(side),
            n_prime: prior.n_prime(side),
        }
    }

    pub fn sigma2_marginal(&self) -> InverseGammaParams {
        InverseGammaParams {
            shape: 0.5 * (self.n_prime - 1.0),
            scale: 0.5 * (self.n_prime - 1.0) * self.sigma_prime * self.sigma_prime,
        }
    }

    pub fn ln_pdf(&self, mu: f64, sigma2: f64) -> f64 {
        if !(sigma2 > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.sigma2_marginal().ln_pdf(sigma2)
            + normal_ln_pdf(mu, self.mu_prime, sigma2 / self.n_prime)
    }

    pub fn mu_marginal(&self) -> LocationScaleT {
        LocationScaleT {
            location: self.mu_prime,
            scale: self.sigma_prime / self.n_prime.sqrt(),
            dof: self.n_prime - 1.0,
        }
    }

    pub fn sigma_marginal(&self) -> ScaledInvChiSquareSigma {
        ScaledInvChiSquareSigma {
            dof: self.n_prime - 1.0,
            s2: self.sigma_prime * self.sigma_prime,
        }
    }
}

/// Marginal prior laws of the mean and of the standard deviation on `side`.
pub fn joint_prior_marginals(prior: &PriorSpec, side: Side) -> (LocationScaleT, ScaledInvChiSquareSigma) {
    let j = JointPrior::new(prior, side);
    (j.mu_marginal(), j.sigma_marginal())
}
