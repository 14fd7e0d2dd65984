//! Closed-form univariate laws shared by the prior, fiducial and confidence
//! curves.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::error::{FusionError, Result};

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn normal_ln_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -LN_SQRT_2PI - 0.5 * var.ln() - d * d / (2.0 * var)
}

/// A univariate density with a natural plotting window.
pub trait Density1D {
    fn ln_pdf(&self, x: f64) -> f64;

    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Interval holding all but a negligible amount of mass.
    fn plot_range(&self) -> (f64, f64);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InverseGammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl InverseGammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0) {
            return Err(FusionError::domain(format!(
                "inverse gamma needs shape > 0 and scale > 0, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.shape, self.scale);
        a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
    }

    pub fn mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }
}

/// `location + scale * T` with `T` Student-t on `dof` degrees of freedom.
#[derive(Clone, Copy, Debug)]
pub struct LocationScaleT {
    pub location: f64,
    pub scale: f64,
    pub dof: f64,
}

impl LocationScaleT {
    pub fn new(location: f64, scale: f64, dof: f64) -> Result<Self> {
        if !(scale > 0.0 && dof > 0.0 && location.is_finite()) {
            return Err(FusionError::domain(format!(
                "t law needs scale > 0, dof > 0, got scale {scale}, dof {dof}"
            )));
        }
        Ok(Self { location, scale, dof })
    }

    fn standard(&self) -> StudentsT {
        StudentsT::new(0.0, 1.0, self.dof).expect("validated dof")
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.standard().cdf((x - self.location) / self.scale)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.location + self.scale * self.standard().inverse_cdf(p)
    }
}

impl Density1D for LocationScaleT {
    fn ln_pdf(&self, x: f64) -> f64 {
        let nu = self.dof;
        let z = (x - self.location) / self.scale;
        ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * std::f64::consts::PI).ln()
            - self.scale.ln()
            - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
    }

    fn plot_range(&self) -> (f64, f64) {
        // mean +- 6 sd where the variance exists, otherwise wide quantiles
        let half = if self.dof > 2.0 {
            6.0 * self.scale * (self.dof / (self.dof - 2.0)).sqrt()
        } else {
            self.quantile(1.0 - 1e-6) - self.location
        };
        (self.location - half, self.location + half)
    }
}

/// Law of `sigma` when `dof * s2 / sigma^2` is chi-square with `dof` degrees
/// of freedom, i.e. `sigma^2 ~ Inv-Gamma(dof / 2, dof * s2 / 2)`.
#[derive(Clone, Copy, Debug)]
pub struct ScaledInvChiSquareSigma {
    pub dof: f64,
    pub s2: f64,
}

impl ScaledInvChiSquareSigma {
    pub fn new(dof: f64, s2: f64) -> Result<Self> {
        if !(dof > 0.0 && s2 > 0.0) {
            return Err(FusionError::domain(format!(
                "scaled inverse chi-square needs dof > 0 and s2 > 0, got ({dof}, {s2})"
            )));
        }
        Ok(Self { dof, s2 })
    }

    pub fn variance_law(&self) -> InverseGammaParams {
        InverseGammaParams {
            shape: 0.5 * self.dof,
            scale: 0.5 * self.dof * self.s2,
        }
    }

    pub fn ln_pdf_sigma2(&self, v: f64) -> f64 {
        self.variance_law().ln_pdf(v)
    }

    /// Quantile of `sigma^2`; the map from the chi-square variable is decreasing.
    pub fn quantile_sigma2(&self, p: f64) -> f64 {
        let chi = ChiSquared::new(self.dof).expect("validated dof");
        self.dof * self.s2 / chi.inverse_cdf(1.0 - p)
    }

    /// `E[sigma]`, from the chi-square moment `E[chi^-1]`.
    pub fn mean_sigma(&self) -> f64 {
        let nu = self.dof;
        (nu * self.s2 / 2.0).sqrt() * (ln_gamma(0.5 * (nu - 1.0)) - ln_gamma(0.5 * nu)).exp()
    }
}

impl Density1D for ScaledInvChiSquareSigma {
    fn ln_pdf(&self, sigma: f64) -> f64 {
        if !(sigma > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.ln_pdf_sigma2(sigma * sigma) + (2.0 * sigma).ln()
    }

    fn plot_range(&self) -> (f64, f64) {
        (
            self.quantile_sigma2(1e-9).sqrt(),
            self.quantile_sigma2(1.0 - 1e-9).sqrt(),
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct NormalLaw {
    pub mean: f64,
    pub var: f64,
}

impl Density1D for NormalLaw {
    fn ln_pdf(&self, x: f64) -> f64 {
        normal_ln_pdf(x, self.mean, self.var)
    }

    fn plot_range(&self) -> (f64, f64) {
        let sd = self.var.sqrt();
        (self.mean - 6.0 * sd, self.mean + 6.0 * sd)
    }
}
