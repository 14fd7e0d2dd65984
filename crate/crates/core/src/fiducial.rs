//! Fiducial conditional of the correlation given the means and variances.
//!
//! The conditional maximum likelihood estimate `rho_hat` is the fiducial
//! statistic. Its Fisher-z transform is generated as
//!
//! ```text
//! atanh(rho_hat) = atanh(rho) + G / sqrt(n (1 + rho^2)),   G ~ N(0, 1) truncated to [-alpha, alpha]
//! ```
//!
//! so for fixed `rho_hat` the map `rho -> gamma(rho) = (atanh(rho_hat) - atanh(rho)) sqrt(n (1 + rho^2))`
//! carries the truncated normal onto the fiducial density of `rho`,
//! `psi_alpha(gamma(rho)) |d gamma / d rho|` on `[rho_0, rho_1]`, under a flat
//! weighting of `rho` over `[-1, 1]`.
//!
//! The map is strictly decreasing near `rho_hat`. For `rho_hat > 0` it can
//! turn back only to the left of `rho_hat` and only on `(0, rho_hat)`: there
//! `d gamma / d rho >= 0` exactly when `atanh(rho_hat) >= g(rho)` with
//! `g(rho) = atanh(rho) + (1 + rho^2) / (rho (1 - rho^2))`, independent of `n`.
//! `g` has a single minimum on `(0, 1)`, so the map is monotone on all of
//! `(-1, 1)` whenever `atanh(|rho_hat|)` is below that minimum, and otherwise
//! the largest usable `alpha` is `|gamma|` at the turning point nearest
//! `rho_hat`. Negative `rho_hat` follows by the symmetry
//! `gamma(-rho; -rho_hat) = -gamma(rho; rho_hat)`.

use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf;

use crate::densities::LN_SQRT_2PI;
use crate::error::{FusionError, Result};
use crate::model::{ModelParams, SufficientStats};

/// Largest truncation bound handed out by [`max_alpha`]. `Phi(-40)` underflows
/// in f64, so a wider bound cannot change any computed probability.
pub const ALPHA_CAP: f64 = 40.0;

pub const DEFAULT_SAFETY: f64 = 0.9;

/// Beyond this `|rho_hat|` the bound is taken from global injectivity of the
/// map rather than monotonicity near `rho_hat`, and a warning is logged.
pub const NEAR_DEGENERATE_RHO_HAT: f64 = 0.9999;

const BISECTION_ITERS: usize = 400;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    pub alpha: f64,
}

impl TruncationConfig {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || alpha.is_nan() {
            return Err(FusionError::domain(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self { alpha })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhoSupport {
    pub rho_lo: f64,
    pub rho_hi: f64,
}

impl RhoSupport {
    pub fn contains(&self, rho: f64) -> bool {
        rho >= self.rho_lo && rho <= self.rho_hi
    }
}

fn check_rho(rho: f64, what: &str) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(FusionError::domain(format!("|{what}| must be < 1, got {rho}")))
    }
}

fn check_n(n: usize) -> Result<()> {
    if n >= 1 {
        Ok(())
    } else {
        Err(FusionError::domain("n must be >= 1"))
    }
}

/// Largest f64 strictly inside `(-1, 1)` on the side of `rho`.
fn clamp_open_unit(rho: f64) -> f64 {
    let edge = 1.0 - f64::EPSILON / 2.0;
    rho.clamp(-edge, edge)
}

// ---------------------------------------------------------------------------
// Conditional MLE of rho

/// Scaled centred sums entering the score equation for `rho`:
/// `A = s_xy / (sx sy)`, `B = s_xx / sx^2`, `C = s_yy / sy^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoScoreTerms {
    pub n: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl RhoScoreTerms {
    pub fn new(params: &ModelParams, stats: &SufficientStats) -> Self {
        let cs = stats.centered_sums(params.mu_x, params.mu_y);
        let sx = params.sigma2_x.sqrt();
        let sy = params.sigma2_y.sqrt();
        Self {
            n: stats.n as f64,
            a: cs.s_xy / (sx * sy),
            b: cs.s_xx / params.sigma2_x,
            c: cs.s_yy / params.sigma2_y,
        }
    }

    /// Coefficients `[c3, c2, c1, c0]` of
    /// `-n r^3 + A r^2 + (n - B - C) r + A`.
    pub fn cubic(&self) -> [f64; 4] {
        [-self.n, self.a, self.n - self.b - self.c, self.a]
    }

    pub fn cubic_at(&self, r: f64) -> f64 {
        let [c3, c2, c1, c0] = self.cubic();
        ((c3 * r + c2) * r + c1) * r + c0
    }

    /// `|cubic(r)|` relative to the sum of the magnitudes of its terms.
    pub fn relative_residual(&self, r: f64) -> f64 {
        let [c3, c2, c1, c0] = self.cubic();
        let scale = (c3 * r * r * r).abs() + (c2 * r * r).abs() + (c1 * r).abs() + c0.abs();
        let f = self.cubic_at(r).abs();
        if scale > 0.0 {
            f / scale
        } else {
            f
        }
    }

    /// Log-likelihood of `rho` with the other parameters fixed, including the
    /// `(1 - rho^2)^(-n/2)` factor that depends on `rho`.
    pub fn profile_log_likelihood(&self, rho: f64) -> f64 {
        let q = 1.0 - rho * rho;
        -0.5 * self.n * q.ln() - (self.b - 2.0 * rho * self.a + self.c) / (2.0 * q)
    }
}

/// Real roots of `c3 x^3 + c2 x^2 + c1 x + c0` with `c3 != 0`, each polished
/// by Newton steps.
pub(crate) fn real_cubic_roots(coeffs: [f64; 4]) -> Vec<f64> {
    let [c3, c2, c1, c0] = coeffs;
    let (b, c, d) = (c2 / c3, c1 / c3, c0 / c3);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = 0.25 * q * q + p * p * p / 27.0;

    let mut roots = Vec::with_capacity(3);
    if p == 0.0 && q == 0.0 {
        roots.push(-shift);
    } else if disc > 0.0 {
        let u = (-0.5 * q - q.signum() * disc.sqrt()).cbrt();
        let t = if u != 0.0 { u - p / (3.0 * u) } else { 0.0 };
        roots.push(t - shift);
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        for k in 0..3 {
            roots.push(m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift);
        }
    }

    let f = |x: f64| ((c3 * x + c2) * x + c1) * x + c0;
    let df = |x: f64| (3.0 * c3 * x + 2.0 * c2) * x + c1;
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = df(*r);
            if d == 0.0 {
                break;
            }
            let next = *r - f(*r) / d;
            if !next.is_finite() || f(next).abs() >= f(*r).abs() {
                break;
            }
            *r = next;
        }
    }
    roots
}

/// Maximum likelihood estimate of `rho` with the means and variances held at
/// `params`. Among several admissible roots the one with the largest
/// likelihood wins.
pub fn rho_mle(params: &ModelParams, stats: &SufficientStats) -> Result<f64> {
    if !(params.sigma2_x > 0.0 && params.sigma2_y > 0.0) {
        return Err(FusionError::domain("variances must be > 0"));
    }
    if stats.n < 2 {
        return Err(FusionError::TooFewObservations { required: 2, actual: stats.n });
    }
    rho_mle_from_terms(&RhoScoreTerms::new(params, stats))
}

pub fn rho_mle_from_terms(terms: &RhoScoreTerms) -> Result<f64> {
    let mut candidates: Vec<f64> = real_cubic_roots(terms.cubic())
        .into_iter()
        .filter(|r| r.is_finite() && r.abs() < 1.0)
        .collect();

    if candidates.is_empty() {
        // The cubic is >= 0 at -1 and <= 0 at +1, so a strict sign change
        // still brackets an interior root the closed form may have lost.
        let (lo, hi) = (-1.0, 1.0);
        if terms.cubic_at(lo) > 0.0 && terms.cubic_at(hi) < 0.0 {
            candidates.push(bisect(|r| terms.cubic_at(r), lo, hi, true));
        }
    }

    candidates
        .into_iter()
        .filter(|r| r.abs() < 1.0)
        .map(|r| (r, terms.profile_log_likelihood(r)))
        .filter(|(_, l)| l.is_finite())
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(r, _)| r)
        .ok_or_else(|| {
            FusionError::DegenerateData(format!(
                "no root of the rho score equation inside (-1, 1) (A={}, B={}, C={})",
                terms.a, terms.b, terms.c
            ))
        })
}

/// Bisection for a root of `f` on `[lo, hi]` where `f(lo)` is positive when
/// `decreasing` and negative otherwise. Runs to floating-point resolution.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, decreasing: bool) -> f64 {
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid);
        if v == 0.0 {
            return mid;
        }
        if (v > 0.0) == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Fisher information

pub fn fisher_info_rho(rho: f64, n: usize) -> Result<f64> {
    check_rho(rho, "rho")?;
    let r2 = rho * rho;
    Ok(n as f64 * (1.0 + r2) / ((1.0 - r2) * (1.0 - r2)))
}

pub fn fisher_info_atanh(rho: f64, n: usize) -> Result<f64> {
    check_rho(rho, "rho")?;
    Ok(n as f64 * (1.0 + rho * rho))
}

// ---------------------------------------------------------------------------
// The primary-variable map

#[inline]
fn gamma_z(z: f64, a: f64, n: f64) -> f64 {
    let t = z.tanh();
    (a - z) * (n * (1.0 + t * t)).sqrt()
}

#[inline]
fn gamma_and_derivative(rho: f64, a: f64, n: f64) -> (f64, f64) {
    let root = (n * (1.0 + rho * rho)).sqrt();
    let diff = a - rho.atanh();
    (diff * root, -root / (1.0 - rho * rho) + diff * n * rho / root)
}

/// `gamma(rho)` and `d gamma / d rho` for the given `rho_hat` and `n`.
pub fn gamma_of_rho(rho: f64, rho_hat: f64, n: usize) -> Result<(f64, f64)> {
    check_rho(rho, "rho")?;
    check_rho(rho_hat, "rho_hat")?;
    check_n(n)?;
    Ok(gamma_and_derivative(rho, rho_hat.atanh(), n as f64))
}

fn turning_threshold(rho: f64) -> f64 {
    rho.atanh() + (1.0 + rho * rho) / (rho * (1.0 - rho * rho))
}

/// `(argmin, min)` of the turning threshold on `(0, 1)`.
fn turning_threshold_minimum() -> (f64, f64) {
    static MIN: OnceLock<(f64, f64)> = OnceLock::new();
    *MIN.get_or_init(|| {
        let inv_phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut lo, mut hi) = (0.05, 0.95);
        while hi - lo > 1e-14 {
            let c = hi - inv_phi * (hi - lo);
            let d = lo + inv_phi * (hi - lo);
            if turning_threshold(c) < turning_threshold(d) {
                hi = d;
            } else {
                lo = c;
            }
        }
        let arg = 0.5 * (lo + hi);
        (arg, turning_threshold(arg))
    })
}

/// The `|rho_hat|` above which the map stops being monotone on `(-1, 1)`.
pub fn monotone_rho_hat_threshold() -> f64 {
    turning_threshold_minimum().1.tanh()
}

/// Turning points of `gamma` for `|rho_hat|`, as positive `rho` values:
/// the local maximum nearest `rho_hat` and the local minimum beyond it.
fn turning_points(abs_rho_hat: f64) -> Option<(f64, f64)> {
    let a = abs_rho_hat.atanh();
    let (rho_min, g_min) = turning_threshold_minimum();
    if a <= g_min || abs_rho_hat <= rho_min {
        return None;
    }
    let excess = |r: f64| turning_threshold(r) - a;
    let near = bisect(excess, rho_min, abs_rho_hat, false);
    let far = bisect(excess, 1e-300, rho_min, true);
    Some((near, far))
}

/// Largest `alpha` for which `gamma` is strictly monotone on the interval it
/// induces around `rho_hat`. Infinite when the map is monotone on `(-1, 1)`.
pub fn alpha_limit(rho_hat: f64, n: usize) -> Result<f64> {
    check_rho(rho_hat, "rho_hat")?;
    check_n(n)?;
    let h = rho_hat.abs();
    Ok(match turning_points(h) {
        None => f64::INFINITY,
        Some((near, _)) => gamma_and_derivative(near, h.atanh(), n as f64).0.abs(),
    })
}

/// Largest `alpha` for which every `gamma` in `[-alpha, alpha]` has a single
/// preimage in `(-1, 1)`.
pub fn alpha_limit_injective(rho_hat: f64, n: usize) -> Result<f64> {
    check_rho(rho_hat, "rho_hat")?;
    check_n(n)?;
    let h = rho_hat.abs();
    Ok(match turning_points(h) {
        None => f64::INFINITY,
        Some((_, far)) => gamma_and_derivative(far, h.atanh(), n as f64).0.abs(),
    })
}

/// `safety` times the largest admissible truncation bound, capped at
/// [`ALPHA_CAP`].
pub fn max_alpha(rho_hat: f64, n: usize, safety: f64) -> Result<TruncationConfig> {
    if !(safety > 0.0 && safety <= 1.0) {
        return Err(FusionError::domain(format!("safety must lie in (0, 1], got {safety}")));
    }
    let limit = if rho_hat.abs() > NEAR_DEGENERATE_RHO_HAT {
        log::warn!(
            "rho_hat = {rho_hat} is within {:e} of the boundary; truncation bound reduced",
            1.0 - NEAR_DEGENERATE_RHO_HAT
        );
        alpha_limit_injective(rho_hat, n)?
    } else {
        alpha_limit(rho_hat, n)?
    };
    TruncationConfig::new(safety * limit.min(ALPHA_CAP))
}

/// Grid test of monotonicity: walks outward from `rho_hat` in the Fisher-z
/// scale until `|gamma|` reaches `alpha` on both sides, requiring
/// `d gamma / d rho < 0` at every grid point.
pub fn check_bijectivity(rho_hat: f64, n: usize, alpha: f64) -> bool {
    const STEPS: usize = 20_000;
    if rho_hat.abs() >= 1.0 || n == 0 || !(alpha > 0.0) {
        return false;
    }
    let a = rho_hat.atanh();
    let nf = n as f64;
    // |gamma| >= alpha is reached within alpha / sqrt(n) of atanh(rho_hat).
    let span = alpha / nf.sqrt();
    for dir in [-1.0, 1.0] {
        for k in 1..=STEPS {
            let z = a + dir * span * k as f64 / STEPS as f64;
            let rho = z.tanh();
            if rho.abs() >= 1.0 {
                break;
            }
            let (g, dg) = gamma_and_derivative(rho, a, nf);
            if !(dg < 0.0) {
                return false;
            }
            if g.abs() >= alpha {
                break;
            }
        }
    }
    true
}

fn require_bijective(rho_hat: f64, n: usize, trunc: &TruncationConfig) -> Result<()> {
    let limit = alpha_limit(rho_hat, n)?;
    if trunc.alpha > limit {
        return Err(FusionError::Precondition(format!(
            "alpha = {} exceeds the monotone range {limit} for rho_hat = {rho_hat}, n = {n}",
            trunc.alpha
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Truncated standard normal

/// Standard normal restricted to `[-alpha, alpha]`.
#[derive(Clone, Copy, Debug)]
pub struct TruncatedStdNormal {
    alpha: f64,
    lower_tail: f64,
    mass: f64,
}

impl TruncatedStdNormal {
    pub fn new(alpha: f64) -> Result<Self> {
        let alpha = TruncationConfig::new(alpha)?.alpha;
        let x = alpha / std::f64::consts::SQRT_2;
        Ok(Self {
            alpha,
            lower_tail: 0.5 * erf::erfc(x),
            mass: erf::erf(x),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn ln_pdf(&self, g: f64) -> f64 {
        if g.abs() > self.alpha {
            return f64::NEG_INFINITY;
        }
        -0.5 * g * g - LN_SQRT_2PI - self.mass.ln()
    }

    pub fn cdf(&self, g: f64) -> f64 {
        if g <= -self.alpha {
            0.0
        } else if g >= self.alpha {
            1.0
        } else if g <= 0.0 {
            (0.5 * erf::erfc(-g / std::f64::consts::SQRT_2) - self.lower_tail) / self.mass
        } else {
            1.0 - self.cdf(-g)
        }
    }

    /// Inverse CDF. The upper half is mapped through the lower half so both
    /// tails keep full precision.
    pub fn quantile(&self, u: f64) -> f64 {
        if u > 0.5 {
            return -self.quantile(1.0 - u);
        }
        let p = self.lower_tail + u * self.mass;
        let mut g = std_normal().inverse_cdf(p);
        // one Newton step against the erfc-based lower tail
        if g.is_finite() {
            let phi = (-0.5 * g * g - LN_SQRT_2PI).exp();
            if phi > 0.0 {
                g -= (0.5 * erf::erfc(-g / std::f64::consts::SQRT_2) - p) / phi;
            }
        }
        g.clamp(-self.alpha, self.alpha)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

fn std_normal() -> Normal {
    Normal::standard()
}

// ---------------------------------------------------------------------------
// The fiducial law of rho

/// The fiducial conditional of `rho` for fixed `rho_hat`, `n` and `alpha`,
/// with its support solved once.
#[derive(Clone, Copy, Debug)]
pub struct FiducialRho {
    rho_hat: f64,
    n: usize,
    a: f64,
    z_lo: f64,
    z_hi: f64,
    support: RhoSupport,
    primary: TruncatedStdNormal,
}

impl FiducialRho {
    pub fn new(rho_hat: f64, n: usize, trunc: TruncationConfig) -> Result<Self> {
        check_rho(rho_hat, "rho_hat")?;
        check_n(n)?;
        TruncationConfig::new(trunc.alpha)?;
        require_bijective(rho_hat, n, &trunc)?;

        let a = rho_hat.atanh();
        let nf = n as f64;
        let span = trunc.alpha / nf.sqrt();
        // Keep the bracket on the monotone piece containing rho_hat.
        let (mut lo_bound, mut hi_bound) = (a - span, a + span);
        if let Some((near, _)) = turning_points(rho_hat.abs()) {
            if rho_hat > 0.0 {
                lo_bound = lo_bound.max(near.atanh());
            } else {
                hi_bound = hi_bound.min(-near.atanh());
            }
        }
        let alpha = trunc.alpha;
        let z_lo = bisect(|z| gamma_z(z, a, nf) - alpha, lo_bound, a, true);
        let z_hi = bisect(|z| gamma_z(z, a, nf) + alpha, a, hi_bound, true);
        let support = RhoSupport {
            rho_lo: clamp_open_unit(z_lo.tanh()),
            rho_hi: clamp_open_unit(z_hi.tanh()),
        };
        Ok(Self {
            rho_hat,
            n,
            a,
            z_lo,
            z_hi,
            support,
            primary: TruncatedStdNormal::new(alpha)?,
        })
    }

    pub fn rho_hat(&self) -> f64 {
        self.rho_hat
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.primary.alpha()
    }

    pub fn support(&self) -> RhoSupport {
        self.support
    }

    pub fn ln_pdf(&self, rho: f64) -> f64 {
        if !self.support.contains(rho) || rho.abs() >= 1.0 {
            return f64::NEG_INFINITY;
        }
        let (g, dg) = gamma_and_derivative(rho, self.a, self.n as f64);
        self.primary.ln_pdf(g.clamp(-self.alpha(), self.alpha())) + dg.abs().ln()
    }

    pub fn pdf(&self, rho: f64) -> f64 {
        self.ln_pdf(rho).exp()
    }

    /// Closed-form CDF: `gamma` decreases in `rho`, so
    /// `P(R <= rho) = P(G >= gamma(rho))`.
    pub fn cdf(&self, rho: f64) -> f64 {
        if rho <= self.support.rho_lo {
            return 0.0;
        }
        if rho >= self.support.rho_hi {
            return 1.0;
        }
        let (g, _) = gamma_and_derivative(rho, self.a, self.n as f64);
        1.0 - self.primary.cdf(g)
    }

    /// The `rho` in the support with `gamma(rho) = g`.
    pub fn rho_from_gamma(&self, g: f64) -> f64 {
        let alpha = self.alpha();
        let g = g.clamp(-alpha, alpha);
        if g == 0.0 {
            return self.rho_hat;
        }
        let nf = self.n as f64;
        let z = bisect(|z| gamma_z(z, self.a, nf) - g, self.z_lo, self.z_hi, true);
        clamp_open_unit(z.tanh()).clamp(self.support.rho_lo, self.support.rho_hi)
    }

    /// Exact draw: truncated-normal inverse CDF, then inversion of the map.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.rho_from_gamma(self.primary.sample(rng))
    }
}

pub fn rho_support(rho_hat: f64, n: usize, trunc: TruncationConfig) -> Result<RhoSupport> {
    Ok(FiducialRho::new(rho_hat, n, trunc)?.support())
}

pub fn fiducial_logdensity_rho(rho: f64, rho_hat: f64, n: usize, trunc: TruncationConfig) -> Result<f64> {
    Ok(FiducialRho::new(rho_hat, n, trunc)?.ln_pdf(rho))
}

pub fn sample_rho<R: Rng + ?Sized>(
    rho_hat: f64,
    n: usize,
    trunc: TruncationConfig,
    rng: &mut R,
) -> Result<f64> {
    Ok(FiducialRho::new(rho_hat, n, trunc)?.sample(rng))
}
