//! Observations, sufficient statistics and the conditional likelihood of the
//! bivariate normal model.

use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::conditionals::ParamId;
use crate::error::{FusionError, Result};

/// Which of the two observed variables a quantity refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    X,
    Y,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
}

/// A paired sample `{(x_i, y_i)}` with at least two finite points.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    points: Vec<Observation>,
}

impl ObservationSet {
    pub const MIN_LEN: usize = 2;

    pub fn new(points: Vec<Observation>) -> Result<Self> {
        if points.len() < Self::MIN_LEN {
            return Err(FusionError::TooFewObservations {
                required: Self::MIN_LEN,
                actual: points.len(),
            });
        }
        if let Some(row) = points
            .iter()
            .position(|p| !p.x.is_finite() || !p.y.is_finite())
        {
            return Err(FusionError::NonFiniteObservation { row });
        }
        Ok(Self { points })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(x, y)| Observation { x, y }).collect())
    }

    pub fn points(&self) -> &[Observation] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reads CSV with an `x,y` header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
            return Err(FusionError::config(
                "header",
                format!("expected `x,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let points = rdr
            .deserialize::<Observation>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(points)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    /// Writes CSV with an `x,y` header at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x,y")?;
        for p in &self.points {
            writeln!(out, "{:.16e},{:.16e}", p.x, p.y)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Raw sums over the sample. Centering happens per evaluation since the means
/// change between Gibbs updates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub n: usize,
    pub sum_x: f64,
    pub sum_y: f64,
    pub sum_xx: f64,
    pub sum_yy: f64,
    pub sum_xy: f64,
}

/// Sums of squares and cross products about a given centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CenteredSums {
    pub s_xx: f64,
    pub s_yy: f64,
    pub s_xy: f64,
}

/// Sample means, sample standard deviations (n - 1 denominator) and the
/// sample correlation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean_x: f64,
    pub mean_y: f64,
    pub sd_x: f64,
    pub sd_y: f64,
    pub corr: f64,
}

impl SufficientStats {
    pub fn from_observations(data: &ObservationSet) -> Self {
        let mut s = SufficientStats {
            n: data.len(),
            sum_x: 0.0,
            sum_y: 0.0,
            sum_xx: 0.0,
            sum_yy: 0.0,
            sum_xy: 0.0,
        };
        for p in data.points() {
            s.sum_x += p.x;
            s.sum_y += p.y;
            s.sum_xx += p.x * p.x;
            s.sum_yy += p.y * p.y;
            s.sum_xy += p.x * p.y;
        }
        s
    }

    pub fn centered_sums(&self, mu_x: f64, mu_y: f64) -> CenteredSums {
        let n = self.n as f64;
        CenteredSums {
            s_xx: self.sum_xx - 2.0 * mu_x * self.sum_x + n * mu_x * mu_x,
            s_yy: self.sum_yy - 2.0 * mu_y * self.sum_y + n * mu_y * mu_y,
            s_xy: self.sum_xy - mu_x * self.sum_y - mu_y * self.sum_x + n * mu_x * mu_y,
        }
    }

    pub fn moments(&self) -> SampleMoments {
        let n = self.n as f64;
        let mean_x = self.sum_x / n;
        let mean_y = self.sum_y / n;
        let c = self.centered_sums(mean_x, mean_y);
        SampleMoments {
            mean_x,
            mean_y,
            sd_x: (c.s_xx / (n - 1.0)).sqrt(),
            sd_y: (c.s_yy / (n - 1.0)).sqrt(),
            corr: c.s_xy / (c.s_xx * c.s_yy).sqrt(),
        }
    }
}

pub fn compute_sufficient_stats(data: &ObservationSet) -> SufficientStats {
    SufficientStats::from_observations(data)
}

/// The state vector `(mu_x, mu_y, sigma2_x, sigma2_y, rho)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma2_x: f64,
    pub sigma2_y: f64,
    pub rho: f64,
}

impl ModelParams {
    pub fn new(mu_x: f64, mu_y: f64, sigma2_x: f64, sigma2_y: f64, rho: f64) -> Result<Self> {
        let p = Self {
            mu_x,
            mu_y,
            sigma2_x,
            sigma2_y,
            rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu_x.is_finite() || !self.mu_y.is_finite() {
            return Err(FusionError::domain("means must be finite"));
        }
        if !(self.sigma2_x > 0.0 && self.sigma2_x.is_finite())
            || !(self.sigma2_y > 0.0 && self.sigma2_y.is_finite())
        {
            return Err(FusionError::domain(format!(
                "variances must be positive and finite, got ({}, {})",
                self.sigma2_x, self.sigma2_y
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(FusionError::domain(format!("|rho| must be < 1, got {}", self.rho)));
        }
        Ok(())
    }

    pub fn get(&self, param: ParamId) -> f64 {
        match param {
            ParamId::MuX => self.mu_x,
            ParamId::MuY => self.mu_y,
            ParamId::Sigma2X => self.sigma2_x,
            ParamId::Sigma2Y => self.sigma2_y,
            ParamId::Rho => self.rho,
        }
    }

    /// Copy with one coordinate replaced. Does not validate.
    pub fn with(mut self, param: ParamId, value: f64) -> Self {
        match param {
            ParamId::MuX => self.mu_x = value,
            ParamId::MuY => self.mu_y = value,
            ParamId::Sigma2X => self.sigma2_x = value,
            ParamId::Sigma2Y => self.sigma2_y = value,
            ParamId::Rho => self.rho = value,
        }
        self
    }

    pub fn mu(&self, side: Side) -> f64 {
        match side {
            Side::X => self.mu_x,
            Side::Y => self.mu_y,
        }
    }

    pub fn sigma2(&self, side: Side) -> f64 {
        match side {
            Side::X => self.sigma2_x,
            Side::Y => self.sigma2_y,
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [self.mu_x, self.mu_y, self.sigma2_x, self.sigma2_y, self.rho]
    }

    /// Moment estimates from the data, always inside the parameter domain for
    /// non-degenerate samples.
    pub fn from_moments(m: &SampleMoments) -> Result<Self> {
        Self::new(m.mean_x, m.mean_y, m.sd_x * m.sd_x, m.sd_y * m.sd_y, m.corr)
    }
}

/// Constants `(mu'_x, sigma'_x, n'_x, mu'_y, sigma'_y, n'_y)` of the
/// conditional priors on the means and variances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub mu_prime_x: f64,
    pub sigma_prime_x: f64,
    pub n_prime_x: f64,
    pub mu_prime_y: f64,
    pub sigma_prime_y: f64,
    pub n_prime_y: f64,
}

impl PriorSpec {
    pub fn new(
        mu_prime_x: f64,
        sigma_prime_x: f64,
        n_prime_x: f64,
        mu_prime_y: f64,
        sigma_prime_y: f64,
        n_prime_y: f64,
    ) -> Result<Self> {
        let p = Self {
            mu_prime_x,
            sigma_prime_x,
            n_prime_x,
            mu_prime_y,
            sigma_prime_y,
            n_prime_y,
        };
        p.validate()?;
        Ok(p)
    }

    /// Errors name the offending configuration key (`prior.<key>`).
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("prior.mu_x", self.mu_prime_x), ("prior.mu_y", self.mu_prime_y)] {
            if !v.is_finite() {
                return Err(FusionError::config(key, format!("must be finite, got {v}")));
            }
        }
        for (key, v) in [("prior.sd_x", self.sigma_prime_x), ("prior.sd_y", self.sigma_prime_y)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FusionError::config(key, format!("must be > 0, got {v}")));
            }
        }
        for (key, v) in [("prior.n_x", self.n_prime_x), ("prior.n_y", self.n_prime_y)] {
            if !(v >= 2.0 && v.is_finite()) {
                return Err(FusionError::config(key, format!("must be >= 2, got {v}")));
            }
        }
        Ok(())
    }

    pub fn mu_prime(&self, side: Side) -> f64 {
        match side {
            Side::X => self.mu_prime_x,
            Side::Y => self.mu_prime_y,
        }
    }

    pub fn sigma_prime(&self, side: Side) -> f64 {
        match side {
            Side::X => self.sigma_prime_x,
            Side::Y => self.sigma_prime_y,
        }
    }

    pub fn n_prime(&self, side: Side) -> f64 {
        match side {
            Side::X => self.n_prime_x,
            Side::Y => self.n_prime_y,
        }
    }
}

/// Log of the likelihood of `(mu_x, mu_y, sigma2_x, sigma2_y)` given `rho`:
///
/// `-n log(sx sy) - s_xx / (2(1-r^2) sx^2) + r s_xy / ((1-r^2) sx sy) - s_yy / (2(1-r^2) sy^2)`
///
/// The factor `(2 pi)^-n (1 - rho^2)^(-n/2)` of the full bivariate normal
/// density is left out. It does not involve the four parameters this
/// likelihood is used to update.
pub fn log_likelihood(params: &ModelParams, stats: &SufficientStats) -> Result<f64> {
    params.validate()?;
    Ok(log_likelihood_unchecked(params, stats))
}

pub(crate) fn log_likelihood_unchecked(params: &ModelParams, stats: &SufficientStats) -> f64 {
    let c = stats.centered_sums(params.mu_x, params.mu_y);
    let sx = params.sigma2_x.sqrt();
    let sy = params.sigma2_y.sqrt();
    let one_m_r2 = 1.0 - params.rho * params.rho;
    let n = stats.n as f64;
    -n * (sx * sy).ln() - c.s_xx / (2.0 * one_m_r2 * params.sigma2_x)
        + params.rho * c.s_xy / (one_m_r2 * sx * sy)
        - c.s_yy / (2.0 * one_m_r2 * params.sigma2_y)
}

/// Builds a sample whose means, standard deviations and correlation equal the
/// targets up to rounding.
///
/// A Gaussian base sample is centred, Gram-Schmidt orthonormalized against the
/// constant vector and against each other, then rescaled.
pub fn synthesize_matching_dataset(
    n: usize,
    target: &SampleMoments,
    seed: u64,
) -> Result<ObservationSet> {
    if n < 3 {
        return Err(FusionError::Construction(format!("need n >= 3, got {n}")));
    }
    if !(target.sd_x > 0.0 && target.sd_y > 0.0) {
        return Err(FusionError::Construction("standard deviations must be > 0".into()));
    }
    if !(target.corr.abs() < 1.0) {
        return Err(FusionError::Construction(format!(
            "|corr| must be < 1, got {}",
            target.corr
        )));
    }
    if !(target.mean_x.is_finite() && target.mean_y.is_finite()) {
        return Err(FusionError::Construction("means must be finite".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Vec<f64> { (0..n).map(|_| StandardNormal.sample(&mut rng)).collect() };

    let mut e1 = draw();
    let mut e2 = draw();
    center(&mut e1);
    normalize(&mut e1)?;
    center(&mut e2);
    // Two passes of projection removal keep e2 orthogonal to working precision.
    for _ in 0..2 {
        let d = dot(&e1, &e2);
        e2.iter_mut().zip(&e1).for_each(|(b, a)| *b -= d * a);
        center(&mut e2);
    }
    normalize(&mut e2)?;

    let scale = ((n - 1) as f64).sqrt();
    let r = target.corr;
    let q = (1.0 - r * r).sqrt();
    let points = e1
        .iter()
        .zip(&e2)
        .map(|(&a, &b)| Observation {
            x: target.mean_x + target.sd_x * scale * a,
            y: target.mean_y + target.sd_y * scale * (r * a + q * b),
        })
        .collect();
    ObservationSet::new(points)
}

fn center(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let norm = dot(v, v).sqrt();
    if !(norm > 0.0) {
        return Err(FusionError::Construction("degenerate base sample".into()));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn per_point_centered(data: &ObservationSet, mx: f64, my: f64) -> (f64, f64, f64) {
        data.points().iter().fold((0.0, 0.0, 0.0), |(a, b, c), p| {
            let dx = p.x - mx;
            let dy = p.y - my;
            (a + dx * dx, b + dy * dy, c + dx * dy)
        })
    }

    fn full_bivariate_log_density(p: &ModelParams, data: &ObservationSet) -> f64 {
        let sx = p.sigma2_x.sqrt();
        let sy = p.sigma2_y.sqrt();
        let q = 1.0 - p.rho * p.rho;
        data.points()
            .iter()
            .map(|o| {
                let zx = (o.x - p.mu_x) / sx;
                let zy = (o.y - p.mu_y) / sy;
                -(2.0 * std::f64::consts::PI * sx * sy * q.sqrt()).ln()
                    - (zx * zx - 2.0 * p.rho * zx * zy + zy * zy) / (2.0 * q)
            })
            .sum()
    }

    #[test]
    fn sums_of_two_points() {
        let d = ObservationSet::from_pairs(&[(1.0, 2.0), (3.0, 4.0)]).unwrap();
        let s = compute_sufficient_stats(&d);
        assert_eq!(s.n, 2);
        assert_eq!((s.sum_x, s.sum_y), (4.0, 6.0));
        assert_eq!((s.sum_xx, s.sum_yy, s.sum_xy), (10.0, 20.0, 14.0));

        let c = s.centered_sums(2.0, 3.0);
        assert_eq!((c.s_xx, c.s_yy, c.s_xy), (2.0, 2.0, 2.0));
        let c0 = s.centered_sums(0.0, 0.0);
        assert_eq!((c0.s_xx, c0.s_yy, c0.s_xy), (10.0, 20.0, 14.0));
    }

    #[test]
    fn zero_data() {
        let d = ObservationSet::from_pairs(&[(0.0, 0.0); 3]).unwrap();
        let s = compute_sufficient_stats(&d);
        assert_eq!(s.n, 3);
        assert_eq!([s.sum_x, s.sum_y, s.sum_xx, s.sum_yy, s.sum_xy], [0.0; 5]);
    }

    #[test]
    fn too_few_points_and_non_finite() {
        assert!(matches!(
            ObservationSet::from_pairs(&[(1.0, 1.0)]),
            Err(FusionError::TooFewObservations { actual: 1, .. })
        ));
        assert!(matches!(
            ObservationSet::from_pairs(&[(1.0, 1.0), (f64::NAN, 0.0)]),
            Err(FusionError::NonFiniteObservation { row: 1 })
        ));
    }

    #[test]
    fn standard_normal_sums_match_second_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = (0..1000)
            .map(|_| (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let d = ObservationSet::from_pairs(&pts).unwrap();
        let s = compute_sufficient_stats(&d);
        let sum = |f: &dyn Fn(&(f64, f64)) -> f64| pts.iter().map(f).sum::<f64>();
        assert_eq!(s.n, 1000);
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        assert!(rel(s.sum_x, sum(&|p| p.0)));
        assert!(rel(s.sum_y, sum(&|p| p.1)));
        assert!(rel(s.sum_xx, sum(&|p| p.0 * p.0)));
        assert!(rel(s.sum_yy, sum(&|p| p.1 * p.1)));
        assert!(rel(s.sum_xy, sum(&|p| p.0 * p.1)));
    }

    #[test]
    fn likelihood_vanishes_at_single_point_centre() {
        // n >= 2 is required, so use two copies: each contributes zero.
        let d = ObservationSet::from_pairs(&[(0.5, -0.25), (0.5, -0.25)]).unwrap();
        let s = compute_sufficient_stats(&d);
        let p = ModelParams::new(0.5, -0.25, 1.0, 1.0, 0.3).unwrap();
        assert!(log_likelihood(&p, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn likelihood_factorizes_at_zero_correlation() {
        let d = ObservationSet::from_pairs(&[(1.0, 2.0), (3.0, -4.0), (0.5, 0.7)]).unwrap();
        let s = compute_sufficient_stats(&d);
        let p = ModelParams::new(0.4, -0.1, 2.0, 0.7, 0.0).unwrap();
        let (sxx, syy, _) = per_point_centered(&d, p.mu_x, p.mu_y);
        let n = 3.0;
        let expected = (-n * p.sigma2_x.sqrt().ln() - sxx / (2.0 * p.sigma2_x))
            + (-n * p.sigma2_y.sqrt().ln() - syy / (2.0 * p.sigma2_y));
        let got = log_likelihood(&p, &s).unwrap();
        assert!((got - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn likelihood_domain_errors() {
        let d = ObservationSet::from_pairs(&[(1.0, 2.0), (3.0, 4.0)]).unwrap();
        let s = compute_sufficient_stats(&d);
        let bad_rho = ModelParams { mu_x: 0.0, mu_y: 0.0, sigma2_x: 1.0, sigma2_y: 1.0, rho: 1.0 };
        assert!(matches!(log_likelihood(&bad_rho, &s), Err(FusionError::Domain(_))));
        let bad_var = ModelParams { sigma2_x: 0.0, ..bad_rho.with(ParamId::Rho, 0.0) };
        assert!(matches!(log_likelihood(&bad_var, &s), Err(FusionError::Domain(_))));
    }

    #[test]
    fn likelihood_differs_from_full_density_by_rho_constant() {
        let d = synthesize_matching_dataset(
            40,
            &SampleMoments { mean_x: 0.3, mean_y: -0.2, sd_x: 1.4, sd_y: 0.6, corr: -0.4 },
            5,
        )
        .unwrap();
        let s = compute_sufficient_stats(&d);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho: f64 = 0.55;
        let n = d.len() as f64;
        let offset = n * (2.0 * std::f64::consts::PI * (1.0 - rho * rho).sqrt()).ln();
        for _ in 0..20 {
            let u: f64 = StandardNormal.sample(&mut rng);
            let v: f64 = StandardNormal.sample(&mut rng);
            let p = ModelParams::new(u, v, (0.5 * u).exp(), (0.3 * v).exp(), rho).unwrap();
            let diff = log_likelihood(&p, &s).unwrap() - full_bivariate_log_density(&p, &d);
            assert!((diff - offset).abs() < 1e-9, "{diff} vs {offset}");
        }
    }

    #[test]
    fn synthesized_reference_sample_matches_targets() {
        let t = SampleMoments { mean_x: 0.0925, mean_y: 0.0400, sd_x: 1.053, sd_y: 0.866, corr: 0.780 };
        let d = synthesize_matching_dataset(100, &t, 2024).unwrap();
        assert_eq!(d.len(), 100);
        let m = compute_sufficient_stats(&d).moments();
        for (got, want) in [
            (m.mean_x, t.mean_x),
            (m.mean_y, t.mean_y),
            (m.sd_x, t.sd_x),
            (m.sd_y, t.sd_y),
            (m.corr, t.corr),
        ] {
            assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
        }
    }

    #[test]
    fn synthesized_zero_correlation() {
        let t = SampleMoments { mean_x: 1.0, mean_y: 2.0, sd_x: 1.0, sd_y: 3.0, corr: 0.0 };
        for seed in 0..5 {
            let m = compute_sufficient_stats(&synthesize_matching_dataset(3, &t, seed).unwrap()).moments();
            assert!(m.corr.abs() < 1e-10);
        }
    }

    #[test]
    fn synthesis_rejects_bad_targets() {
        let t = SampleMoments { mean_x: 0.0, mean_y: 0.0, sd_x: 1.0, sd_y: 1.0, corr: 1.0 };
        assert!(matches!(synthesize_matching_dataset(10, &t, 0), Err(FusionError::Construction(_))));
        let t = SampleMoments { corr: 0.2, ..t };
        assert!(matches!(synthesize_matching_dataset(2, &t, 0), Err(FusionError::Construction(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let d = ObservationSet::from_pairs(&[(0.1, 1.0 / 3.0), (-2.5e-7, 1e10)]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x,y\n"));
        let back = ObservationSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let err = ObservationSet::read_csv("a,b\n1,2\n3,4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, FusionError::InvalidConfig { .. }));
    }

    #[test]
    fn prior_validation_names_key() {
        let err = PriorSpec::new(0.3, 1.2, 1.5, 0.2, 0.75, 100.0).unwrap_err();
        assert!(err.to_string().contains("prior.n_x"), "{err}");
        let err = PriorSpec::new(0.3, 1.2, 50.0, 0.2, -1.0, 100.0).unwrap_err();
        assert!(err.to_string().contains("prior.sd_y"), "{err}");
    }

    proptest! {
        #[test]
        fn centered_sums_match_per_point(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..60),
            mx in -20.0f64..20.0,
            my in -20.0f64..20.0,
        ) {
            let d = ObservationSet::from_pairs(&pts).unwrap();
            let c = compute_sufficient_stats(&d).centered_sums(mx, my);
            let (a, b, x) = per_point_centered(&d, mx, my);
            // Expansion from raw sums cancels terms of size up to sum_xx and
            // n*mu^2, so the error is relative to that scale.
            let s = compute_sufficient_stats(&d);
            let n = d.len() as f64;
            let sx = s.sum_xx + n * mx * mx;
            let sy = s.sum_yy + n * my * my;
            prop_assert!((c.s_xx - a).abs() <= 1e-12 * sx.max(a));
            prop_assert!((c.s_yy - b).abs() <= 1e-12 * sy.max(b));
            prop_assert!((c.s_xy - x).abs() <= 1e-12 * (sx * sy).sqrt().max(1.0));
        }

        #[test]
        fn likelihood_is_permutation_invariant(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..30),
            rho in -0.95f64..0.95,
        ) {
            let d = ObservationSet::from_pairs(&pts).unwrap();
            let mut rev = pts.clone();
            rev.reverse();
            let r = ObservationSet::from_pairs(&rev).unwrap();
            let p = ModelParams::new(0.1, -0.2, 1.3, 0.8, rho).unwrap();
            let a = log_likelihood(&p, &compute_sufficient_stats(&d)).unwrap();
            let b = log_likelihood(&p, &compute_sufficient_stats(&r)).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
}
