//! Trace summaries, convergence diagnostics, histograms, reference density
//! curves and scan-order comparison.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::conditionals::{joint_prior_marginals, ParamId};
use crate::densities::{Density1D, LocationScaleT, NormalLaw, ScaledInvChiSquareSigma, LN_SQRT_2PI};
use crate::error::{FusionError, Result};
use crate::fiducial::{FiducialRho, TruncationConfig};
use crate::model::{ModelParams, PriorSpec, Side};

/// One value per model parameter, serialized with the parameter names as keys.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerParam<T> {
    pub mu_x: T,
    pub mu_y: T,
    pub sigma2_x: T,
    pub sigma2_y: T,
    pub rho: T,
}

impl<T: Copy> PerParam<T> {
    pub fn from_fn(mut f: impl FnMut(ParamId) -> T) -> Self {
        Self {
            mu_x: f(ParamId::MuX),
            mu_y: f(ParamId::MuY),
            sigma2_x: f(ParamId::Sigma2X),
            sigma2_y: f(ParamId::Sigma2Y),
            rho: f(ParamId::Rho),
        }
    }

    pub fn get(&self, p: ParamId) -> T {
        match p {
            ParamId::MuX => self.mu_x,
            ParamId::MuY => self.mu_y,
            ParamId::Sigma2X => self.sigma2_x,
            ParamId::Sigma2Y => self.sigma2_y,
            ParamId::Rho => self.rho,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, T)> + '_ {
        ParamId::ALL.into_iter().map(move |p| (p, self.get(p)))
    }
}

fn column(states: &[ModelParams], p: ParamId) -> Vec<f64> {
    states.iter().map(|s| s.get(p)).collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Monte Carlo standard error of the mean from `floor(sqrt(L))` batch means.
pub fn batch_means_mcse(values: &[f64]) -> f64 {
    let len = values.len();
    let batches = (len as f64).sqrt().floor() as usize;
    if batches < 2 {
        return f64::NAN;
    }
    let size = len / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| mean(&values[b * size..(b + 1) * size]))
        .collect();
    (sample_variance(&means) / batches as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
    pub mcse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub length: usize,
    pub params: PerParam<ParamSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<PerParam<f64>>,
}

fn summarize_values(values: &[f64]) -> ParamSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sd = if values.len() > 1 { sample_variance(values).sqrt() } else { 0.0 };
    ParamSummary {
        mean: mean(values),
        sd,
        q025: quantile_sorted(&sorted, 0.025),
        median: quantile_sorted(&sorted, 0.5),
        q975: quantile_sorted(&sorted, 0.975),
        mcse: batch_means_mcse(values),
    }
}

pub fn summarize(states: &[ModelParams], acceptance: Option<[f64; 5]>) -> Result<ChainSummary> {
    if states.is_empty() {
        return Err(FusionError::Empty("trace"));
    }
    Ok(ChainSummary {
        length: states.len(),
        params: PerParam::from_fn(|p| summarize_values(&column(states, p))),
        acceptance: acceptance.map(|a| PerParam::from_fn(|p| a[p.index()])),
    })
}

pub const DEFAULT_PSRF_THRESHOLD: f64 = 1.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMoments {
    pub mean: PerParam<f64>,
    pub variance: PerParam<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Which estimator produced `psrf`.
    pub variant: String,
    pub chains: usize,
    pub length: usize,
    pub threshold: f64,
    pub psrf: PerParam<f64>,
    pub per_chain: Vec<ChainMoments>,
    pub pass: bool,
}

/// Potential scale reduction `sqrt((((L - 1) / L) W + B / L) / W)` of equal
/// length series, with `B / L` the variance of the chain means and `W` the
/// mean within-chain variance. No `(m + 1) / m` correction.
pub fn psrf(series: &[&[f64]]) -> Result<f64> {
    if series.len() < 2 {
        return Err(FusionError::Shape(format!("need at least 2 chains, got {}", series.len())));
    }
    let len = series[0].len();
    if series.iter().any(|s| s.len() != len) {
        return Err(FusionError::Shape("chains differ in length".into()));
    }
    if len < 10 {
        return Err(FusionError::Shape(format!("chains need at least 10 draws, got {len}")));
    }
    let l = len as f64;
    let means: Vec<f64> = series.iter().map(|s| mean(s)).collect();
    let w = mean(&series.iter().map(|s| sample_variance(s)).collect::<Vec<_>>());
    let b_over_l = sample_variance(&means);
    Ok((((l - 1.0) / l * w + b_over_l) / w).sqrt())
}

pub fn gelman_rubin(chains: &[&[ModelParams]], threshold: f64) -> Result<ConvergenceReport> {
    if chains.len() < 2 {
        return Err(FusionError::Shape(format!("need at least 2 chains, got {}", chains.len())));
    }
    let len = chains[0].len();
    if chains.iter().any(|c| c.len() != len) {
        let lens: Vec<usize> = chains.iter().map(|c| c.len()).collect();
        return Err(FusionError::Shape(format!("chains differ in length: {lens:?}")));
    }
    let columns: Vec<PerParam<Vec<f64>>> = chains
        .iter()
        .map(|c| PerParam {
            mu_x: column(c, ParamId::MuX),
            mu_y: column(c, ParamId::MuY),
            sigma2_x: column(c, ParamId::Sigma2X),
            sigma2_y: column(c, ParamId::Sigma2Y),
            rho: column(c, ParamId::Rho),
        })
        .collect();
    let pick = |c: &PerParam<Vec<f64>>, p: ParamId| -> Vec<f64> {
        match p {
            ParamId::MuX => c.mu_x.clone(),
            ParamId::MuY => c.mu_y.clone(),
            ParamId::Sigma2X => c.sigma2_x.clone(),
            ParamId::Sigma2Y => c.sigma2_y.clone(),
            ParamId::Rho => c.rho.clone(),
        }
    };
    let mut values = [0.0; 5];
    for p in ParamId::ALL {
        let cols: Vec<Vec<f64>> = columns.iter().map(|c| pick(c, p)).collect();
        let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
        values[p.index()] = psrf(&refs)?;
    }
    let psrf = PerParam::from_fn(|p| values[p.index()]);
    let per_chain = chains
        .iter()
        .map(|c| ChainMoments {
            mean: PerParam::from_fn(|p| mean(&column(c, p))),
            variance: PerParam::from_fn(|p| sample_variance(&column(c, p))),
        })
        .collect();
    Ok(ConvergenceReport {
        variant: "gelman-rubin-1992 (uncorrected)".into(),
        chains: chains.len(),
        length: len,
        threshold,
        pass: ParamId::ALL.iter().all(|p| psrf.get(*p) < threshold),
        psrf,
        per_chain,
    })
}

// ---------------------------------------------------------------------------
// Curves

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Histogram,
    FiducialMu,
    FiducialSigma,
    PriorMu,
    PriorSigma,
    ConfidenceRho,
    FiducialRhoConditional,
    NormalMeanFiducial,
}

/// Density values on a strictly increasing grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityCurve {
    pub kind: CurveKind,
    pub abscissae: Vec<f64>,
    pub densities: Vec<f64>,
}

impl DensityCurve {
    pub fn trapezoid_area(&self) -> f64 {
        self.abscissae
            .windows(2)
            .zip(self.densities.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Mean of the abscissa under the curve, by the trapezoid rule.
    pub fn mean(&self) -> f64 {
        let num: f64 = self
            .abscissae
            .windows(2)
            .zip(self.densities.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (x[0] * y[0] + x[1] * y[1]))
            .sum();
        num / self.trapezoid_area()
    }

    /// Abscissa where the trapezoid CDF reaches `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let total = self.trapezoid_area();
        let mut acc = 0.0;
        for (x, y) in self.abscissae.windows(2).zip(self.densities.windows(2)) {
            let piece = 0.5 * (x[1] - x[0]) * (y[0] + y[1]) / total;
            if acc + piece >= p && piece > 0.0 {
                return x[0] + (p - acc) / piece * (x[1] - x[0]);
            }
            acc += piece;
        }
        *self.abscissae.last().expect("nonempty curve")
    }

    /// `value,density` rows at 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "value,density")?;
        for (x, d) in self.abscissae.iter().zip(&self.densities) {
            writeln!(out, "{x:.16e},{d:.16e}")?;
        }
        out.flush()?;
        Ok(())
    }
}

pub const DEFAULT_GRID_POINTS: usize = 512;

/// Tabulates `law` on `points` equally spaced abscissae over `range`.
pub fn tabulate<D: Density1D>(law: &D, kind: CurveKind, range: (f64, f64), points: usize) -> DensityCurve {
    let points = points.max(2);
    let (lo, hi) = range;
    let abscissae: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let densities = abscissae.iter().map(|&x| law.pdf(x)).collect();
    DensityCurve { kind, abscissae, densities }
}

/// Density-normalized histogram; bin centres as abscissae.
pub fn histogram(values: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<DensityCurve> {
    if values.is_empty() {
        return Err(FusionError::Empty("histogram values"));
    }
    if bins == 0 {
        return Err(FusionError::domain("bins must be >= 1"));
    }
    let (mut lo, mut hi) = range.unwrap_or_else(|| {
        values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)))
    });
    if hi <= lo {
        // a single repeated value gets a unit-width bar around it
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    let mut inside = 0u64;
    for &v in values {
        if v < lo || v > hi {
            continue;
        }
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
        inside += 1;
    }
    if inside == 0 {
        return Err(FusionError::Empty("histogram values inside range"));
    }
    let norm = inside as f64 * width;
    Ok(DensityCurve {
        kind: CurveKind::Histogram,
        abscissae: (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect(),
        densities: counts.iter().map(|&c| c as f64 / norm).collect(),
    })
}

/// Histogram of a parameter column, on the standard-deviation scale for the
/// variances.
pub fn histogram_param(states: &[ModelParams], param: ParamId, bins: usize) -> Result<DensityCurve> {
    let mut v = column(states, param);
    if param.is_variance() {
        v.iter_mut().for_each(|x| *x = x.sqrt());
    }
    histogram(&v, bins, None)
}

/// Fiducial law of a normal mean with unknown variance: `(mu - xbar) / (s / sqrt(n))`
/// is Student-t on `n - 1` degrees of freedom.
pub fn marginal_fiducial_mu_law(xbar: f64, s: f64, n: usize) -> Result<LocationScaleT> {
    if n < 2 {
        return Err(FusionError::domain(format!("n must be >= 2, got {n}")));
    }
    if !(s > 0.0) {
        return Err(FusionError::domain(format!("s must be > 0, got {s}")));
    }
    LocationScaleT::new(xbar, s / (n as f64).sqrt(), (n - 1) as f64)
}

pub fn marginal_fiducial_mu(xbar: f64, s: f64, n: usize) -> Result<DensityCurve> {
    ReferenceCurve::FiducialMu { xbar, s, n }.tabulate(DEFAULT_GRID_POINTS)
}

/// Fiducial law of a normal standard deviation: `(n - 1) s^2 / sigma^2` is
/// chi-square on `n - 1` degrees of freedom.
pub fn marginal_fiducial_sigma_law(s: f64, n: usize) -> Result<ScaledInvChiSquareSigma> {
    if n < 2 {
        return Err(FusionError::domain(format!("n must be >= 2, got {n}")));
    }
    ScaledInvChiSquareSigma::new((n - 1) as f64, s * s)
}

pub fn marginal_fiducial_sigma(s: f64, n: usize) -> Result<DensityCurve> {
    ReferenceCurve::FiducialSigma { s, n }.tabulate(DEFAULT_GRID_POINTS)
}

pub fn prior_mu_curve(prior: &PriorSpec, side: Side) -> DensityCurve {
    ReferenceCurve::PriorMu { prior: *prior, side }.tabulate(DEFAULT_GRID_POINTS).expect("validated prior")
}

pub fn prior_sigma_curve(prior: &PriorSpec, side: Side) -> DensityCurve {
    ReferenceCurve::PriorSigma { prior: *prior, side }.tabulate(DEFAULT_GRID_POINTS).expect("validated prior")
}

/// Confidence density of a correlation from the Fisher z-transform of the
/// sample correlation, `atanh(r) ~ N(atanh(rho), 1 / (n - 3))`.
#[derive(Clone, Copy, Debug)]
pub struct ConfidenceRho {
    pub r: f64,
    pub n: usize,
}

impl ConfidenceRho {
    pub fn new(r: f64, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(FusionError::domain(format!("n must be >= 4, got {n}")));
        }
        if !(r.abs() < 1.0) {
            return Err(FusionError::domain(format!("|r| must be < 1, got {r}")));
        }
        Ok(Self { r, n })
    }

    fn precision_root(&self) -> f64 {
        ((self.n - 3) as f64).sqrt()
    }

    pub fn median(&self) -> f64 {
        self.r
    }
}

impl Density1D for ConfidenceRho {
    fn ln_pdf(&self, rho: f64) -> f64 {
        if !(rho.abs() < 1.0) {
            return f64::NEG_INFINITY;
        }
        let k = self.precision_root();
        let z = k * (self.r.atanh() - rho.atanh());
        k.ln() - LN_SQRT_2PI - 0.5 * z * z - (1.0 - rho * rho).ln()
    }

    fn plot_range(&self) -> (f64, f64) {
        let half = 8.0 / self.precision_root();
        let z = self.r.atanh();
        ((z - half).tanh(), (z + half).tanh())
    }
}

pub fn confidence_density_rho(r: f64, n: usize) -> Result<DensityCurve> {
    ReferenceCurve::ConfidenceRho { r, n }.tabulate(DEFAULT_GRID_POINTS)
}

/// `mu | sigma^2 ~ N(xbar, sigma^2 / n)`, the fiducial law of a normal mean
/// with known variance.
pub fn normal_mean_fiducial(xbar: f64, sigma2: f64, n: usize) -> Result<DensityCurve> {
    ReferenceCurve::NormalMeanFiducial { xbar, sigma2, n }.tabulate(DEFAULT_GRID_POINTS)
}

struct FiducialRhoCurve(FiducialRho);

impl Density1D for FiducialRhoCurve {
    fn ln_pdf(&self, x: f64) -> f64 {
        self.0.ln_pdf(x)
    }

    fn plot_range(&self) -> (f64, f64) {
        let s = self.0.support();
        (s.rho_lo, s.rho_hi)
    }
}

/// The fiducial conditional of `rho` on its support. With a wide truncation
/// the support spans nearly all of `(-1, 1)`, so the grid is restricted to
/// where `|gamma| <= 8`.
pub fn fiducial_rho_conditional(rho_hat: f64, n: usize, trunc: TruncationConfig) -> Result<DensityCurve> {
    ReferenceCurve::FiducialRhoConditional { rho_hat, n, trunc }.tabulate(DEFAULT_GRID_POINTS)
}

/// Any of the reference curves, for callers that pick the kind at run time.
#[derive(Clone, Copy, Debug)]
pub enum ReferenceCurve {
    PriorMu { prior: PriorSpec, side: Side },
    PriorSigma { prior: PriorSpec, side: Side },
    FiducialMu { xbar: f64, s: f64, n: usize },
    FiducialSigma { s: f64, n: usize },
    ConfidenceRho { r: f64, n: usize },
    FiducialRhoConditional { rho_hat: f64, n: usize, trunc: TruncationConfig },
    NormalMeanFiducial { xbar: f64, sigma2: f64, n: usize },
}

impl ReferenceCurve {
    pub fn tabulate(&self, points: usize) -> Result<DensityCurve> {
        if points < 2 {
            return Err(FusionError::domain(format!("a curve needs at least 2 points, got {points}")));
        }
        fn on_range<D: Density1D>(law: &D, kind: CurveKind, points: usize) -> DensityCurve {
            tabulate(law, kind, law.plot_range(), points)
        }
        Ok(match *self {
            ReferenceCurve::PriorMu { prior, side } => {
                on_range(&joint_prior_marginals(&prior, side).0, CurveKind::PriorMu, points)
            }
            ReferenceCurve::PriorSigma { prior, side } => {
                on_range(&joint_prior_marginals(&prior, side).1, CurveKind::PriorSigma, points)
            }
            ReferenceCurve::FiducialMu { xbar, s, n } => {
                on_range(&marginal_fiducial_mu_law(xbar, s, n)?, CurveKind::FiducialMu, points)
            }
            ReferenceCurve::FiducialSigma { s, n } => {
                on_range(&marginal_fiducial_sigma_law(s, n)?, CurveKind::FiducialSigma, points)
            }
            ReferenceCurve::ConfidenceRho { r, n } => {
                on_range(&ConfidenceRho::new(r, n)?, CurveKind::ConfidenceRho, points)
            }
            ReferenceCurve::FiducialRhoConditional { rho_hat, n, trunc } => {
                let law = FiducialRho::new(rho_hat, n, trunc)?;
                let inner = FiducialRho::new(rho_hat, n, TruncationConfig { alpha: trunc.alpha.min(8.0) })?;
                let s = inner.support();
                tabulate(&FiducialRhoCurve(law), CurveKind::FiducialRhoConditional, (s.rho_lo, s.rho_hi), points)
            }
            ReferenceCurve::NormalMeanFiducial { xbar, sigma2, n } => {
                if !(sigma2 > 0.0) || n == 0 {
                    return Err(FusionError::domain("need sigma2 > 0 and n >= 1"));
                }
                on_range(&NormalLaw { mean: xbar, var: sigma2 / n as f64 }, CurveKind::NormalMeanFiducial, points)
            }
        })
    }
}

// ---------------------------------------------------------------------------
// Scan-order comparison

pub const SCAN_Z_THRESHOLD: f64 = 3.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    /// Mean differences in units of the pooled batch-means standard error.
    pub z: PerParam<f64>,
    pub max_corr_diff: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanComparison {
    pub threshold: f64,
    pub mean: Vec<(String, PerParam<f64>)>,
    pub mcse: Vec<(String, PerParam<f64>)>,
    pub pairs: Vec<PairComparison>,
    pub flagged: bool,
}

fn correlation_matrix(states: &[ModelParams]) -> [[f64; 5]; 5] {
    let cols: Vec<Vec<f64>> = ParamId::ALL.iter().map(|p| column(states, *p)).collect();
    let means: Vec<f64> = cols.iter().map(|c| mean(c)).collect();
    let mut m = [[0.0; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            let (mut sij, mut sii, mut sjj) = (0.0, 0.0, 0.0);
            for k in 0..states.len() {
                let a = cols[i][k] - means[i];
                let b = cols[j][k] - means[j];
                sij += a * b;
                sii += a * a;
                sjj += b * b;
            }
            m[i][j] = sij / (sii * sjj).sqrt();
        }
    }
    m
}

/// Compares every pair of labelled traces. A pair is flagged when any
/// parameter mean differs by more than [`SCAN_Z_THRESHOLD`] pooled standard
/// errors.
pub fn compare_scan_orders(traces: &[(String, &[ModelParams])]) -> Result<ScanComparison> {
    if traces.len() < 2 {
        return Err(FusionError::Shape("need at least 2 traces to compare".into()));
    }
    if traces.iter().any(|(_, t)| t.len() < 4) {
        return Err(FusionError::Empty("trace too short to compare"));
    }
    let means: Vec<PerParam<f64>> = traces
        .iter()
        .map(|(_, t)| PerParam::from_fn(|p| mean(&column(t, p))))
        .collect();
    let mcses: Vec<PerParam<f64>> = traces
        .iter()
        .map(|(_, t)| PerParam::from_fn(|p| batch_means_mcse(&column(t, p))))
        .collect();
    let corrs: Vec<[[f64; 5]; 5]> = traces.iter().map(|(_, t)| correlation_matrix(t)).collect();

    let mut pairs = Vec::new();
    for i in 0..traces.len() {
        for j in i + 1..traces.len() {
            let z = PerParam::from_fn(|p| {
                let d = means[i].get(p) - means[j].get(p);
                if d == 0.0 {
                    0.0
                } else {
                    d / (mcses[i].get(p).powi(2) + mcses[j].get(p).powi(2)).sqrt()
                }
            });
            let mut max_corr_diff: f64 = 0.0;
            for a in 0..5 {
                for b in 0..5 {
                    let d = corrs[i][a][b] - corrs[j][a][b];
                    if d.is_finite() {
                        max_corr_diff = max_corr_diff.max(d.abs());
                    }
                }
            }
            let flagged = z.iter().any(|(_, v)| !(v.abs() <= SCAN_Z_THRESHOLD));
            pairs.push(PairComparison {
                a: traces[i].0.clone(),
                b: traces[j].0.clone(),
                z,
                max_corr_diff,
                flagged,
            });
        }
    }
    let flagged = pairs.iter().any(|p| p.flagged);
    let labels = traces.iter().map(|(l, _)| l.clone());
    Ok(ScanComparison {
        threshold: SCAN_Z_THRESHOLD,
        mean: labels.clone().zip(means).collect(),
        mcse: labels.zip(mcses).collect(),
        pairs,
        flagged,
    })
}
