use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use fusion_core::analysis::{compare_scan_orders, gelman_rubin, summarize, ReferenceCurve, DEFAULT_PSRF_THRESHOLD};
use fusion_core::fiducial::{max_alpha, DEFAULT_SAFETY};
use fusion_core::sampler::{read_trace_csv, run_parallel, write_trace_csv, Target, TruncPolicy};
use fusion_core::{
    compute_sufficient_stats, reference, run_chain, run_multi_chain, synthesize_matching_dataset, ChainTrace,
    ModelParams, ObservationSet, RunConfig, SampleMoments, SamplerConfig, ScanPolicy, Side, TruncationConfig,
};

use crate::{CompareArgs, CurveKindArg, CurvesArgs, DiagnoseArgs, RunArgs, SamplerOverrides, SideArg, SimulateArgs};

pub enum Status {
    Ok,
    DiagnosticsFailed,
}

const SEED_ENV: &str = "FUSION_SEED";

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => Ok(Some(
            s.trim().parse().with_context(|| format!("{SEED_ENV}={s:?} is not an unsigned integer"))?,
        )),
        Err(_) => Ok(None),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn read_data(path: &Path) -> Result<(ObservationSet, Vec<u8>)> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let data = ObservationSet::read_csv(bytes.as_slice()).with_context(|| format!("in {}", path.display()))?;
    Ok((data, bytes))
}

/// Configuration file (or the worked-example prior) with command-line
/// overrides applied. The seed falls back to `$FUSION_SEED` only when neither
/// the flag nor the file sets it.
fn resolve_config(over: &SamplerOverrides, scan: Option<&str>, chains: Option<usize>) -> Result<RunConfig> {
    let (mut cfg, file_seed) = match &over.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
            let value: Value =
                serde_json::from_str(&text).with_context(|| format!("{} is not valid JSON", path.display()))?;
            let cfg = RunConfig::from_value(&value).with_context(|| format!("in {}", path.display()))?;
            (cfg, value.pointer("/sampler/seed").is_some())
        }
        None => (RunConfig::new(reference::prior(), SamplerConfig::default(), 1)?, false),
    };
    let s = &mut cfg.sampler;
    if let Some(v) = over.iterations {
        s.iterations = v;
    }
    if let Some(v) = over.burn_in {
        s.burn_in = v;
    }
    match (over.seed, file_seed) {
        (Some(v), _) => s.seed = v,
        (None, false) => s.seed = env_seed()?.unwrap_or(s.seed),
        (None, true) => {}
    }
    if let Some(a) = over.alpha {
        s.trunc = TruncPolicy::Fixed(a);
    }
    if let Some(f) = over.safety {
        s.trunc = TruncPolicy::Auto(f);
    }
    if over.no_adapt {
        s.adapt = false;
    }
    if let Some(text) = scan {
        s.scan = text.parse()?;
    }
    if let Some(c) = chains {
        cfg.chains = c;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn side_of(s: SideArg) -> Side {
    match s {
        SideArg::X => Side::X,
        SideArg::Y => Side::Y,
    }
}

pub fn simulate(a: SimulateArgs) -> Result<Status> {
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let targets = SampleMoments { mean_x: a.mean_x, mean_y: a.mean_y, sd_x: a.sd_x, sd_y: a.sd_y, corr: a.corr };
    let data = synthesize_matching_dataset(a.n, &targets, seed)?;
    data.write_csv(create(&a.out)?)?;
    let achieved = compute_sufficient_stats(&data).moments();
    println!(
        "{}",
        serde_json::to_string(&json!({ "n": data.len(), "seed": seed, "achieved": achieved, "out": a.out }))?
    );
    Ok(Status::Ok)
}

fn trace_name(chains: usize, i: usize) -> String {
    if chains == 1 {
        "trace.csv".to_string()
    } else {
        format!("trace_{i}.csv")
    }
}

pub fn run(a: RunArgs) -> Result<Status> {
    let cfg = resolve_config(&a.sampler, a.scan.as_deref(), a.chains)?;
    let (data, bytes) = read_data(&a.data)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;

    let seeds: Vec<u64> = (0..cfg.chains).map(|i| cfg.sampler.seed.wrapping_add(i as u64)).collect();
    let traces: Vec<String> = (0..cfg.chains).map(|i| trace_name(cfg.chains, i)).collect();
    let manifest = json!({
        "software": { "name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION") },
        "started_at": chrono::Utc::now().to_rfc3339(),
        "data": {
            "path": a.data,
            "sha256": hex::encode(Sha256::digest(&bytes)),
            "bytes": bytes.len(),
            "n": data.len(),
        },
        "config": cfg.to_value(),
        "seeds": seeds,
        "outputs": { "traces": traces, "summary": "summary.json" },
    });
    write_json(&a.out_dir.join("manifest.json"), &manifest)?;

    let runs: Vec<ChainTrace> = if cfg.chains == 1 {
        let init = ModelParams::from_moments(&compute_sufficient_stats(&data).moments())?;
        vec![run_chain(&data, &cfg.prior, &init, &cfg.sampler)?]
    } else {
        run_multi_chain(&data, &cfg.prior, &cfg.sampler, cfg.chains)?
    };
    for (trace, name) in runs.iter().zip(&traces) {
        let mut out = create(&a.out_dir.join(name))?;
        write_trace_csv(&trace.states, &mut out)?;
        out.flush()?;
    }

    let pooled: Vec<ModelParams> = runs.iter().flat_map(|t| t.states.iter().copied()).collect();
    let params = if pooled.is_empty() { Value::Null } else { serde_json::to_value(summarize(&pooled, None)?.params)? };
    let per_chain: Vec<Value> = runs
        .iter()
        .zip(&seeds)
        .map(|(t, seed)| {
            let accept: serde_json::Map<String, Value> = fusion_core::ParamId::ALL
                .iter()
                .map(|p| (p.name().to_string(), json!(t.acceptance_rates[p.index()])))
                .collect();
            json!({ "seed": seed, "init": t.init, "acceptance": accept, "final_proposals": t.final_scales })
        })
        .collect();
    let mut summary = json!({
        "chains": runs.len(),
        "length": runs.first().map_or(0, ChainTrace::len),
        "params": params,
        "per_chain": per_chain,
    });
    if runs.len() >= 2 && runs[0].len() >= 10 {
        let refs: Vec<&[ModelParams]> = runs.iter().map(|t| t.states.as_slice()).collect();
        summary["convergence"] = serde_json::to_value(gelman_rubin(&refs, DEFAULT_PSRF_THRESHOLD)?)?;
    }
    write_json(&a.out_dir.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(Status::Ok)
}

pub fn diagnose(a: DiagnoseArgs) -> Result<Status> {
    if a.traces.len() < 2 {
        bail!("diagnose needs at least 2 trace files, got {}", a.traces.len());
    }
    let chains = a
        .traces
        .iter()
        .map(|p| {
            let f = File::open(p).with_context(|| format!("cannot read {}", p.display()))?;
            read_trace_csv(BufReader::new(f)).with_context(|| format!("in {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[ModelParams]> = chains.iter().map(Vec::as_slice).collect();
    let report = gelman_rubin(&refs, a.threshold)?;
    let value = serde_json::to_value(&report)?;
    if let Some(out) = &a.out {
        write_json(out, &value)?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(if report.pass { Status::Ok } else { Status::DiagnosticsFailed })
}

pub fn curves(a: CurvesArgs) -> Result<Status> {
    let side = side_of(a.side);
    let (moments, n_data) = match &a.data {
        Some(p) => {
            let (data, _) = read_data(p)?;
            (compute_sufficient_stats(&data).moments(), data.len())
        }
        None => (reference::moments(), reference::N),
    };
    let n = a.n.unwrap_or(n_data);
    let (side_mean, side_sd) = match side {
        Side::X => (moments.mean_x, moments.sd_x),
        Side::Y => (moments.mean_y, moments.sd_y),
    };
    let xbar = a.xbar.unwrap_or(side_mean);
    let s = a.s.unwrap_or(side_sd);
    let prior = || -> Result<_> {
        Ok(match &a.config {
            Some(p) => RunConfig::from_path(p).with_context(|| format!("in {}", p.display()))?.prior,
            None => reference::prior(),
        })
    };
    let curve = match a.kind {
        CurveKindArg::PriorMu => ReferenceCurve::PriorMu { prior: prior()?, side },
        CurveKindArg::PriorSigma => ReferenceCurve::PriorSigma { prior: prior()?, side },
        CurveKindArg::FiducialMu => ReferenceCurve::FiducialMu { xbar, s, n },
        CurveKindArg::FiducialSigma => ReferenceCurve::FiducialSigma { s, n },
        CurveKindArg::ConfidenceRho => ReferenceCurve::ConfidenceRho { r: a.r.unwrap_or(moments.corr), n },
        CurveKindArg::FiducialRhoConditional => {
            let rho_hat = a.rho_hat.unwrap_or(moments.corr);
            let trunc = match a.alpha {
                Some(alpha) => TruncationConfig::new(alpha)?,
                None => max_alpha(rho_hat, n, DEFAULT_SAFETY)?,
            };
            ReferenceCurve::FiducialRhoConditional { rho_hat, n, trunc }
        }
        CurveKindArg::NormalMeanFiducial => {
            ReferenceCurve::NormalMeanFiducial { xbar, sigma2: a.sigma2.unwrap_or(s * s), n }
        }
    };
    let table = curve.tabulate(a.points)?;
    table.write_csv(create(&a.out)?)?;
    println!(
        "{}",
        serde_json::to_string(&json!({
            "kind": table.kind,
            "points": table.abscissae.len(),
            "area": table.trapezoid_area(),
            "out": a.out,
        }))?
    );
    Ok(Status::Ok)
}

pub fn compare_scans(a: CompareArgs) -> Result<Status> {
    if a.orders.len() < 2 {
        bail!("compare-scans needs at least 2 fixed orders, got {}", a.orders.len());
    }
    let mut scans = vec![("uniform".to_string(), ScanPolicy::UniformRandom)];
    for (i, text) in a.orders.iter().enumerate() {
        let scan: ScanPolicy = text.parse().with_context(|| format!("order {}: {text:?}", i + 1))?;
        if scan == ScanPolicy::UniformRandom {
            bail!("order {}: expected a permutation of the five parameters, got {text:?}", i + 1);
        }
        scans.push((format!("{}:{scan}", i + 1), scan));
    }
    let cfg = resolve_config(&a.sampler, None, None)?;
    let (data, _) = read_data(&a.data)?;
    let target = Target::new(&data, cfg.prior)?;
    let init = ModelParams::from_moments(&target.stats.moments())?;
    // every chain uses the same seed so identical orders give identical traces
    let jobs: Vec<(ModelParams, SamplerConfig)> = scans
        .iter()
        .map(|(_, scan)| (init, SamplerConfig { scan: scan.clone(), ..cfg.sampler.clone() }))
        .collect();
    let runs = run_parallel(&target, &jobs)?;
    let labelled: Vec<(String, &[ModelParams])> =
        scans.iter().zip(&runs).map(|((label, _), t)| (label.clone(), t.states.as_slice())).collect();
    let report = compare_scan_orders(&labelled)?;
    let value = json!({ "seed": cfg.sampler.seed, "iterations": cfg.sampler.iterations, "comparison": report });
    if let Some(out) = &a.out {
        write_json(out, &value)?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(if report.flagged { Status::DiagnosticsFailed } else { Status::Ok })
}
