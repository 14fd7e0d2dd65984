use fusion_core::analysis::compare_scan_orders;
use fusion_core::fiducial::FiducialRho;
use fusion_core::quadrature::integrate;
use fusion_core::sampler::{rho_update, run_chain_on, Target, TruncPolicy};
use fusion_core::{
    reference, run_chain, synthesize_matching_dataset, ChainState, ModelParams, ObservationSet, PriorSpec,
    SamplerConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn data() -> ObservationSet {
    synthesize_matching_dataset(reference::N, &reference::moments(), 1).unwrap()
}

#[test]
fn frozen_chain_rho_law_matches_quadrature() {
    let data = data();
    let target = Target::new(&data, reference::prior()).unwrap();
    let mut state = ChainState { params: ModelParams::new(0.1, 0.05, 1.2, 0.7, 0.0).unwrap() };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let policy = TruncPolicy::default();
    let mut draws = Vec::new();
    let mut first = None;
    for _ in 0..20_000 {
        let (next, info) = rho_update(&state, &target, &policy, &mut rng).unwrap();
        assert!(info.support.contains(info.rho));
        first.get_or_insert((info.rho_hat, info.alpha));
        state = next;
        draws.push(state.params.rho);
    }
    let (rho_hat, alpha) = first.unwrap();
    let law = FiducialRho::new(rho_hat, reference::N, fusion_core::TruncationConfig { alpha }).unwrap();
    draws.sort_by(f64::total_cmp);
    let n = draws.len() as f64;
    let mut prev = law.support().rho_lo;
    let mut acc = 0.0;
    let mut d = 0.0f64;
    for (i, &x) in draws.iter().enumerate() {
        acc += integrate(|r| law.pdf(r), prev, x, 1e-12).value;
        prev = x;
        d = d.max((acc - i as f64 / n).abs()).max(((i + 1) as f64 / n - acc).abs());
    }
    assert!(d < 1.6276 / n.sqrt(), "KS D = {d}");
}

#[test]
fn short_reference_run_centres_on_sample_correlation() {
    let data = data();
    let init = ModelParams::from_moments(&reference::moments()).unwrap();
    let cfg = SamplerConfig { iterations: 50_000, burn_in: 2_000, seed: 3, ..SamplerConfig::default() };
    let trace = run_chain(&data, &reference::prior(), &init, &cfg).unwrap();
    assert_eq!(trace.len(), 50_000);
    let mean = trace.values(fusion_core::ParamId::Rho).iter().sum::<f64>() / 50_000.0;
    assert!((mean - 0.78).abs() < 0.05, "{mean}");
    for r in trace.acceptance_rates {
        assert!((0.0..=1.0).contains(&r));
    }
}

#[test]
fn forced_equal_seeds_agree_and_distinct_seeds_differ_at_first_step() {
    let data = data();
    let target = Target::new(&data, reference::prior()).unwrap();
    let init = ModelParams::from_moments(&reference::moments()).unwrap();
    let cfg = SamplerConfig { iterations: 500, burn_in: 0, seed: 77, ..SamplerConfig::default() };
    let a = run_chain_on(&target, &init, &cfg).unwrap();
    let b = run_chain_on(&target, &init, &cfg).unwrap();
    assert_eq!(a.states, b.states);
    let c = run_chain_on(&target, &init, &SamplerConfig { seed: 78, ..cfg.clone() }).unwrap();
    assert_ne!(a.states[0], c.states[0]);
}

#[test]
fn altered_prior_is_flagged_by_scan_comparison() {
    let data = data();
    let init = ModelParams::from_moments(&reference::moments()).unwrap();
    let cfg = SamplerConfig { iterations: 100_000, burn_in: 2_000, seed: 5, ..SamplerConfig::default() };
    let base = run_chain(&data, &reference::prior(), &init, &cfg).unwrap();
    let shifted_prior = PriorSpec::new(3.0, 1.2, 50.0, 0.2, 0.75, 100.0).unwrap();
    let other = run_chain(&data, &shifted_prior, &init, &SamplerConfig { seed: 6, ..cfg.clone() }).unwrap();
    let same = run_chain(&data, &reference::prior(), &init, &SamplerConfig { seed: 6, ..cfg }).unwrap();
    let flagged = compare_scan_orders(&[("a".into(), &base.states), ("b".into(), &other.states)]).unwrap();
    assert!(flagged.flagged);
    assert!(flagged.pairs[0].z.mu_x.abs() > 3.0);
    let clean = compare_scan_orders(&[("a".into(), &base.states), ("b".into(), &same.states)]).unwrap();
    assert!(!clean.flagged, "{:?}", clean.pairs[0].z);
}
