use fusion_core::analysis::{gelman_rubin, histogram, psrf};
use fusion_core::fiducial::{fisher_info_atanh, fisher_info_rho, gamma_of_rho, RhoScoreTerms};
use fusion_core::sampler::{read_trace_csv, write_trace_csv};
use fusion_core::{
    compute_sufficient_stats, reference, rho_mle, run_chain, synthesize_matching_dataset, ModelParams,
    ObservationSet, SampleMoments, SamplerConfig,
};
use proptest::prelude::*;

fn pairs(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sums_obey_cauchy_schwarz(pts in pairs(2..60)) {
        let s = compute_sufficient_stats(&ObservationSet::from_pairs(&pts).unwrap());
        let n = s.n as f64;
        let tol = 1e-9 * (s.sum_xx * n).max(1.0);
        prop_assert!(s.sum_xx * n + tol >= s.sum_x * s.sum_x);
        prop_assert!(s.sum_yy * n + tol >= s.sum_y * s.sum_y);
    }

    #[test]
    fn rho_mle_solves_the_cubic_inside_the_unit_interval(
        pts in pairs(5..80),
        mx in -5.0..5.0f64, my in -5.0..5.0f64,
        vx in 0.1..50.0f64, vy in 0.1..50.0f64,
    ) {
        let stats = compute_sufficient_stats(&ObservationSet::from_pairs(&pts).unwrap());
        let params = ModelParams::new(mx, my, vx, vy, 0.0).unwrap();
        if let Ok(r) = rho_mle(&params, &stats) {
            prop_assert!(r.abs() < 1.0);
            prop_assert!(RhoScoreTerms::new(&params, &stats).relative_residual(r) < 1e-10);
        }
    }

    #[test]
    fn fisher_reparametrization_identity(rho in -0.999..0.999f64, n in 1usize..5000) {
        let lhs = fisher_info_rho(rho, n).unwrap();
        let rhs = fisher_info_atanh(rho, n).unwrap() / (1.0 - rho * rho).powi(2);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs);
    }

    #[test]
    fn gamma_sign_follows_rho_order(rho in -0.99..0.99f64, rho_hat in -0.99..0.99f64, n in 2usize..2000) {
        let (g, _) = gamma_of_rho(rho, rho_hat, n).unwrap();
        prop_assert_eq!(g > 0.0, rho < rho_hat);
    }

    #[test]
    fn psrf_unchanged_by_common_affine_map(
        a in prop::collection::vec(-10.0..10.0f64, 20),
        b in prop::collection::vec(-10.0..10.0f64, 20),
        scale in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64],
        shift in -100.0..100.0f64,
    ) {
        let base = psrf(&[&a, &b]).unwrap();
        let ta: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
        let tb: Vec<f64> = b.iter().map(|x| scale * x + shift).collect();
        let moved = psrf(&[&ta, &tb]).unwrap();
        prop_assert!((base - moved).abs() <= 1e-9 * base.max(1.0));
    }

    #[test]
    fn histogram_area_is_one(v in prop::collection::vec(-1e3..1e3f64, 1..200), bins in 1usize..60) {
        let h = histogram(&v, bins, None).unwrap();
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let width = span / bins as f64;
        let area: f64 = h.densities.iter().map(|d| d * width).sum();
        prop_assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn synthesis_reproduces_targets(
        n in 3usize..300,
        mean_x in -10.0..10.0f64, mean_y in -10.0..10.0f64,
        sd_x in 0.01..10.0f64, sd_y in 0.01..10.0f64,
        corr in -0.99..0.99f64, seed in any::<u64>(),
    ) {
        let m = SampleMoments { mean_x, mean_y, sd_x, sd_y, corr };
        let got = compute_sufficient_stats(&synthesize_matching_dataset(n, &m, seed).unwrap()).moments();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * b.abs().max(1.0);
        prop_assert!(close(got.mean_x, mean_x) && close(got.mean_y, mean_y));
        prop_assert!(close(got.sd_x, sd_x) && close(got.sd_y, sd_y) && close(got.corr, corr));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn traces_keep_valid_states_and_round_trip(seed in any::<u64>(), iterations in 0usize..400) {
        let data = synthesize_matching_dataset(30, &reference::moments(), seed).unwrap();
        let init = ModelParams::from_moments(&reference::moments()).unwrap();
        let cfg = SamplerConfig { iterations, burn_in: 50, seed, ..SamplerConfig::default() };
        let trace = run_chain(&data, &reference::prior(), &init, &cfg).unwrap();
        prop_assert_eq!(trace.len(), iterations);
        for s in &trace.states {
            prop_assert!(s.validate().is_ok());
        }
        for r in trace.acceptance_rates {
            prop_assert!((0.0..=1.0).contains(&r));
        }
        let mut buf = Vec::new();
        write_trace_csv(&trace.states, &mut buf).unwrap();
        prop_assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace.states);
    }
}

#[test]
fn gelman_rubin_needs_matching_lengths() {
    let s = vec![ModelParams::new(0.0, 0.0, 1.0, 1.0, 0.0).unwrap(); 20];
    assert!(gelman_rubin(&[&s, &s[..15]], 1.01).is_err());
}
