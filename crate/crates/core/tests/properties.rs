use proptest::prelude::*;

use switching_diffusion::model::{
    canonical_model, check_conditions, drift_bounds_audit, lle_residual, q_for_epsilon, solve_epsilon_q, ModelParams, Regime,
};
use switching_diffusion::rng::{derive_seed, stream_rng};
use switching_diffusion::stats::{Accumulator, MomentEstimate};

fn params(d: usize, lm: f64, lp: f64, rm: f64, rp: f64) -> ModelParams {
    ModelParams {
        d,
        lambda_minus: lm,
        lambda_plus: lp,
        r_minus: rm,
        r_plus: rp,
        big_r_minus: rm,
        big_r_plus: rp,
        m: 1.0,
        m1: 2.0,
    }
}

fn log_range(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

fn tuple() -> impl Strategy<Value = ModelParams> {
    (1usize..=10, log_range(0.01, 50.0), log_range(0.01, 50.0), log_range(0.01, 200.0), log_range(0.001, 20.0))
        .prop_map(|(d, lm, lp, rm, rp)| params(d, lm, lp, rm, rp))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn stronger_conditions_imply_weaker(p in tuple()) {
        let c = check_conditions(&p);
        prop_assert!(!c.holds_c2a || c.holds_c2, "c2a without c2: {:?}", c.margins);
        prop_assert!(!c.holds_c2 || c.holds_c1, "c2 without c1: {:?}", c.margins);
        prop_assert_eq!(c.holds_c1, c.epsilon_q.is_some());
    }

    #[test]
    fn epsilon_q_solves_the_balance(p in tuple(), frac in 0.01f64..0.99) {
        if let Ok(eq) = solve_epsilon_q(&p, frac) {
            let (res, scale) = lle_residual(&p, eq);
            prop_assert!(res <= 1e-12 * scale, "residual {res} at scale {scale}");
            prop_assert!(eq.epsilon > 0.0 && eq.epsilon < p.epsilon_max());
            prop_assert!(eq.q > 0.0 && eq.q < 1.0);
            let again = q_for_epsilon(&p, eq.epsilon).unwrap();
            prop_assert_eq!(again, eq);
        } else {
            prop_assert!(!check_conditions(&p).holds_c1);
        }
    }

    #[test]
    fn q_increases_with_epsilon(p in tuple(), a in 0.01f64..0.98) {
        if let (Ok(lo), Ok(hi)) = (solve_epsilon_q(&p, a), solve_epsilon_q(&p, a + 0.01)) {
            prop_assert!(hi.q > lo.q);
        }
    }

    #[test]
    fn canonical_drift_is_exact_outside_the_ball(
        d in 1usize..=5,
        km in log_range(0.1, 20.0),
        kp in log_range(0.01, 5.0),
        m in log_range(0.1, 10.0),
        dir in prop::collection::vec(-1.0f64..1.0, 5),
        ratio in log_range(1.0, 1e4),
    ) {
        let mut p = params(d, 1.0, 10.0, km, kp);
        p.m = m;
        let spec = canonical_model(&p, km, kp).unwrap();
        let mut x: Vec<f64> = dir[..d].to_vec();
        let n = dot(&x, &x).sqrt();
        prop_assume!(n > 1e-6);
        let r = m * ratio;
        x.iter_mut().for_each(|v| *v *= r / n);
        let bm = spec.field(Regime::Minus).eval(&x);
        let bp = spec.field(Regime::Plus).eval(&x);
        prop_assert!((dot(&x, &bm) + km).abs() <= 1e-10 * km);
        prop_assert!((dot(&x, &bp) - kp).abs() <= 1e-10 * kp);
        prop_assert!(dot(&bm, &bm).sqrt() <= spec.norm_bound * (1.0 + 1e-12));
        prop_assert!(dot(&bp, &bp).sqrt() <= spec.norm_bound * (1.0 + 1e-12));
    }

    #[test]
    fn canonical_audit_is_clean(km in log_range(0.1, 20.0), kp in log_range(0.01, 5.0), seed in any::<u64>()) {
        let p = params(2, 1.0, 10.0, km, kp);
        let spec = canonical_model(&p, km, kp).unwrap();
        let mut rng = stream_rng(seed, 0);
        let audit = drift_bounds_audit(&spec, &p, 200, 1e3, &mut rng).unwrap();
        prop_assert!(audit.clean(), "{audit:?}");
        prop_assert!(audit.max_abs_inner <= km.max(kp) * (1.0 + 1e-12));
    }

    #[test]
    fn estimate_interval_brackets_mean(xs in prop::collection::vec(-1e6f64..1e6, 2..200), level in 0.5f64..0.999) {
        let e = MomentEstimate::from_samples(&xs, level).unwrap();
        prop_assert!(e.se >= 0.0);
        prop_assert!(e.ci_lo <= e.mean && e.mean <= e.ci_hi);
        prop_assert_eq!(e.n, xs.len());
    }

    #[test]
    fn merged_accumulators_match_one_pass(xs in prop::collection::vec(-1e3f64..1e3, 2..300), split in 0usize..300) {
        let k = split.min(xs.len());
        let mut whole = Accumulator::default();
        xs.iter().for_each(|&v| whole.push(v));
        let (mut a, mut b) = (Accumulator::default(), Accumulator::default());
        xs[..k].iter().for_each(|&v| a.push(v));
        xs[k..].iter().for_each(|&v| b.push(v));
        a.merge(&b);
        prop_assert_eq!(a.count(), whole.count());
        prop_assert!((a.mean() - whole.mean()).abs() <= 1e-9 * (1.0 + whole.mean().abs()));
        prop_assert!((a.variance() - whole.variance()).abs() <= 1e-7 * (1.0 + whole.variance()));
    }

    #[test]
    fn derived_seeds_are_label_sensitive(master in any::<u64>(), a in "[a-z/0-9]{1,12}", b in "[a-z/0-9]{1,12}") {
        prop_assert_eq!(derive_seed(master, &a), derive_seed(master, &a));
        if a != b {
            prop_assert_ne!(derive_seed(master, &a), derive_seed(master, &b));
        }
    }
}
