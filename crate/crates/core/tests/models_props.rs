use cyclescope::models::{
    classify_regime, cross_check, long_wait_g, long_wait_thresholds, mosquito_long_wait, mosquito_model,
    release_zeros, t_triple_star, MosquitoSpec,
};
use cyclescope::poincare::constant_multiplier;
use proptest::prelude::*;

const GRID: usize = 512;

/// `a`, `mu`, `xi` with `T_bar = 1`.
fn rates() -> impl Strategy<Value = (f64, f64, f64)> {
    (1.5..3.0f64, 0.3..1.0f64, 0.5..2.0f64)
}

fn spec((a, mu, xi): (f64, f64, f64), c: f64, t: f64) -> MosquitoSpec {
    MosquitoSpec { a, mu, xi, c, t, t_bar: 1.0 }
}

fn between(lo: f64, hi: f64, u: f64) -> f64 {
    lo + (hi - lo) * u
}

fn check_cell(s: &MosquitoSpec, verdict: &str) -> Result<(), TestCaseError> {
    let r = cross_check(s, GRID).map_err(|e| TestCaseError::fail(e.to_string()))?;
    prop_assert_eq!(r.verdict.verdict.as_str(), verdict, "{:?}", s);
    prop_assert!(r.consistent, "{:?} found {}", s, r.found);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn long_wait_two_cycles(r in rates(), u in 0.05..0.95f64, v in 0.1..0.9f64) {
        let th = long_wait_thresholds(&spec(r, 1.0, 2.0));
        let c = u * th.g_star;
        let t_star = long_wait_thresholds(&spec(r, c, 2.0)).t_star;
        check_cell(&spec(r, c, between(1.0, t_star, v)), "exact two NC cycles + E0 LAS")?;
    }

    #[test]
    fn long_wait_at_most_two(r in rates(), u in 0.05..0.95f64, v in 0.1..0.9f64) {
        let th = long_wait_thresholds(&spec(r, 1.0, 2.0));
        let c = between(th.g_star, th.c_star, u);
        let t_star = long_wait_thresholds(&spec(r, c, 2.0)).t_star;
        check_cell(&spec(r, c, between(1.0, t_star, v)), "at most two NC cycles + E0 LAS")?;
    }

    #[test]
    fn long_wait_extinction(r in rates(), u in 1.05..2.0f64, v in 0.1..0.9f64) {
        let c = u * long_wait_thresholds(&spec(r, 1.0, 2.0)).c_star;
        let t_star = long_wait_thresholds(&spec(r, c, 2.0)).t_star;
        check_cell(&spec(r, c, between(1.0, t_star, v)), "E0 GAS")?;
    }

    #[test]
    fn long_wait_unique_cycle(r in rates(), u in 0.05..2.0f64, dt in 0.1..2.0f64) {
        let c = u * long_wait_thresholds(&spec(r, 1.0, 2.0)).c_star;
        let t_star = long_wait_thresholds(&spec(r, c, 2.0)).t_star;
        check_cell(&spec(r, c, t_star + dt), "unique GAS NC cycle, E0 US")?;
    }

    #[test]
    fn short_wait_two_cycles(r in rates(), u in 0.05..0.95f64, t in 0.55..0.95f64) {
        let g1 = (r.0 - r.1).powi(2) / (8.0 * r.0 * r.2);
        check_cell(&spec(r, u * g1, t), "exact two NC cycles + E0 LAS")?;
    }

    #[test]
    fn short_wait_extinction(r in rates(), u in 1.05..2.0f64, t in 0.55..0.95f64) {
        let g2 = (r.0 - r.1).powi(2) / (4.0 * r.0 * r.2);
        check_cell(&spec(r, u * g2, t), "E0 GAS")?;
    }

    #[test]
    fn short_wait_middle_band(r in rates(), u in 0.05..0.95f64, t in 0.55..0.95f64) {
        let g = (r.0 - r.1).powi(2) / (4.0 * r.0 * r.2);
        let s = spec(r, between(g / 2.0, g, u), t);
        let r = cross_check(&s, GRID).unwrap();
        prop_assert!(r.consistent, "{:?} {} found {}", s, r.verdict.verdict, r.found);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_orderings(r in rates(), c in 0.01..2.0f64, t in 0.1..0.99f64) {
        let th = long_wait_thresholds(&spec(r, c, 2.0));
        prop_assert!(th.g_star < th.c_star);
        let s = spec(r, c, t);
        let v = classify_regime(&s);
        prop_assume!(v.is_ok());
        let (p, _) = s.p_q();
        let base = (r.0 - r.1).powi(2) / (4.0 * r.0 * r.2);
        prop_assert!(base / (p as f64 + 1.0) < base / p as f64);
    }

    #[test]
    fn origin_multiplier_formula(r in rates(), c in 0.01..1.0f64, t in 1.05..4.0f64) {
        let s = spec(r, c, t);
        let (eq, th) = mosquito_long_wait(&s).unwrap();
        let p1 = constant_multiplier(eq.normalized(), 0.0, 1).unwrap();
        let exact = ((s.a - s.mu) * (t - th.t_star)).exp();
        prop_assert!((p1 - exact).abs() <= 1e-8 * exact.max(1.0));
    }

    #[test]
    fn reduced_function_tracks_sum(r in rates(), c in 0.01..1.0f64, t in 1.05..4.0f64) {
        let s = spec(r, c, t);
        let eq = mosquito_model(&s).unwrap();
        let sum = eq.normalized().sum();
        let cap = s.capacity();
        for k in 1..=400 {
            let w = 3.0 * cap * k as f64 / 400.0;
            let (g, _) = long_wait_g(&s, w);
            let h = sum.value(w);
            if h.abs() > 1e-12 {
                prop_assert!(g.signum() == h.signum(), "w={} G={} sum={}", w, g, h);
            }
        }
    }

    #[test]
    fn short_wait_sum_zero_placement(r in rates(), u in 0.05..0.95f64, t in 0.55..0.95f64) {
        let g1 = (r.0 - r.1).powi(2) / (8.0 * r.0 * r.2);
        let s = spec(r, u * g1, t);
        let eq = mosquito_model(&s).unwrap();
        let zs: Vec<f64> = eq.normalized().sum().all_zeros().unwrap().locations().into_iter().filter(|&w| w > 1e-9).collect();
        prop_assert_eq!(zs.len(), 2);
        let (l11, l12) = release_zeros(&s, 2.0 * s.c).unwrap();
        let (l21, l22) = release_zeros(&s, s.c).unwrap();
        prop_assert!(l21 < zs[0] && zs[0] < l11, "{} not in ({}, {})", zs[0], l21, l11);
        prop_assert!(l12 < zs[1] && zs[1] < l22, "{} not in ({}, {})", zs[1], l12, l22);
    }

    #[test]
    fn short_wait_sum_nonpositive_below_threshold(r in rates(), u in 0.05..0.95f64, t in 0.51..0.99f64) {
        let g = (r.0 - r.1).powi(2) / (4.0 * r.0 * r.2);
        let s = spec(r, between(g / 2.0, g, u), t);
        prop_assume!(t <= t_triple_star(&s));
        let eq = mosquito_model(&s).unwrap();
        let sum = eq.normalized().sum();
        let top = 2.0 * s.capacity();
        for k in 0..=4096 {
            let w = top * k as f64 / 4096.0;
            prop_assert!(sum.value(w) <= 1e-12, "w={} sum={}", w, sum.value(w));
        }
    }
}
