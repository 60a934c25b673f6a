use proptest::prelude::*;
use tfcka_core::channel::{channel_statistics, dark_count_adjusted};
use tfcka_core::finite_key::{
    gamma_correction, gamma_residual, key_length_with_corrections, ObservedFrequencies, SecuritySplit,
    GAMMA_RESIDUAL_TOL,
};
use tfcka_core::rates::{asymptotic_rate, subgroup_optimized_rate};
use tfcka_core::special::{binary_entropy, binary_entropy_clamped, ln_binomial};
use tfcka_core::SetupParams;

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn entropy_is_symmetric(x in 0.0f64..=1.0) {
        let a = binary_entropy(x).unwrap();
        let b = binary_entropy(1.0 - x).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn entropy_is_concave(x in 0.0f64..=1.0, y in 0.0f64..=1.0) {
        let mid = binary_entropy(0.5 * (x + y)).unwrap();
        prop_assert!(mid >= 0.5 * (binary_entropy(x).unwrap() + binary_entropy(y).unwrap()) - 1e-12);
    }

    #[test]
    fn ln_binomial_is_symmetric(a in 0.0f64..1e6, frac in 0.0f64..=1.0) {
        let b = a * frac;
        let lhs = ln_binomial(a, b).unwrap();
        let rhs = ln_binomial(a, a - b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn dark_count_free_model_is_unchanged(
        n in 2usize..6, extra in 0usize..3, q in 0.0f64..0.999, t in 0.01f64..=1.0,
        th in 0.0f64..0.5, ph in 0.0f64..0.5,
    ) {
        let p = SetupParams { polarization_misalignment: th, phase_misalignment: ph, ..SetupParams::ideal(n, n + extra, q, t) };
        let base = channel_statistics(&p).unwrap();
        let dc = dark_count_adjusted(&p).unwrap();
        prop_assert_eq!(base.click_prob.to_bits(), dc.click_prob.to_bits());
        prop_assert_eq!(base.qber.to_bits(), dc.qber.to_bits());
        prop_assert_eq!(base.phase_error.to_bits(), dc.phase_error.to_bits());
    }

    #[test]
    fn asymptotic_rate_is_nonnegative(
        n in 2usize..7, q in 0.0f64..0.9999, t in 0.0f64..=1.0, th in 0.0f64..1.5, pd in 0.0f64..0.1,
    ) {
        let p = SetupParams::ideal(n, n, q, t).with_misalignment(th).with_dark_counts(pd);
        if let Ok(r) = asymptotic_rate(&p) {
            prop_assert!(r.rate >= 0.0);
            let bracket = 1.0 - binary_entropy_clamped(r.meta["q_z"].min(0.5)) - binary_entropy_clamped(r.meta["qber"].min(0.5));
            if bracket <= 0.0 {
                prop_assert_eq!(r.rate, 0.0);
            }
        }
    }

    #[test]
    fn subgroup_rate_dominates_each_grouping(n in 2usize..13, seed in 0u64..1000) {
        let f = |g: usize| ((g as u64 * 2_654_435_761 + seed) % 1000) as f64 / 1000.0;
        let r = subgroup_optimized_rate(n, |g| Ok(f(g))).unwrap();
        let k = n - 1;
        for d in (1..=k).filter(|d| k % d == 0) {
            prop_assert!(r.rate >= d as f64 / k as f64 * f(d + 1));
        }
    }

    #[test]
    fn key_length_degrades_with_worse_observations(
        qz in 0.0f64..0.5, qx in 0.0f64..0.5, dz in 0.0f64..0.1, dx in 0.0f64..0.1,
        gz in 0.0f64..0.1, gx in 0.0f64..0.1, n in 2usize..6,
    ) {
        let split = SecuritySplit::new(1e-18, 1e-18, 1e-9, 1e-9).unwrap();
        let l = |qz: f64, qx: f64, gz: f64, gx: f64| {
            let f = ObservedFrequencies { qz_m: qz, qber_m_per_pair: vec![qx; n - 1] };
            key_length_with_corrections(&f, 1_000_000_000, &split, n, gz, &vec![gx; n - 1]).unwrap()
        };
        let base = l(qz, qx, gz, gx);
        prop_assert!(l((qz + dz).min(1.0), qx, gz, gx) <= base);
        prop_assert!(l(qz, (qx + dx).min(1.0), gz, gx) <= base);
        prop_assert!(l(qz, qx, gz + dz, gx) <= base);
        prop_assert!(l(qz, qx, gz, gx + dx) <= base);
    }

    #[test]
    fn two_party_key_length_is_bipartite(qz in 0.0f64..0.2, qx in 0.0f64..0.2, g in 0.0f64..0.05) {
        let s = SecuritySplit::new(3e-18, 2e-18, 1e-9, 4e-9).unwrap();
        let f = ObservedFrequencies { qz_m: qz, qber_m_per_pair: vec![qx] };
        let l = key_length_with_corrections(&f, 10_000_000, &s, 2, g, &[g]).unwrap();
        let pe = (3e-18f64 + 2e-18).sqrt();
        let expected = 1e7 * (1.0 - binary_entropy_clamped(qz + g) - binary_entropy_clamped(qx + g))
            - (2.0 / 1e-9f64).log2()
            - 2.0 * ((1.0 - 2.0 * pe) / 8e-9).log2();
        prop_assert!((l - expected.max(0.0)).abs() < 1e-6 * expected.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn gamma_substitution_residual(
        n in log_uniform(1.0, 1e10), m in log_uniform(1.0, 1e6), lambda in 0.0f64..0.6, eps in log_uniform(1e-15, 0.5),
    ) {
        let (n, m) = (n.round() as u64, m.round() as u64);
        if let Ok(g) = gamma_correction(n, m, lambda, eps) {
            prop_assert!((0.0..=1.0 - lambda).contains(&g));
            if g > 0.0 {
                let res = |x: f64| gamma_residual(n as f64, m as f64, lambda, eps, x);
                let r = res(g);
                // with a handful of samples and gamma next to 1 - lambda the residual moves
                // by more than the tolerance per ulp; then the root must sit next to g
                let below = f64::from_bits(g.to_bits() - 1);
                let above = f64::from_bits(g.to_bits() + 1);
                let bracketed = (res(below) > 0.0 && r <= 0.0) || (r > 0.0 && res(above) <= 0.0);
                prop_assert!(r.abs() <= GAMMA_RESIDUAL_TOL || bracketed, "residual {} at gamma {}", r, g);
            } else {
                prop_assert!(gamma_residual(n as f64, m as f64, lambda, eps, 0.0) <= 0.0);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gamma_nonincreasing_in_n(
        n in log_uniform(10.0, 1e9), factor in 1.0f64..100.0, m in log_uniform(10.0, 1e5),
        lambda in 0.0f64..0.4, eps in log_uniform(1e-12, 1e-2),
    ) {
        let n1 = n.round() as u64;
        let n2 = (n * factor).round() as u64;
        let m = m.round() as u64;
        if let (Ok(g1), Ok(g2)) = (gamma_correction(n1, m, lambda, eps), gamma_correction(n2, m, lambda, eps)) {
            prop_assert!(g2 <= g1 + 1e-12, "n {} -> {}: {} -> {}", n1, n2, g1, g2);
        }
    }

    #[test]
    fn gamma_nonincreasing_in_eps(
        n in log_uniform(10.0, 1e9), m in log_uniform(10.0, 1e5), lambda in 0.0f64..0.4,
        eps in log_uniform(1e-14, 1e-2), factor in 1.0f64..1e4,
    ) {
        let (n, m) = (n.round() as u64, m.round() as u64);
        let loose = (eps * factor).min(0.5);
        if let (Ok(tight), Ok(loose)) = (gamma_correction(n, m, lambda, eps), gamma_correction(n, m, lambda, loose)) {
            prop_assert!(loose <= tight + 1e-12);
        }
    }

    #[test]
    fn clean_two_party_rate_falls_with_loss(q in 0.5f64..0.9999) {
        let mut prev = f64::INFINITY;
        for db in 0..=40 {
            let p = SetupParams::ideal(2, 2, q, 1.0).with_loss_db(db as f64);
            let r = asymptotic_rate(&p).unwrap().rate;
            prop_assert!(r <= prev * (1.0 + 1e-12), "{} dB: {} after {}", db, r, prev);
            prev = r;
        }
    }
}

#[test]
fn ln_binomial_matches_integer_binomials() {
    for n in 0u64..=30 {
        let mut c = 1u64;
        for k in 0..=n {
            let got = ln_binomial(n as f64, k as f64).unwrap().exp();
            assert!((got - c as f64).abs() <= 1e-10 * c as f64, "C({n},{k}) = {c}, got {got}");
            c = c * (n - k) / (k + 1);
        }
    }
}
