use proptest::prelude::*;
use stabcert::certify::{build_certificate, CriterionConstants};
use stabcert::domain::GridDomain;
use stabcert::feedback::{damping_decay_bound, damping_rate};
use stabcert::geometry::SetIndicator;
use stabcert::operators::{diagonalize, OperatorSpec};
use stabcert::probes::choose_l0;
use stabcert::rng::{random_unit_function, trial_rng};

fn line(m: usize) -> GridDomain<f64> {
    GridDomain::new(1, 4.0, m, true).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn l0_balances_the_probe(t in 0.01f64..50.0, alpha in 0.001f64..0.999, s in 0.1f64..4.0, n in 1usize..=2) {
        let l0 = choose_l0(t, alpha, s, n).unwrap();
        prop_assert!(l0 > 0.0);
        let lhs = (1.0 + t / l0).powf(n as f64 / (2.0 * s));
        let rhs = 2.0 / (1.0 + alpha);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs, "{lhs} vs {rhs}");
    }
}

proptest! {
    #[test]
    fn certificate_identities(
        c1 in 0.01f64..5.0, a in 0.2f64..3.0, c2 in 0.1f64..3.0,
        b in 0.5f64..3.0, m in 1.0f64..4.0, delta0 in 0.0f64..2.0,
    ) {
        let k = CriterionConstants::new(c1, a, c2, b, m, delta0).unwrap();
        let cert = build_certificate(&k).unwrap();
        prop_assert!(cert.n_big >= 2.0);
        prop_assert!((cert.t - cert.a_big / cert.n_big).abs() <= 1e-12 * cert.t);
        prop_assert!((cert.tau0 - 1.5 * cert.t).abs() <= 1e-12 * cert.tau0);
        if cert.ln_beta / 2.0 > f64::MIN_POSITIVE.ln() {
            prop_assert!((2.0 * cert.alpha.ln() - cert.ln_beta).abs() <= 1e-10 * cert.ln_beta.abs().max(1.0));
        } else {
            // alpha underflows; the log form carries the value
            prop_assert!(cert.alpha < 1e-300 && cert.ln_beta.is_finite());
        }
        prop_assert!(cert.ln_c.is_finite());
    }

    #[test]
    fn damping_bound_is_the_best_sampled_rate(delta in 0.0f64..0.99, c1 in 0.0f64..3.0, n_max in 2usize..12) {
        match damping_decay_bound(delta, c1, 1..=n_max) {
            Ok(bound) => {
                let best = (1..=n_max).map(|n| damping_rate(delta, c1, n)).fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(bound.omega, best);
                prop_assert!(bound.omega > 0.0);
                prop_assert_eq!(damping_rate(delta, c1, bound.chosen_n), bound.omega);
            }
            Err(_) => prop_assert!((1..=n_max).all(|n| damping_rate(delta, c1, n) <= 0.0)),
        }
    }

    #[test]
    fn set_algebra(mask_a in prop::collection::vec(any::<bool>(), 64), mask_b in prop::collection::vec(any::<bool>(), 64)) {
        let d = line(64);
        let a = SetIndicator::new(&d, mask_a).unwrap();
        let b = SetIndicator::new(&d, mask_b).unwrap();
        let union = a.union(&b).unwrap();
        let inter = a.intersection(&b).unwrap();
        prop_assert_eq!(union.count() + inter.count(), a.count() + b.count());
        prop_assert_eq!(a.complement().count(), 64 - a.count());
        prop_assert!(inter.is_subset_of(&a) && a.is_subset_of(&union));
        prop_assert_eq!(SetIndicator::from_run_lengths(&d, &a.run_lengths()).unwrap(), a);
    }

    #[test]
    fn projections_split_energy(seed in any::<u64>(), k in 0.0f64..20.0, t in 0.0f64..3.0) {
        let d = line(64);
        let dec = diagonalize(&OperatorSpec::fractional(1.0, 0.0), &d).unwrap();
        let f = random_unit_function(&d, &mut trial_rng(seed, 0));
        let p = dec.projection(k);
        let pf = p.apply(&f).unwrap();
        let qf = p.apply_complement(&f).unwrap();
        prop_assert!((pf.norm_squared() + qf.norm_squared() - 1.0).abs() <= 1e-12);
        prop_assert!(p.apply(&pf).unwrap().sub(&pf).unwrap().norm() <= 1e-12);
        let decayed = dec.semigroup_apply(t, &f).unwrap();
        prop_assert!(decayed.norm() <= 1.0 + 1e-12);
    }
}
