use proptest::prelude::*;

use privgmm::geometry::{affine_push, approx_distances};
use privgmm::mech::{exp_mech_probabilities, TruncLapSpec};
use privgmm::nets::{self, Cover};
use privgmm::tvdist::tv_univariate;
use privgmm::univariate::{consecutive_pairs, count_l1_sensitivity, multiset_distance};
use privgmm::{Dataset, GaussianParams, Mixture};

fn univariate_mixture() -> impl Strategy<Value = Mixture> {
    prop::collection::vec((0.1f64..1.0, -10.0f64..10.0, 0.05f64..9.0), 1..4).prop_map(|parts| {
        let total: f64 = parts.iter().map(|p| p.0).sum();
        let parts: Vec<_> = parts.into_iter().map(|(w, m, v)| (w / total, m, v)).collect();
        Mixture::univariate(&parts).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn one_point_change_moves_gaps_by_at_most_three(
        xs in prop::collection::vec(-100.0f64..100.0, 2..40),
        idx in any::<prop::sample::Index>(),
        v in -100.0f64..100.0,
    ) {
        let mut ys = xs.clone();
        ys[idx.index(xs.len())] = v;
        let (x, y) = (Dataset::univariate(xs).unwrap(), Dataset::univariate(ys).unwrap());
        let d = multiset_distance(&consecutive_pairs(&x).unwrap(), &consecutive_pairs(&y).unwrap()).unwrap();
        prop_assert!(d <= 3);
        prop_assert!(count_l1_sensitivity(&x, &y).unwrap() <= 6);
    }

    #[test]
    fn truncated_laplace_stays_in_support(eps in 0.01f64..2.0, delta in 1e-9f64..0.4, seed in any::<u64>()) {
        let spec = TruncLapSpec::new(1.0, eps, delta).unwrap();
        let mut r = privgmm::rng::stream(seed);
        for _ in 0..200 {
            prop_assert!(spec.sample(&mut r).abs() <= spec.bound());
        }
    }

    #[test]
    fn exponential_mechanism_is_a_distribution(u in prop::collection::vec(-1e6f64..1e6, 1..30), eps in 0.01f64..5.0) {
        let p = exp_mech_probabilities(&u, 1.0, eps).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&q| (0.0..=1.0).contains(&q)));
        let best = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let top = u.iter().position(|&x| x == best).unwrap();
        prop_assert!(p.iter().all(|&q| q <= p[top] + 1e-15));
    }

    #[test]
    fn tv_is_a_bounded_symmetric_metric(a in univariate_mixture(), b in univariate_mixture(), c in univariate_mixture()) {
        let ab = tv_univariate(&a, &b, 1e-7).unwrap().value;
        let ba = tv_univariate(&b, &a, 1e-7).unwrap().value;
        let bc = tv_univariate(&b, &c, 1e-7).unwrap().value;
        let ac = tv_univariate(&a, &c, 1e-7).unwrap().value;
        prop_assert!((0.0..=1.0 + 1e-6).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-5);
        prop_assert!(ac <= ab + bc + 1e-5);
    }

    #[test]
    fn hypotheses_are_probability_vectors_over_the_covers(k in 1usize..4, steps in 1usize..6, sizes in prop::collection::vec(1usize..4, 1..3)) {
        let zeta = 1.0 / steps as f64;
        let mut next = 0.0;
        let covers: Vec<Cover> = sizes
            .iter()
            .map(|&s| {
                Cover::explicit((0..s).map(|_| { next += 1.0; GaussianParams::univariate(next, 1.0).unwrap() }).collect())
            })
            .collect();
        let allowed: Vec<f64> = (1..=next as usize).map(|i| i as f64).collect();
        let class = nets::mixture_hypotheses(&covers, k, zeta, 1000, 1).unwrap();
        prop_assert!(!class.is_empty());
        for h in class.iter() {
            let total: f64 = h.components().iter().map(|c| c.weight).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(h.len() <= k);
            for c in h.components() {
                prop_assert!(allowed.contains(&c.params.mean()[0]));
            }
        }
    }

    #[test]
    fn approx_distances_survive_affine_push(
        m1 in -5.0f64..5.0, v1 in 0.1f64..10.0, m2 in -5.0f64..5.0, v2 in 0.1f64..10.0,
        shift in -100.0f64..100.0, scale in 0.01f64..100.0,
    ) {
        let a = GaussianParams::univariate(m1, v1).unwrap();
        let b = GaussianParams::univariate(m2, v2).unwrap();
        let mu = nalgebra::DVector::from_element(1, shift);
        let sigma = nalgebra::DMatrix::from_element(1, 1, scale);
        let before = approx_distances(&a, &b).unwrap();
        let after = approx_distances(&affine_push(&a, &mu, &sigma).unwrap(), &affine_push(&b, &mu, &sigma).unwrap()).unwrap();
        prop_assert!((before.mahalanobis - after.mahalanobis).abs() <= 1e-8 * before.mahalanobis.max(1.0));
        prop_assert!((before.spectral - after.spectral).abs() <= 1e-8 * before.spectral.max(1.0));
    }
}
