//! Property tests of invariants that hold for any valid input.

use abc_core::engine::{abc_knn, abc_reject, retained_count, AbcProblem, ModelSimulator, ModelSpec};
use abc_core::harness::{n_for_retained, toy_inverse_binding};
use abc_core::models::{PriorRegion, ToyModel};
use abc_core::oracles::variance_gap;
use abc_core::seed::derive_seed;
use abc_core::summaries::{DistanceSpec, SummaryMap};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn toy() -> ModelSimulator {
    ModelSimulator::new(ModelSpec::Toy(ToyModel::new(0.5)), SummaryMap::ToyMean, 100).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn knn_keeps_ceil_alpha_n_closest(alpha in 0.01f64..1.0, n in 100u64..3000, seed in any::<u64>()) {
        let sim = toy();
        let prior = PriorRegion::unit_box(&[(0.5, 1.5)]);
        let obs = sim.observe(&[1.0], seed ^ 1).unwrap();
        let p = AbcProblem::new(&obs, &prior, &sim, &DistanceSpec::Euclidean);
        let s = abc_knn(&p, alpha, n, seed).unwrap().into_result().unwrap();
        prop_assert_eq!(s.len(), retained_count(alpha, n).unwrap());
        prop_assert!(s.particles.windows(2).all(|w| w[0].index < w[1].index));
        let all = abc_reject(&p, f64::INFINITY, n, seed).unwrap().into_result().unwrap();
        let worse = all.particles.iter().filter(|q| q.dist < s.realized_epsilon).count();
        prop_assert!(worse < s.len());
        prop_assert!(s.particles.iter().all(|q| prior.contains(&q.theta)));
    }

    #[test]
    fn rejection_accepts_exactly_the_ball(eps in 0.0f64..0.5, seed in any::<u64>()) {
        let sim = toy();
        let prior = PriorRegion::unit_box(&[(0.5, 1.5)]);
        let obs = sim.observe(&[1.0], seed ^ 2).unwrap();
        let p = AbcProblem::new(&obs, &prior, &sim, &DistanceSpec::Euclidean);
        let all = abc_reject(&p, f64::INFINITY, 2000, seed).unwrap().into_result().unwrap();
        let expected: Vec<u64> = all.particles.iter().filter(|q| q.dist <= eps).map(|q| q.index).collect();
        match abc_reject(&p, eps, 2000, seed).unwrap().sample() {
            Some(s) => prop_assert_eq!(s.particles.iter().map(|q| q.index).collect::<Vec<_>>(), expected),
            None => prop_assert!(expected.is_empty()),
        }
    }

    #[test]
    fn retained_budget_covers_k(k in 1usize..100_000, p in 0.5f64..3.0, t in 10f64..1000.0) {
        let alpha = t.powf(-p);
        let n = n_for_retained(k, alpha).unwrap();
        prop_assert!(retained_count(alpha, n).unwrap() >= k);
        prop_assert!(n == 1 || alpha * (n - 1) as f64 <= k as f64 * (1.0 + 1e-9));
    }

    #[test]
    fn variance_gap_is_psd(seed in any::<u64>(), k_theta in 1usize..4, extra in 0usize..4) {
        let k_eta = k_theta + extra;
        let mut s = seed;
        let mut next = || { s = derive_seed(s, &[1]); (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5 };
        let g = DMatrix::from_fn(k_eta, k_theta, |_, _| next());
        let a = DMatrix::from_fn(k_eta, k_eta, |_, _| next());
        let v = &a * a.transpose() + DMatrix::identity(k_eta, k_eta) * 0.1;
        if let Ok(gap) = variance_gap(&g, &v) {
            prop_assert!(gap.psd, "min eigenvalue {}", gap.min_eigenvalue);
        }
    }

    #[test]
    fn toy_inverse_is_monotone(a in 0.0f64..3.0, x in 0.0f64..5.0, dx in 1e-6f64..1.0) {
        prop_assert!(toy_inverse_binding(x + dx, a) > toy_inverse_binding(x, a));
    }
}
