//! Property tests for value filters, replay, composition and selection.

use std::sync::Arc;

use proptest::prelude::*;
use viaplan::footworld::Plan;
use viaplan::nn::NetworkParams;
use viaplan::planner::{sdf_guidance_value, select, Selection};
use viaplan::rng::{self, seeded};
use viaplan::vf::{bellman_target, plan_set, product_scores, ReplayBuffers, Successor, Transition, ValueNet};

fn random_plan(r: &mut viaplan::rng::Rng) -> Plan {
    let v: Vec<f64> = (0..Plan::DIM).map(|_| rng::uniform(r, -1.0, 1.0)).collect();
    Plan::from_slice(&v).unwrap()
}

/// Value net whose raw output is scaled up so clamping is exercised.
fn loud_net(seed: u64) -> ValueNet {
    let mut n = ValueNet::new(0, 3, &[8], 0.75, &mut seeded(seed)).unwrap();
    let last = n.net.layers_mut().last_mut().unwrap();
    last.weights.mapv_inplace(|w| w * 20.0);
    n
}

fn transition(r: &mut viaplan::rng::Rng, terminal: bool) -> Transition {
    let state = Arc::new(rng::normals(r, 3));
    let plan = random_plan(r);
    if terminal {
        return Transition { state, plan, reward: 0.0, next: None };
    }
    let cands: Vec<Plan> = (0..5).map(|_| random_plan(r)).collect();
    let next = Successor { state: Arc::new(rng::normals(r, 3)), candidates: plan_set(&cands) };
    Transition { state, plan, reward: 1.0, next: Some(next) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bellman_targets_are_bounded(seed in any::<u64>(), terminal in any::<bool>()) {
        let net = loud_net(seed);
        let mut r = seeded(seed ^ 0x5a5a);
        let t = transition(&mut r, terminal);
        let y = bellman_target(&t, &net).unwrap();
        prop_assert!((0.0..=net.q_max()).contains(&y));
        if terminal {
            prop_assert_eq!(y, 0.0);
        }
    }

    #[test]
    fn clamped_values_lie_in_range(seed in any::<u64>()) {
        let net = loud_net(seed);
        let mut r = seeded(seed);
        let plans: Vec<Plan> = (0..16).map(|_| random_plan(&mut r)).collect();
        for q in net.eval_many(&rng::normals(&mut r, 3), &plans).unwrap() {
            prop_assert!((0.0..=net.q_max()).contains(&q));
        }
    }

    #[test]
    fn replay_respects_capacity_and_purity(ops in prop::collection::vec(any::<bool>(), 0..200), cap in 1usize..20) {
        let mut r = seeded(ops.len() as u64);
        let mut buf = ReplayBuffers::new(cap);
        for success in ops {
            buf.push(transition(&mut r, !success));
            let (s, f) = buf.sizes();
            prop_assert!(s <= cap && f <= cap);
        }
        prop_assert!(buf.success.iter().all(|t| t.reward == 1.0));
        prop_assert!(buf.failure.iter().all(|t| t.reward == 0.0 && t.is_terminal()));
    }

    #[test]
    fn product_is_permutation_invariant(
        scores in prop::collection::vec(prop::collection::vec(0.0f64..4.0, 12), 1..4),
        perm_seed in any::<u64>(),
    ) {
        let base = product_scores(&scores).unwrap();
        let mut order: Vec<usize> = (0..scores.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seeded(perm_seed));
        let permuted: Vec<Vec<f64>> = order.iter().map(|&i| scores[i].clone()).collect();
        let other = product_scores(&permuted).unwrap();
        prop_assert_eq!(base, other);
    }

    #[test]
    fn positive_scaling_keeps_argmax(
        scores in prop::collection::vec(prop::collection::vec(0.01f64..4.0, 30), 1..4),
        scales in prop::collection::vec(0.1f64..10.0, 4),
    ) {
        let (a, _) = select(&product_scores(&scores).unwrap(), Selection::Argmax, 1.0).unwrap();
        let scaled: Vec<Vec<f64>> =
            scores.iter().zip(&scales).map(|(s, k)| s.iter().map(|v| v * k).collect()).collect();
        let (b, _) = select(&product_scores(&scaled).unwrap(), Selection::Argmax, 1.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn selection_is_permutation_covariant(scores in prop::collection::vec(-5.0f64..5.0, 1..50), seed in any::<u64>()) {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut seeded(seed));
        let permuted: Vec<f64> = order.iter().map(|&i| scores[i]).collect();
        let (i, _) = select(&scores, Selection::Argmax, 1.0).unwrap();
        let (j, _) = select(&permuted, Selection::Argmax, 1.0).unwrap();
        // same value chosen; ties may resolve to a different but equal-scored index
        prop_assert_eq!(scores[i], permuted[j]);
        if scores.iter().filter(|&&s| s == scores[i]).count() == 1 {
            prop_assert_eq!(order[j], i);
        }
    }

    #[test]
    fn clipped_distance_is_one_lipschitz(
        plan in prop::collection::vec(-3.0f64..3.0, 12),
        delta in prop::collection::vec(-0.5f64..0.5, 12),
        center in (-1.0f64..1.0, -1.0f64..1.0),
        r_hat in 0.3f64..2.0,
    ) {
        let c = [center.0, center.1];
        let moved: Vec<f64> = plan.iter().zip(&delta).map(|(a, b)| a + b).collect();
        let (s0, _) = sdf_guidance_value(&plan, c, r_hat).unwrap();
        let (s1, _) = sdf_guidance_value(&moved, c, r_hat).unwrap();
        let planar: f64 = (0..4).map(|t| delta[3 * t].hypot(delta[3 * t + 1])).sum();
        prop_assert!((s1 - s0).abs() <= planar + 1e-12);
    }
}

#[test]
fn zero_network_scores_are_bias() {
    let mut n = ValueNet::new(0, 1, &[2], 0.75, &mut seeded(0)).unwrap();
    n.net = NetworkParams::zeros(&n.net.layer_dims()).unwrap();
    n.net.layers_mut().last_mut().unwrap().bias[0] = 2.5;
    let p = random_plan(&mut seeded(1));
    assert_eq!(n.eval(&[0.3], &p).unwrap(), 2.5);
}
