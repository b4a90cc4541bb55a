mod common;

use common::{random_instance, relative_error};
use hmt::decoding::{joint_log_score, viterbi_decode};
use hmt::inference::{likelihood_unscaled, log_likelihood_scaled, Posteriors};
use hmt::oracle::{enumerate, DEFAULT_BUDGET};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn likelihoods_match_enumeration(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let truth = enumerate(&inst.model, &inst.tree, &inst.obs, DEFAULT_BUDGET).unwrap();
        let unscaled = likelihood_unscaled(&inst.model, &inst.tree, &inst.obs).unwrap();
        let scaled = log_likelihood_scaled(&inst.model, &inst.tree, &inst.obs).unwrap();
        prop_assert!(relative_error(unscaled, truth.likelihood) < 1e-9);
        prop_assert!(relative_error(scaled.exp(), truth.likelihood) < 1e-9);
    }

    #[test]
    fn posteriors_match_enumeration(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let truth = enumerate(&inst.model, &inst.tree, &inst.obs, DEFAULT_BUDGET).unwrap();
        let post = Posteriors::compute(&inst.model, &inst.tree, &inst.obs).unwrap();
        for (a, b) in post.gamma.as_slice().iter().zip(truth.gamma.as_slice()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for (x, y) in post.xi.iter().zip(&truth.xi) {
            prop_assert_eq!(x.is_some(), y.is_some());
            if let (Some(x), Some(y)) = (x, y) {
                for (a, b) in x.data.iter().zip(&y.data) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn xi_marginalizes_to_gamma(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let post = Posteriors::compute(&inst.model, &inst.tree, &inst.obs).unwrap();
        let n = inst.model.states;
        for c in 0..inst.tree.len() {
            prop_assert!((post.gamma.row(c).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let Some(xi) = &post.xi[c] else { continue };
            let children = inst.tree.children(c);
            let w = n.pow(children.len() as u32);
            for rho in 0..n {
                let parent: f64 = xi.row(rho).iter().sum();
                prop_assert!((parent - post.gamma.get(c, rho)).abs() < 1e-12);
            }
            for (k, &ch) in children.iter().enumerate() {
                let stride = n.pow((children.len() - 1 - k) as u32);
                for mu in 0..n {
                    let m: f64 = (0..n * w)
                        .filter(|idx| (idx % w) / stride % n == mu)
                        .map(|idx| xi.data[idx])
                        .sum();
                    prop_assert!((m - post.gamma.get(ch, mu)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn viterbi_matches_enumeration(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let truth = enumerate(&inst.model, &inst.tree, &inst.obs, DEFAULT_BUDGET).unwrap();
        let map = viterbi_decode(&inst.model, &inst.tree, &inst.obs).unwrap();
        prop_assert!((map.log_score - truth.map_score.ln()).abs() < 1e-9);
        let attained = joint_log_score(&inst.model, &inst.tree, &inst.obs, &map.states).unwrap();
        prop_assert!((attained - map.log_score).abs() < 1e-9);
    }

    #[test]
    fn relabeling_states_keeps_likelihood(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let n = inst.model.states;
        let perm: Vec<usize> = (0..n).map(|s| (s + 1) % n).collect();
        let a = log_likelihood_scaled(&inst.model, &inst.tree, &inst.obs).unwrap();
        let b = log_likelihood_scaled(&inst.model.permuted(&perm), &inst.tree, &inst.obs).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn model_json_round_trip(seed in any::<u64>()) {
        let inst = random_instance(seed);
        let text = hmt::io::model_to_json(&inst.model);
        prop_assert_eq!(hmt::io::model_from_json(&text).unwrap(), inst.model);
    }

    #[test]
    fn upward_order_visits_children_first(seed in any::<u64>()) {
        let tree = random_instance(seed).tree;
        let order = tree.upward_order();
        let mut pos = vec![0; tree.len()];
        for (i, &c) in order.iter().enumerate() {
            pos[c] = i;
        }
        for c in 0..tree.len() {
            if let Some(p) = tree.parent(c) {
                prop_assert!(pos[c] < pos[p]);
            }
        }
        prop_assert_eq!(*order.last().unwrap(), tree.root());
    }
}
