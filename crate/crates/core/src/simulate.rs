//! Sampling hidden-state trees and observations from a model.
//!
//! Every interior node draws its whole child-state tuple in one categorical
//! draw over the `N^n` tensor entries, so sibling coupling is preserved.
//! Each tree gets its own ChaCha stream derived from the seed and the tree
//! index, so results do not depend on how trees are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{HmtError, Result};
use crate::inference::tensor_for;
use crate::model::{Emission, HmtModel};
use crate::observation::{Forest, Observations, ObservedTree};
use crate::tree::Tree;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimConfig {
    pub tree_count: usize,
    /// Number of node levels; a depth-1 tree is a single node.
    pub depth: usize,
    pub branching: usize,
    pub seed: u64,
    pub emit_hidden: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedForest {
    pub forest: Forest,
    /// Hidden state per node, per tree.
    pub hidden: Vec<Vec<usize>>,
}

pub fn tree_rng(seed: u64, tree_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree_index as u64);
    rng
}

/// Index drawn from unnormalized non-negative `weights`.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Hidden states and observations on a given tree shape.
pub fn sample_tree<R: Rng + ?Sized>(
    model: &HmtModel,
    tree: &Tree,
    rng: &mut R,
) -> Result<(Vec<usize>, Observations)> {
    let n = model.states;
    let mut states = vec![0; tree.len()];
    states[tree.root()] = sample_index(&model.pi, rng);
    for c in tree.downward_order() {
        let children = tree.children(c);
        if children.is_empty() {
            continue;
        }
        let tensor = tensor_for(model, tree, c)?;
        let tuple = sample_index(tensor.row(states[c]), rng);
        for (&ch, mu) in children.iter().zip(tensor.decode_tuple(tuple)) {
            states[ch] = mu;
        }
    }
    let obs = match &model.emission {
        Emission::Categorical { probs } => Observations::Categorical(
            states
                .iter()
                .map(|&s| sample_index(&probs[s], rng))
                .collect(),
        ),
        Emission::Gaussian { means, stds } => {
            let laws: Vec<Normal<f64>> = (0..n)
                .map(|s| Normal::new(means[s], stds[s]))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| HmtError::InvalidConfig(e.to_string()))?;
            Observations::Scalar(states.iter().map(|&s| laws[s].sample(rng)).collect())
        }
    };
    Ok((states, obs))
}

/// Samples on each of `trees`, using stream `i` of `seed` for tree `i`.
pub fn sample_on_trees(model: &HmtModel, trees: &[Tree], seed: u64) -> Result<SimulatedForest> {
    model.check()?;
    let sampled: Vec<(Vec<usize>, ObservedTree)> = trees
        .par_iter()
        .enumerate()
        .map(|(i, tree)| {
            let mut rng = tree_rng(seed, i);
            let (states, obs) = sample_tree(model, tree, &mut rng)?;
            Ok((states, ObservedTree::new(tree.clone(), obs)?))
        })
        .collect::<Result<_>>()?;
    let (hidden, observed): (Vec<_>, Vec<_>) = sampled.into_iter().unzip();
    Ok(SimulatedForest {
        forest: Forest::new(observed)?,
        hidden,
    })
}

/// Forest of full trees of the configured shape.
pub fn sample_forest(model: &HmtModel, config: &SimConfig) -> Result<SimulatedForest> {
    if config.tree_count == 0 || config.depth == 0 || config.branching == 0 {
        return Err(HmtError::InvalidConfig(
            "tree count, depth and branching must be positive".into(),
        ));
    }
    if config.depth > 1 && model.tensor(config.branching).is_none() {
        return Err(HmtError::MissingTensorForBranchingFactor {
            node: 0,
            branching: config.branching,
        });
    }
    let shape = Tree::full(config.branching, config.depth);
    let trees = vec![shape; config.tree_count];
    sample_on_trees(model, &trees, config.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::{coupled_two_state, three_state_cycle};
    use crate::model::TransitionTensor;

    fn config(trees: usize, depth: usize, seed: u64) -> SimConfig {
        SimConfig {
            tree_count: trees,
            depth,
            branching: 2,
            seed,
            emit_hidden: true,
        }
    }

    #[test]
    fn coupled_siblings_never_differ() {
        let m = coupled_two_state();
        let sim = sample_forest(&m, &config(200, 4, 3)).unwrap();
        for (t, h) in sim.forest.trees().iter().zip(&sim.hidden) {
            for c in t.tree.interior() {
                let ch = t.tree.children(c);
                assert_eq!(h[ch[0]], h[ch[1]]);
            }
            // deterministic emissions: symbol equals state
            assert_eq!(t.observations.as_categorical().unwrap(), &h[..]);
        }
    }

    #[test]
    fn cycle_levels() {
        let m = three_state_cycle([1.0, 0.0, 0.0], [0.0, 4.0, 4.0], [1.0; 3]);
        let sim = sample_forest(&m, &config(5, 3, 9)).unwrap();
        for h in &sim.hidden {
            assert_eq!(h, &vec![0, 1, 1, 2, 2, 2, 2]);
        }
    }

    #[test]
    fn seed_determinism() {
        let m = crate::model::presets::coupled_two_state_gaussian([0.0, 4.0], [1.0, 1.0]);
        let a = sample_forest(&m, &config(10, 5, 42)).unwrap();
        let b = sample_forest(&m, &config(10, 5, 42)).unwrap();
        assert_eq!(a, b);
        let c = sample_forest(&m, &config(10, 5, 43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn tuple_frequencies_match_row() {
        // Multinomial check: every empirical frequency within 3 standard errors.
        let t = TransitionTensor::from_rows(
            2,
            &[vec![0.4, 0.1, 0.2, 0.3], vec![0.25, 0.25, 0.25, 0.25]],
        )
        .unwrap();
        let draws = 100_000;
        let mut rng = tree_rng(5, 0);
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[sample_index(t.row(0), &mut rng)] += 1;
        }
        for (k, &p) in t.row(0).iter().enumerate() {
            let freq = counts[k] as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() < 3.0 * se, "tuple {k}: {freq} vs {p}");
        }
    }

    #[test]
    fn missing_tensor_is_reported() {
        let m = coupled_two_state();
        let cfg = SimConfig {
            branching: 3,
            ..config(1, 2, 0)
        };
        assert!(matches!(
            sample_forest(&m, &cfg),
            Err(HmtError::MissingTensorForBranchingFactor { branching: 3, .. })
        ));
    }

    #[test]
    fn zero_weights_are_never_drawn() {
        let mut rng = tree_rng(1, 0);
        for _ in 0..1000 {
            let i = sample_index(&[0.0, 0.5, 0.0, 0.5, 0.0], &mut rng);
            assert!(i == 1 || i == 3);
        }
    }
}
