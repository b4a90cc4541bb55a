//! Shared generators and reference computations for the integration tests.
#![allow(dead_code)]

use hmt::simulate::sample_tree;
use hmt::{Emission, HmtModel, Observations, TransitionTensor, Tree};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-stochastic rows with roughly `zero_prob` of entries forced to zero
/// (at least one positive entry per row).
pub fn random_rows(
    rng: &mut ChaCha8Rng,
    rows: usize,
    width: usize,
    zero_prob: f64,
) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut row: Vec<f64> = (0..width)
                .map(|_| {
                    if rng.random_bool(zero_prob) {
                        0.0
                    } else {
                        rng.random_range(0.05..1.0)
                    }
                })
                .collect();
            if row.iter().all(|&x| x == 0.0) {
                row[rng.random_range(0..width)] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
            row
        })
        .collect()
}

pub fn random_tensor(
    rng: &mut ChaCha8Rng,
    states: usize,
    branching: usize,
    zero_prob: f64,
) -> TransitionTensor {
    let rows = random_rows(rng, states, states.pow(branching as u32), zero_prob);
    TransitionTensor::from_rows(branching, &rows).unwrap()
}

pub fn random_emission(rng: &mut ChaCha8Rng, states: usize, categorical: bool) -> Emission {
    if categorical {
        Emission::Categorical {
            probs: random_rows(rng, states, 3, 0.2),
        }
    } else {
        Emission::Gaussian {
            means: (0..states).map(|_| rng.random_range(-2.0..2.0)).collect(),
            stds: (0..states).map(|_| rng.random_range(0.3..2.0)).collect(),
        }
    }
}

pub fn random_model(
    rng: &mut ChaCha8Rng,
    states: usize,
    branchings: &[usize],
    categorical: bool,
) -> HmtModel {
    let pi = random_rows(rng, 1, states, 0.2).remove(0);
    let tensors: Vec<_> = branchings
        .iter()
        .map(|&n| random_tensor(rng, states, n, 0.3))
        .collect();
    HmtModel::new(pi, tensors, random_emission(rng, states, categorical)).unwrap()
}

/// Random tree of at most `max_nodes` nodes whose interior nodes have two or
/// three children, with node ids shuffled so the root can be anywhere.
pub fn random_tree(rng: &mut ChaCha8Rng, max_nodes: usize) -> Tree {
    let mut parents: Vec<Option<usize>> = vec![None];
    let mut leaves = vec![0usize];
    loop {
        let n = if rng.random_bool(0.5) { 2 } else { 3 };
        if parents.len() + n > max_nodes || leaves.is_empty() || rng.random_bool(0.15) {
            break;
        }
        let at = rng.random_range(0..leaves.len());
        let p = leaves.swap_remove(at);
        for _ in 0..n {
            leaves.push(parents.len());
            parents.push(Some(p));
        }
    }
    let mut ids: Vec<usize> = (0..parents.len()).collect();
    ids.shuffle(rng);
    let mut relabeled = vec![None; parents.len()];
    for (old, p) in parents.iter().enumerate() {
        relabeled[ids[old]] = p.map(|q| ids[q]);
    }
    Tree::from_parents(&relabeled).unwrap()
}

pub struct Instance {
    pub model: HmtModel,
    pub tree: Tree,
    pub obs: Observations,
}

/// Model, tree and observations sampled from the model (so the likelihood is positive).
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = rng(seed);
    let states = rng.random_range(2..=3);
    let categorical = rng.random_bool(0.5);
    let model = random_model(&mut rng, states, &[2, 3], categorical);
    let tree = random_tree(&mut rng, 9);
    let (_, obs) = sample_tree(&model, &tree, &mut rng).unwrap();
    Instance { model, tree, obs }
}

/// Textbook scaled forward-backward for a chain with transition matrix
/// `a[i][j]` and per-step emission likelihoods `b[t][i]`. Returns the
/// log-likelihood, `γ[t][i]` and `ξ[t][i][j]` (transition from step `t` to `t+1`).
pub fn classical_forward_backward(
    pi: &[f64],
    a: &[Vec<f64>],
    b: &[Vec<f64>],
) -> (f64, Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
    let n = pi.len();
    let len = b.len();
    let mut alpha = vec![vec![0.0; n]; len];
    let mut scale = vec![0.0; len];
    for i in 0..n {
        alpha[0][i] = pi[i] * b[0][i];
    }
    scale[0] = alpha[0].iter().sum();
    alpha[0].iter_mut().for_each(|x| *x /= scale[0]);
    for t in 1..len {
        for j in 0..n {
            alpha[t][j] = (0..n).map(|i| alpha[t - 1][i] * a[i][j]).sum::<f64>() * b[t][j];
        }
        scale[t] = alpha[t].iter().sum();
        let s = scale[t];
        alpha[t].iter_mut().for_each(|x| *x /= s);
    }
    let mut beta = vec![vec![1.0; n]; len];
    for t in (0..len - 1).rev() {
        for i in 0..n {
            beta[t][i] = (0..n)
                .map(|j| a[i][j] * b[t + 1][j] * beta[t + 1][j])
                .sum::<f64>()
                / scale[t + 1];
        }
    }
    let gamma = (0..len)
        .map(|t| (0..n).map(|i| alpha[t][i] * beta[t][i]).collect())
        .collect();
    let xi = (0..len - 1)
        .map(|t| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            alpha[t][i] * a[i][j] * b[t + 1][j] * beta[t + 1][j] / scale[t + 1]
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    (scale.iter().map(|s| s.ln()).sum(), gamma, xi)
}

/// Every permutation of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
