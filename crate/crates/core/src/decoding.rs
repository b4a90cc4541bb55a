//! Hidden-state decoding: the single most probable state tree (max-product
//! over child tuples, in log space) and per-node posterior argmax.

use crate::error::{HmtError, Result};
use crate::inference::{tensor_for, StateTable};
use crate::model::HmtModel;
use crate::observation::Observations;
use crate::tree::Tree;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    pub states: Vec<usize>,
    /// `log max_h P(h, O)`.
    pub log_score: f64,
}

/// Log best scores and the maximizing child tuple for every (node, state).
#[derive(Debug, Clone, PartialEq)]
pub struct BestScoreTable {
    pub delta_log: StateTable,
    /// `argmax_children[node][state]` is a tuple index into the node's tensor;
    /// empty at leaves.
    pub argmax_children: Vec<Vec<usize>>,
}

fn ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

pub fn best_scores(model: &HmtModel, tree: &Tree, obs: &Observations) -> Result<BestScoreTable> {
    let n = model.states;
    let emis = model.emission_table(obs)?;
    let mut delta = StateTable::new(tree.len(), n, f64::NEG_INFINITY);
    let mut argmax_children = vec![Vec::new(); tree.len()];

    for c in tree.upward_order() {
        let log_b: Vec<f64> = emis[c * n..(c + 1) * n].iter().map(|&b| ln(b)).collect();
        if tree.is_leaf(c) {
            delta.row_mut(c).copy_from_slice(&log_b);
            continue;
        }
        let tensor = tensor_for(model, tree, c)?;
        // Σ_i δ_{child_i}(μ_i) for every tuple, tensor order.
        let mut sums = vec![0.0];
        for &ch in tree.children(c) {
            sums = sums
                .iter()
                .flat_map(|&s| delta.row(ch).iter().map(move |&d| s + d))
                .collect();
        }
        let mut best_tuples = vec![0; n];
        for rho in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (t, (&a, &s)) in tensor.row(rho).iter().zip(&sums).enumerate() {
                let v = ln(a) + s;
                // strict comparison keeps the lexicographically smallest tuple
                if v > best {
                    best = v;
                    arg = t;
                }
            }
            delta.row_mut(c)[rho] = log_b[rho] + best;
            best_tuples[rho] = arg;
        }
        argmax_children[c] = best_tuples;
    }
    Ok(BestScoreTable {
        delta_log: delta,
        argmax_children,
    })
}

/// Most probable hidden-state tree. Ties go to the smallest root state and
/// the lexicographically smallest child tuple.
pub fn viterbi_decode(model: &HmtModel, tree: &Tree, obs: &Observations) -> Result<DecodeResult> {
    let n = model.states;
    let table = best_scores(model, tree, obs)?;
    let root = tree.root();
    let mut best = f64::NEG_INFINITY;
    let mut root_state = 0;
    for mu in 0..n {
        let v = table.delta_log.get(root, mu) + ln(model.pi[mu]);
        if v > best {
            best = v;
            root_state = mu;
        }
    }
    if best == f64::NEG_INFINITY {
        let node = tree
            .upward_order()
            .into_iter()
            .find(|&c| {
                table
                    .delta_log
                    .row(c)
                    .iter()
                    .all(|&d| d == f64::NEG_INFINITY)
            })
            .unwrap_or(root);
        return Err(HmtError::AllZeroLikelihood { node });
    }

    let mut states = vec![0; tree.len()];
    states[root] = root_state;
    for c in tree.downward_order() {
        let children = tree.children(c);
        if children.is_empty() {
            continue;
        }
        let tuple = table.argmax_children[c][states[c]];
        let tensor = tensor_for(model, tree, c)?;
        for (&ch, mu) in children.iter().zip(tensor.decode_tuple(tuple)) {
            states[ch] = mu;
        }
    }
    Ok(DecodeResult {
        states,
        log_score: best,
    })
}

/// Per-node argmax of the posterior; ties go to the lowest state id.
pub fn posterior_decode(gamma: &StateTable) -> Vec<usize> {
    (0..gamma.nodes())
        .map(|c| {
            let row = gamma.row(c);
            let mut arg = 0;
            for (s, &g) in row.iter().enumerate() {
                if g > row[arg] {
                    arg = s;
                }
            }
            arg
        })
        .collect()
}

/// `log P(h = states, O)` evaluated term by term.
pub fn joint_log_score(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    states: &[usize],
) -> Result<f64> {
    let mut s = ln(model.pi[states[tree.root()]]);
    for c in 0..tree.len() {
        s += ln(model.emission_density(states[c], obs.get(c))?);
        if !tree.is_leaf(c) {
            let tensor = tensor_for(model, tree, c)?;
            let children: Vec<usize> = tree.children(c).iter().map(|&ch| states[ch]).collect();
            s += ln(tensor.get(states[c], &children));
        }
    }
    Ok(s)
}
