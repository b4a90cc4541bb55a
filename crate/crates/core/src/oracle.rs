//! Brute-force enumeration over every hidden-state assignment.
//!
//! Exponential in the tree size; only meant as ground truth for small trees.

use crate::error::{HmtError, Result};
use crate::inference::{tensor_for, StateTable, XiTable};
use crate::model::HmtModel;
use crate::observation::Observations;
use crate::tree::Tree;

pub const DEFAULT_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EnumerationResult {
    pub likelihood: f64,
    /// Lexicographically smallest assignment (in node-id order) attaining the maximum.
    pub map_assignment: Vec<usize>,
    pub map_score: f64,
    pub gamma: StateTable,
    /// `None` at leaves.
    pub xi: Vec<Option<XiTable>>,
}

/// `π(h(root)) · Π_C b_{h(C)}(O(C)) · Π_{interior C} a^{h(C)}_{h(children)}`.
pub fn joint_probability(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    states: &[usize],
) -> Result<f64> {
    let mut p = model.pi[states[tree.root()]];
    for c in 0..tree.len() {
        p *= model.emission_density(states[c], obs.get(c))?;
        if !tree.is_leaf(c) {
            let tensor = tensor_for(model, tree, c)?;
            let children: Vec<usize> = tree.children(c).iter().map(|&ch| states[ch]).collect();
            p *= tensor.get(states[c], &children);
        }
    }
    Ok(p)
}

pub fn enumerate(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    budget: u128,
) -> Result<EnumerationResult> {
    let n = model.states;
    let len = tree.len();
    let required = (n as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if required > budget {
        return Err(HmtError::BudgetExceeded { required, budget });
    }
    for c in tree.interior() {
        tensor_for(model, tree, c)?;
    }

    let mut gamma = vec![0.0; len * n];
    let mut xi: Vec<Option<Vec<f64>>> = (0..len)
        .map(|c| (!tree.is_leaf(c)).then(|| vec![0.0; n.pow(tree.children(c).len() as u32 + 1)]))
        .collect();
    let mut likelihood = 0.0;
    let mut map_score = -1.0;
    let mut map_assignment = vec![0; len];

    // Odometer over assignments, node 0 most significant.
    let mut states = vec![0usize; len];
    loop {
        let p = joint_probability(model, tree, obs, &states)?;
        likelihood += p;
        if p > map_score {
            map_score = p;
            map_assignment.copy_from_slice(&states);
        }
        if p > 0.0 {
            for c in 0..len {
                gamma[c * n + states[c]] += p;
                if let Some(x) = xi[c].as_mut() {
                    let idx = tree
                        .children(c)
                        .iter()
                        .fold(states[c], |acc, &ch| acc * n + states[ch]);
                    x[idx] += p;
                }
            }
        }

        let mut pos = len;
        loop {
            if pos == 0 {
                let norm = |v: &mut Vec<f64>| {
                    if likelihood > 0.0 {
                        v.iter_mut().for_each(|x| *x /= likelihood);
                    }
                };
                norm(&mut gamma);
                let xi = xi
                    .into_iter()
                    .enumerate()
                    .map(|(c, x)| {
                        x.map(|mut data| {
                            norm(&mut data);
                            XiTable {
                                states: n,
                                branching: tree.children(c).len(),
                                data,
                            }
                        })
                    })
                    .collect();
                return Ok(EnumerationResult {
                    likelihood,
                    map_assignment,
                    map_score,
                    gamma: StateTable::from_flat(n, gamma),
                    xi,
                });
            }
            pos -= 1;
            states[pos] += 1;
            if states[pos] < n {
                break;
            }
            states[pos] = 0;
        }
    }
}
