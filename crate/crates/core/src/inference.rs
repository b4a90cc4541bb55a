//! Likelihood and posterior computation on a single observed tree.
//!
//! Two families of recursions live here:
//!
//! * the direct ones, `β̃_C(ρ) = P(O(subtree of C) | h(C)=ρ)` computed from the
//!   leaves up and `α̃_C(ρ) = P(O(outside subtree of C), h(C)=ρ)` computed from
//!   the root down. Their products underflow on large trees.
//! * the scaled ones, where `β_C(ρ) = P(h(C)=ρ | O(subtree of C))` is a
//!   normalized distribution at every node, `α_C` is defined so that
//!   `γ_C = α_C·β_C` is the full posterior, and the per-node normalizers
//!   multiply to the likelihood. They never underflow.
//!
//! Every contraction against a transition tensor for a node with `n` children
//! walks the `N^(n+1)` tensor entries once, so each pass costs `O(|T|·N^(n+1))`.

use rayon::prelude::*;

use crate::error::{HmtError, Result};
use crate::model::{HmtModel, TransitionTensor};
use crate::observation::{Forest, Observations};
use crate::tree::{NodeId, Tree};

/// Per-node, per-state table of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    states: usize,
    data: Vec<f64>,
}

impl StateTable {
    pub fn new(nodes: usize, states: usize, fill: f64) -> Self {
        StateTable {
            states,
            data: vec![fill; nodes * states],
        }
    }

    pub fn from_flat(states: usize, data: Vec<f64>) -> Self {
        assert!(states > 0 && data.len().is_multiple_of(states));
        StateTable { states, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let states = rows.first().map_or(0, |r| r.len());
        StateTable {
            states,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.states
    }

    pub fn row(&self, node: NodeId) -> &[f64] {
        &self.data[node * self.states..(node + 1) * self.states]
    }

    pub fn row_mut(&mut self, node: NodeId) -> &mut [f64] {
        &mut self.data[node * self.states..(node + 1) * self.states]
    }

    pub fn get(&self, node: NodeId, state: usize) -> f64 {
        self.data[node * self.states + state]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Joint posterior of a node's state and its children's state tuple, laid
/// out like the node's transition tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct XiTable {
    pub states: usize,
    pub branching: usize,
    pub data: Vec<f64>,
}

impl XiTable {
    pub fn row(&self, parent: usize) -> &[f64] {
        let w = self.data.len() / self.states;
        &self.data[parent * w..(parent + 1) * w]
    }

    pub fn get(&self, parent: usize, children: &[usize]) -> f64 {
        let t = children.iter().fold(0, |acc, &mu| acc * self.states + mu);
        self.row(parent)[t]
    }
}

pub(crate) fn tensor_for<'m>(
    model: &'m HmtModel,
    tree: &Tree,
    node: NodeId,
) -> Result<&'m TransitionTensor> {
    let branching = tree.children(node).len();
    model
        .tensor(branching)
        .ok_or(HmtError::MissingTensorForBranchingFactor { node, branching })
}

/// `Π_i w_i(μ_i)` for every child tuple, in tensor order.
pub(crate) fn tuple_products<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut out = vec![1.0];
    for w in rows {
        let mut next = Vec::with_capacity(out.len() * w.len());
        for &p in &out {
            next.extend(w.iter().map(|&x| p * x));
        }
        out = next;
    }
    out
}

/// Products over all children except the one at `skip`, whose factor is 1.
fn tuple_products_except(table: &StateTable, children: &[NodeId], skip: usize) -> Vec<f64> {
    let ones = vec![1.0; table.states()];
    tuple_products(children.iter().enumerate().map(|(i, &c)| {
        if i == skip {
            &ones[..]
        } else {
            table.row(c)
        }
    }))
}

/// `S[ρ0][ρ] = Σ_{tuples with child k = ρ} a^{ρ0}_{tuple} · products[tuple]`.
fn split_by_child(
    tensor: &TransitionTensor,
    products: &[f64],
    k: usize,
    ops: &mut u64,
) -> Vec<f64> {
    let n = tensor.states();
    let stride = n.pow((tensor.branching() - 1 - k) as u32);
    let mut s = vec![0.0; n * n];
    for parent in 0..n {
        let out = &mut s[parent * n..(parent + 1) * n];
        for (t, (&a, &p)) in tensor.row(parent).iter().zip(products).enumerate() {
            out[(t / stride) % n] += a * p;
        }
    }
    *ops += (n * tensor.tuple_count()) as u64;
    s
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `num / den` with `0/0 = 0`; a non-zero numerator over a zero prior is an error.
fn prior_ratio(num: f64, den: f64, node: NodeId, state: usize) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else if num == 0.0 {
        Ok(0.0)
    } else {
        Err(HmtError::ZeroMarginalDivision { node, state })
    }
}

// ---------------------------------------------------------------------------
// Direct recursions
// ---------------------------------------------------------------------------

/// `β̃` for every node, leaves first.
pub fn backward_unscaled(model: &HmtModel, tree: &Tree, obs: &Observations) -> Result<StateTable> {
    let n = model.states;
    let emis = model.emission_table(obs)?;
    let mut beta = StateTable::new(tree.len(), n, 0.0);
    for c in tree.upward_order() {
        let b = &emis[c * n..(c + 1) * n];
        if tree.is_leaf(c) {
            beta.row_mut(c).copy_from_slice(b);
            continue;
        }
        let tensor = tensor_for(model, tree, c)?;
        let prod = tuple_products(tree.children(c).iter().map(|&ch| beta.row(ch)));
        for rho in 0..n {
            beta.row_mut(c)[rho] = b[rho] * dot(tensor.row(rho), &prod);
        }
    }
    Ok(beta)
}

/// `α̃` for every node, root first. `α̃_root = π`.
pub fn forward_unscaled(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    beta_tilde: &StateTable,
) -> Result<StateTable> {
    let n = model.states;
    let emis = model.emission_table(obs)?;
    let mut alpha = StateTable::new(tree.len(), n, 0.0);
    alpha.row_mut(tree.root()).copy_from_slice(&model.pi);
    let mut ops = 0;
    for p in tree.downward_order() {
        let children = tree.children(p);
        if children.is_empty() {
            continue;
        }
        let tensor = tensor_for(model, tree, p)?;
        // b_{μ0}(O(p)) · α̃_p(μ0)
        let upstream: Vec<f64> = (0..n)
            .map(|mu| emis[p * n + mu] * alpha.get(p, mu))
            .collect();
        for (k, &c) in children.iter().enumerate() {
            let prod = tuple_products_except(beta_tilde, children, k);
            let s = split_by_child(tensor, &prod, k, &mut ops);
            for rho in 0..n {
                alpha.row_mut(c)[rho] = (0..n).map(|mu| upstream[mu] * s[mu * n + rho]).sum();
            }
        }
    }
    Ok(alpha)
}

/// `P(O | λ) = Σ_ρ β̃_root(ρ)·π(ρ)`. Underflows to zero on large trees.
pub fn likelihood_unscaled(model: &HmtModel, tree: &Tree, obs: &Observations) -> Result<f64> {
    let beta = backward_unscaled(model, tree, obs)?;
    Ok(dot(beta.row(tree.root()), &model.pi))
}

// ---------------------------------------------------------------------------
// Scaled recursions
// ---------------------------------------------------------------------------

/// Prior state distribution `P(h(C) = ρ)` of every node, propagated from `π`.
pub fn state_marginals(model: &HmtModel, tree: &Tree) -> Result<StateTable> {
    let n = model.states;
    let mut marg = StateTable::new(tree.len(), n, 0.0);
    marg.row_mut(tree.root()).copy_from_slice(&model.pi);
    let mut ops = 0;
    for p in tree.downward_order() {
        let children = tree.children(p);
        if children.is_empty() {
            continue;
        }
        let tensor = tensor_for(model, tree, p)?;
        let ones = vec![1.0; tensor.tuple_count()];
        for (k, &c) in children.iter().enumerate() {
            let s = split_by_child(tensor, &ones, k, &mut ops);
            for rho in 0..n {
                marg.row_mut(c)[rho] = (0..n).map(|mu| marg.get(p, mu) * s[mu * n + rho]).sum();
            }
        }
    }
    Ok(marg)
}

/// Output of the scaled upward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardScaled {
    /// `P(h(C)=ρ | O(subtree of C))`; each row sums to one.
    pub beta: StateTable,
    /// `β_C(ρ) / P(h(C)=ρ)`, i.e. the subtree likelihood of state `ρ` over
    /// the subtree evidence; 0 for states that cannot explain the subtree.
    pub ratio: StateTable,
    /// Log of each node's normalizer. They sum to the log-likelihood.
    pub log_normalizers: Vec<f64>,
}

impl BackwardScaled {
    pub fn log_likelihood(&self) -> f64 {
        self.log_normalizers.iter().sum()
    }
}

pub fn backward_scaled(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    marginals: &StateTable,
) -> Result<BackwardScaled> {
    let mut ops = 0;
    backward_scaled_inner(model, tree, obs, marginals, &mut ops)
}

/// [`backward_scaled`] plus the number of tensor-contraction steps it took
/// (one per tensor entry visited per interior node).
pub fn backward_scaled_counted(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    marginals: &StateTable,
) -> Result<(BackwardScaled, u64)> {
    let mut ops = 0;
    let out = backward_scaled_inner(model, tree, obs, marginals, &mut ops)?;
    Ok((out, ops))
}

fn backward_scaled_inner(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    marginals: &StateTable,
    ops: &mut u64,
) -> Result<BackwardScaled> {
    let n = model.states;
    let emis = model.emission_table(obs)?;
    let mut beta = StateTable::new(tree.len(), n, 0.0);
    let mut ratio = StateTable::new(tree.len(), n, 0.0);
    let mut log_normalizers = vec![0.0; tree.len()];
    let mut num = vec![0.0; n];

    let mut subtree = vec![1.0; n];

    for c in tree.upward_order() {
        let b = &emis[c * n..(c + 1) * n];
        let prior = marginals.row(c);
        if tree.is_leaf(c) {
            subtree.fill(1.0);
        } else {
            let tensor = tensor_for(model, tree, c)?;
            let prod = tuple_products(tree.children(c).iter().map(|&ch| ratio.row(ch)));
            for rho in 0..n {
                subtree[rho] = dot(tensor.row(rho), &prod);
            }
            *ops += (n * prod.len()) as u64;
        }
        for rho in 0..n {
            num[rho] = b[rho] * prior[rho] * subtree[rho];
        }
        let z: f64 = num.iter().sum();
        if !z.is_finite() {
            return Err(HmtError::NonFiniteParameter(format!(
                "upward normalizer at node {c}"
            )));
        }
        if !(z > 0.0) {
            return Err(HmtError::ImpossibleObservation { node: c });
        }
        log_normalizers[c] = z.ln();
        for rho in 0..n {
            beta.row_mut(c)[rho] = num[rho] / z;
            // formed without dividing by the prior, so it stays accurate when
            // the prior and β both underflow
            ratio.row_mut(c)[rho] = b[rho] * subtree[rho] / z;
        }
    }
    Ok(BackwardScaled {
        beta,
        ratio,
        log_normalizers,
    })
}

/// Log-likelihood from the scaled pass; `-inf` when the observations are
/// impossible under the model.
pub fn log_likelihood_scaled(model: &HmtModel, tree: &Tree, obs: &Observations) -> Result<f64> {
    let marg = state_marginals(model, tree)?;
    match backward_scaled(model, tree, obs, &marg) {
        Ok(b) => Ok(b.log_likelihood()),
        Err(HmtError::ImpossibleObservation { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Per-tree log-likelihoods of a forest, computed in parallel.
pub fn forest_log_likelihoods(model: &HmtModel, forest: &Forest) -> Result<Vec<f64>> {
    forest
        .trees()
        .par_iter()
        .map(|t| log_likelihood_scaled(model, &t.tree, &t.observations))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardScaled {
    /// `α_root = 1`; `γ = α·β`.
    pub alpha: StateTable,
    /// Posterior `P(h(C)=ρ | O)`.
    pub gamma: StateTable,
}

pub fn forward_scaled(
    model: &HmtModel,
    tree: &Tree,
    backward: &BackwardScaled,
    marginals: &StateTable,
) -> Result<ForwardScaled> {
    let (joint, gamma) = downward(model, tree, backward, marginals)?;
    let mut alpha = StateTable::new(tree.len(), model.states, 0.0);
    for c in 0..tree.len() {
        for rho in 0..model.states {
            alpha.row_mut(c)[rho] = prior_ratio(joint.get(c, rho), marginals.get(c, rho), c, rho)?;
        }
    }
    alpha.row_mut(tree.root()).fill(1.0);
    Ok(ForwardScaled { alpha, gamma })
}

/// `α·P(h)` and `γ` for every node. Working with the product avoids dividing
/// by priors that may have underflowed.
fn downward(
    model: &HmtModel,
    tree: &Tree,
    backward: &BackwardScaled,
    marginals: &StateTable,
) -> Result<(StateTable, StateTable)> {
    let n = model.states;
    let root = tree.root();
    let mut joint = StateTable::new(tree.len(), n, 0.0);
    let mut gamma = StateTable::new(tree.len(), n, 0.0);
    joint.row_mut(root).copy_from_slice(marginals.row(root));
    gamma.row_mut(root).copy_from_slice(backward.beta.row(root));
    let ratio = &backward.ratio;
    let mut ops = 0;
    let mut weight = vec![0.0; n];

    for p in tree.downward_order() {
        let children = tree.children(p);
        if children.is_empty() {
            continue;
        }
        let tensor = tensor_for(model, tree, p)?;
        for (k, &c) in children.iter().enumerate() {
            let prod = tuple_products_except(ratio, children, k);
            let s = split_by_child(tensor, &prod, k, &mut ops);
            // weight(ρ0) = γ_p(ρ0) / Σ_ρ' S[ρ0][ρ']·(β_C/P_C)(ρ'). Parent states
            // with no posterior mass drop out before the division, so a tiny
            // denominator cannot turn into inf · 0.
            for rho0 in 0..n {
                let gp = gamma.get(p, rho0);
                let den = dot(&s[rho0 * n..(rho0 + 1) * n], ratio.row(c));
                weight[rho0] = if gp > 0.0 && den > 0.0 { gp / den } else { 0.0 };
            }
            for rho in 0..n {
                let g: f64 = (0..n).map(|rho0| s[rho0 * n + rho] * weight[rho0]).sum();
                joint.row_mut(c)[rho] = g;
                gamma.row_mut(c)[rho] = ratio.get(c, rho) * g;
            }
        }
    }
    Ok((joint, gamma))
}

/// Normalized `ξ` for every interior node (`None` at leaves).
pub fn xi_scaled(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    alpha: &StateTable,
    backward: &BackwardScaled,
    marginals: &StateTable,
) -> Result<Vec<Option<XiTable>>> {
    let joint = StateTable::from_flat(
        model.states,
        alpha
            .as_slice()
            .iter()
            .zip(marginals.as_slice())
            .map(|(a, p)| a * p)
            .collect(),
    );
    xi_from_joint(model, tree, obs, &joint, &backward.ratio)
}

fn xi_from_joint(
    model: &HmtModel,
    tree: &Tree,
    obs: &Observations,
    joint: &StateTable,
    ratio: &StateTable,
) -> Result<Vec<Option<XiTable>>> {
    let n = model.states;
    let emis = model.emission_table(obs)?;
    let mut out = vec![None; tree.len()];
    for c in tree.interior() {
        let tensor = tensor_for(model, tree, c)?;
        let prod = tuple_products(tree.children(c).iter().map(|&ch| ratio.row(ch)));
        let mut data = Vec::with_capacity(n * prod.len());
        for rho in 0..n {
            let lead = joint.get(c, rho) * emis[c * n + rho];
            data.extend(
                tensor
                    .row(rho)
                    .iter()
                    .zip(&prod)
                    .map(|(&a, &p)| lead * a * p),
            );
        }
        let total: f64 = data.iter().sum();
        if !(total > 0.0) {
            return Err(HmtError::ImpossibleObservation { node: c });
        }
        data.iter_mut().for_each(|x| *x /= total);
        out[c] = Some(XiTable {
            states: n,
            branching: tensor.branching(),
            data,
        });
    }
    Ok(out)
}

/// Everything the scaled recursions produce for one tree.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPasses {
    pub marginals: StateTable,
    pub beta: StateTable,
    pub alpha: StateTable,
    pub gamma: StateTable,
    pub node_log_normalizer: Vec<f64>,
    ratio: StateTable,
    joint: StateTable,
}

impl ScaledPasses {
    pub fn run(model: &HmtModel, tree: &Tree, obs: &Observations) -> Result<Self> {
        let marginals = state_marginals(model, tree)?;
        let backward = backward_scaled(model, tree, obs, &marginals)?;
        let forward = forward_scaled(model, tree, &backward, &marginals)?;
        let (joint, _) = downward(model, tree, &backward, &marginals)?;
        Ok(ScaledPasses {
            marginals,
            beta: backward.beta,
            alpha: forward.alpha,
            gamma: forward.gamma,
            node_log_normalizer: backward.log_normalizers,
            ratio: backward.ratio,
            joint,
        })
    }

    pub fn log_likelihood(&self) -> f64 {
        self.node_log_normalizer.iter().sum()
    }

    pub fn xi(
        &self,
        model: &HmtModel,
        tree: &Tree,
        obs: &Observations,
    ) -> Result<Vec<Option<XiTable>>> {
        xi_from_joint(model, tree, obs, &self.joint, &self.ratio)
    }
}

/// Posterior quantities for one tree: the EM sufficient statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    pub gamma: StateTable,
    pub xi: Vec<Option<XiTable>>,
    pub log_likelihood: f64,
}

impl Posteriors {
    /// `γ`, `ξ` and the log-likelihood. Unlike [`ScaledPasses::run`] this
    /// never forms `α` itself, so a prior that underflows to zero where the
    /// posterior is positive does not stop it.
    pub fn compute(model: &HmtModel, tree: &Tree, obs: &Observations) -> Result<Self> {
        let marginals = state_marginals(model, tree)?;
        let backward = backward_scaled(model, tree, obs, &marginals)?;
        let (joint, gamma) = downward(model, tree, &backward, &marginals)?;
        let xi = xi_from_joint(model, tree, obs, &joint, &backward.ratio)?;
        Ok(Posteriors {
            log_likelihood: backward.log_likelihood(),
            gamma,
            xi,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::coupled_two_state;
    use crate::model::{Emission, TransitionTensor};
    use approx::assert_abs_diff_eq;

    fn aaa() -> (Tree, Observations) {
        (Tree::full(2, 2), Observations::Categorical(vec![0, 0, 0]))
    }

    #[test]
    fn single_node_leaf_termination() {
        let m = coupled_two_state();
        let t = Tree::chain(1);
        let o = Observations::Categorical(vec![0]);
        let b = backward_unscaled(&m, &t, &o).unwrap();
        assert_eq!(b.row(0), &[1.0, 0.0]);
        let marg = state_marginals(&m, &t).unwrap();
        let s = backward_scaled(&m, &t, &o, &marg).unwrap();
        assert_eq!(s.beta.row(0), &[1.0, 0.0]);
        assert_abs_diff_eq!(s.log_normalizers[0], 0.5f64.ln());
    }

    #[test]
    fn single_node_marginalization() {
        let m = HmtModel::new(
            vec![0.5, 0.5],
            [],
            Emission::Categorical {
                probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
        )
        .unwrap();
        let l =
            likelihood_unscaled(&m, &Tree::chain(1), &Observations::Categorical(vec![0])).unwrap();
        assert_eq!(l, 0.5);
    }

    #[test]
    fn three_node_coupled_hand_values() {
        let m = coupled_two_state();
        let (t, o) = aaa();
        let beta = backward_unscaled(&m, &t, &o).unwrap();
        assert_abs_diff_eq!(beta.get(0, 0), 0.9, epsilon = 1e-15);
        assert_eq!(beta.get(0, 1), 0.0);
        let alpha = forward_unscaled(&m, &t, &o, &beta).unwrap();
        assert_eq!(alpha.row(0), &m.pi[..]);
        assert_abs_diff_eq!(alpha.get(1, 0), 0.45, epsilon = 1e-15);
        assert_eq!(alpha.get(1, 1), 0.0);
        assert_abs_diff_eq!(
            likelihood_unscaled(&m, &t, &o).unwrap(),
            0.45,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            log_likelihood_scaled(&m, &t, &o).unwrap(),
            0.45f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn three_node_posteriors() {
        let m = coupled_two_state();
        let (t, o) = aaa();
        let p = Posteriors::compute(&m, &t, &o).unwrap();
        for c in 0..3 {
            assert_abs_diff_eq!(p.gamma.get(c, 0), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(p.gamma.get(c, 1), 0.0, epsilon = 1e-15);
        }
        let xi = p.xi[0].as_ref().unwrap();
        assert_abs_diff_eq!(xi.get(0, &[0, 0]), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(xi.data.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert!(p.xi[1].is_none());
    }

    #[test]
    fn impossible_observation() {
        let m = coupled_two_state();
        let t = Tree::full(2, 2);
        let o = Observations::Categorical(vec![0, 0, 1]);
        assert_eq!(likelihood_unscaled(&m, &t, &o).unwrap(), 0.0);
        let marg = state_marginals(&m, &t).unwrap();
        assert_eq!(
            backward_scaled(&m, &t, &o, &marg),
            Err(HmtError::ImpossibleObservation { node: 0 })
        );
        assert_eq!(
            log_likelihood_scaled(&m, &t, &o).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn missing_tensor() {
        let m = coupled_two_state();
        let t = Tree::chain(2);
        let o = Observations::Categorical(vec![0, 0]);
        assert_eq!(
            backward_unscaled(&m, &t, &o),
            Err(HmtError::MissingTensorForBranchingFactor {
                node: 0,
                branching: 1
            })
        );
    }

    #[test]
    fn marginals_of_symmetric_model() {
        let m = coupled_two_state();
        let t = Tree::full(2, 4);
        let marg = state_marginals(&m, &t).unwrap();
        assert_eq!(marg.row(0), &[0.5, 0.5]);
        for c in 1..t.len() {
            assert_abs_diff_eq!(marg.get(c, 0), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn root_of_forward_scaled() {
        let m = crate::model::presets::coupled_two_state_gaussian([0.0, 1.0], [1.0, 1.0]);
        let t = Tree::full(2, 3);
        let o = Observations::Scalar(vec![0.1, -0.3, 1.2, 0.5, 0.7, 2.0, -1.0]);
        let p = ScaledPasses::run(&m, &t, &o).unwrap();
        assert_eq!(p.alpha.row(0), &[1.0, 1.0]);
        assert_eq!(p.gamma.row(0), p.beta.row(0));
        for c in 0..t.len() {
            assert_abs_diff_eq!(p.beta.row(c).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(p.gamma.row(c).iter().sum::<f64>(), 1.0, epsilon = 1e-12);
            for r in 0..2 {
                assert_abs_diff_eq!(
                    p.gamma.get(c, r),
                    p.alpha.get(c, r) * p.beta.get(c, r),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn op_count_is_tensor_size_per_interior_node() {
        let t = Tree::full(2, 3);
        for n in [2usize, 3] {
            let m = HmtModel::new(
                vec![1.0 / n as f64; n],
                [TransitionTensor::uniform(n, 2)],
                Emission::Gaussian {
                    means: vec![0.0; n],
                    stds: vec![1.0; n],
                },
            )
            .unwrap();
            let o = Observations::Scalar(vec![0.0; 7]);
            let marg = state_marginals(&m, &t).unwrap();
            let (_, ops) = backward_scaled_counted(&m, &t, &o, &marg).unwrap();
            assert_eq!(ops, 3 * (n as u64).pow(3));
        }
    }

    #[test]
    fn denormal_tensor_entry_keeps_posteriors_finite() {
        // Parent state 1 is ruled out by the root symbol, and its only route to
        // the observed children is a denormal tensor entry.
        let m = HmtModel::new(
            vec![0.5, 0.5],
            [TransitionTensor::from_rows(
                2,
                &[vec![0.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 5e-324]],
            )
            .unwrap()],
            Emission::Categorical {
                probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
        )
        .unwrap();
        let (t, o) = (Tree::full(2, 2), Observations::Categorical(vec![0, 1, 1]));
        let p = Posteriors::compute(&m, &t, &o).unwrap();
        assert_abs_diff_eq!(p.log_likelihood, 0.5f64.ln(), epsilon = 1e-15);
        assert_eq!(p.gamma.row(0), &[1.0, 0.0]);
        assert_eq!(p.gamma.row(1), &[0.0, 1.0]);
        assert_eq!(p.gamma.row(2), &[0.0, 1.0]);
        assert_abs_diff_eq!(p.xi[0].as_ref().unwrap().get(0, &[1, 1]), 1.0);
    }
}
