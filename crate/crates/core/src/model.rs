//! Model parameters: root distribution, coupled transition tensors and
//! per-state emission laws.
//!
//! A transition tensor for branching factor `n` stores
//! `P(child_1 = μ1, ..., child_n = μn | parent = μ0)` densely. The flat index
//! is `μ0·N^n + Σ_i μi·N^(n-i)`, i.e. for a fixed parent state the child
//! tuples run in lexicographic order with the first child most significant.
//! Nothing forces the entries to factorize across children.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use crate::error::{HmtError, Result};
use crate::observation::{Observation, ObservationKind, Observations};

/// Absolute tolerance on probability sums.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTensor {
    states: usize,
    branching: usize,
    entries: Vec<f64>,
}

impl TransitionTensor {
    pub fn new(states: usize, branching: usize, entries: Vec<f64>) -> Result<Self> {
        if states == 0 || branching == 0 {
            return Err(HmtError::DimensionMismatch(format!(
                "tensor needs at least one state and one child (got N={states}, n={branching})"
            )));
        }
        let expected = checked_pow(states, branching + 1)?;
        if entries.len() != expected {
            return Err(HmtError::DimensionMismatch(format!(
                "tensor with N={states}, n={branching} needs {expected} entries, got {}",
                entries.len()
            )));
        }
        Ok(TransitionTensor {
            states,
            branching,
            entries,
        })
    }

    /// One row of `N^n` entries per parent state.
    pub fn from_rows(branching: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let states = rows.len();
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        let per_row = checked_pow(states.max(1), branching)?;
        if rows.iter().any(|r| r.len() != per_row) {
            return Err(HmtError::DimensionMismatch(format!(
                "every row of a tensor with N={states}, n={branching} needs {per_row} entries"
            )));
        }
        TransitionTensor::new(states, branching, entries)
    }

    pub fn uniform(states: usize, branching: usize) -> Self {
        let tuples = states.pow(branching as u32);
        TransitionTensor::new(
            states,
            branching,
            vec![1.0 / tuples as f64; tuples * states],
        )
        .expect("uniform tensor dimensions")
    }

    /// Tensor whose rows are products of per-child stochastic matrices, i.e.
    /// children drawn independently given the parent.
    pub fn factorized(per_child: &[Vec<Vec<f64>>]) -> Result<Self> {
        let branching = per_child.len();
        let states = per_child.first().map_or(0, |m| m.len());
        for (i, m) in per_child.iter().enumerate() {
            if m.len() != states || m.iter().any(|row| row.len() != states) {
                return Err(HmtError::DimensionMismatch(format!(
                    "matrix {i} is not {states}x{states}"
                )));
            }
        }
        let tuples = checked_pow(states.max(1), branching)?;
        let mut entries = Vec::with_capacity(states * tuples);
        let mut digits = vec![0usize; branching];
        for parent in 0..states {
            for t in 0..tuples {
                decode_into(t, states, &mut digits);
                entries.push(
                    digits
                        .iter()
                        .enumerate()
                        .map(|(i, &mu)| per_child[i][parent][mu])
                        .product(),
                );
            }
        }
        TransitionTensor::new(states, branching, entries)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    /// `N^n`.
    pub fn tuple_count(&self) -> usize {
        self.entries.len() / self.states
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, parent: usize) -> &[f64] {
        let w = self.tuple_count();
        &self.entries[parent * w..(parent + 1) * w]
    }

    pub fn row_mut(&mut self, parent: usize) -> &mut [f64] {
        let w = self.tuple_count();
        &mut self.entries[parent * w..(parent + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks(self.tuple_count())
    }

    pub fn tuple_index(&self, children: &[usize]) -> usize {
        debug_assert_eq!(children.len(), self.branching);
        children.iter().fold(0, |acc, &mu| acc * self.states + mu)
    }

    pub fn decode_tuple(&self, tuple: usize) -> Vec<usize> {
        let mut digits = vec![0; self.branching];
        decode_into(tuple, self.states, &mut digits);
        digits
    }

    pub fn get(&self, parent: usize, children: &[usize]) -> f64 {
        self.row(parent)[self.tuple_index(children)]
    }

    /// Probability that child `child_index` is in `state` given the parent
    /// state, summed over the remaining children.
    pub fn child_tuple_marginal(&self, parent: usize, child_index: usize, state: usize) -> f64 {
        let stride = self.states.pow((self.branching - 1 - child_index) as u32);
        self.row(parent)
            .iter()
            .enumerate()
            .filter(|(t, _)| (t / stride) % self.states == state)
            .map(|(_, &a)| a)
            .sum()
    }

    /// Rescale every row to sum to one. Rows with zero mass become uniform.
    pub fn renormalize(&mut self) {
        let w = self.tuple_count();
        for row in self.entries.chunks_mut(w) {
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|x| *x /= s);
            } else {
                row.iter_mut().for_each(|x| *x = 1.0 / w as f64);
            }
        }
    }
}

/// Writes the base-`states` digits of `tuple` into `digits`, most significant first.
pub(crate) fn decode_into(mut tuple: usize, states: usize, digits: &mut [usize]) {
    for d in digits.iter_mut().rev() {
        *d = tuple % states;
        tuple /= states;
    }
}

fn checked_pow(base: usize, exp: usize) -> Result<usize> {
    base.checked_pow(exp as u32)
        .ok_or_else(|| HmtError::DimensionMismatch(format!("{base}^{exp} overflows")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Emission {
    /// `probs[state][symbol]`.
    Categorical {
        probs: Vec<Vec<f64>>,
    },
    Gaussian {
        means: Vec<f64>,
        stds: Vec<f64>,
    },
}

impl Emission {
    pub fn states(&self) -> usize {
        match self {
            Emission::Categorical { probs } => probs.len(),
            Emission::Gaussian { means, .. } => means.len(),
        }
    }

    pub fn kind(&self) -> ObservationKind {
        match self {
            Emission::Categorical { .. } => ObservationKind::Categorical,
            Emission::Gaussian { .. } => ObservationKind::Scalar,
        }
    }

    /// Probability mass (categorical) or density (Gaussian) of `obs` in `state`.
    pub fn density(&self, state: usize, obs: Observation) -> Result<f64> {
        match (self, obs) {
            (Emission::Categorical { probs }, Observation::Symbol(v)) => {
                let row = &probs[state];
                row.get(v).copied().ok_or(HmtError::SymbolOutOfRange {
                    symbol: v,
                    alphabet: row.len(),
                })
            }
            (Emission::Gaussian { means, stds }, Observation::Scalar(x)) => {
                Ok(gaussian_pdf(x, means[state], stds[state]))
            }
            _ => Err(HmtError::KindMismatch {
                expected: self.kind().as_str(),
                found: obs.kind().as_str(),
            }),
        }
    }
}

pub fn gaussian_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * (2.0 * PI).sqrt())
}

/// One failed constraint found by [`HmtModel::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoStates,
    PiLength {
        expected: usize,
        found: usize,
    },
    PiEntry {
        state: usize,
        value: f64,
    },
    PiSum {
        sum: f64,
    },
    TensorStates {
        branching: usize,
        states: usize,
    },
    TensorBranching {
        key: usize,
        branching: usize,
    },
    TensorEntry {
        branching: usize,
        parent: usize,
        tuple: usize,
        value: f64,
    },
    TensorRowSum {
        branching: usize,
        parent: usize,
        sum: f64,
    },
    EmissionStates {
        expected: usize,
        found: usize,
    },
    EmissionEntry {
        state: usize,
        symbol: usize,
        value: f64,
    },
    EmissionRowSum {
        state: usize,
        sum: f64,
    },
    GaussianMean {
        state: usize,
        value: f64,
    },
    GaussianStd {
        state: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoStates => write!(f, "model has zero states"),
            Violation::PiLength { expected, found } => {
                write!(f, "pi has {found} entries, expected {expected}")
            }
            Violation::PiEntry { state, value } => write!(f, "pi[{state}] = {value}"),
            Violation::PiSum { sum } => write!(f, "pi sums to {sum}"),
            Violation::TensorStates { branching, states } => {
                write!(f, "tensor n={branching} has {states} states")
            }
            Violation::TensorBranching { key, branching } => {
                write!(f, "tensor stored under n={key} has branching {branching}")
            }
            Violation::TensorEntry {
                branching,
                parent,
                tuple,
                value,
            } => write!(
                f,
                "tensor n={branching} entry ({parent}, {tuple}) = {value}"
            ),
            Violation::TensorRowSum {
                branching,
                parent,
                sum,
            } => write!(f, "tensor n={branching} row {parent} sums to {sum}"),
            Violation::EmissionStates { expected, found } => {
                write!(f, "emission has {found} states, expected {expected}")
            }
            Violation::EmissionEntry {
                state,
                symbol,
                value,
            } => write!(f, "emission b[{state}][{symbol}] = {value}"),
            Violation::EmissionRowSum { state, sum } => {
                write!(f, "emission row {state} sums to {sum}")
            }
            Violation::GaussianMean { state, value } => write!(f, "mean[{state}] = {value}"),
            Violation::GaussianStd { state, value } => write!(f, "std[{state}] = {value}"),
        }
    }
}

fn bad_probability(x: f64) -> bool {
    !(x.is_finite() && (0.0..=1.0).contains(&x))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmtModel {
    pub states: usize,
    pub pi: Vec<f64>,
    /// Keyed by branching factor.
    pub transitions: BTreeMap<usize, TransitionTensor>,
    pub emission: Emission,
}

impl HmtModel {
    /// Builds a model and rejects it if [`HmtModel::validate`] finds anything.
    pub fn new(
        pi: Vec<f64>,
        transitions: impl IntoIterator<Item = TransitionTensor>,
        emission: Emission,
    ) -> Result<Self> {
        let model = HmtModel {
            states: pi.len(),
            pi,
            transitions: transitions
                .into_iter()
                .map(|t| (t.branching(), t))
                .collect(),
            emission,
        };
        model.check()?;
        Ok(model)
    }

    pub fn check(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(HmtError::InvalidModel(v))
        }
    }

    /// Every violated constraint, with its location. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.states;
        let mut out = Vec::new();
        if n == 0 {
            out.push(Violation::NoStates);
        }
        if self.pi.len() != n {
            out.push(Violation::PiLength {
                expected: n,
                found: self.pi.len(),
            });
        }
        for (state, &value) in self.pi.iter().enumerate() {
            if bad_probability(value) {
                out.push(Violation::PiEntry { state, value });
            }
        }
        let sum: f64 = self.pi.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            out.push(Violation::PiSum { sum });
        }

        for (&key, t) in &self.transitions {
            if t.branching() != key {
                out.push(Violation::TensorBranching {
                    key,
                    branching: t.branching(),
                });
            }
            if t.states() != n {
                out.push(Violation::TensorStates {
                    branching: key,
                    states: t.states(),
                });
                continue;
            }
            for (parent, row) in t.rows().enumerate() {
                for (tuple, &value) in row.iter().enumerate() {
                    if bad_probability(value) {
                        out.push(Violation::TensorEntry {
                            branching: key,
                            parent,
                            tuple,
                            value,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                    out.push(Violation::TensorRowSum {
                        branching: key,
                        parent,
                        sum,
                    });
                }
            }
        }

        if self.emission.states() != n {
            out.push(Violation::EmissionStates {
                expected: n,
                found: self.emission.states(),
            });
        }
        match &self.emission {
            Emission::Categorical { probs } => {
                for (state, row) in probs.iter().enumerate() {
                    for (symbol, &value) in row.iter().enumerate() {
                        if bad_probability(value) {
                            out.push(Violation::EmissionEntry {
                                state,
                                symbol,
                                value,
                            });
                        }
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                        out.push(Violation::EmissionRowSum { state, sum });
                    }
                }
            }
            Emission::Gaussian { means, stds } => {
                if stds.len() != means.len() {
                    out.push(Violation::EmissionStates {
                        expected: means.len(),
                        found: stds.len(),
                    });
                }
                for (state, &value) in means.iter().enumerate() {
                    if !value.is_finite() {
                        out.push(Violation::GaussianMean { state, value });
                    }
                }
                for (state, &value) in stds.iter().enumerate() {
                    if !(value.is_finite() && value > 0.0) {
                        out.push(Violation::GaussianStd { state, value });
                    }
                }
            }
        }
        out
    }

    pub fn tensor(&self, branching: usize) -> Option<&TransitionTensor> {
        self.transitions.get(&branching)
    }

    pub fn emission_density(&self, state: usize, obs: Observation) -> Result<f64> {
        self.emission.density(state, obs)
    }

    /// Densities for every node and state, flattened node-major.
    pub fn emission_table(&self, obs: &Observations) -> Result<Vec<f64>> {
        let n = self.states;
        let mut out = Vec::with_capacity(obs.len() * n);
        for node in 0..obs.len() {
            let o = obs.get(node);
            for state in 0..n {
                out.push(self.emission.density(state, o)?);
            }
        }
        Ok(out)
    }

    /// Rescale pi, tensor rows and categorical emission rows to sum to one.
    pub fn renormalize(&mut self) {
        normalize_in_place(&mut self.pi);
        for t in self.transitions.values_mut() {
            t.renormalize();
        }
        if let Emission::Categorical { probs } = &mut self.emission {
            probs.iter_mut().for_each(|r| normalize_in_place(r));
        }
    }

    /// Same model with state `s` renamed to `perm[s]`.
    pub fn permuted(&self, perm: &[usize]) -> HmtModel {
        let n = self.states;
        assert_eq!(perm.len(), n);
        let mut pi = vec![0.0; n];
        for s in 0..n {
            pi[perm[s]] = self.pi[s];
        }
        let transitions = self
            .transitions
            .iter()
            .map(|(&k, t)| {
                let mut entries = vec![0.0; t.entries.len()];
                let mut digits = vec![0; k];
                let w = t.tuple_count();
                for parent in 0..n {
                    for tuple in 0..w {
                        decode_into(tuple, n, &mut digits);
                        let mapped = digits.iter().fold(0, |acc, &d| acc * n + perm[d]);
                        entries[perm[parent] * w + mapped] = t.row(parent)[tuple];
                    }
                }
                (k, TransitionTensor::new(n, k, entries).expect("same shape"))
            })
            .collect();
        let emission = match &self.emission {
            Emission::Categorical { probs } => {
                let mut out = probs.clone();
                for s in 0..n {
                    out[perm[s]] = probs[s].clone();
                }
                Emission::Categorical { probs: out }
            }
            Emission::Gaussian { means, stds } => {
                let mut m = means.clone();
                let mut sd = stds.clone();
                for s in 0..n {
                    m[perm[s]] = means[s];
                    sd[perm[s]] = stds[s];
                }
                Emission::Gaussian { means: m, stds: sd }
            }
        };
        HmtModel {
            states: n,
            pi,
            transitions,
            emission,
        }
    }

    /// Largest absolute difference between corresponding parameters, or
    /// infinity if the models have different shapes.
    pub fn max_abs_diff(&self, other: &HmtModel) -> f64 {
        fn diff(a: &[f64], b: &[f64]) -> f64 {
            if a.len() != b.len() {
                return f64::INFINITY;
            }
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        }
        if self.states != other.states || self.transitions.keys().ne(other.transitions.keys()) {
            return f64::INFINITY;
        }
        let mut d = diff(&self.pi, &other.pi);
        for (k, t) in &self.transitions {
            d = d.max(diff(t.entries(), other.transitions[k].entries()));
        }
        match (&self.emission, &other.emission) {
            (Emission::Categorical { probs: a }, Emission::Categorical { probs: b }) => {
                for (ra, rb) in a.iter().zip(b) {
                    d = d.max(diff(ra, rb));
                }
            }
            (
                Emission::Gaussian {
                    means: ma,
                    stds: sa,
                },
                Emission::Gaussian {
                    means: mb,
                    stds: sb,
                },
            ) => {
                d = d.max(diff(ma, mb)).max(diff(sa, sb));
            }
            _ => return f64::INFINITY,
        }
        d
    }

    /// Every parameter as `(name, value)`, in a fixed order.
    pub fn named_parameters(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (s, &p) in self.pi.iter().enumerate() {
            out.push((format!("pi[{s}]"), p));
        }
        for (k, t) in &self.transitions {
            for (parent, row) in t.rows().enumerate() {
                for (tuple, &a) in row.iter().enumerate() {
                    let children = t
                        .decode_tuple(tuple)
                        .iter()
                        .map(|d| d.to_string())
                        .collect::<Vec<_>>()
                        .join(" ");
                    out.push((format!("a{k}[{parent}][{children}]"), a));
                }
            }
        }
        match &self.emission {
            Emission::Categorical { probs } => {
                for (s, row) in probs.iter().enumerate() {
                    for (v, &b) in row.iter().enumerate() {
                        out.push((format!("b[{s}][{v}]"), b));
                    }
                }
            }
            Emission::Gaussian { means, stds } => {
                for (s, (&m, &sd)) in means.iter().zip(stds).enumerate() {
                    out.push((format!("mean[{s}]"), m));
                    out.push((format!("std[{s}]"), sd));
                }
            }
        }
        out
    }
}

pub(crate) fn normalize_in_place(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    } else if !v.is_empty() {
        let u = 1.0 / v.len() as f64;
        v.iter_mut().for_each(|x| *x = u);
    }
}

/// Ready-made models used by the tests, the examples in the README and the CLI.
pub mod presets {
    use super::*;

    /// Two states whose siblings always share the parent's choice:
    /// a parent in state 0 has both children in state 0 w.p. 0.9 and both in
    /// state 1 w.p. 0.1 (mirrored for parent state 1). Mixed tuples have zero mass.
    pub fn coupled_two_state_tensor() -> TransitionTensor {
        TransitionTensor::from_rows(2, &[vec![0.9, 0.0, 0.0, 0.1], vec![0.1, 0.0, 0.0, 0.9]])
            .expect("2x4 rows")
    }

    /// [`coupled_two_state_tensor`] with deterministic symbols: state 0 emits
    /// symbol 0 ("A"), state 1 emits symbol 1 ("B").
    pub fn coupled_two_state() -> HmtModel {
        HmtModel::new(
            vec![0.5, 0.5],
            [coupled_two_state_tensor()],
            Emission::Categorical {
                probs: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            },
        )
        .expect("valid preset")
    }

    pub fn coupled_two_state_gaussian(means: [f64; 2], stds: [f64; 2]) -> HmtModel {
        HmtModel::new(
            vec![0.5, 0.5],
            [coupled_two_state_tensor()],
            Emission::Gaussian {
                means: means.to_vec(),
                stds: stds.to_vec(),
            },
        )
        .expect("valid preset")
    }

    /// Deterministic three-state cycle on binary trees: both children of a
    /// state-`s` parent are in state `(s + 1) % 3`.
    pub fn three_state_cycle_tensor() -> TransitionTensor {
        let mut rows = vec![vec![0.0; 9]; 3];
        for (s, row) in rows.iter_mut().enumerate() {
            let c = (s + 1) % 3;
            row[c * 3 + c] = 1.0;
        }
        TransitionTensor::from_rows(2, &rows).expect("3x9 rows")
    }

    pub fn three_state_cycle(pi: [f64; 3], means: [f64; 3], stds: [f64; 3]) -> HmtModel {
        HmtModel::new(
            pi.to_vec(),
            [three_state_cycle_tensor()],
            Emission::Gaussian {
                means: means.to_vec(),
                stds: stds.to_vec(),
            },
        )
        .expect("valid preset")
    }
}
