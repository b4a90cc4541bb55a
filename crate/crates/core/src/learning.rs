//! Expectation-maximization over a forest.
//!
//! The E-step runs the scaled recursions on every tree (in parallel) and
//! keeps `γ` and `ξ`. The M-step re-estimates
//!
//! * each transition tensor row from the summed `ξ` of all interior nodes
//!   with that branching factor, normalized by the same sums;
//! * categorical emissions from `γ`-weighted symbol counts, Gaussian
//!   emissions from `γ`-weighted moments;
//! * `π` as the mean root posterior over trees.
//!
//! Rows with no posterior mass keep their previous values.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{HmtError, Result};
use crate::inference::{Posteriors, StateTable, XiTable};
use crate::model::{normalize_in_place, Emission, HmtModel, TransitionTensor};
use crate::observation::{Forest, ObservationKind, Observations};

pub const DEFAULT_MIN_STD: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;
pub const MONOTONICITY_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    Model(HmtModel),
    /// 1-D k-means for scalar data, perturbed empirical frequencies for
    /// categorical data. See [`initial_model`].
    KMeans,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub states: usize,
    pub max_iterations: usize,
    /// Stop once the total log-likelihood moves by less than this.
    pub tolerance: f64,
    pub seed: u64,
    pub init: InitStrategy,
    pub min_std: f64,
    pub monotonicity_slack: f64,
}

impl FitConfig {
    pub fn new(states: usize) -> Self {
        FitConfig {
            states,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
            init: InitStrategy::KMeans,
            min_std: DEFAULT_MIN_STD,
            monotonicity_slack: MONOTONICITY_SLACK,
        }
    }

    fn check(&self) -> Result<()> {
        if self.states == 0 {
            return Err(HmtError::InvalidConfig(
                "state count must be positive".into(),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(HmtError::InvalidConfig("tolerance must be positive".into()));
        }
        if !(self.min_std > 0.0) {
            return Err(HmtError::InvalidConfig(
                "minimum std must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Total log-likelihood of the forest under `model`.
    pub log_likelihood: f64,
    pub model: HmtModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convergence {
    Tolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitWarning {
    ZeroStateOccupancy {
        iteration: usize,
        state: usize,
    },
    ZeroTransitionMass {
        iteration: usize,
        branching: usize,
        parent: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    /// Record `k` holds the model after `k` updates.
    pub iterations: Vec<IterationRecord>,
    pub model: HmtModel,
    pub log_likelihood: f64,
    pub convergence: Convergence,
    pub warnings: Vec<FitWarning>,
}

impl FitTrace {
    /// Number of parameter updates performed.
    pub fn updates(&self) -> usize {
        self.iterations.len() - 1
    }
}

pub fn e_step(model: &HmtModel, forest: &Forest) -> Result<Vec<Posteriors>> {
    forest
        .trees()
        .par_iter()
        .map(|t| Posteriors::compute(model, &t.tree, &t.observations))
        .collect()
}

/// Summed `ξ` per branching factor, normalized per parent state. Returns the
/// new tensors and the `(branching, parent)` rows that had no mass.
pub fn m_step_transitions<'a>(
    xis: impl IntoIterator<Item = &'a XiTable>,
    previous: &BTreeMap<usize, TransitionTensor>,
) -> (BTreeMap<usize, TransitionTensor>, Vec<(usize, usize)>) {
    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for xi in xis {
        let acc = sums
            .entry(xi.branching)
            .or_insert_with(|| vec![0.0; xi.data.len()]);
        acc.iter_mut().zip(&xi.data).for_each(|(a, x)| *a += x);
    }
    let mut out = previous.clone();
    let mut empty = Vec::new();
    for (branching, acc) in sums {
        let Some(prev) = previous.get(&branching) else {
            continue;
        };
        let states = prev.states();
        let w = prev.tuple_count();
        let mut entries = prev.entries().to_vec();
        for parent in 0..states {
            let row = &acc[parent * w..(parent + 1) * w];
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                for (e, &x) in entries[parent * w..(parent + 1) * w].iter_mut().zip(row) {
                    *e = x / total;
                }
            } else {
                empty.push((branching, parent));
            }
        }
        out.insert(
            branching,
            TransitionTensor::new(states, branching, entries).expect("shape unchanged"),
        );
    }
    (out, empty)
}

/// `b̂_μ(v) = Σ_{C: O(C)=v} γ_C(μ) / Σ_C γ_C(μ)`. States with zero occupancy
/// keep their previous row and are returned.
pub fn m_step_emission_categorical<'a>(
    data: impl IntoIterator<Item = (&'a StateTable, &'a [usize])>,
    previous: &[Vec<f64>],
) -> (Emission, Vec<usize>) {
    let states = previous.len();
    let alphabet = previous.first().map_or(0, |r| r.len());
    let mut counts = vec![vec![0.0; alphabet]; states];
    for (gamma, symbols) in data {
        for (c, &v) in symbols.iter().enumerate() {
            for (mu, row) in counts.iter_mut().enumerate() {
                row[v] += gamma.get(c, mu);
            }
        }
    }
    let mut zero = Vec::new();
    let probs = counts
        .into_iter()
        .enumerate()
        .map(|(mu, row)| {
            let total: f64 = row.iter().sum();
            if total > 0.0 {
                row.iter().map(|x| x / total).collect()
            } else {
                zero.push(mu);
                previous[mu].clone()
            }
        })
        .collect();
    (Emission::Categorical { probs }, zero)
}

/// `γ`-weighted mean and standard deviation per state, std floored at `min_std`.
/// States with zero occupancy keep their previous parameters and are returned.
pub fn m_step_emission_gaussian<'a>(
    data: impl IntoIterator<Item = (&'a StateTable, &'a [f64])> + Clone,
    previous_means: &[f64],
    previous_stds: &[f64],
    min_std: f64,
) -> (Emission, Vec<usize>) {
    let states = previous_means.len();
    let mut weight = vec![0.0; states];
    let mut sum = vec![0.0; states];
    for (gamma, xs) in data.clone() {
        for (c, &x) in xs.iter().enumerate() {
            for mu in 0..states {
                let g = gamma.get(c, mu);
                weight[mu] += g;
                sum[mu] += g * x;
            }
        }
    }
    let mut means = previous_means.to_vec();
    let mut zero = Vec::new();
    for mu in 0..states {
        if weight[mu] > 0.0 {
            means[mu] = sum[mu] / weight[mu];
        } else {
            zero.push(mu);
        }
    }
    let mut sq = vec![0.0; states];
    for (gamma, xs) in data {
        for (c, &x) in xs.iter().enumerate() {
            for mu in 0..states {
                let d = x - means[mu];
                sq[mu] += gamma.get(c, mu) * d * d;
            }
        }
    }
    let stds = (0..states)
        .map(|mu| {
            if weight[mu] > 0.0 {
                (sq[mu] / weight[mu]).sqrt().max(min_std)
            } else {
                previous_stds[mu]
            }
        })
        .collect();
    (Emission::Gaussian { means, stds }, zero)
}

/// Mean of the root posteriors over trees.
pub fn m_step_pi<'a>(root_gammas: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
    let mut acc: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for g in root_gammas {
        if acc.is_empty() {
            acc = vec![0.0; g.len()];
        }
        acc.iter_mut().zip(g).for_each(|(a, x)| *a += x);
        count += 1;
    }
    acc.iter_mut().for_each(|a| *a /= count as f64);
    // absorb rounding so the vector sums to one
    normalize_in_place(&mut acc);
    acc
}

/// Result of one M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub model: HmtModel,
    pub zero_occupancy: Vec<usize>,
    pub zero_transition_rows: Vec<(usize, usize)>,
}

pub fn m_step(
    model: &HmtModel,
    forest: &Forest,
    posteriors: &[Posteriors],
    min_std: f64,
) -> Result<Update> {
    let xis = posteriors.iter().flat_map(|p| p.xi.iter().flatten());
    let (transitions, zero_transition_rows) = m_step_transitions(xis, &model.transitions);
    let pi = m_step_pi(
        forest
            .trees()
            .iter()
            .zip(posteriors)
            .map(|(t, p)| p.gamma.row(t.tree.root())),
    );
    let (emission, zero_occupancy) = match &model.emission {
        Emission::Categorical { probs } => {
            let data = forest
                .trees()
                .iter()
                .zip(posteriors)
                .map(|(t, p)| {
                    let obs = t
                        .observations
                        .as_categorical()
                        .ok_or(HmtError::KindMismatch {
                            expected: "categorical",
                            found: "scalar",
                        })?;
                    Ok((&p.gamma, obs))
                })
                .collect::<Result<Vec<_>>>()?;
            m_step_emission_categorical(data, probs)
        }
        Emission::Gaussian { means, stds } => {
            let data = forest
                .trees()
                .iter()
                .zip(posteriors)
                .map(|(t, p)| {
                    let obs = t.observations.as_scalar().ok_or(HmtError::KindMismatch {
                        expected: "scalar",
                        found: "categorical",
                    })?;
                    Ok((&p.gamma, obs))
                })
                .collect::<Result<Vec<_>>>()?;
            m_step_emission_gaussian(data.iter().copied(), means, stds, min_std)
        }
    };
    let updated = HmtModel {
        states: model.states,
        pi,
        transitions,
        emission,
    };
    if let Some((name, value)) = updated
        .named_parameters()
        .into_iter()
        .find(|(_, v)| !v.is_finite())
    {
        return Err(HmtError::NonFiniteParameter(format!("{name} = {value}")));
    }
    updated.check()?;
    Ok(Update {
        model: updated,
        zero_occupancy,
        zero_transition_rows,
    })
}

/// One full EM step: returns the updated model and the log-likelihood of the
/// model that was passed in.
pub fn em_step(model: &HmtModel, forest: &Forest, min_std: f64) -> Result<(HmtModel, f64)> {
    let posteriors = e_step(model, forest)?;
    let ll = posteriors.iter().map(|p| p.log_likelihood).sum();
    Ok((m_step(model, forest, &posteriors, min_std)?.model, ll))
}

pub fn fit(forest: &Forest, config: &FitConfig) -> Result<FitTrace> {
    config.check()?;
    let mut model = match &config.init {
        InitStrategy::Model(m) => {
            m.check()?;
            if m.states != config.states {
                return Err(HmtError::InvalidConfig(format!(
                    "initial model has {} states, expected {}",
                    m.states, config.states
                )));
            }
            m.clone()
        }
        InitStrategy::KMeans => initial_model(forest, config.states, config.seed, config.min_std)?,
    };
    if model.emission.kind() != forest.kind() {
        return Err(HmtError::KindMismatch {
            expected: model.emission.kind().as_str(),
            found: forest.kind().as_str(),
        });
    }

    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut warnings = Vec::new();
    let mut iteration = 0;
    loop {
        let posteriors = e_step(&model, forest)?;
        let ll: f64 = posteriors.iter().map(|p| p.log_likelihood).sum();
        if !ll.is_finite() {
            return Err(HmtError::NonFiniteParameter(format!(
                "log-likelihood {ll} at iteration {iteration}"
            )));
        }
        let previous = iterations.last().map(|r| r.log_likelihood);
        iterations.push(IterationRecord {
            iteration,
            log_likelihood: ll,
            model: model.clone(),
        });
        if let Some(prev) = previous {
            if ll < prev - config.monotonicity_slack {
                return Err(HmtError::MonotonicityViolation {
                    iteration,
                    previous: prev,
                    current: ll,
                });
            }
            if (ll - prev).abs() < config.tolerance {
                return Ok(FitTrace {
                    iterations,
                    model,
                    log_likelihood: ll,
                    convergence: Convergence::Tolerance,
                    warnings,
                });
            }
        }
        if iteration == config.max_iterations {
            return Ok(FitTrace {
                iterations,
                model,
                log_likelihood: ll,
                convergence: Convergence::MaxIterations,
                warnings,
            });
        }
        let update = m_step(&model, forest, &posteriors, config.min_std)?;
        iteration += 1;
        warnings.extend(
            update
                .zero_occupancy
                .iter()
                .map(|&state| FitWarning::ZeroStateOccupancy { iteration, state }),
        );
        warnings.extend(
            update
                .zero_transition_rows
                .iter()
                .map(|&(branching, parent)| FitWarning::ZeroTransitionMass {
                    iteration,
                    branching,
                    parent,
                }),
        );
        model = update.model;
    }
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Starting model for `fit`: [`init_kmeans_style`] for scalar data,
/// [`init_categorical`] for categorical data.
pub fn initial_model(forest: &Forest, states: usize, seed: u64, min_std: f64) -> Result<HmtModel> {
    match forest.kind() {
        ObservationKind::Scalar => init_kmeans_style(forest, states, seed, min_std),
        ObservationKind::Categorical => init_categorical(forest, states, seed),
    }
}

/// Lloyd's algorithm on the line. Centers start at the `(k + 1/2)/N`
/// quantiles; an empty cluster is re-seeded at a random data point. Returns
/// the label of every value, with clusters numbered by ascending center.
pub fn kmeans_1d(values: &[f64], clusters: usize, seed: u64) -> Result<Vec<usize>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < clusters {
        return Err(HmtError::DegenerateData(format!(
            "{} distinct values for {clusters} clusters",
            distinct.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<f64> = (0..clusters)
        .map(|k| sorted[((k as f64 + 0.5) / clusters as f64 * sorted.len() as f64) as usize])
        .collect();
    let mut labels = vec![usize::MAX; values.len()];
    for _ in 0..1000 {
        let mut changed = false;
        for (x, label) in values.iter().zip(labels.iter_mut()) {
            let mut best = 0;
            for k in 1..clusters {
                if (x - centers[k]).abs() < (x - centers[best]).abs() {
                    best = k;
                }
            }
            if *label != best {
                *label = best;
                changed = true;
            }
        }
        let mut sums = vec![0.0; clusters];
        let mut counts = vec![0usize; clusters];
        for (&x, &l) in values.iter().zip(&labels) {
            sums[l] += x;
            counts[l] += 1;
        }
        for k in 0..clusters {
            if counts[k] > 0 {
                centers[k] = sums[k] / counts[k] as f64;
            } else {
                centers[k] = distinct[rng.random_range(0..distinct.len())];
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // relabel by ascending center
    let mut order: Vec<usize> = (0..clusters).collect();
    order.sort_by(|&a, &b| centers[a].total_cmp(&centers[b]));
    let mut rank = vec![0; clusters];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    Ok(labels.into_iter().map(|l| rank[l]).collect())
}

/// Hard-assigns every observation by 1-D k-means, then estimates `π` from
/// root labels, Gaussian moments per cluster, and one tensor per branching
/// factor present from parent/child-tuple label counts. `π` and tensor counts
/// get add-one smoothing.
pub fn init_kmeans_style(
    forest: &Forest,
    states: usize,
    seed: u64,
    min_std: f64,
) -> Result<HmtModel> {
    let values = forest.pooled_scalars().ok_or(HmtError::KindMismatch {
        expected: "scalar",
        found: "categorical",
    })?;
    let flat = kmeans_1d(&values, states, seed)?;

    let mut labels = Vec::with_capacity(forest.len());
    let mut offset = 0;
    for t in forest.trees() {
        labels.push(&flat[offset..offset + t.tree.len()]);
        offset += t.tree.len();
    }

    let mut pi = vec![1.0; states];
    for (t, l) in forest.trees().iter().zip(&labels) {
        pi[l[t.tree.root()]] += 1.0;
    }
    normalize_in_place(&mut pi);

    let mut weight = vec![0.0; states];
    let mut sum = vec![0.0; states];
    for (&x, &l) in values.iter().zip(&flat) {
        weight[l] += 1.0;
        sum[l] += x;
    }
    let means: Vec<f64> = (0..states).map(|k| sum[k] / weight[k]).collect();
    let mut sq = vec![0.0; states];
    for (&x, &l) in values.iter().zip(&flat) {
        sq[l] += (x - means[l]).powi(2);
    }
    let stds = (0..states)
        .map(|k| (sq[k] / weight[k]).sqrt().max(min_std))
        .collect();

    let transitions = transition_counts(forest, &labels, states)?;
    HmtModel::new(pi, transitions, Emission::Gaussian { means, stds })
}

fn transition_counts(
    forest: &Forest,
    labels: &[&[usize]],
    states: usize,
) -> Result<Vec<TransitionTensor>> {
    let mut counts: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (t, l) in forest.trees().iter().zip(labels) {
        for c in t.tree.interior() {
            let children = t.tree.children(c);
            let n = children.len();
            let acc = counts
                .entry(n)
                .or_insert_with(|| vec![1.0; states.pow(n as u32 + 1)]);
            let idx = children.iter().fold(l[c], |acc, &ch| acc * states + l[ch]);
            acc[idx] += 1.0;
        }
    }
    counts
        .into_iter()
        .map(|(n, entries)| {
            let mut t = TransitionTensor::new(states, n, entries)?;
            t.renormalize();
            Ok(t)
        })
        .collect()
}

/// Categorical starting point: each state's emission row is the smoothed
/// empirical symbol frequency times a random factor in `[1, 2)`, renormalized;
/// tensors are uniform times the same kind of factor; `π` is uniform.
pub fn init_categorical(forest: &Forest, states: usize, seed: u64) -> Result<HmtModel> {
    let alphabet = forest.alphabet_size().ok_or(HmtError::KindMismatch {
        expected: "categorical",
        found: "scalar",
    })?;
    if states == 0 {
        return Err(HmtError::InvalidConfig(
            "state count must be positive".into(),
        ));
    }
    let mut freq = vec![1.0; alphabet];
    for t in forest.trees() {
        if let Observations::Categorical(v) = &t.observations {
            for &s in v {
                freq[s] += 1.0;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs = (0..states)
        .map(|_| {
            let mut row: Vec<f64> = freq
                .iter()
                .map(|f| f * (1.0 + rng.random::<f64>()))
                .collect();
            normalize_in_place(&mut row);
            row
        })
        .collect();
    let mut branchings: Vec<usize> = forest
        .trees()
        .iter()
        .flat_map(|t| {
            t.tree
                .interior()
                .map(|c| t.tree.children(c).len())
                .collect::<Vec<_>>()
        })
        .collect();
    branchings.sort_unstable();
    branchings.dedup();
    let transitions = branchings
        .into_iter()
        .map(|n| {
            let size = states.pow(n as u32 + 1);
            let entries = (0..size).map(|_| 1.0 + rng.random::<f64>()).collect();
            let mut t = TransitionTensor::new(states, n, entries)?;
            t.renormalize();
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    HmtModel::new(
        vec![1.0 / states as f64; states],
        transitions,
        Emission::Categorical { probs },
    )
}
