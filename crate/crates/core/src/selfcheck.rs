//! Lineage-binned observation correlations, and the comparison of a data
//! forest against a forest re-simulated from a fitted model.
//!
//! Two nodes at lineage distance `(m, n)` sit `m` and `n` edges below their
//! most recent common ancestor (`(1, 1)` are siblings, `(0, 1)` parent and
//! child). Pairs are pooled across trees; both orderings of every pair are
//! added to a bin so the statistic is symmetric.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{HmtError, Result};
use crate::model::HmtModel;
use crate::observation::Forest;
use crate::simulate::sample_on_trees;

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_MAX_DISTANCE: usize = 4;
pub const DEFAULT_REPLICATES: usize = 10;

/// Running moments of a bin. Sums are accumulated tree by tree in forest
/// order, so results are reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    pairs: usize,
    samples: f64,
    sx: f64,
    sy: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn add(&mut self, x: f64, y: f64) {
        self.samples += 1.0;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.syy += y * y;
        self.sxy += x * y;
    }

    fn merge(&mut self, o: &Moments) {
        self.pairs += o.pairs;
        self.samples += o.samples;
        self.sx += o.sx;
        self.sy += o.sy;
        self.sxx += o.sxx;
        self.syy += o.syy;
        self.sxy += o.sxy;
    }

    fn pearson(&self) -> Option<f64> {
        let k = self.samples;
        let cov = self.sxy / k - (self.sx / k) * (self.sy / k);
        let vx = self.sxx / k - (self.sx / k).powi(2);
        let vy = self.syy / k - (self.sy / k).powi(2);
        let scale = (self.sxx / k).max(self.syy / k).max(f64::MIN_POSITIVE);
        // zero variance up to cancellation error
        if vx <= 1e-12 * scale || vy <= 1e-12 * scale {
            return None;
        }
        Some((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinStat {
    /// Unordered node pairs in the bin.
    pub pair_count: usize,
    /// `None` when the pooled values of the bin have zero variance.
    pub r: Option<f64>,
}

/// Keyed by `(m, n)` with `m <= n`.
pub type LineageCorrelations = BTreeMap<(usize, usize), BinStat>;

pub fn lineage_correlations(forest: &Forest, max_distance: usize) -> Result<LineageCorrelations> {
    if max_distance == 0 {
        return Err(HmtError::InvalidConfig(
            "max distance must be at least 1".into(),
        ));
    }
    if forest.pooled_scalars().is_none() {
        return Err(HmtError::KindMismatch {
            expected: "scalar",
            found: "categorical",
        });
    }
    let per_tree: Vec<BTreeMap<(usize, usize), Moments>> = forest
        .trees()
        .par_iter()
        .map(|t| {
            let x = t.observations.as_scalar().expect("checked above");
            let mut bins: BTreeMap<(usize, usize), Moments> = BTreeMap::new();
            for u in 0..t.tree.len() {
                for v in u + 1..t.tree.len() {
                    let (m, n) = t.tree.lineage_distance(u, v);
                    if n > max_distance {
                        continue;
                    }
                    let bin = bins.entry((m, n)).or_default();
                    bin.pairs += 1;
                    bin.add(x[u], x[v]);
                    bin.add(x[v], x[u]);
                }
            }
            bins
        })
        .collect();

    let mut pooled: BTreeMap<(usize, usize), Moments> = BTreeMap::new();
    for bins in &per_tree {
        for (key, m) in bins {
            pooled.entry(*key).or_default().merge(m);
        }
    }
    Ok(pooled
        .into_iter()
        .filter(|(_, m)| m.pairs >= 2)
        .map(|(key, m)| {
            (
                key,
                BinStat {
                    pair_count: m.pairs,
                    r: m.pearson(),
                },
            )
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinComparison {
    pub m: usize,
    pub n: usize,
    pub pairs_data: usize,
    pub pairs_sim: usize,
    pub r_data: Option<f64>,
    pub r_sim: Option<f64>,
    /// `|r_data − r_sim|`, `None` when either side is undefined.
    pub abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheckReport {
    pub bins: Vec<BinComparison>,
    pub threshold: f64,
    /// Every defined bin differs by at most `threshold`, and at least one bin
    /// is defined.
    pub passed: bool,
}

impl SelfCheckReport {
    pub fn max_abs_diff(&self) -> Option<f64> {
        self.bins.iter().filter_map(|b| b.abs_diff).reduce(f64::max)
    }
}

/// Simulates `replicates` forests from `fitted`, each with the same tree
/// shapes as `data`, pools them, and compares lineage correlations with those
/// of `data`. Pooling replicates shrinks the simulation noise so that the
/// difference mostly reflects the data and the model.
pub fn self_consistency_report(
    data: &Forest,
    fitted: &HmtModel,
    seed: u64,
    max_distance: usize,
    threshold: f64,
    replicates: usize,
) -> Result<SelfCheckReport> {
    if !(threshold >= 0.0) {
        return Err(HmtError::InvalidConfig(
            "threshold must be non-negative".into(),
        ));
    }
    if replicates == 0 {
        return Err(HmtError::InvalidConfig(
            "at least one replicate is required".into(),
        ));
    }
    let observed = lineage_correlations(data, max_distance)?;
    let shapes: Vec<_> = (0..replicates)
        .flat_map(|_| data.trees().iter().map(|t| t.tree.clone()))
        .collect();
    let sim = sample_on_trees(fitted, &shapes, seed)?;
    let simulated = lineage_correlations(&sim.forest, max_distance)?;

    let mut keys: Vec<(usize, usize)> = observed.keys().chain(simulated.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let bins: Vec<BinComparison> = keys
        .into_iter()
        .map(|(m, n)| {
            let d = observed.get(&(m, n));
            let s = simulated.get(&(m, n));
            let r_data = d.and_then(|b| b.r);
            let r_sim = s.and_then(|b| b.r);
            BinComparison {
                m,
                n,
                pairs_data: d.map_or(0, |b| b.pair_count),
                pairs_sim: s.map_or(0, |b| b.pair_count),
                r_data,
                r_sim,
                abs_diff: r_data.zip(r_sim).map(|(a, b)| (a - b).abs()),
            }
        })
        .collect();
    let defined: Vec<f64> = bins.iter().filter_map(|b| b.abs_diff).collect();
    let passed = !defined.is_empty() && defined.iter().all(|&d| d <= threshold);
    Ok(SelfCheckReport {
        bins,
        threshold,
        passed,
    })
}
