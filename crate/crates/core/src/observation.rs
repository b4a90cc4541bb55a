//! Observed values attached to tree nodes, and forests of observed trees.

use crate::error::{HmtError, Result};
use crate::tree::Tree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Symbol(usize),
    Scalar(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservationKind {
    Categorical,
    Scalar,
}

impl ObservationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ObservationKind::Categorical => "categorical",
            ObservationKind::Scalar => "scalar",
        }
    }
}

impl Observation {
    pub fn kind(&self) -> ObservationKind {
        match self {
            Observation::Symbol(_) => ObservationKind::Categorical,
            Observation::Scalar(_) => ObservationKind::Scalar,
        }
    }
}

/// Per-node observations of a single kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Observations {
    Categorical(Vec<usize>),
    Scalar(Vec<f64>),
}

impl Observations {
    pub fn len(&self) -> usize {
        match self {
            Observations::Categorical(v) => v.len(),
            Observations::Scalar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ObservationKind {
        match self {
            Observations::Categorical(_) => ObservationKind::Categorical,
            Observations::Scalar(_) => ObservationKind::Scalar,
        }
    }

    pub fn get(&self, node: usize) -> Observation {
        match self {
            Observations::Categorical(v) => Observation::Symbol(v[node]),
            Observations::Scalar(v) => Observation::Scalar(v[node]),
        }
    }

    pub fn as_scalar(&self) -> Option<&[f64]> {
        match self {
            Observations::Scalar(v) => Some(v),
            Observations::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[usize]> {
        match self {
            Observations::Categorical(v) => Some(v),
            Observations::Scalar(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedTree {
    pub tree: Tree,
    pub observations: Observations,
}

impl ObservedTree {
    pub fn new(tree: Tree, observations: Observations) -> Result<Self> {
        if tree.len() != observations.len() {
            return Err(HmtError::ObservationCountMismatch {
                tree: 0,
                nodes: tree.len(),
                observations: observations.len(),
            });
        }
        Ok(ObservedTree { tree, observations })
    }
}

/// Non-empty collection of observed trees sharing one observation kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<ObservedTree>,
}

impl Forest {
    pub fn new(trees: Vec<ObservedTree>) -> Result<Self> {
        let first = trees.first().ok_or(HmtError::EmptyForest)?;
        let kind = first.observations.kind();
        for (i, t) in trees.iter().enumerate() {
            if t.tree.len() != t.observations.len() {
                return Err(HmtError::ObservationCountMismatch {
                    tree: i,
                    nodes: t.tree.len(),
                    observations: t.observations.len(),
                });
            }
            if t.observations.kind() != kind {
                return Err(HmtError::KindMismatch {
                    expected: kind.as_str(),
                    found: t.observations.kind().as_str(),
                });
            }
        }
        Ok(Forest { trees })
    }

    pub fn trees(&self) -> &[ObservedTree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn kind(&self) -> ObservationKind {
        self.trees[0].observations.kind()
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(|t| t.tree.len()).sum()
    }

    /// All scalar observations pooled in tree order, or `None` for categorical data.
    pub fn pooled_scalars(&self) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(self.node_count());
        for t in &self.trees {
            out.extend_from_slice(t.observations.as_scalar()?);
        }
        Some(out)
    }

    /// One more than the largest symbol seen, or `None` for scalar data.
    pub fn alphabet_size(&self) -> Option<usize> {
        let mut max = 0usize;
        for t in &self.trees {
            let v = t.observations.as_categorical()?;
            max = max.max(v.iter().copied().max().map_or(0, |m| m + 1));
        }
        Some(max)
    }
}
