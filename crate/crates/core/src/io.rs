//! JSON file formats for forests and models, and the hidden-state CSV.
//!
//! Forest: a list of trees,
//! `[{"parents": [null, 0, 0], "kind": "scalar", "observations": [0.1, 2.3, 1.9]}, ...]`.
//!
//! Model:
//! `{"states": 2, "pi": [..], "transitions": {"2": [[row of parent 0], ...]},
//!   "emission": {"type": "gaussian", "means": [..], "stds": [..]}}`,
//! or `{"type": "categorical", "probs": [[..], ..]}` for the emission.
//! Tensor rows list child tuples lexicographically, first child most significant.
//!
//! Floats are written in shortest round-trip form, so write-then-read is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{HmtError, Result};
use crate::model::{Emission, HmtModel, TransitionTensor};
use crate::observation::{Forest, Observations, ObservedTree};
use crate::tree::Tree;

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", content = "observations", rename_all = "lowercase")]
enum ObservationRecord {
    Categorical(Vec<usize>),
    Scalar(Vec<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeRecord {
    parents: Vec<Option<usize>>,
    #[serde(flatten)]
    observations: ObservationRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum EmissionRecord {
    Categorical { probs: Vec<Vec<f64>> },
    Gaussian { means: Vec<f64>, stds: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelRecord {
    states: usize,
    pi: Vec<f64>,
    transitions: BTreeMap<usize, Vec<Vec<f64>>>,
    emission: EmissionRecord,
}

pub fn forest_to_json(forest: &Forest) -> String {
    let records: Vec<TreeRecord> = forest
        .trees()
        .iter()
        .map(|t| TreeRecord {
            parents: t.tree.parents().to_vec(),
            observations: match &t.observations {
                Observations::Categorical(v) => ObservationRecord::Categorical(v.clone()),
                Observations::Scalar(v) => ObservationRecord::Scalar(v.clone()),
            },
        })
        .collect();
    serde_json::to_string_pretty(&records).expect("forest serializes")
}

pub fn forest_from_json(text: &str) -> Result<Forest> {
    let records: Vec<TreeRecord> = serde_json::from_str(text)?;
    let trees = records
        .into_iter()
        .map(|r| {
            let tree = Tree::from_parents(&r.parents)?;
            let obs = match r.observations {
                ObservationRecord::Categorical(v) => Observations::Categorical(v),
                ObservationRecord::Scalar(v) => Observations::Scalar(v),
            };
            ObservedTree::new(tree, obs)
        })
        .collect::<Result<Vec<_>>>()?;
    Forest::new(trees)
}

pub fn model_to_json(model: &HmtModel) -> String {
    let record = ModelRecord {
        states: model.states,
        pi: model.pi.clone(),
        transitions: model
            .transitions
            .iter()
            .map(|(&n, t)| (n, t.rows().map(<[f64]>::to_vec).collect()))
            .collect(),
        emission: match &model.emission {
            Emission::Categorical { probs } => EmissionRecord::Categorical {
                probs: probs.clone(),
            },
            Emission::Gaussian { means, stds } => EmissionRecord::Gaussian {
                means: means.clone(),
                stds: stds.clone(),
            },
        },
    };
    serde_json::to_string_pretty(&record).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<HmtModel> {
    let record: ModelRecord = serde_json::from_str(text)?;
    let mut transitions = Vec::with_capacity(record.transitions.len());
    for (n, rows) in record.transitions {
        if rows.len() != record.states {
            return Err(HmtError::DimensionMismatch(format!(
                "tensor for branching {n} has {} rows, expected {}",
                rows.len(),
                record.states
            )));
        }
        transitions.push(TransitionTensor::from_rows(n, &rows)?);
    }
    let emission = match record.emission {
        EmissionRecord::Categorical { probs } => Emission::Categorical { probs },
        EmissionRecord::Gaussian { means, stds } => Emission::Gaussian { means, stds },
    };
    let model = HmtModel::new(record.pi, transitions, emission)?;
    if model.states != record.states {
        return Err(HmtError::DimensionMismatch(format!(
            "declared {} states, parameters have {}",
            record.states, model.states
        )));
    }
    Ok(model)
}

pub fn read_forest(path: &Path) -> Result<Forest> {
    forest_from_json(&read_text(path)?)
}

pub fn write_forest(path: &Path, forest: &Forest) -> Result<()> {
    write_text(path, &forest_to_json(forest))
}

pub fn read_model(path: &Path) -> Result<HmtModel> {
    model_from_json(&read_text(path)?)
}

pub fn write_model(path: &Path, model: &HmtModel) -> Result<()> {
    write_text(path, &model_to_json(model))
}

/// `tree,node,state` rows.
pub fn hidden_states_csv(hidden: &[Vec<usize>]) -> String {
    let mut out = String::from("tree,node,state\n");
    for (t, states) in hidden.iter().enumerate() {
        for (c, s) in states.iter().enumerate() {
            writeln!(out, "{t},{c},{s}").unwrap();
        }
    }
    out
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HmtError::Io(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut body = text.to_owned();
    if !body.ends_with('\n') {
        body.push('\n');
    }
    fs::write(path, body).map_err(|e| HmtError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::{coupled_two_state, three_state_cycle};

    #[test]
    fn model_round_trip() {
        for m in [
            coupled_two_state(),
            three_state_cycle(
                [0.1, 0.2, 0.7],
                [0.1 + 0.2, -1.0 / 3.0, 4.0],
                [1e-6, 1.0, 2.5],
            ),
        ] {
            let text = model_to_json(&m);
            assert_eq!(model_from_json(&text).unwrap(), m);
        }
    }

    #[test]
    fn model_format() {
        let text = model_to_json(&coupled_two_state());
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["states"], 2);
        assert_eq!(v["transitions"]["2"][0][3], 0.1);
        assert_eq!(v["emission"]["type"], "categorical");
    }

    #[test]
    fn forest_round_trip() {
        let trees = vec![
            ObservedTree::new(
                Tree::from_parents(&[Some(2), Some(2), None]).unwrap(),
                Observations::Scalar(vec![0.1, std::f64::consts::PI, -2.5e-300]),
            )
            .unwrap(),
            ObservedTree::new(Tree::chain(1), Observations::Scalar(vec![1.0])).unwrap(),
        ];
        let f = Forest::new(trees).unwrap();
        let text = forest_to_json(&f);
        assert_eq!(forest_from_json(&text).unwrap(), f);
        assert!(text.contains("\"kind\": \"scalar\""));
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(forest_from_json("{"), Err(HmtError::Format(_))));
        assert!(matches!(
            forest_from_json(r#"[{"parents":[1,0],"kind":"scalar","observations":[1,2]}]"#),
            Err(HmtError::CycleDetected { .. })
        ));
        assert!(matches!(
            forest_from_json(r#"[{"parents":[null],"kind":"scalar","observations":[1,2]}]"#),
            Err(HmtError::ObservationCountMismatch { .. })
        ));
        let bad = model_to_json(&coupled_two_state()).replace("0.9", "0.8");
        assert!(matches!(
            model_from_json(&bad),
            Err(HmtError::InvalidModel(_))
        ));
    }

    #[test]
    fn hidden_csv() {
        assert_eq!(
            hidden_states_csv(&[vec![0, 1]]),
            "tree,node,state\n0,0,0\n0,1,1\n"
        );
    }
}
