//! Gradient boosted decision trees for weighted binary classification.
//!
//! Boosting minimizes weighted logistic loss. Each tree is grown
//! breadth-first over histogram-binned features; split gain is the standard
//! second-order criterion and leaf values are Newton steps
//! `-sum(w*g) / (sum(w*h) + lambda)`. The model's base score is the prior
//! log-odds of the weighted base rate, so an empty or depth-0 model predicts
//! the weighted prior.
//!
//! Training is deterministic: histogram construction parallelizes across
//! features and the best split is reduced under a total order
//! (gain desc, feature asc, bin asc), so results are bit-identical to a
//! sequential run.

mod cv;
mod train;

pub use cv::{cross_validate, CvOutcome};
pub use train::train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::util::sigmoid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub num_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub num_histogram_bins: usize,
    pub l2_leaf_regularization: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            num_trees: 100,
            learning_rate: 0.1,
            max_depth: 6,
            max_leaves: 31,
            min_samples_leaf: 20,
            num_histogram_bins: 64,
            l2_leaf_regularization: 1.0,
            seed: 0,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::Config("num_trees must be positive".to_string()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if self.max_leaves < 1 {
            return Err(Error::Config("max_leaves must be at least 1".to_string()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config(
                "min_samples_leaf must be positive".to_string(),
            ));
        }
        if self.num_histogram_bins < 2 {
            return Err(Error::Config(
                "num_histogram_bins must be at least 2".to_string(),
            ));
        }
        if self.l2_leaf_regularization < 0.0 {
            return Err(Error::Config(
                "l2_leaf_regularization must be nonnegative".to_string(),
            ));
        }
        Ok(())
    }
}

/// The default hyperparameter grid searched by cross-validation.
pub fn default_grid(seed: u64) -> Vec<GbdtParams> {
    let mut grid = Vec::new();
    for &num_trees in &[50, 200] {
        for &learning_rate in &[0.05, 0.1] {
            for &max_depth in &[3, 6] {
                for &min_samples_leaf in &[5, 20] {
                    grid.push(GbdtParams {
                        num_trees,
                        learning_rate,
                        max_depth,
                        min_samples_leaf,
                        seed,
                        ..GbdtParams::default()
                    });
                }
            }
        }
    }
    grid
}

/// A small grid for fast runs.
pub fn quick_grid(seed: u64) -> Vec<GbdtParams> {
    [3, 6]
        .iter()
        .map(|&max_depth| GbdtParams {
            num_trees: 50,
            learning_rate: 0.1,
            max_depth,
            min_samples_leaf: 20,
            seed,
            ..GbdtParams::default()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// Values `<= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        /// Loss reduction achieved by the split, used for importance.
        gain: f64,
        /// Weighted hessian mass reaching the node.
        cover: f64,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Raw (un-scaled) output for one row.
    pub fn output(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    /// Prior log-odds of the weighted base rate.
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    pub params: GbdtParams,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: Model,
}

impl Model {
    /// Margin (log-odds) for one row: `base + lr * sum(tree outputs)`.
    pub fn margin(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.output(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    /// Probability in (0, 1) for one row. Errors on a length mismatch.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} features, got {}",
                self.feature_names.len(),
                row.len()
            )));
        }
        Ok(sigmoid(self.margin(row)))
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        (0..dataset.n_rows())
            .map(|i| self.predict(dataset.row(i)))
            .collect()
    }

    /// Impurity-decrease importance: per feature, the sum of split gains,
    /// normalized to 1 when any gain exists.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let mut raw = vec![0.0f64; self.feature_names.len()];
        for tree in &self.trees {
            for node in &tree.nodes {
                if let Node::Split { feature, gain, .. } = node {
                    raw[*feature] += gain.max(0.0);
                }
            }
        }
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            for v in &mut raw {
                *v /= total;
            }
        }
        self.feature_names
            .iter()
            .cloned()
            .zip(raw)
            .collect()
    }

    /// Importance sorted descending, ties broken by feature order.
    pub fn importance_ranking(&self) -> Vec<(String, f64)> {
        let mut ranked: Vec<(usize, (String, f64))> =
            self.feature_importance().into_iter().enumerate().collect();
        ranked.sort_by(|(ia, (_, va)), (ib, (_, vb))| {
            vb.partial_cmp(va).unwrap().then(ia.cmp(ib))
        });
        ranked.into_iter().map(|(_, kv)| kv).collect()
    }

    pub fn to_json_string(&self) -> Result<String> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json_str(s: &str) -> Result<Model> {
        let file: ModelFile = serde_json::from_str(s)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model format version {}",
                file.format_version
            )));
        }
        Ok(file.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_model(names: Vec<String>, trees: Vec<Tree>, base: f64) -> Model {
        Model {
            base_score: base,
            learning_rate: 0.5,
            trees,
            feature_names: names,
            params: GbdtParams::default(),
        }
    }

    #[test]
    fn empty_model_with_zero_base_predicts_half() {
        let m = leaf_model(vec!["x".into()], vec![], 0.0);
        assert_eq!(m.predict(&[123.0]).unwrap(), 0.5);
    }

    #[test]
    fn predict_rejects_wrong_dimension() {
        let m = leaf_model(vec!["x".into(), "y".into()], vec![], 0.0);
        assert!(matches!(
            m.predict(&[1.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn importance_masses_on_split_features() {
        let tree = Tree {
            nodes: vec![
                Node::Split {
                    feature: 3,
                    threshold: 0.5,
                    left: 1,
                    right: 2,
                    gain: 2.0,
                    cover: 10.0,
                },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 1.0 },
            ],
        };
        let m = leaf_model(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            vec![tree],
            0.0,
        );
        let imp = m.feature_importance();
        assert_eq!(imp[3], ("d".to_string(), 1.0));
        assert_eq!(imp[0].1, 0.0);
        assert_eq!(m.importance_ranking()[0].0, "d");
    }

    #[test]
    fn importance_of_empty_model_is_all_zero() {
        let m = leaf_model(vec!["a".into(), "b".into()], vec![], 0.0);
        assert!(m.feature_importance().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn model_json_roundtrip_rejects_future_versions() {
        let tree = Tree {
            nodes: vec![Node::Leaf { value: 0.25 }],
        };
        let m = leaf_model(vec!["x".into()], vec![tree], -1.5);
        let json = m.to_json_string().unwrap();
        let back = Model::from_json_str(&json).unwrap();
        assert_eq!(m, back);

        let bumped = json.replace("\"format_version\": 1", "\"format_version\": 99");
        assert!(Model::from_json_str(&bumped).is_err());
    }
}
