//! Random forests: bagged trees with per-node feature subsampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{check_arity, check_labels, check_shapes, Builder, DecisionTree, FeatureSampler, TreeParams};
use super::MleError;
use crate::par;
use crate::rng::stream_rng;
use crate::table::Task;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturesPerSplit {
    /// `max(1, floor(sqrt(p)))` features.
    Sqrt,
    All,
    Fixed(usize),
}

impl FeaturesPerSplit {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            FeaturesPerSplit::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            FeaturesPerSplit::All => n_features,
            FeaturesPerSplit::Fixed(k) => k.clamp(1, n_features.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeParams,
    pub features_per_split: FeaturesPerSplit,
    pub bootstrap: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    task: Task,
    n_features: usize,
}

impl RandomForest {
    /// Builds a forest from already fitted trees.
    pub fn from_trees(trees: Vec<DecisionTree>, task: Task) -> Result<Self, MleError> {
        let n_features = trees.first().map(DecisionTree::n_features).ok_or_else(|| MleError::Fit("forest without trees".into()))?;
        Ok(RandomForest { trees, task, n_features })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let votes = self.trees.iter().map(|t| t.predict_row(row));
        match self.task {
            Task::Regression => votes.sum::<f64>() / self.trees.len() as f64,
            Task::Classification => {
                let mut tally: Vec<usize> = Vec::new();
                for v in votes {
                    let c = v as usize;
                    if tally.len() <= c {
                        tally.resize(c + 1, 0);
                    }
                    tally[c] += 1;
                }
                let mut best = 0;
                for (c, &n) in tally.iter().enumerate() {
                    if n > tally[best] {
                        best = c;
                    }
                }
                best as f64
            }
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, MleError> {
        check_arity(x, self.n_features)?;
        Ok(x.iter().map(|r| self.predict_row(r)).collect())
    }
}

/// Fits `n_trees` trees; tree `t` draws its bootstrap sample and feature subsets
/// from RNG stream `t` of `params.seed`.
pub fn fit_forest(x: &[Vec<f64>], y: &[f64], params: &ForestParams, task: Task) -> Result<RandomForest, MleError> {
    let p = check_shapes(x, y)?;
    params.tree.validate(task)?;
    check_labels(y, task)?;
    if params.n_trees < 1 {
        return Err(MleError::Fit("n_trees must be at least 1".into()));
    }
    let per_split = params.features_per_split.resolve(p);
    let n = x.len();
    let trees = par::map_range(params.n_trees, |t| {
        let mut rng = stream_rng(params.seed, t as u64);
        let mut idx: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.gen_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let sampler = FeatureSampler { rng: &mut rng, per_split };
        Builder::new(x, y, task, params.tree).build(&mut idx, Some(sampler))
    });
    Ok(RandomForest { trees, task, n_features: p })
}
