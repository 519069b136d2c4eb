//! Machine-learning efficiency: how well models trained only on synthetic rows
//! predict the target of real held-out rows.
//!
//! Two model families are tuned by grid search with k-fold cross-validation on
//! the synthetic data, refit on all of it, and scored on the real test split
//! (accuracy for classification, mean squared error for regression).

pub mod cv;
pub mod forest;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::SyntheticTable;
use crate::table::{parse_finite, ColumnKind, Table, TableSchema, Task};

pub use cv::{grid_search_cv, kfold_indices, CvResult, CvRow, ModelParams};
pub use forest::{fit_forest, FeaturesPerSplit, ForestParams, RandomForest};
pub use tree::{fit_tree, gini, Criterion, DecisionTree, Node, TreeParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MleError {
    #[error("fit error: {0}")]
    Fit(String),
    #[error("predict error: {0}")]
    Predict(String),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("cross-validation error: {0}")]
    Cv(String),
    #[error("evaluation error: {0}")]
    Eval(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    Mse,
}

impl Metric {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => Metric::Accuracy,
            Task::Regression => Metric::Mse,
        }
    }

    /// Whether score `a` beats score `b` strictly.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Metric::Accuracy => a > b,
            Metric::Mse => a < b,
        }
    }
}

pub fn accuracy(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).filter(|(p, t)| p == t).count() as f64 / truth.len() as f64
}

pub fn mse(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / truth.len() as f64
}

pub fn score(metric: Metric, pred: &[f64], truth: &[f64]) -> f64 {
    match metric {
        Metric::Accuracy => accuracy(pred, truth),
        Metric::Mse => mse(pred, truth),
    }
}

/// Class label standing in for a test label never seen in training; no model predicts it.
pub const UNSEEN_CLASS: f64 = -1.0;

/// Turns table rows into numeric features and targets.
///
/// Numeric columns are parsed; categorical columns become the index of the
/// lexeme among the schema's sorted levels, with unknown lexemes mapped to
/// `levels.len()`. Class labels are indexed over the schema levels followed by
/// any extra labels seen in the training table, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureEncoder {
    features: Vec<(usize, Option<Vec<String>>)>,
    target: usize,
    task: Task,
    classes: Vec<String>,
}

impl FeatureEncoder {
    pub fn new(schema: &TableSchema, train: &Table) -> Result<Self, MleError> {
        schema.check_matches(train).map_err(|e| MleError::Eval(e.to_string()))?;
        let target = schema.target_index();
        let features = schema
            .specs
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target)
            .map(|(i, s)| match &s.kind {
                ColumnKind::Numeric { .. } => (i, None),
                ColumnKind::Categorical { levels } => (i, Some(levels.iter().cloned().collect())),
            })
            .collect();
        let mut classes: Vec<String> = Vec::new();
        if schema.task == Task::Classification {
            classes = schema.target().levels().into_iter().map(str::to_owned).collect();
            let mut extra: Vec<String> = train
                .column(target)
                .filter(|l| classes.binary_search_by(|c| c.as_str().cmp(l)).is_err())
                .map(str::to_owned)
                .collect();
            extra.sort();
            extra.dedup();
            classes.extend(extra);
        }
        Ok(FeatureEncoder { features, target, task: schema.task, classes })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn features(&self, table: &Table) -> Result<Vec<Vec<f64>>, MleError> {
        table
            .rows()
            .iter()
            .map(|row| {
                self.features
                    .iter()
                    .map(|(col, levels)| match levels {
                        None => parse_finite(&row[*col]).ok_or_else(|| {
                            MleError::Eval(format!("non-numeric value {:?} in column {}", row[*col], table.columns()[*col]))
                        }),
                        Some(levels) => Ok(levels
                            .binary_search_by(|l| l.as_str().cmp(&row[*col]))
                            .unwrap_or(levels.len()) as f64),
                    })
                    .collect()
            })
            .collect()
    }

    pub fn targets(&self, table: &Table) -> Result<Vec<f64>, MleError> {
        table
            .column(self.target)
            .map(|v| match self.task {
                Task::Regression => parse_finite(v).ok_or_else(|| MleError::Eval(format!("non-numeric target {v:?}"))),
                Task::Classification => {
                    Ok(self.classes.iter().position(|c| c == v).map_or(UNSEEN_CLASS, |i| i as f64))
                }
            })
            .collect()
    }
}

/// Hyper-parameter grids for both model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub decision_tree: Vec<TreeParams>,
    pub random_forest: Vec<ForestParams>,
    pub cv_folds: usize,
}

impl Grids {
    /// Depth {3, 5, 8, unlimited} × min split {2, 10}; forests add 50 or 100
    /// trees with sqrt(p) features per split and bootstrap resampling.
    pub fn default_for(task: Task, forest_seed: u64) -> Self {
        let criterion = Criterion::for_task(task);
        let mut decision_tree = Vec::new();
        for depth in [Some(3), Some(5), Some(8), None] {
            for min_split in [2, 10] {
                decision_tree.push(TreeParams::new(depth, min_split, criterion));
            }
        }
        let mut random_forest = Vec::new();
        for tree in &decision_tree {
            for n_trees in [50, 100] {
                random_forest.push(ForestParams {
                    n_trees,
                    tree: *tree,
                    features_per_split: FeaturesPerSplit::Sqrt,
                    bootstrap: true,
                    seed: forest_seed,
                });
            }
        }
        Grids { decision_tree, random_forest, cv_folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore<P> {
    pub score: f64,
    pub best_params: P,
    pub cv_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScores {
    pub decision_tree: ModelScore<TreeParams>,
    pub random_forest: ModelScore<ForestParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleReport {
    pub task: Task,
    pub metric: Metric,
    pub models: ModelScores,
    pub n_synth_rows: usize,
    pub n_test_rows: usize,
    pub seeds: BTreeMap<String, u64>,
    pub grids: Grids,
}

impl MleReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

type Split<'a> = (&'a [Vec<f64>], &'a [f64], &'a [Vec<f64>], &'a [f64]);

fn tune_and_score<P: Copy>(
    cells: &[P],
    wrap: fn(P) -> ModelParams,
    data: Split<'_>,
    folds: usize,
    cv_seed: u64,
    task: Task,
) -> Result<ModelScore<P>, MleError> {
    let (x, y, x_test, y_test) = data;
    let grid: Vec<ModelParams> = cells.iter().map(|&c| wrap(c)).collect();
    let cv = grid_search_cv(x, y, &grid, folds, cv_seed, task)?;
    let pred = cv.best.fit_predict(x, y, x_test, task)?;
    Ok(ModelScore {
        score: score(Metric::for_task(task), &pred, y_test),
        best_params: cells[cv.best_index],
        cv_mean: cv.table[cv.best_index].mean,
    })
}

/// Trains on `train` (synthetic or real) and scores on `test`.
pub fn evaluate_tables(
    train: &Table,
    test: &Table,
    schema: &TableSchema,
    grids: &Grids,
    cv_seed: u64,
) -> Result<MleReport, MleError> {
    schema.check_matches(test).map_err(|e| MleError::Eval(e.to_string()))?;
    if train.n_rows() == 0 {
        return Err(MleError::Eval("training table is empty".into()));
    }
    if test.n_rows() == 0 {
        return Err(MleError::Eval("test table is empty".into()));
    }
    if grids.decision_tree.is_empty() || grids.random_forest.is_empty() {
        return Err(MleError::Eval("both model grids need at least one cell".into()));
    }
    let encoder = FeatureEncoder::new(schema, train)?;
    let (x, y) = (encoder.features(train)?, encoder.targets(train)?);
    let (xt, yt) = (encoder.features(test)?, encoder.targets(test)?);
    let data = (x.as_slice(), y.as_slice(), xt.as_slice(), yt.as_slice());
    let task = schema.task;

    let decision_tree = tune_and_score(&grids.decision_tree, ModelParams::DecisionTree, data, grids.cv_folds, cv_seed, task)?;
    let random_forest = tune_and_score(&grids.random_forest, ModelParams::RandomForest, data, grids.cv_folds, cv_seed, task)?;

    let mut seeds = BTreeMap::new();
    seeds.insert("cv".to_owned(), cv_seed);
    seeds.insert("forest".to_owned(), random_forest.best_params.seed);
    Ok(MleReport {
        task,
        metric: Metric::for_task(task),
        models: ModelScores { decision_tree, random_forest },
        n_synth_rows: train.n_rows(),
        n_test_rows: test.n_rows(),
        seeds,
        grids: grids.clone(),
    })
}

/// MLE of a synthetic table against real test rows.
pub fn evaluate_mle(
    synth: &SyntheticTable,
    real_test: &Table,
    schema: &TableSchema,
    grids: &Grids,
    cv_seed: u64,
) -> Result<MleReport, MleError> {
    evaluate_tables(&synth.table, real_test, schema, grids, cv_seed)
}
