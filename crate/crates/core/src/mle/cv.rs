//! Grid search with k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::forest::{fit_forest, ForestParams};
use super::tree::{fit_tree, TreeParams};
use super::{score, Metric, MleError};
use crate::par;
use crate::table::Task;

/// One cell of a hyper-parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParams {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
}

impl ModelParams {
    /// Fits on `(x, y)` and predicts `x_eval`.
    pub fn fit_predict(&self, x: &[Vec<f64>], y: &[f64], x_eval: &[Vec<f64>], task: Task) -> Result<Vec<f64>, MleError> {
        match self {
            ModelParams::DecisionTree(p) => fit_tree(x, y, p, task)?.predict(x_eval),
            ModelParams::RandomForest(p) => fit_forest(x, y, p, task)?.predict(x_eval),
        }
    }
}

/// Shuffles `0..n` with `seed` and cuts it into `folds` contiguous folds; the
/// first `n % folds` folds hold one extra row.
pub fn kfold_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, MleError> {
    if folds < 2 {
        return Err(MleError::Cv(format!("need at least 2 folds, got {folds}")));
    }
    if folds > n {
        return Err(MleError::Cv(format!("{folds} folds requested for {n} rows")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub params: ModelParams,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_index: usize,
    pub best: ModelParams,
    pub table: Vec<CvRow>,
}

fn take(x: &[Vec<f64>], y: &[f64], rows: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
    (rows.iter().map(|&i| x[i].clone()).collect(), rows.iter().map(|&i| y[i]).collect())
}

/// Scores every grid cell by its mean validation metric over `folds` folds and
/// picks the best (max accuracy or min MSE; ties go to the earlier cell).
pub fn grid_search_cv(
    x: &[Vec<f64>],
    y: &[f64],
    grid: &[ModelParams],
    folds: usize,
    seed: u64,
    task: Task,
) -> Result<CvResult, MleError> {
    if grid.is_empty() {
        return Err(MleError::Cv("empty grid".into()));
    }
    if x.len() != y.len() {
        return Err(MleError::Fit(format!("{} feature rows but {} targets", x.len(), y.len())));
    }
    let fold_rows = kfold_indices(x.len(), folds, seed)?;
    let splits: Vec<_> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..folds).filter(|&g| g != f).flat_map(|g| fold_rows[g].iter().copied()).collect();
            (take(x, y, &train), take(x, y, &fold_rows[f]))
        })
        .collect();

    let metric = Metric::for_task(task);
    let scores = par::map_range(grid.len() * folds, |k| {
        let (cell, f) = (k / folds, k % folds);
        let ((xt, yt), (xv, yv)) = &splits[f];
        grid[cell].fit_predict(xt, yt, xv, task).map(|pred| score(metric, &pred, yv))
    });
    let scores: Vec<f64> = scores.into_iter().collect::<Result<_, _>>()?;

    let table: Vec<CvRow> = grid
        .iter()
        .zip(scores.chunks(folds))
        .map(|(params, s)| CvRow { params: *params, fold_scores: s.to_vec(), mean: s.iter().sum::<f64>() / folds as f64 })
        .collect();
    let mut best_index = 0;
    for (i, row) in table.iter().enumerate().skip(1) {
        if metric.better(row.mean, table[best_index].mean) {
            best_index = i;
        }
    }
    Ok(CvResult { best_index, best: grid[best_index], table })
}
