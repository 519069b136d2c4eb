//! CART decision trees with axis-aligned threshold splits.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MleError;
use crate::table::Task;

/// Relative slack under which two impurity decreases count as equal, so the
/// earlier candidate (lower feature, then lower threshold) is kept.
pub const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    Variance,
}

impl Criterion {
    pub fn for_task(task: Task) -> Self {
        match task {
            Task::Classification => Criterion::Gini,
            Task::Regression => Criterion::Variance,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until another stopping rule applies.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub criterion: Criterion,
}

impl TreeParams {
    pub fn new(max_depth: Option<usize>, min_samples_split: usize, criterion: Criterion) -> Self {
        TreeParams { max_depth, min_samples_split, criterion }
    }

    pub fn validate(&self, task: Task) -> Result<(), MleError> {
        if self.min_samples_split < 2 {
            return Err(MleError::Fit("min_samples_split must be at least 2".into()));
        }
        if self.criterion == Criterion::Gini && task == Task::Regression {
            return Err(MleError::Fit("gini impurity needs a classification task".into()));
        }
        Ok(())
    }
}

/// Gini impurity `1 - Σ p_c²` of class labels.
pub fn gini(labels: &[usize]) -> Result<f64, MleError> {
    if labels.is_empty() {
        return Err(MleError::Metric("gini of an empty label set".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    Ok(gini_from_counts(&counts, labels.len()))
}

pub(crate) fn gini_from_counts(counts: &[usize], n: usize) -> f64 {
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// A fitted tree stored as a node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    n_features: usize,
    task: Task,
}

/// Best split found at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Feature and threshold of the root split, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>, MleError> {
        check_arity(x, self.n_features)?;
        Ok(x.iter().map(|r| self.predict_row(r)).collect())
    }
}

pub(crate) fn check_arity(x: &[Vec<f64>], n_features: usize) -> Result<(), MleError> {
    match x.iter().position(|r| r.len() != n_features) {
        Some(i) => Err(MleError::Predict(format!(
            "row {i} has {} features, model expects {n_features}",
            x[i].len()
        ))),
        None => Ok(()),
    }
}

pub(crate) fn check_shapes(x: &[Vec<f64>], y: &[f64]) -> Result<usize, MleError> {
    if x.is_empty() {
        return Err(MleError::Fit("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(MleError::Fit(format!("{} feature rows but {} targets", x.len(), y.len())));
    }
    let p = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != p) {
        return Err(MleError::Fit(format!("row {i} has {} features, expected {p}", x[i].len())));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(MleError::Fit(format!("target {i} is not finite")));
    }
    Ok(p)
}

/// Per-node feature subsampling; `None` considers every feature.
pub(crate) struct FeatureSampler<'r, R: Rng> {
    pub rng: &'r mut R,
    pub per_split: usize,
}

pub(crate) struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    task: Task,
    params: TreeParams,
    n_classes: usize,
    nodes: Vec<Node>,
}

impl<'a> Builder<'a> {
    pub fn new(x: &'a [Vec<f64>], y: &'a [f64], task: Task, params: TreeParams) -> Self {
        let n_classes = match task {
            Task::Classification => y.iter().fold(0usize, |m, &v| m.max(v as usize + 1)),
            Task::Regression => 0,
        };
        Builder { x, y, task, params, n_classes, nodes: Vec::new() }
    }

    pub fn build<R: Rng>(mut self, indices: &mut [usize], mut sampler: Option<FeatureSampler<'_, R>>) -> DecisionTree {
        let n_features = self.x[0].len();
        self.grow(indices, 0, &mut sampler);
        DecisionTree { nodes: self.nodes, n_features, task: self.task }
    }

    fn leaf_value(&self, idx: &[usize]) -> f64 {
        match self.task {
            Task::Classification => {
                let counts = self.class_counts(idx);
                // first maximum = lowest class index
                let mut best = 0;
                for (c, &n) in counts.iter().enumerate() {
                    if n > counts[best] {
                        best = c;
                    }
                }
                best as f64
            }
            Task::Regression => idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64,
        }
    }

    fn class_counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &i in idx {
            counts[self.y[i] as usize] += 1;
        }
        counts
    }

    fn impurity(&self, idx: &[usize]) -> f64 {
        match self.params.criterion {
            Criterion::Gini => gini_from_counts(&self.class_counts(idx), idx.len()),
            Criterion::Variance => {
                let first = self.y[idx[0]];
                if idx.iter().all(|&i| self.y[i] == first) {
                    return 0.0;
                }
                let n = idx.len() as f64;
                let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
                idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum::<f64>() / n
            }
        }
    }

    fn grow<R: Rng>(&mut self, idx: &mut [usize], depth: usize, sampler: &mut Option<FeatureSampler<'_, R>>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: self.leaf_value(idx) });
        let impurity = self.impurity(idx);
        if idx.len() < self.params.min_samples_split
            || self.params.max_depth.is_some_and(|d| depth >= d)
            || impurity <= 0.0
        {
            return id;
        }
        let p = self.x[0].len();
        let features: Vec<usize> = match sampler {
            Some(s) if s.per_split < p => {
                let mut f = sample(s.rng, p, s.per_split).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        };
        let Some(choice) = self.best_split(idx, impurity, &features) else {
            return id;
        };
        let mid = partition(idx, |i| self.x[i][choice.feature] <= choice.threshold);
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(l, depth + 1, sampler);
        let right = self.grow(r, depth + 1, sampler);
        self.nodes[id] = Node::Split { feature: choice.feature, threshold: choice.threshold, left, right };
        id
    }

    /// Scans midpoints between consecutive distinct values of each feature.
    /// Splits with zero decrease are allowed (needed for XOR-like data); the
    /// first candidate within [`TIE_TOLERANCE`] of the best is kept.
    pub fn best_split(&self, idx: &[usize], parent: f64, features: &[usize]) -> Option<SplitChoice> {
        let n = idx.len();
        let slack = TIE_TOLERANCE * parent.abs().max(f64::MIN_POSITIVE);
        let mut best: Option<SplitChoice> = None;
        let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
        for &f in features {
            order.clear();
            order.extend(idx.iter().map(|&i| (self.x[i][f], i)));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            if order[0].0 == order[n - 1].0 {
                continue;
            }
            let mut scan = Scan::new(self, idx);
            for k in 1..n {
                scan.move_left(self, order[k - 1].1);
                let (lo, hi) = (order[k - 1].0, order[k].0);
                if lo == hi {
                    continue;
                }
                let decrease = parent - scan.weighted_child_impurity(k, n);
                if decrease < -slack {
                    continue;
                }
                if best.is_none_or(|b| decrease > b.decrease + slack) {
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(SplitChoice { feature: f, threshold, decrease: decrease.max(0.0) });
                }
            }
        }
        best
    }
}

/// Running sufficient statistics for the left and right side of a sweep.
enum Scan {
    Classes { left: Vec<usize>, right: Vec<usize> },
    Moments { shift: f64, left: (f64, f64), right: (f64, f64) },
}

impl Scan {
    fn new(b: &Builder<'_>, idx: &[usize]) -> Self {
        match b.params.criterion {
            Criterion::Gini => Scan::Classes { left: vec![0; b.n_classes], right: b.class_counts(idx) },
            Criterion::Variance => {
                // shifting by the node mean keeps the sums well conditioned
                let shift = idx.iter().map(|&i| b.y[i]).sum::<f64>() / idx.len() as f64;
                let right = idx.iter().fold((0.0, 0.0), |(s, q), &i| {
                    let v = b.y[i] - shift;
                    (s + v, q + v * v)
                });
                Scan::Moments { shift, left: (0.0, 0.0), right }
            }
        }
    }

    fn move_left(&mut self, b: &Builder<'_>, i: usize) {
        match self {
            Scan::Classes { left, right } => {
                let c = b.y[i] as usize;
                left[c] += 1;
                right[c] -= 1;
            }
            Scan::Moments { shift, left, right } => {
                let v = b.y[i] - *shift;
                left.0 += v;
                left.1 += v * v;
                right.0 -= v;
                right.1 -= v * v;
            }
        }
    }

    /// `(n_l/n)·I(left) + (n_r/n)·I(right)` with `n_left` rows on the left.
    fn weighted_child_impurity(&self, n_left: usize, n: usize) -> f64 {
        let (nl, nr, nf) = (n_left as f64, (n - n_left) as f64, n as f64);
        match self {
            Scan::Classes { left, right } => {
                nl / nf * gini_from_counts(left, n_left) + nr / nf * gini_from_counts(right, n - n_left)
            }
            Scan::Moments { left, right, .. } => {
                let sse_l = (left.1 - left.0 * left.0 / nl).max(0.0);
                let sse_r = (right.1 - right.0 * right.0 / nr).max(0.0);
                (sse_l + sse_r) / nf
            }
        }
    }
}

/// Stable in-place partition; returns the number of elements satisfying `pred`.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let mid = yes.len();
    idx[..mid].copy_from_slice(&yes);
    idx[mid..].copy_from_slice(&no);
    mid
}

/// Fits a single tree on all rows. Classification targets are class indices
/// stored as `f64`; categorical features are ordinal codes.
pub fn fit_tree(x: &[Vec<f64>], y: &[f64], params: &TreeParams, task: Task) -> Result<DecisionTree, MleError> {
    check_shapes(x, y)?;
    params.validate(task)?;
    check_labels(y, task)?;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    Ok(Builder::new(x, y, task, *params).build::<rand_chacha::ChaCha8Rng>(&mut idx, None))
}

pub(crate) fn check_labels(y: &[f64], task: Task) -> Result<(), MleError> {
    if task == Task::Classification {
        if let Some(i) = y.iter().position(|&v| v < 0.0 || v.fract() != 0.0) {
            return Err(MleError::Fit(format!("class label {} at row {i} is not a class index", y[i])));
        }
    }
    Ok(())
}
