//! AdaBoost with decision stumps and least-squares boosting with regression
//! trees.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_rows(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            what: "labels",
            expected: x.len(),
            got: y.len(),
        });
    }
    let first = x.first().ok_or(Error::Empty("boosting"))?;
    let d = first.len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::Dimension {
            what: "feature row",
            expected: d,
            got: r.len(),
        });
    }
    Ok(d)
}

/// Row indices sorted by each feature.
fn presort(x: &[Vec<f64>], d: usize) -> Vec<Vec<usize>> {
    (0..d)
        .map(|f| {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

/// `polarity` if `x[feature] > threshold`, `-polarity` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub polarity: f64,
}

impl Stump {
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature] > self.threshold {
            self.polarity
        } else {
            -self.polarity
        }
    }
}

/// Lowest weighted-error stump; ties keep the first feature / threshold.
fn best_stump(x: &[Vec<f64>], y: &[f64], w: &[f64], order: &[Vec<usize>]) -> (Stump, f64) {
    let total_pos: f64 = y.iter().zip(w).filter(|(l, _)| **l > 0.0).map(|(_, w)| w).sum();
    let total: f64 = w.iter().sum();
    let total_neg = total - total_pos;
    // Threshold below every value: everything is "above".
    let mut best = Stump {
        feature: 0,
        threshold: f64::NEG_INFINITY,
        polarity: if total_pos >= total_neg { 1.0 } else { -1.0 },
    };
    let mut best_err = total_pos.min(total_neg);
    for (f, idx) in order.iter().enumerate() {
        // Weight of positives / negatives at or below the current cut.
        let (mut pos_below, mut neg_below) = (0.0, 0.0);
        for k in 0..idx.len() {
            let i = idx[k];
            if y[i] > 0.0 {
                pos_below += w[i];
            } else {
                neg_below += w[i];
            }
            let v = x[i][f];
            if k + 1 < idx.len() && x[idx[k + 1]][f] == v {
                continue;
            }
            let threshold = if k + 1 < idx.len() {
                0.5 * (v + x[idx[k + 1]][f])
            } else {
                v
            };
            // polarity +1: above -> +1, so errors are positives below and
            // negatives above.
            let err_pos = pos_below + (total_neg - neg_below);
            let err_neg = neg_below + (total_pos - pos_below);
            if err_pos < best_err {
                best_err = err_pos;
                best = Stump {
                    feature: f,
                    threshold,
                    polarity: 1.0,
                };
            }
            if err_neg < best_err {
                best_err = err_neg;
                best = Stump {
                    feature: f,
                    threshold,
                    polarity: -1.0,
                };
            }
        }
    }
    (best, (best_err / total).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub rounds: usize,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self { rounds: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub stumps: Vec<Stump>,
    pub alphas: Vec<f64>,
    /// Weighted training error of each round.
    pub errors: Vec<f64>,
}

/// Stage weight used when a stump is perfect.
const PERFECT_ERROR: f64 = 1e-10;

impl AdaBoostModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.stumps.iter().zip(&self.alphas).map(|(s, a)| a * s.predict(x)).sum()
    }

    pub fn classify(&self, x: &[f64]) -> f64 {
        if self.decision(x) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Running training-error bound `prod_t 2 sqrt(err_t (1 - err_t))`.
    pub fn error_bound(&self) -> Vec<f64> {
        let mut b = 1.0;
        self.errors
            .iter()
            .map(|&e| {
                b *= 2.0 * libm::sqrt(e * (1.0 - e));
                b
            })
            .collect()
    }
}

pub fn train_adaboost(x: &[Vec<f64>], y: &[f64], params: &AdaBoostParams) -> Result<AdaBoostModel> {
    let d = check_rows(x, y)?;
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParameter {
            name: "labels",
            reason: String::from("classification labels must be +1 or -1"),
        });
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass(String::from("adaboost")));
    }
    let order = presort(x, d);
    let n = x.len();
    let mut w = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        stumps: Vec::new(),
        alphas: Vec::new(),
        errors: Vec::new(),
    };
    for _ in 0..params.rounds {
        let (stump, err) = best_stump(x, y, &w, &order);
        if err >= 0.5 {
            break;
        }
        let e = err.max(PERFECT_ERROR);
        let alpha = 0.5 * libm::log((1.0 - e) / e);
        model.stumps.push(stump);
        model.alphas.push(alpha);
        model.errors.push(e);
        if err <= 0.0 {
            break;
        }
        let mut z = 0.0;
        for i in 0..n {
            w[i] *= libm::exp(-alpha * y[i] * stump.predict(&x[i]));
            z += w[i];
        }
        for v in w.iter_mut() {
            *v /= z;
        }
    }
    Ok(model)
}

/// Flat binary regression tree; `left[k] == usize::MAX` marks a leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub feature: Vec<usize>,
    pub threshold: Vec<f64>,
    pub value: Vec<f64>,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

pub const LEAF: usize = usize::MAX;

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        while self.left[k] != LEAF {
            k = if x[self.feature[k]] <= self.threshold[k] {
                self.left[k]
            } else {
                self.right[k]
            };
        }
        self.value[k]
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(0);
        self.threshold.push(0.0);
        self.value.push(value);
        self.left.push(LEAF);
        self.right.push(LEAF);
        self.value.len() - 1
    }
}

struct TreeBuilder<'a> {
    x: &'a [Vec<f64>],
    r: &'a [f64],
    order: &'a [Vec<usize>],
    max_depth: usize,
    min_leaf: usize,
    /// Node membership of each row during construction.
    member: Vec<usize>,
}

impl TreeBuilder<'_> {
    /// Best variance-reducing split of the rows with `member == node`.
    fn best_split(&self, node: usize, count: usize, sum: f64) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        let base = sum * sum / count as f64;
        for (f, idx) in self.order.iter().enumerate() {
            let (mut n_left, mut s_left) = (0usize, 0.0);
            let mut prev: Option<usize> = None;
            for &i in idx.iter().filter(|&&i| self.member[i] == node) {
                if let Some(p) = prev {
                    let (a, b) = (self.x[p][f], self.x[i][f]);
                    if a < b && n_left >= self.min_leaf && count - n_left >= self.min_leaf {
                        let n_right = count - n_left;
                        let s_right = sum - s_left;
                        let gain = s_left * s_left / n_left as f64 + s_right * s_right / n_right as f64 - base;
                        if gain > 1e-12 * (1.0 + base.abs()) && best.is_none_or(|(_, _, g)| gain > g) {
                            best = Some((f, 0.5 * (a + b), gain));
                        }
                    }
                }
                n_left += 1;
                s_left += self.r[i];
                prev = Some(i);
            }
        }
        best
    }

    fn grow(&mut self, tree: &mut RegressionTree, node_id: usize, depth: usize) -> usize {
        let rows: Vec<usize> = (0..self.x.len()).filter(|&i| self.member[i] == node_id).collect();
        let count = rows.len();
        let sum: f64 = rows.iter().map(|&i| self.r[i]).sum();
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        let k = tree.push_leaf(mean);
        if depth >= self.max_depth || count < 2 * self.min_leaf {
            return k;
        }
        let Some((f, thr, _)) = self.best_split(node_id, count, sum) else {
            return k;
        };
        // Node ids for membership are the tree slots of the children.
        let left_id = 2 * node_id + 1;
        let right_id = 2 * node_id + 2;
        for &i in &rows {
            self.member[i] = if self.x[i][f] <= thr { left_id } else { right_id };
        }
        tree.feature[k] = f;
        tree.threshold[k] = thr;
        let l = self.grow(tree, left_id, depth + 1);
        let r = self.grow(tree, right_id, depth + 1);
        tree.left[k] = l;
        tree.right[k] = r;
        k
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2BoostParams {
    pub stages: usize,
    pub shrinkage: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for L2BoostParams {
    fn default() -> Self {
        Self {
            stages: 200,
            shrinkage: 0.1,
            max_depth: 3,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2BoostModel {
    pub base: f64,
    pub shrinkage: f64,
    pub trees: Vec<RegressionTree>,
    /// Training MSE after stage 0 and after every tree.
    pub train_mse: Vec<f64>,
}

impl L2BoostModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.base + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

pub fn train_l2boost(x: &[Vec<f64>], y: &[f64], params: &L2BoostParams) -> Result<L2BoostModel> {
    let d = check_rows(x, y)?;
    if !(params.shrinkage > 0.0 && params.shrinkage <= 1.0) {
        return Err(Error::Domain {
            what: "shrinkage",
            value: params.shrinkage,
        });
    }
    let n = x.len();
    let order = presort(x, d);
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fit = vec![base; n];
    let mse = |fit: &[f64]| fit.iter().zip(y).map(|(f, t)| (t - f) * (t - f)).sum::<f64>() / n as f64;
    let mut model = L2BoostModel {
        base,
        shrinkage: params.shrinkage,
        trees: Vec::new(),
        train_mse: vec![mse(&fit)],
    };
    for _ in 0..params.stages {
        let r: Vec<f64> = fit.iter().zip(y).map(|(f, t)| t - f).collect();
        let mut builder = TreeBuilder {
            x,
            r: &r,
            order: &order,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf.max(1),
            member: vec![0; n],
        };
        let mut tree = RegressionTree {
            feature: Vec::new(),
            threshold: Vec::new(),
            value: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
        };
        builder.grow(&mut tree, 0, 0);
        for (f, row) in fit.iter_mut().zip(x) {
            *f += params.shrinkage * tree.predict(row);
        }
        model.trees.push(tree);
        model.train_mse.push(mse(&fit));
    }
    Ok(model)
}
