use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{Matrix, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode<T> {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        value: Vec<T>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or `min_samples_leaf` stops them.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn per node; `None` uses all of them in column order.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

/// Multi-output regression tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    n_features: usize,
    n_outputs: usize,
    nodes: Vec<TreeNode<T>>,
}

impl<T: Real> RegressionTree<T> {
    pub fn nodes(&self) -> &[TreeNode<T>] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// Leaf vector reached by `x`.
    #[inline]
    pub fn predict_row(&self, x: &[T]) -> &[T] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
                TreeNode::Leaf { value } => return value,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[TreeNode<T>], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    /// Multiplies every leaf vector by `c`.
    pub fn scale_leaves(&mut self, c: T) {
        for n in &mut self.nodes {
            if let TreeNode::Leaf { value } = n {
                value.iter_mut().for_each(|v| *v *= c);
            }
        }
    }
}

/// Column-major feature copy with every column's row indices sorted by value.
/// Built once per training matrix and shared by all trees grown on it.
pub(crate) struct Presorted<T> {
    cols: Vec<Vec<T>>,
    order: Vec<Vec<u32>>,
    n_rows: usize,
}

impl<T: Real> Presorted<T> {
    pub(crate) fn new(x: &Matrix<T>) -> Result<Self> {
        if x.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let (n, p) = (x.n_rows(), x.n_cols());
        let cols: Vec<Vec<T>> = (0..p)
            .map(|f| (0..n).map(|i| x.get(i, f)).collect())
            .collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..n as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].partial_cmp(&c[b as usize]).expect("finite"));
                o
            })
            .collect();
        Ok(Self {
            cols,
            order,
            n_rows: n,
        })
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.n_rows
    }

    fn n_features(&self) -> usize {
        self.cols.len()
    }

    /// Sorted orders restricted to rows with positive weight.
    fn orders_for(&self, w: &[T]) -> Vec<Vec<u32>> {
        self.order
            .iter()
            .map(|o| {
                o.iter()
                    .copied()
                    .filter(|&i| w[i as usize] > T::zero())
                    .collect()
            })
            .collect()
    }
}

struct Task {
    node: usize,
    lo: usize,
    hi: usize,
    depth: usize,
}

struct Split<T> {
    feature: usize,
    threshold: T,
}

/// Midpoint of two consecutive distinct values, kept strictly below `b`.
fn midpoint<T: Real>(a: T, b: T) -> T {
    let m = (a + b) / T::lit(2.0);
    if m >= a && m < b {
        m
    } else {
        a
    }
}

/// Grows one tree. `y` is row-major `n × k`; `w` holds non-negative row
/// weights (bootstrap multiplicities), zero-weight rows are ignored.
pub(crate) fn grow<T: Real, R: Rng + ?Sized>(
    data: &Presorted<T>,
    y: &[T],
    k: usize,
    w: &[T],
    cfg: &TreeConfig,
    rng: &mut R,
) -> RegressionTree<T> {
    let p = data.n_features();
    let n = data.n_rows();
    assert_eq!(y.len(), n * k);
    assert_eq!(w.len(), n);
    let mtry = cfg.max_features.unwrap_or(p).clamp(1, p.max(1));
    let min_leaf = T::from_count(cfg.min_samples_leaf.max(1));

    let mut orders = data.orders_for(w);
    let m = orders.first().map_or(0, Vec::len);
    let mut nodes = vec![TreeNode::Leaf { value: Vec::new() }];
    let mut stack = vec![Task {
        node: 0,
        lo: 0,
        hi: m,
        depth: 0,
    }];
    let mut goes_left = vec![false; n];
    let mut scratch: Vec<u32> = Vec::with_capacity(m);
    let mut feats: Vec<usize> = (0..p).collect();
    let mut total = vec![T::zero(); k];
    let mut left = vec![T::zero(); k];

    while let Some(task) = stack.pop() {
        let rows = if p > 0 {
            &orders[0][task.lo..task.hi]
        } else {
            &[][..]
        };
        let mut wsum = T::zero();
        total.iter_mut().for_each(|v| *v = T::zero());
        for &i in rows {
            let i = i as usize;
            wsum += w[i];
            for j in 0..k {
                total[j] += w[i] * y[i * k + j];
            }
        }
        let first = rows.first().map_or(0, |&i| i as usize);
        let pure = rows
            .iter()
            .all(|&i| y[i as usize * k..(i as usize + 1) * k] == y[first * k..(first + 1) * k]);
        let leaf_value = |rows: &[u32]| -> Vec<T> {
            if pure {
                return y[first * k..(first + 1) * k].to_vec();
            }
            // summed in row order so the value does not depend on column order
            let mut idx = rows.to_vec();
            idx.sort_unstable();
            let mut acc = vec![T::zero(); k];
            let mut wt = T::zero();
            for &i in &idx {
                let i = i as usize;
                wt += w[i];
                for j in 0..k {
                    acc[j] += w[i] * y[i * k + j];
                }
            }
            acc.iter().map(|&s| s / wt).collect()
        };
        let depth_left = cfg.max_depth.is_none_or(|d| task.depth < d);
        let splittable = depth_left && !pure && wsum >= min_leaf + min_leaf;

        let mut best: Option<Split<T>> = None;
        if splittable {
            if mtry < p {
                for i in 0..mtry {
                    let j = rng.random_range(i..p);
                    feats.swap(i, j);
                }
            } else {
                for (i, f) in feats.iter_mut().enumerate() {
                    *f = i;
                }
            }
            let mut best_gain = T::neg_infinity();
            for &f in &feats[..mtry] {
                let ord = &orders[f][task.lo..task.hi];
                let col = &data.cols[f];
                if col[ord[0] as usize] == col[ord[ord.len() - 1] as usize] {
                    continue;
                }
                let mut wl = T::zero();
                left.iter_mut().for_each(|v| *v = T::zero());
                for pos in 0..ord.len() - 1 {
                    let i = ord[pos] as usize;
                    wl += w[i];
                    for j in 0..k {
                        left[j] += w[i] * y[i * k + j];
                    }
                    let (a, b) = (col[i], col[ord[pos + 1] as usize]);
                    if a == b || wl < min_leaf {
                        continue;
                    }
                    let wr = wsum - wl;
                    if wr < min_leaf {
                        break;
                    }
                    // Σ_j S_L²/W_L + S_R²/W_R; maximizing it minimizes child SSE
                    let mut gain = T::zero();
                    for j in 0..k {
                        let r = total[j] - left[j];
                        gain += left[j] * left[j] / wl + r * r / wr;
                    }
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some(Split {
                            feature: f,
                            threshold: midpoint(a, b),
                        });
                    }
                }
            }
        }

        let Some(split) = best else {
            nodes[task.node] = TreeNode::Leaf {
                value: leaf_value(&orders[0][task.lo..task.hi]),
            };
            continue;
        };
        let col = &data.cols[split.feature];
        for &i in &orders[0][task.lo..task.hi] {
            goes_left[i as usize] = col[i as usize] <= split.threshold;
        }
        let mut n_left = 0;
        for ord in orders.iter_mut() {
            let seg = &mut ord[task.lo..task.hi];
            scratch.clear();
            let mut wpos = 0;
            for r in 0..seg.len() {
                let i = seg[r];
                if goes_left[i as usize] {
                    seg[wpos] = i;
                    wpos += 1;
                } else {
                    scratch.push(i);
                }
            }
            seg[wpos..].copy_from_slice(&scratch);
            n_left = wpos;
        }
        let l = nodes.len();
        nodes.push(TreeNode::Leaf { value: Vec::new() });
        nodes.push(TreeNode::Leaf { value: Vec::new() });
        nodes[task.node] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: l + 1,
        };
        let mid = task.lo + n_left;
        stack.push(Task {
            node: l + 1,
            lo: mid,
            hi: task.hi,
            depth: task.depth + 1,
        });
        stack.push(Task {
            node: l,
            lo: task.lo,
            hi: mid,
            depth: task.depth + 1,
        });
    }
    RegressionTree {
        n_features: p,
        n_outputs: k,
        nodes,
    }
}

/// Greedy CART on `x` (`n × p`) and `y` (`n × k`) with unit row weights.
pub fn fit_tree<T: Real, R: Rng + ?Sized>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    cfg: &TreeConfig,
    rng: &mut R,
) -> Result<RegressionTree<T>> {
    check_training_data(x, y, 1)?;
    if cfg.min_samples_leaf == 0 {
        return Err(Error::InvalidHyperparams(
            "min_samples_leaf must be at least 1".into(),
        ));
    }
    let data = Presorted::new(x)?;
    let w = vec![T::one(); x.n_rows()];
    Ok(grow(&data, y.as_slice(), y.n_cols(), &w, cfg, rng))
}

pub(crate) fn check_training_data<T: Real>(
    x: &Matrix<T>,
    y: &Matrix<T>,
    min_rows: usize,
) -> Result<()> {
    if x.n_rows() != y.n_rows() {
        return Err(Error::LengthMismatch(x.n_rows(), y.n_rows()));
    }
    if x.n_rows() < min_rows {
        return Err(Error::TooFewSamples {
            needed: min_rows,
            have: x.n_rows(),
        });
    }
    if x.n_cols() == 0 || y.n_cols() == 0 {
        return Err(Error::EmptyInput);
    }
    if y.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}
