//! Plaintext random-forest baseline, used only for accuracy comparison.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 50,
            max_depth: 8,
            min_samples_split: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf(p) => *p,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct RandomForest {
    trees: Vec<Node>,
}

struct Builder<'a, R> {
    x: &'a [R],
    y: &'a [u8],
    params: &'a ForestParams,
    features_per_split: usize,
}

impl<R: AsRef<[f64]>> Builder<'_, R> {
    fn grow(&self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let positives = idx.iter().filter(|&&i| self.y[i] == 1).count();
        let p = positives as f64 / idx.len() as f64;
        if depth >= self.params.max_depth
            || idx.len() < self.params.min_samples_split
            || positives == 0
            || positives == idx.len()
        {
            return Node::Leaf(p);
        }
        let dim = self.x[0].as_ref().len();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(rng);
        features.truncate(self.features_per_split);

        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &features {
            idx.sort_by(|&a, &b| self.value(a, f).total_cmp(&self.value(b, f)));
            let n = idx.len();
            let mut left_pos = 0usize;
            for k in 1..n {
                left_pos += usize::from(self.y[idx[k - 1]]);
                let (lo, hi) = (self.value(idx[k - 1], f), self.value(idx[k], f));
                if lo == hi {
                    continue;
                }
                let impurity = weighted_gini(left_pos, k, positives - left_pos, n - k);
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, f, 0.5 * (lo + hi)));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return Node::Leaf(p);
        };
        let split = partition(idx, |i| self.value(i, feature) <= threshold);
        let (l, r) = idx.split_at_mut(split);
        Node::Split {
            feature,
            threshold,
            left: Box::new(self.grow(l, depth + 1, rng)),
            right: Box::new(self.grow(r, depth + 1, rng)),
        }
    }

    fn value(&self, row: usize, feature: usize) -> f64 {
        self.x[row].as_ref()[feature]
    }
}

fn weighted_gini(lp: usize, ln: usize, rp: usize, rn: usize) -> f64 {
    let g = |p: usize, n: usize| {
        let q = p as f64 / n as f64;
        2.0 * q * (1.0 - q) * n as f64
    };
    g(lp, ln) + g(rp, rn)
}

/// Moves elements satisfying `pred` to the front; returns their count.
fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut k = 0;
    for j in 0..idx.len() {
        if pred(idx[j]) {
            idx.swap(k, j);
            k += 1;
        }
    }
    k
}

impl RandomForest {
    /// Bootstrap-aggregated CART trees with Gini splits over a random
    /// `sqrt(d)` feature subset per node. Trees are independent and are
    /// grown in parallel; each has its own seeded generator.
    pub fn fit<R: AsRef<[f64]> + Sync>(x: &[R], y: &[u8], params: &ForestParams) -> Result<Self, ModelError> {
        let first = x.first().ok_or(ModelError::EmptyDataset)?;
        if x.len() != y.len() {
            return Err(ModelError::ShapeMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if let Some(row) = y.iter().position(|&l| l > 1) {
            return Err(ModelError::NonBinaryLabels { row });
        }
        let dim = first.as_ref().len();
        let builder = Builder {
            x,
            y,
            params,
            features_per_split: ((dim as f64).sqrt().ceil() as usize).max(1),
        };
        let trees = par::map_indices(params.n_trees, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(t as u64));
            let mut idx: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
            builder.grow(&mut idx, 0, &mut rng)
        });
        Ok(Self { trees })
    }

    /// Mean leaf probability across trees.
    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.predict_proba(x) > 0.5)
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }
}
