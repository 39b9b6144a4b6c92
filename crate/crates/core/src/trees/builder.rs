//! Greedy exact split search shared by every ensemble kind.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::{Node, Tree};

/// What a tree is fitted to.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Objective<'a> {
    /// Least squares on `targets`: leaves are means, gain is the drop in
    /// squared error `S_L²/n_L + S_R²/n_R − S²/n`.
    Variance { targets: &'a [f64] },
    /// Second-order boosting: leaves are `−G/(H+λ)`, gain is
    /// `½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ`.
    SecondOrder { grad: &'a [f64], hess: &'a [f64], lambda: f64, gamma: f64 },
}

impl Objective<'_> {
    fn stat(&self, row: usize) -> (f64, f64) {
        match *self {
            Objective::Variance { targets } => (targets[row], 1.0),
            Objective::SecondOrder { grad, hess, .. } => (grad[row], hess[row]),
        }
    }

    fn score(&self, sum: f64, weight: f64) -> f64 {
        match *self {
            Objective::Variance { .. } => sum * sum / weight,
            Objective::SecondOrder { lambda, .. } => sum * sum / (weight + lambda),
        }
    }

    fn gain(&self, left: (f64, f64), right: (f64, f64), parent: (f64, f64)) -> f64 {
        let raw = self.score(left.0, left.1) + self.score(right.0, right.1)
            - self.score(parent.0, parent.1);
        match *self {
            Objective::Variance { .. } => raw,
            Objective::SecondOrder { gamma, .. } => 0.5 * raw - gamma,
        }
    }

    fn leaf_value(&self, sum: f64, weight: f64) -> f64 {
        match *self {
            Objective::Variance { .. } => sum / weight,
            Objective::SecondOrder { lambda, .. } => -sum / (weight + lambda),
        }
    }
}

pub(crate) struct TreeBuilder<'a> {
    pub x: &'a [Vec<f64>],
    pub objective: Objective<'a>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: usize,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(
        x: &'a [Vec<f64>],
        objective: Objective<'a>,
        max_depth: usize,
        min_samples_leaf: usize,
        features_per_split: usize,
    ) -> Self {
        Self { x, objective, max_depth, min_samples_leaf, features_per_split, nodes: Vec::new() }
    }

    /// Grow a tree on `rows` (duplicates allowed, each counts toward cover).
    pub fn build(mut self, rows: &[usize], rng: &mut ChaCha8Rng) -> Tree {
        self.grow(rows, 0, rng);
        Tree { nodes: self.nodes }
    }

    fn n_features(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    fn totals(&self, rows: &[usize]) -> (f64, f64) {
        rows.iter().fold((0.0, 0.0), |(s, w), &r| {
            let (g, h) = self.objective.stat(r);
            (s + g, w + h)
        })
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.objective.stat(rows[0]).0;
        rows.iter().all(|&r| self.objective.stat(r).0 == first)
    }

    fn grow(&mut self, rows: &[usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let totals = self.totals(rows);
        let cover = rows.len();
        self.nodes.push(Node::Leaf { value: self.objective.leaf_value(totals.0, totals.1), cover });

        if depth >= self.max_depth
            || rows.len() < 2 * self.min_samples_leaf
            || self.is_pure(rows)
        {
            return id;
        }
        let Some(best) = self.best_split(rows, totals, rng) else {
            return id;
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| self.x[r][best.feature] < best.threshold);
        let left = self.grow(&left_rows, depth + 1, rng);
        let right = self.grow(&right_rows, depth + 1, rng);
        self.nodes[id] =
            Node::Split { feature: best.feature, threshold: best.threshold, left, right, cover };
        id
    }

    fn candidate_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let m = self.n_features();
        if self.features_per_split >= m {
            return (0..m).collect();
        }
        let mut picked = index::sample(rng, m, self.features_per_split.max(1)).into_vec();
        picked.sort_unstable();
        picked
    }

    /// Highest-gain split with positive gain. Ties resolve to the lowest
    /// feature index, then the lowest threshold.
    fn best_split(
        &self,
        rows: &[usize],
        totals: (f64, f64),
        rng: &mut ChaCha8Rng,
    ) -> Option<Candidate> {
        let n = rows.len();
        let mut best: Option<Candidate> = None;
        let mut order = rows.to_vec();
        for feature in self.candidate_features(rng) {
            order.copy_from_slice(rows);
            order.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left = (0.0, 0.0);
            for i in 0..n - 1 {
                let (g, h) = self.objective.stat(order[i]);
                left.0 += g;
                left.1 += h;
                let n_left = i + 1;
                if n_left < self.min_samples_leaf {
                    continue;
                }
                if n - n_left < self.min_samples_leaf {
                    break;
                }
                let a = self.x[order[i]][feature];
                let b = self.x[order[i + 1]][feature];
                if a == b {
                    continue;
                }
                let right = (totals.0 - left.0, totals.1 - left.1);
                let gain = self.objective.gain(left, right, totals);
                if gain > 0.0 && best.as_ref().is_none_or(|c| gain > c.gain) {
                    let mut threshold = a + (b - a) * 0.5;
                    if threshold <= a {
                        threshold = b;
                    }
                    best = Some(Candidate { feature, threshold, gain });
                }
            }
        }
        best
    }
}
