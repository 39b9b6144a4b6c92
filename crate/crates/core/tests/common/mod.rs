#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shalekit::trees::{EnsembleKind, Node, Tree, TreeEnsemble};

fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, depth: usize, max_depth: usize, cover: usize, m: usize) -> usize {
    let idx = nodes.len();
    nodes.push(Node::Leaf { value: 0.0, cover });
    if depth == max_depth || cover < 2 || rng.random_bool(0.2) {
        nodes[idx] = Node::Leaf { value: rng.random_range(-5.0..5.0), cover };
        return idx;
    }
    let feature = rng.random_range(0..m);
    let threshold = rng.random_range(0.05..0.95);
    let left_cover = rng.random_range(1..cover);
    let left = grow(rng, nodes, depth + 1, max_depth, left_cover, m);
    let right = grow(rng, nodes, depth + 1, max_depth, cover - left_cover, m);
    nodes[idx] = Node::Split { feature, threshold, left, right, cover };
    idx
}

pub fn random_tree(rng: &mut ChaCha8Rng, m: usize, max_depth: usize) -> Tree {
    let mut nodes = Vec::new();
    let cover = rng.random_range(2..=64);
    grow(rng, &mut nodes, 0, max_depth, cover, m);
    Tree { nodes }
}

/// Random ensemble with structure drawn directly (features may repeat along
/// a path, covers are arbitrary but consistent).
pub fn random_ensemble(seed: u64, m: usize, max_trees: usize, max_depth: usize) -> TreeEnsemble {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = EnsembleKind::ALL[rng.random_range(0..3)];
    let n_trees = rng.random_range(1..=max_trees);
    let trees = (0..n_trees).map(|_| random_tree(&mut rng, m, max_depth)).collect();
    let (base_score, learning_rate) = match kind {
        EnsembleKind::Rf => (0.0, 1.0),
        _ => (rng.random_range(-1.0..1.0), rng.random_range(0.05..1.0)),
    };
    TreeEnsemble {
        kind,
        trees,
        base_score,
        learning_rate,
        feature_names: (0..m).map(|i| format!("f{i}")).collect(),
    }
}

pub fn random_rows(seed: u64, n: usize, m: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect()
}

/// Two depth-one trees on different features: purely additive.
pub fn additive_stumps() -> TreeEnsemble {
    let stump = |feature, lo: f64, hi: f64| Tree {
        nodes: vec![
            Node::Split { feature, threshold: 0.5, left: 1, right: 2, cover: 10 },
            Node::Leaf { value: lo, cover: 3 },
            Node::Leaf { value: hi, cover: 7 },
        ],
    };
    TreeEnsemble {
        kind: EnsembleKind::Gbdt,
        trees: vec![stump(0, -1.0, 2.0), stump(1, 0.5, -3.0)],
        base_score: 0.25,
        learning_rate: 0.5,
        feature_names: vec!["a".into(), "b".into(), "c".into()],
    }
}
