use super::shapley::{CoalitionalGame, MAX_EXACT_PLAYERS};
use crate::error::{Error, Result};
use crate::trees::{Node, Tree, TreeEnsemble};

fn tree_expect(tree: &Tree, node: usize, x: &[f64], known: &[bool]) -> f64 {
    match tree.nodes[node] {
        Node::Leaf { value, .. } => value,
        Node::Split { feature, threshold, left, right, cover } => {
            if known[feature] {
                let next = if x[feature] < threshold { left } else { right };
                tree_expect(tree, next, x, known)
            } else {
                let wl = tree.nodes[left].cover() as f64;
                let wr = tree.nodes[right].cover() as f64;
                (wl * tree_expect(tree, left, x, known) + wr * tree_expect(tree, right, x, known))
                    / cover as f64
            }
        }
    }
}

/// Path-dependent conditional expectation `f_S(x_S)`: splits on features
/// in `known` follow `x`; other splits average both children weighted by
/// training cover.
pub fn tree_expectation(ensemble: &TreeEnsemble, x: &[f64], known: &[bool]) -> Result<f64> {
    ensemble.validate()?;
    let m = ensemble.n_features();
    if x.len() != m {
        return Err(Error::Arity { expected: m, found: x.len() });
    }
    if known.len() != m {
        return Err(Error::Arity { expected: m, found: known.len() });
    }
    Ok(expectation_unchecked(ensemble, x, known))
}

pub(crate) fn expectation_unchecked(ensemble: &TreeEnsemble, x: &[f64], known: &[bool]) -> f64 {
    let (offset, scale) = ensemble.output_affine();
    offset + scale * ensemble.trees.iter().map(|t| tree_expect(t, 0, x, known)).sum::<f64>()
}

/// `f_∅`: the cover-weighted mean output, i.e. the SHAP base value.
pub fn expected_value(ensemble: &TreeEnsemble) -> Result<f64> {
    ensemble.validate()?;
    let m = ensemble.n_features();
    Ok(expectation_unchecked(ensemble, &vec![0.0; m], &vec![false; m]))
}

/// The coalitional game `S ↦ f_S(x_S)` for one sample.
pub struct TreeGame<'a> {
    ensemble: &'a TreeEnsemble,
    x: &'a [f64],
}

impl<'a> TreeGame<'a> {
    pub fn new(ensemble: &'a TreeEnsemble, x: &'a [f64]) -> Result<Self> {
        ensemble.validate()?;
        let m = ensemble.n_features();
        if x.len() != m {
            return Err(Error::Arity { expected: m, found: x.len() });
        }
        if m > MAX_EXACT_PLAYERS {
            return Err(Error::TooManyPlayers(m));
        }
        Ok(Self { ensemble, x })
    }
}

impl CoalitionalGame for TreeGame<'_> {
    fn players(&self) -> usize {
        self.ensemble.n_features()
    }

    fn payoff(&self, coalition: u32) -> f64 {
        let known: Vec<bool> = (0..self.players()).map(|i| coalition & (1 << i) != 0).collect();
        expectation_unchecked(self.ensemble, self.x, &known)
    }
}
