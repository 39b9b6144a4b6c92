use crate::error::{Error, Result};

/// Exact enumeration is refused above this many players.
pub const MAX_EXACT_PLAYERS: usize = 20;

/// A cooperative game over `players()` players. Coalitions are bit masks:
/// bit `i` set means player `i` participates.
pub trait CoalitionalGame {
    fn players(&self) -> usize;
    fn payoff(&self, coalition: u32) -> f64;
}

/// A game given by its full payoff table, indexed by coalition mask.
#[derive(Debug, Clone, PartialEq)]
pub struct TableGame {
    players: usize,
    payoffs: Vec<f64>,
}

impl TableGame {
    pub fn new(players: usize, payoffs: Vec<f64>) -> Result<Self> {
        if players > MAX_EXACT_PLAYERS {
            return Err(Error::TooManyPlayers(players));
        }
        if payoffs.len() != 1 << players {
            return Err(Error::invalid(format!(
                "{players} players need {} payoffs, got {}",
                1usize << players,
                payoffs.len()
            )));
        }
        if !payoffs[0].is_finite() {
            return Err(Error::invalid("payoff of the empty coalition must be finite"));
        }
        Ok(Self { players, payoffs })
    }
}

impl CoalitionalGame for TableGame {
    fn players(&self) -> usize {
        self.players
    }

    fn payoff(&self, coalition: u32) -> f64 {
        self.payoffs[coalition as usize]
    }
}

/// A game backed by a closure over coalition masks.
pub struct FnGame<F> {
    pub players: usize,
    pub payoff: F,
}

impl<F: Fn(u32) -> f64> CoalitionalGame for FnGame<F> {
    fn players(&self) -> usize {
        self.players
    }

    fn payoff(&self, coalition: u32) -> f64 {
        (self.payoff)(coalition)
    }
}

/// `C(n, k)` as a float; exact for the sizes used here.
fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn payoff_table(game: &impl CoalitionalGame) -> Result<(usize, Vec<f64>)> {
    let m = game.players();
    if m > MAX_EXACT_PLAYERS {
        return Err(Error::TooManyPlayers(m));
    }
    Ok((m, (0..1u32 << m).map(|s| game.payoff(s)).collect()))
}

/// Shapley values by enumerating every coalition:
///
/// `φ_i = Σ_{S ⊆ Λ∖{i}} |S|!(M−|S|−1)!/M! · [f(S∪{i}) − f(S)]`
pub fn shapley_exact(game: &impl CoalitionalGame) -> Result<Vec<f64>> {
    let (m, f) = payoff_table(game)?;
    if m == 0 {
        return Ok(Vec::new());
    }
    // |S|!(M−|S|−1)!/M! = 1 / (M · C(M−1, |S|))
    let weight: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s))).collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for s in (0..1u32 << m).filter(|s| s & bit == 0) {
            *p += weight[s.count_ones() as usize] * (f[(s | bit) as usize] - f[s as usize]);
        }
    }
    Ok(phi)
}

/// Pairwise Shapley interaction index by enumeration:
///
/// `φ_ij = Σ_{S ⊆ Λ∖{i,j}} |S|!(M−|S|−2)!/(2(M−1)!) · ∇_ij(S)`,
/// `∇_ij(S) = f(S∪{i,j}) − f(S∪{i}) − f(S∪{j}) + f(S)`.
///
/// The diagonal holds main effects `φ_ii = φ_i − Σ_{j≠i} φ_ij`, so every
/// row sums to the Shapley value.
pub fn shapley_interaction_exact(game: &impl CoalitionalGame) -> Result<Vec<Vec<f64>>> {
    let phi = shapley_exact(game)?;
    let (m, f) = payoff_table(game)?;
    let mut out = vec![vec![0.0; m]; m];
    if m < 2 {
        for i in 0..m {
            out[i][i] = phi[i];
        }
        return Ok(out);
    }
    // |S|!(M−|S|−2)!/(2(M−1)!) = 1 / (2 (M−1) C(M−2, |S|))
    let weight: Vec<f64> =
        (0..m - 1).map(|s| 1.0 / (2.0 * (m - 1) as f64 * binomial(m - 2, s))).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            let (bi, bj) = (1u32 << i, 1u32 << j);
            let mut v = 0.0;
            for s in (0..1u32 << m).filter(|s| s & (bi | bj) == 0) {
                let nabla = f[(s | bi | bj) as usize] - f[(s | bi) as usize]
                    - f[(s | bj) as usize]
                    + f[s as usize];
                v += weight[s.count_ones() as usize] * nabla;
            }
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    for i in 0..m {
        out[i][i] = phi[i] - (0..m).filter(|&j| j != i).map(|j| out[i][j]).sum::<f64>();
    }
    Ok(out)
}
