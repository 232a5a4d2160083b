//! Monte Carlo sampling of complete expressions, uniformly or biased by
//! all-moves-as-first (AMAF) statistics gathered over previous playouts.

use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::exprlang::{Atom, ExprError, Expression};

const DEGENERATE_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SamplingMode {
    Uniform,
    Amaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AtomStats {
    pub playouts: u64,
    pub score_sum: f64,
}

/// Per-atom playout statistics. An atom counts at most once per playout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmafTable {
    total_playouts: u64,
    total_score: f64,
    per_atom: [AtomStats; Atom::COUNT],
}

impl AmafTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total_playouts(&self) -> u64 {
        self.total_playouts
    }

    pub fn total_score(&self) -> f64 {
        self.total_score
    }

    pub fn atom(&self, atom: Atom) -> AtomStats {
        self.per_atom[atom.index()]
    }

    /// Mean playout score, 0 for an empty table.
    pub fn mean(&self) -> f64 {
        if self.total_playouts == 0 {
            0.0
        } else {
            self.total_score / self.total_playouts as f64
        }
    }

    /// Records one scored playout.
    pub fn update(&mut self, expr: &Expression, score: f64) -> Result<(), ExprError> {
        if !expr.is_complete() {
            return Err(ExprError::Incomplete {
                open_leaves: expr.open_leaves(),
            });
        }
        self.total_playouts += 1;
        self.total_score += score;
        let mut seen = [false; Atom::COUNT];
        for atom in expr.tokens() {
            let i = atom.index();
            if !seen[i] {
                seen[i] = true;
                self.per_atom[i].playouts += 1;
                self.per_atom[i].score_sum += score;
            }
        }
        Ok(())
    }

    /// Adds every statistic of `other` into `self`.
    pub fn merge(&mut self, other: &AmafTable) {
        self.total_playouts += other.total_playouts;
        self.total_score += other.total_score;
        for (mine, theirs) in self.per_atom.iter_mut().zip(other.per_atom.iter()) {
            mine.playouts += theirs.playouts;
            mine.score_sum += theirs.score_sum;
        }
    }

    /// Centered mean score of every atom (`mu_a`); 0 for unseen atoms.
    pub fn centered_means(&self) -> [f64; Atom::COUNT] {
        let mut out = [0.0; Atom::COUNT];
        if self.total_playouts == 0 {
            return out;
        }
        let mu = self.mean();
        for (slot, stats) in out.iter_mut().zip(self.per_atom.iter()) {
            if stats.playouts > 0 {
                *slot = stats.score_sum / stats.playouts as f64 - mu;
            }
        }
        out
    }
}

/// Sampling distribution over `legal` at temperature `temperature`.
///
/// `AMAF(a) = exp(mu_a / maxi) / z`, then `p_a ∝ exp(tau · log AMAF(a))`
/// renormalized over the legal set. The spread `maxi` is taken over the
/// whole alphabet. Returns the uniform distribution when no atom deviates
/// from the mean.
pub fn amaf_probabilities(table: &AmafTable, legal: &[Atom], temperature: f64) -> Vec<f64> {
    let n = legal.len();
    if n == 0 {
        return Vec::new();
    }
    let centered = table.centered_means();
    let maxi = centered.iter().fold(0.0f64, |m, &mu| m.max(mu).max(-mu));
    if maxi <= DEGENERATE_SPREAD || !temperature.is_finite() || temperature <= 0.0 {
        return alloc::vec![1.0 / n as f64; n];
    }
    // log AMAF(a) = mu_a/maxi - log z; the log z shift cancels on renormalization
    let logits: Vec<f64> = legal
        .iter()
        .map(|a| temperature * centered[a.index()] / maxi)
        .collect();
    let top = logits.iter().fold(f64::NEG_INFINITY, |m, &l| m.max(l));
    let mut probs: Vec<f64> = logits.iter().map(|l| libm::exp(l - top)).collect();
    let z: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= z;
    }
    probs
}

/// Completes `expr` by drawing uniformly among the legal atoms.
pub fn uniform_playout<R: Rng + ?Sized>(expr: &Expression, rng: &mut R) -> Expression {
    let mut out = expr.clone();
    while !out.is_complete() {
        let legal = out.legal_atoms().expect("incomplete expression has legal atoms");
        let atom = legal[rng.gen_range(0..legal.len())];
        out.push(atom).expect("drawn from the legal set");
    }
    out
}

/// Completes `expr` by drawing each atom from [`amaf_probabilities`].
pub fn amaf_playout<R: Rng + ?Sized>(
    expr: &Expression,
    rng: &mut R,
    table: &AmafTable,
    temperature: f64,
) -> Expression {
    let mut out = expr.clone();
    while !out.is_complete() {
        let legal = out.legal_atoms().expect("incomplete expression has legal atoms");
        let probs = amaf_probabilities(table, &legal, temperature);
        let pick = match WeightedIndex::new(&probs) {
            Ok(dist) => dist.sample(rng),
            // every weight underflowed except possibly none; fall back to uniform
            Err(_) => rng.gen_range(0..legal.len()),
        };
        out.push(legal[pick]).expect("drawn from the legal set");
    }
    out
}

/// One complete expression sampled from the empty expression under `mode`.
pub fn sample_expression<R: Rng + ?Sized>(
    mode: SamplingMode,
    max_len: usize,
    rng: &mut R,
    table: &AmafTable,
    temperature: f64,
) -> Expression {
    let root = Expression::new(max_len);
    match mode {
        SamplingMode::Uniform => uniform_playout(&root, rng),
        SamplingMode::Amaf => amaf_playout(&root, rng, table, temperature),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn expr(text: &str) -> Expression {
        Expression::parse(text).unwrap()
    }

    fn two_playout_table() -> AmafTable {
        let mut t = AmafTable::new();
        t.update(&expr("+ sc sc"), 100.0).unwrap();
        t.update(&expr("pr"), 50.0).unwrap();
        t
    }

    #[test]
    fn update_uses_set_semantics() {
        let mut t = AmafTable::new();
        t.update(&expr("pr"), 10.0).unwrap();
        assert_eq!((t.total_playouts(), t.total_score()), (1, 10.0));
        assert_eq!(t.atom(Atom::Pr), AtomStats { playouts: 1, score_sum: 10.0 });
        t.update(&expr("+ sc sc"), 20.0).unwrap();
        assert_eq!((t.total_playouts(), t.total_score()), (2, 30.0));
        assert_eq!(t.atom(Atom::Sc), AtomStats { playouts: 1, score_sum: 20.0 });
        assert_eq!(t.atom(Atom::Add), AtomStats { playouts: 1, score_sum: 20.0 });
        assert_eq!(t.mean(), 15.0);
    }

    #[test]
    fn update_rejects_incomplete() {
        let mut t = AmafTable::new();
        let partial = Expression::from_atoms(&[Atom::Add], 12).unwrap();
        assert!(t.update(&partial, 1.0).is_err());
        assert_eq!(t, AmafTable::new());
    }

    #[test]
    fn empty_table_is_uniform() {
        let t = AmafTable::new();
        let p = amaf_probabilities(&t, &[Atom::Sc, Atom::Pr, Atom::Nb], 5.0);
        assert_eq!(p, alloc::vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn worked_example() {
        let t = two_playout_table();
        let legal = [Atom::Sc, Atom::Pr, Atom::Add];
        let p = amaf_probabilities(&t, &legal, 1.0);
        // direct evaluation of the definition: mu = 75, mu_sc = mu_+ = 25, mu_pr = -25
        let e = core::f64::consts::E;
        let z = 2.0 * e + 1.0 / e;
        let expected = [e / z, (1.0 / e) / z, e / z];
        for (got, want) in p.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((p[0] - 0.4683).abs() < 1e-3 && (p[1] - 0.0634).abs() < 1e-3);

        let sharp = amaf_probabilities(&t, &legal, 1000.0);
        assert!(sharp[0] + sharp[2] >= 0.999);
    }

    #[test]
    fn merge_adds_counts() {
        let mut a = two_playout_table();
        let b = two_playout_table();
        a.merge(&b);
        assert_eq!(a.total_playouts(), 4);
        assert_eq!(a.atom(Atom::Sc).score_sum, 200.0);
        assert_eq!(a.centered_means(), b.centered_means());
    }

    #[test]
    fn uniform_playout_from_complete_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = expr("max 3 sc");
        assert_eq!(uniform_playout(&e, &mut rng), e);
        assert_eq!(amaf_playout(&e, &mut rng, &AmafTable::new(), 5.0), e);
    }

    #[test]
    fn single_token_budget_draws_leaves_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = [0usize; Atom::COUNT];
        let draws = 10_000;
        for _ in 0..draws {
            let e = uniform_playout(&Expression::new(1), &mut rng);
            assert_eq!(e.len(), 1);
            counts[e.tokens()[0].index()] += 1;
        }
        for atom in Atom::ALL {
            let freq = counts[atom.index()] as f64 / draws as f64;
            if atom.arity() == 0 {
                assert!((freq - 0.125).abs() <= 0.02, "{atom}: {freq}");
            } else {
                assert_eq!(counts[atom.index()], 0);
            }
        }
    }

    #[test]
    fn amaf_playout_prefers_better_atoms() {
        let t = two_playout_table();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0usize; Atom::COUNT];
        for _ in 0..10_000 {
            let e = amaf_playout(&Expression::new(12), &mut rng, &t, 5.0);
            counts[e.tokens()[0].index()] += 1;
        }
        assert!(counts[Atom::Pr.index()] < counts[Atom::Sc.index()]);
    }
}
