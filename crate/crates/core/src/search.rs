//! PUCT search with an optional extra exploration term at the root, and
//! SHUSS move selection over per-move subtrees.

use alloc::vec::Vec;

use thiserror::Error;

use crate::bandits::{self, Arm, BanditError, DEFAULT_LAMBDA, DEFAULT_MIN_PRIOR};
use crate::exprlang::{EvalContext, Expression};
use crate::game::{GameError, NodeKey, PGameState, TreeShape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("cannot search from a terminal position")]
    TerminalRoot,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("root exploration term is incomplete")]
    IncompleteTerm,
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
}

/// `Q + c · P · sqrt(N) / (1 + N_a)`.
#[inline]
pub fn puct_score(q: f64, prior: f64, parent_visits: f64, child_visits: f64, c: f64) -> f64 {
    q + c * prior * libm::sqrt(parent_visits) / (1.0 + child_visits)
}

/// PUCT score with constant `c_e` plus the value of `term` on `ctx`.
pub fn augmented_root_score(
    q: f64,
    prior: f64,
    parent_visits: f64,
    child_visits: f64,
    c_e: f64,
    term: &Expression,
    ctx: &EvalContext,
) -> Result<f64, SearchError> {
    let extra = term.evaluate(ctx).map_err(|_| SearchError::IncompleteTerm)?;
    Ok(puct_score(q, prior, parent_visits, child_visits, c_e) + extra)
}

/// Extra term added to the root selection score.
#[derive(Debug, Clone, PartialEq)]
pub struct RootTerm {
    pub term: Expression,
    /// Multiplier on the term's value; 1 adds it raw.
    pub weight: f64,
}

impl RootTerm {
    pub fn new(term: Expression) -> Self {
        RootTerm { term, weight: 1.0 }
    }
}

#[derive(Debug, Clone)]
struct Node {
    key: NodeKey,
    visits: u32,
    priors: Vec<f64>,
    children: Vec<Option<u32>>,
    child_visits: Vec<u32>,
    child_value_sum: Vec<f64>,
}

/// Per-move statistics at the root after a search.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildStats {
    pub mv: usize,
    pub prior: f64,
    pub visits: u32,
    /// Sum of backed-up values from the root player's perspective.
    pub value_sum: f64,
}

impl ChildStats {
    pub fn q(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.value_sum / self.visits as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootSummary {
    pub visits: u32,
    pub children: Vec<ChildStats>,
}

impl RootSummary {
    /// Most visited move; ties go to the higher prior, then the lower index.
    pub fn most_visited(&self) -> Option<usize> {
        self.children
            .iter()
            .enumerate()
            .fold(None::<usize>, |best, (i, c)| match best {
                None => Some(i),
                Some(b) => {
                    let cur = &self.children[b];
                    if c.visits > cur.visits || (c.visits == cur.visits && c.prior > cur.prior) {
                        Some(i)
                    } else {
                        Some(b)
                    }
                }
            })
            .map(|i| self.children[i].mv)
    }
}

/// A growing PUCT tree. Each call to [`SearchTree::descend`] spends one
/// evaluation: it walks down by PUCT, expands one leaf (or re-reads a
/// terminal one) and backs the value up, flipping it at every ply.
#[derive(Debug, Clone)]
pub struct SearchTree {
    shape: TreeShape,
    c: f64,
    root_term: Option<RootTerm>,
    nodes: Vec<Node>,
}

impl SearchTree {
    pub fn new(root: &PGameState, c: f64, root_term: Option<RootTerm>) -> Result<Self, SearchError> {
        if let Some(t) = &root_term {
            if !t.term.is_complete() {
                return Err(SearchError::IncompleteTerm);
            }
        }
        Ok(SearchTree {
            shape: root.shape(),
            c,
            root_term,
            nodes: Vec::from([Node {
                key: *root.key(),
                visits: 0,
                priors: Vec::new(),
                children: Vec::new(),
                child_visits: Vec::new(),
                child_value_sum: Vec::new(),
            }]),
        })
    }

    pub fn root_visits(&self) -> u32 {
        self.nodes[0].visits
    }

    fn expand(&mut self, id: usize) -> f64 {
        let eval = self.shape.evaluate(&self.nodes[id].key);
        let node = &mut self.nodes[id];
        let b = eval.priors.len();
        node.priors = eval.priors;
        node.children = alloc::vec![None; b];
        node.child_visits = alloc::vec![0; b];
        node.child_value_sum = alloc::vec![0.0; b];
        eval.value
    }

    fn select(&self, id: usize) -> usize {
        let node = &self.nodes[id];
        let parent_visits = node.visits as f64;
        let term = if id == 0 { self.root_term.as_ref() } else { None };
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for a in 0..node.priors.len() {
            let n_a = node.child_visits[a] as f64;
            let w = node.child_value_sum[a];
            let q = if n_a > 0.0 { w / n_a } else { 0.0 };
            let mut score = puct_score(q, node.priors[a], parent_visits, n_a, self.c);
            if let Some(t) = term {
                let ctx = EvalContext::new(w, node.priors[a], n_a, parent_visits);
                score += t.weight * t.term.eval_unchecked(&ctx);
            }
            if score > best_score {
                best = a;
                best_score = score;
            }
        }
        best
    }

    /// One evaluation; returns the backed-up value for the root player.
    pub fn descend(&mut self) -> f64 {
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut id = 0;
        let leaf_value = loop {
            let node = &self.nodes[id];
            if node.visits == 0 {
                break self.expand(id);
            }
            if self.shape.is_terminal(&node.key) {
                break self.shape.static_value(&node.key);
            }
            let a = self.select(id);
            path.push((id, a));
            match self.nodes[id].children[a] {
                Some(child) => id = child as usize,
                None => {
                    let key = self.nodes[id].key.child(a);
                    let child = self.nodes.len();
                    self.nodes.push(Node {
                        key,
                        visits: 0,
                        priors: Vec::new(),
                        children: Vec::new(),
                        child_visits: Vec::new(),
                        child_value_sum: Vec::new(),
                    });
                    self.nodes[id].children[a] = Some(child as u32);
                    id = child;
                }
            }
        };
        self.nodes[id].visits += 1;
        let mut v = leaf_value;
        for &(parent, a) in path.iter().rev() {
            v = 1.0 - v;
            let node = &mut self.nodes[parent];
            node.visits += 1;
            node.child_visits[a] += 1;
            node.child_value_sum[a] += v;
        }
        v
    }

    pub fn root_summary(&self) -> RootSummary {
        let root = &self.nodes[0];
        RootSummary {
            visits: root.visits,
            children: (0..root.priors.len())
                .map(|a| ChildStats {
                    mv: a,
                    prior: root.priors[a],
                    visits: root.child_visits[a],
                    value_sum: root.child_value_sum[a],
                })
                .collect(),
        }
    }

    /// Checks `N(s) = sum_a N(s,a) + 1` at expanded interior nodes and `Q` in `[0, 1]`.
    pub fn check_invariants(&self) -> bool {
        self.nodes.iter().all(|n| {
            let interior = !self.shape.is_terminal(&n.key) && n.visits > 0;
            let sum: u32 = n.child_visits.iter().sum();
            let q_ok = n
                .child_visits
                .iter()
                .zip(&n.child_value_sum)
                .all(|(&c, &w)| c == 0 || (0.0..=1.0).contains(&(w / c as f64)));
            (!interior || n.visits == sum + 1) && q_ok
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub chosen: usize,
    pub root: RootSummary,
}

/// Runs `budget` PUCT descents from `root` and returns the most visited move.
pub fn puct_search(
    root: &PGameState,
    budget: usize,
    c: f64,
    root_term: Option<RootTerm>,
) -> Result<SearchOutcome, SearchError> {
    if root.is_terminal() {
        return Err(SearchError::TerminalRoot);
    }
    if budget == 0 {
        return Err(SearchError::ZeroBudget);
    }
    let mut tree = SearchTree::new(root, c, root_term)?;
    for _ in 0..budget {
        tree.descend();
    }
    let summary = tree.root_summary();
    let chosen = summary.most_visited().expect("non-terminal root has children");
    Ok(SearchOutcome {
        chosen,
        root: summary,
    })
}

/// A root move sampled by descending its own PUCT subtree, one evaluation
/// per sample, values seen from the player choosing the move.
#[derive(Debug, Clone)]
pub struct SubtreeArm {
    pub mv: usize,
    prior: f64,
    tree: SearchTree,
    sum: f64,
    plays: usize,
    evals: Vec<f64>,
}

impl SubtreeArm {
    pub fn new(parent: &PGameState, mv: usize, prior: f64, c: f64) -> Result<Self, SearchError> {
        let child = parent.child(mv)?;
        Ok(SubtreeArm {
            mv,
            prior,
            tree: SearchTree::new(&child, c, None)?,
            sum: 0.0,
            plays: 0,
            evals: Vec::new(),
        })
    }

    /// Evaluations drawn so far, in order.
    pub fn evals(&self) -> &[f64] {
        &self.evals
    }

    pub fn into_evals(self) -> Vec<f64> {
        self.evals
    }
}

impl Arm for SubtreeArm {
    fn prior(&self) -> f64 {
        self.prior
    }

    fn score_sum(&self) -> f64 {
        self.sum
    }

    fn plays(&self) -> usize {
        self.plays
    }

    fn sample(&mut self, count: usize) -> Result<(), BanditError> {
        for _ in 0..count {
            // the subtree value is from the opponent's side
            let v = 1.0 - self.tree.descend();
            self.sum += v;
            self.plays += 1;
            self.evals.push(v);
        }
        Ok(())
    }
}

/// SHUSS parameters: top-`k` prior moves, inner PUCT constant, halving term.
#[derive(Debug, Clone, PartialEq)]
pub struct ShussConfig {
    pub budget: usize,
    pub top_k: usize,
    pub c_s: f64,
    pub term: Expression,
    pub lambda: f64,
    pub min_prior: f64,
}

impl ShussConfig {
    pub fn new(budget: usize, top_k: usize, c_s: f64, term: Expression) -> Self {
        ShussConfig {
            budget,
            top_k,
            c_s,
            term,
            lambda: DEFAULT_LAMBDA,
            min_prior: DEFAULT_MIN_PRIOR,
        }
    }
}

/// Move chosen by Sequential Halving over the best-prior moves of `root`.
pub fn shuss_move(root: &PGameState, cfg: &ShussConfig) -> Result<usize, SearchError> {
    if root.is_terminal() {
        return Err(SearchError::TerminalRoot);
    }
    if !cfg.term.is_complete() {
        return Err(SearchError::IncompleteTerm);
    }
    let priors = root.heuristic_eval().priors;
    let keep = bandits::filter_top_prior(&priors, cfg.top_k, cfg.min_prior)?;
    if keep.len() == 1 {
        return Ok(keep[0]);
    }
    let mut arms = keep
        .iter()
        .map(|&mv| SubtreeArm::new(root, mv, priors[mv], cfg.c_s))
        .collect::<Result<Vec<_>, _>>()?;
    let winner = bandits::run_sequential_halving(&mut arms, cfg.budget, cfg.lambda, &cfg.term)?;
    Ok(arms[winner].mv)
}
