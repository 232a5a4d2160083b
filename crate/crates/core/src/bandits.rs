//! Sequential Halving over root arms, with the per-round cut driven by an
//! exploration term instead of the plain empirical mean.

use alloc::vec::Vec;

use thiserror::Error;

use crate::exprlang::{EvalContext, Expression};

pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_MIN_PRIOR: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BanditError {
    #[error("budget {budget} cannot sample each of {arms} arms once")]
    BudgetTooSmall { budget: usize, arms: usize },
    #[error("need at least two arms for a schedule, got {0}")]
    TooFewArms(usize),
    #[error("cutting ratio {0} outside (0, 1)")]
    BadLambda(f64),
    #[error("arm {arm} trace exhausted: wanted {wanted} evaluations, {available} stored")]
    TraceExhausted {
        arm: usize,
        wanted: usize,
        available: usize,
    },
    #[error("no arm has prior >= {0}")]
    NoArmAboveThreshold(f64),
    #[error("top-k must be at least 1")]
    ZeroTopK,
    #[error("N(root, a) must be positive")]
    ZeroVisits,
    #[error("exploration term is incomplete")]
    IncompleteTerm,
    #[error("sampling arm {arm} failed: {reason}")]
    Sampling { arm: usize, reason: &'static str },
}

/// A root move that can be sampled and summarized for an exploration term.
pub trait Arm {
    fn prior(&self) -> f64;
    /// Sum of the evaluations drawn so far (`sc`).
    fn score_sum(&self) -> f64;
    /// Number of evaluations drawn so far (`nbp`).
    fn plays(&self) -> usize;
    /// Draws `count` further evaluations.
    fn sample(&mut self, count: usize) -> Result<(), BanditError>;

    fn mean(&self) -> f64 {
        if self.plays() == 0 {
            0.0
        } else {
            self.score_sum() / self.plays() as f64
        }
    }
}

/// Stored evaluation trace of one root move with its prefix sums.
#[derive(Debug, Clone, PartialEq)]
pub struct CachedArm {
    pub mv: usize,
    pub prior: f64,
    evals: Vec<f64>,
    prefix_sums: Vec<f64>,
}

impl CachedArm {
    pub fn new(mv: usize, prior: f64, evals: Vec<f64>) -> Self {
        let mut prefix_sums = Vec::with_capacity(evals.len() + 1);
        let mut acc = 0.0;
        prefix_sums.push(acc);
        for &e in &evals {
            acc += e;
            prefix_sums.push(acc);
        }
        CachedArm {
            mv,
            prior,
            evals,
            prefix_sums,
        }
    }

    pub fn evals(&self) -> &[f64] {
        &self.evals
    }

    pub fn trace_len(&self) -> usize {
        self.evals.len()
    }

    /// Sum of the first `n` evaluations.
    pub fn sum_first(&self, n: usize) -> f64 {
        self.prefix_sums[n]
    }
}

/// Replay cursor over a [`CachedArm`]: evaluations are consumed in stored order.
#[derive(Debug, Clone, Copy)]
pub struct RootArm<'a> {
    pub index: usize,
    pub cached: &'a CachedArm,
    consumed: usize,
}

impl<'a> RootArm<'a> {
    pub fn new(index: usize, cached: &'a CachedArm) -> Self {
        RootArm {
            index,
            cached,
            consumed: 0,
        }
    }

    pub fn consumed(&self) -> usize {
        self.consumed
    }
}

impl Arm for RootArm<'_> {
    fn prior(&self) -> f64 {
        self.cached.prior
    }

    fn score_sum(&self) -> f64 {
        self.cached.sum_first(self.consumed)
    }

    fn plays(&self) -> usize {
        self.consumed
    }

    fn sample(&mut self, count: usize) -> Result<(), BanditError> {
        let wanted = self.consumed + count;
        if wanted > self.cached.trace_len() {
            return Err(BanditError::TraceExhausted {
                arm: self.index,
                wanted,
                available: self.cached.trace_len(),
            });
        }
        self.consumed = wanted;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Round {
    pub samples_per_arm: usize,
    pub arms: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalvingSchedule {
    pub rounds: Vec<Round>,
    pub total_consumed: usize,
}

impl HalvingSchedule {
    /// Evaluations drawn from an arm that survives every round.
    pub fn per_arm_need(&self) -> usize {
        self.rounds.iter().map(|r| r.samples_per_arm).sum()
    }
}

/// Arms kept after cutting a round of `arms` arms.
pub fn survivor_count(arms: usize, lambda: f64) -> usize {
    let kept = libm::ceil(lambda * arms as f64) as usize;
    kept.clamp(1, arms.saturating_sub(1).max(1))
}

fn check_lambda(lambda: f64) -> Result<(), BanditError> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(BanditError::BadLambda(lambda))
    }
}

/// Round layout of Sequential Halving for `budget` evaluations over `arms` arms.
pub fn sh_schedule(budget: usize, arms: usize, lambda: f64) -> Result<HalvingSchedule, BanditError> {
    check_lambda(lambda)?;
    if arms < 2 {
        return Err(BanditError::TooFewArms(arms));
    }
    if budget < arms {
        return Err(BanditError::BudgetTooSmall { budget, arms });
    }
    let mut round_count = 0;
    let mut s = arms;
    while s > 1 {
        s = survivor_count(s, lambda);
        round_count += 1;
    }

    let mut rounds = Vec::with_capacity(round_count);
    let mut remaining = budget;
    let mut s = arms;
    for r in 0..round_count {
        let t = remaining / (s * (round_count - r));
        remaining -= t * s;
        rounds.push(Round {
            samples_per_arm: t,
            arms: s,
        });
        s = survivor_count(s, lambda);
    }
    Ok(HalvingSchedule {
        rounds,
        total_consumed: budget - remaining,
    })
}

fn context<A: Arm + ?Sized>(arm: &A, nb_total: usize) -> EvalContext {
    EvalContext::new(
        arm.score_sum(),
        arm.prior(),
        arm.plays() as f64,
        nb_total as f64,
    )
}

/// Greedy repeated argmax of `term` over the arms; returns the kept
/// positions in selection order. Ties go to the lowest position.
pub fn select_survivors<A: Arm>(
    arms: &[A],
    lambda: f64,
    term: &Expression,
    nb_total: usize,
) -> Result<Vec<usize>, BanditError> {
    if !term.is_complete() {
        return Err(BanditError::IncompleteTerm);
    }
    let scores: Vec<f64> = arms
        .iter()
        .map(|a| term.eval_unchecked(&context(a, nb_total)))
        .collect();
    Ok(greedy_top(&scores, survivor_count(arms.len(), lambda)))
}

fn greedy_top(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut taken = alloc::vec![false; scores.len()];
    let mut kept = Vec::with_capacity(keep);
    for _ in 0..keep.min(scores.len()) {
        let mut best: Option<usize> = None;
        let mut best_score = f64::NEG_INFINITY;
        for (j, &s) in scores.iter().enumerate() {
            if !taken[j] && (best.is_none() || s > best_score) {
                best = Some(j);
                best_score = s;
            }
        }
        let j = best.expect("keep <= len");
        taken[j] = true;
        kept.push(j);
    }
    kept
}

/// Runs Sequential Halving and returns the position of the surviving arm.
pub fn run_sequential_halving<A: Arm>(
    arms: &mut [A],
    budget: usize,
    lambda: f64,
    term: &Expression,
) -> Result<usize, BanditError> {
    if !term.is_complete() {
        return Err(BanditError::IncompleteTerm);
    }
    check_lambda(lambda)?;
    match arms.len() {
        0 => return Err(BanditError::TooFewArms(0)),
        1 => return Ok(0),
        _ => {}
    }
    let schedule = sh_schedule(budget, arms.len(), lambda)?;
    let mut active: Vec<usize> = (0..arms.len()).collect();
    let mut nb_total = 0;
    let mut scores = Vec::with_capacity(arms.len());
    for round in &schedule.rounds {
        debug_assert_eq!(round.arms, active.len());
        for &i in &active {
            arms[i].sample(round.samples_per_arm)?;
            nb_total += round.samples_per_arm;
        }
        scores.clear();
        scores.extend(
            active
                .iter()
                .map(|&i| term.eval_unchecked(&context(&arms[i], nb_total))),
        );
        let mut kept: Vec<usize> = greedy_top(&scores, survivor_count(active.len(), lambda))
            .into_iter()
            .map(|j| active[j])
            .collect();
        kept.sort_unstable();
        active = kept;
    }
    Ok(active[0])
}

/// Positions of the `k` highest-prior arms among those with prior >= `min_prior`,
/// in descending prior order (ties by position).
pub fn filter_top_prior(priors: &[f64], k: usize, min_prior: f64) -> Result<Vec<usize>, BanditError> {
    if k == 0 {
        return Err(BanditError::ZeroTopK);
    }
    let mut kept: Vec<usize> = (0..priors.len()).filter(|&i| priors[i] >= min_prior).collect();
    if kept.is_empty() {
        return Err(BanditError::NoArmAboveThreshold(min_prior));
    }
    // stable: equal priors keep position order
    kept.sort_by(|&a, &b| priors[b].total_cmp(&priors[a]));
    kept.truncate(k);
    Ok(kept)
}

/// Prior-biased mean used by the AMAF flavour of SHUSS.
pub fn qtilde(mean: f64, standard_amaf: f64, root_visits: usize, c: f64) -> Result<f64, BanditError> {
    if root_visits == 0 {
        return Err(BanditError::ZeroVisits);
    }
    Ok(mean + c * standard_amaf / root_visits as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn expr(text: &str) -> Expression {
        Expression::parse(text).unwrap()
    }

    fn rounds(s: &HalvingSchedule) -> Vec<(usize, usize)> {
        s.rounds.iter().map(|r| (r.samples_per_arm, r.arms)).collect()
    }

    /// Arm with a fixed (sc, nbp) summary and no trace.
    struct Fixed {
        prior: f64,
        sum: f64,
    }

    impl Arm for Fixed {
        fn prior(&self) -> f64 {
            self.prior
        }
        fn score_sum(&self) -> f64 {
            self.sum
        }
        fn plays(&self) -> usize {
            1
        }
        fn sample(&mut self, _: usize) -> Result<(), BanditError> {
            Ok(())
        }
    }

    fn fixed(pairs: &[(f64, f64)]) -> Vec<Fixed> {
        pairs.iter().map(|&(prior, sum)| Fixed { prior, sum }).collect()
    }

    #[test]
    fn schedules_match_hand_simulation() {
        let s = sh_schedule(32, 8, 0.5).unwrap();
        assert_eq!(rounds(&s), vec![(1, 8), (3, 4), (6, 2)]);
        assert_eq!(s.total_consumed, 32);

        let s = sh_schedule(128, 8, 0.5).unwrap();
        assert_eq!(rounds(&s), vec![(5, 8), (11, 4), (22, 2)]);
        assert_eq!(s.total_consumed, 128);
        assert_eq!(s.per_arm_need(), 38);

        let s = sh_schedule(4, 2, 0.5).unwrap();
        assert_eq!(rounds(&s), vec![(2, 2)]);

        // 5 -> 3 -> 2 -> 1
        let s = sh_schedule(32, 5, 0.5).unwrap();
        assert_eq!(rounds(&s), vec![(2, 5), (3, 3), (6, 2)]);
        assert_eq!(s.total_consumed, 31);
    }

    #[test]
    fn schedule_errors() {
        assert_eq!(
            sh_schedule(3, 4, 0.5),
            Err(BanditError::BudgetTooSmall { budget: 3, arms: 4 })
        );
        assert_eq!(sh_schedule(8, 1, 0.5), Err(BanditError::TooFewArms(1)));
        assert_eq!(sh_schedule(8, 4, 1.0), Err(BanditError::BadLambda(1.0)));
    }

    #[test]
    fn survivors_by_score_sum() {
        let arms = fixed(&[(0.0, 2.0), (0.0, 0.5), (0.0, 1.0), (0.0, 0.1)]);
        let mut kept = select_survivors(&arms, 0.5, &expr("sc"), 4).unwrap();
        kept.sort_unstable();
        assert_eq!(kept, vec![0, 2]);
    }

    #[test]
    fn survivors_by_prior_use_ceiling() {
        let arms = fixed(&[(0.6, 0.0), (0.3, 0.0), (0.1, 0.0)]);
        let mut kept = select_survivors(&arms, 0.5, &expr("pr"), 3).unwrap();
        kept.sort_unstable();
        assert_eq!(kept, vec![0, 1]);
    }

    #[test]
    fn constant_term_keeps_lowest_positions() {
        let arms = fixed(&[(0.1, 0.0), (0.9, 5.0), (0.5, 1.0), (0.2, 3.0), (0.3, 0.0)]);
        assert_eq!(select_survivors(&arms, 0.5, &expr("1"), 5).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn halving_on_traces() {
        let a = CachedArm::new(0, 0.5, vec![1.0, 1.0]);
        let b = CachedArm::new(1, 0.5, vec![0.0, 0.0]);
        let mut arms = vec![RootArm::new(0, &a), RootArm::new(1, &b)];
        assert_eq!(run_sequential_halving(&mut arms, 4, 0.5, &expr("sc")).unwrap(), 0);

        let mut arms = vec![RootArm::new(0, &b), RootArm::new(1, &a)];
        assert_eq!(run_sequential_halving(&mut arms, 4, 0.5, &expr("sc")).unwrap(), 1);

        let c = CachedArm::new(1, 0.5, vec![1.0, 1.0]);
        let mut arms = vec![RootArm::new(0, &a), RootArm::new(1, &c)];
        assert_eq!(run_sequential_halving(&mut arms, 4, 0.5, &expr("sc")).unwrap(), 0);
    }

    #[test]
    fn dominant_arm_survives() {
        let cached: Vec<CachedArm> = (0..8)
            .map(|i| CachedArm::new(i, 0.125, vec![if i == 3 { 1.0 } else { 0.0 }; 10]))
            .collect();
        let mut arms: Vec<RootArm> = cached.iter().enumerate().map(|(i, c)| RootArm::new(i, c)).collect();
        assert_eq!(run_sequential_halving(&mut arms, 32, 0.5, &expr("sc")).unwrap(), 3);
        assert_eq!(arms[3].consumed(), 10);
        assert_eq!(arms.iter().map(|a| a.consumed()).sum::<usize>(), 32);
    }

    #[test]
    fn exhausted_trace_is_error() {
        let a = CachedArm::new(0, 0.5, vec![1.0]);
        let b = CachedArm::new(1, 0.5, vec![0.0]);
        let mut arms = vec![RootArm::new(0, &a), RootArm::new(1, &b)];
        assert!(matches!(
            run_sequential_halving(&mut arms, 4, 0.5, &expr("sc")),
            Err(BanditError::TraceExhausted { wanted: 2, available: 1, .. })
        ));
    }

    #[test]
    fn prior_filter() {
        assert_eq!(filter_top_prior(&[0.5, 0.3, 0.005, 0.2], 5, 0.01).unwrap(), vec![0, 1, 3]);
        let priors: Vec<f64> = (0..10).map(|i| 0.02 + i as f64 * 0.01).collect();
        assert_eq!(filter_top_prior(&priors, 5, 0.01).unwrap(), vec![9, 8, 7, 6, 5]);
        assert_eq!(filter_top_prior(&[0.2, 0.4, 0.2], 2, 0.01).unwrap(), vec![1, 0]);
        assert_eq!(
            filter_top_prior(&[0.001, 0.002], 3, 0.01),
            Err(BanditError::NoArmAboveThreshold(0.01))
        );
        assert_eq!(filter_top_prior(&[0.5], 0, 0.01), Err(BanditError::ZeroTopK));
    }

    #[test]
    fn qtilde_formula() {
        assert!((qtilde(0.6, 0.5, 4, 1.0).unwrap() - 0.725).abs() < 1e-15);
        assert_eq!(qtilde(0.6, 0.5, 4, 0.0).unwrap(), 0.6);
        assert_eq!(qtilde(0.6, 0.0, 4, 3.0).unwrap(), 0.6);
        assert_eq!(qtilde(0.6, 0.5, 0, 1.0), Err(BanditError::ZeroVisits));
    }
}
