//! Parallel Monte Carlo discovery of exploration terms.
//!
//! Workers repeatedly sample a complete expression, score it, feed the
//! score back into the AMAF statistics and keep the best term seen. With a
//! single worker and an expression budget the run is a pure function of
//! the seed.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use parking_lot::Mutex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rootterm_core::exprlang::{Expression, DEFAULT_MAX_LEN};
use rootterm_core::sampling::{sample_expression, AmafTable, SamplingMode};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscoveryError {
    #[error("temperature must be finite and positive, got {0}")]
    Temperature(f64),
    #[error("budget must be positive")]
    Budget,
    #[error("at least one worker is required")]
    Workers,
    #[error("max_len must be at least 1")]
    MaxLen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    Expressions(u64),
    Seconds(f64),
}

/// How AMAF statistics are shared between workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableSharing {
    Shared,
    /// One table per worker, as fully independent processes would have.
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub mode: SamplingMode,
    pub temperature: f64,
    pub max_len: usize,
    pub workers: usize,
    pub stop: StopCondition,
    pub seed: u64,
    pub sharing: TableSharing,
    /// Number of distinct best terms kept for the best-terms file.
    pub keep_best: usize,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            mode: SamplingMode::Uniform,
            temperature: 5.0,
            max_len: DEFAULT_MAX_LEN,
            workers: 1,
            stop: StopCondition::Expressions(1000),
            seed: 0,
            sharing: TableSharing::Shared,
            keep_best: 20,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<(), DiscoveryError> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(DiscoveryError::Temperature(self.temperature));
        }
        match self.stop {
            StopCondition::Expressions(0) => return Err(DiscoveryError::Budget),
            StopCondition::Seconds(s) if s.is_nan() || s <= 0.0 => return Err(DiscoveryError::Budget),
            _ => {}
        }
        if self.workers == 0 {
            return Err(DiscoveryError::Workers);
        }
        if self.max_len == 0 {
            return Err(DiscoveryError::MaxLen);
        }
        Ok(())
    }
}

/// What a scorer reports for one expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermScore {
    pub score: u32,
    pub early_stopped: bool,
    pub memo_hit: bool,
}

/// One improvement of the best-so-far score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub elapsed_s: f64,
    /// Expressions scored when the improvement was found, this one included.
    pub evaluated: u64,
    pub score: u32,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryLog {
    pub best_expression: Option<Expression>,
    pub best_score: u32,
    pub evaluated_count: u64,
    pub memo_hits: u64,
    pub scorer_failures: u64,
    pub timeline: Vec<Improvement>,
    /// Distinct terms by descending score, ties in discovery order.
    pub best_terms: Vec<(u32, String)>,
    pub elapsed: Duration,
}

impl DiscoveryLog {
    /// Best score among the first `evaluated` expressions.
    pub fn best_at(&self, evaluated: u64) -> u32 {
        self.timeline
            .iter()
            .take_while(|i| i.evaluated <= evaluated)
            .last()
            .map_or(0, |i| i.score)
    }
}

struct Best {
    expr: Option<Expression>,
    score: u32,
    timeline: Vec<Improvement>,
    terms: Vec<(u32, u64, String)>,
}

impl Best {
    fn offer(&mut self, expr: &Expression, score: u32, order: u64, keep: usize, elapsed: f64) {
        if self.expr.is_none() || score > self.score {
            self.expr = Some(expr.clone());
            self.score = score;
            self.timeline.push(Improvement {
                elapsed_s: elapsed,
                evaluated: order,
                score,
                expr: expr.canonical_key(),
            });
        }
        if keep == 0 {
            return;
        }
        let key = expr.canonical_key();
        if self.terms.iter().any(|(_, _, k)| *k == key) {
            return;
        }
        let full = self.terms.len() >= keep;
        if full && self.terms.last().is_some_and(|(s, _, _)| *s >= score) {
            return;
        }
        let at = self.terms.partition_point(|&(s, o, _)| s > score || (s == score && o < order));
        self.terms.insert(at, (score, order, key));
        self.terms.truncate(keep);
    }
}

/// Runs discovery until the stop condition; `scorer` must be pure.
pub fn discover<F>(config: &DiscoveryConfig, scorer: F) -> Result<DiscoveryLog, DiscoveryError>
where
    F: Fn(&Expression) -> Result<TermScore, String> + Sync,
{
    config.validate()?;
    let start = Instant::now();
    let claimed = AtomicU64::new(0);
    let evaluated = AtomicU64::new(0);
    let memo_hits = AtomicU64::new(0);
    let failures = AtomicU64::new(0);
    let shared_table = Mutex::new(AmafTable::new());
    let best = Mutex::new(Best {
        expr: None,
        score: 0,
        timeline: Vec::new(),
        terms: Vec::new(),
    });

    let worker = |id: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(id as u64);
        let mut local_table = AmafTable::new();
        loop {
            match config.stop {
                StopCondition::Expressions(n) => {
                    if claimed.fetch_add(1, Ordering::Relaxed) >= n {
                        break;
                    }
                }
                StopCondition::Seconds(s) => {
                    if start.elapsed().as_secs_f64() >= s {
                        break;
                    }
                }
            }
            let expr = match (config.mode, config.sharing) {
                (SamplingMode::Uniform, _) => {
                    sample_expression(config.mode, config.max_len, &mut rng, &local_table, config.temperature)
                }
                (SamplingMode::Amaf, TableSharing::Shared) => {
                    let snapshot = shared_table.lock().clone();
                    sample_expression(config.mode, config.max_len, &mut rng, &snapshot, config.temperature)
                }
                (SamplingMode::Amaf, TableSharing::Independent) => {
                    sample_expression(config.mode, config.max_len, &mut rng, &local_table, config.temperature)
                }
            };
            let score = match scorer(&expr) {
                Ok(s) => {
                    if s.memo_hit {
                        memo_hits.fetch_add(1, Ordering::Relaxed);
                    }
                    s.score
                }
                Err(_) => {
                    failures.fetch_add(1, Ordering::Relaxed);
                    0
                }
            };
            if config.mode == SamplingMode::Amaf {
                let table = match config.sharing {
                    TableSharing::Shared => &mut *shared_table.lock(),
                    TableSharing::Independent => &mut local_table,
                };
                table.update(&expr, f64::from(score)).expect("sampled expressions are complete");
            }
            let mut best = best.lock();
            let order = evaluated.fetch_add(1, Ordering::Relaxed) + 1;
            best.offer(&expr, score, order, config.keep_best, start.elapsed().as_secs_f64());
        }
    };

    if config.workers == 1 {
        worker(0);
    } else {
        std::thread::scope(|scope| {
            for id in 0..config.workers {
                let worker = &worker;
                scope.spawn(move || worker(id));
            }
        });
    }

    let best = best.into_inner();
    Ok(DiscoveryLog {
        best_expression: best.expr,
        best_score: best.score,
        evaluated_count: evaluated.into_inner(),
        memo_hits: memo_hits.into_inner(),
        scorer_failures: failures.into_inner(),
        timeline: best.timeline,
        best_terms: best.terms.into_iter().map(|(s, _, k)| (s, k)).collect(),
        elapsed: start.elapsed(),
    })
}
