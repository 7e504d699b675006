//! Solution construction by a single ant.
//!
//! Positions are filled front to back. At position `i` an unscheduled job
//! `j` scores `base(i, j)^alpha * eta(i, j)^beta`, with `base` either the
//! pheromone `tau(i, j)` (plain rule) or the column sum
//! `tau(0, j) + ... + tau(i, j)` (summation rule). With probability `q0` the
//! ant takes a best-scoring job, otherwise it samples proportionally to the
//! scores.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{edd_eta, mdd_eta, Instance, Job, Schedule, Time};
use crate::pheromone::PheromoneSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Plain,
    Summation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Edd,
    Mdd,
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "summation" => Ok(Self::Summation),
            other => Err(Error::Config(format!(
                "unknown construction rule '{other}'"
            ))),
        }
    }
}

impl std::str::FromStr for Heuristic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edd" => Ok(Self::Edd),
            "mdd" => Ok(Self::Mdd),
            other => Err(Error::Config(format!("unknown heuristic '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionPolicy {
    pub rule: Rule,
    pub heuristic: Heuristic,
    pub alpha: f64,
    pub beta: f64,
    pub q0: f64,
}

impl Default for ConstructionPolicy {
    fn default() -> Self {
        Self {
            rule: Rule::Summation,
            heuristic: Heuristic::Mdd,
            alpha: 1.0,
            beta: 2.0,
            q0: 0.1,
        }
    }
}

impl ConstructionPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.q0) {
            return Err(Error::Config(format!("q0 = {} is outside [0, 1)", self.q0)));
        }
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::Config("alpha and beta must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    fn eta(&self, elapsed: Time, job: &Job) -> f64 {
        match self.heuristic {
            Heuristic::Edd => edd_eta(job),
            Heuristic::Mdd => mdd_eta(elapsed, job),
        }
    }
}

/// `x^e` with exact shortcuts for the common exponents. Every caller goes
/// through here so equal inputs score identically bit for bit.
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e == 0.0 {
        1.0
    } else {
        x.powf(e)
    }
}

/// A partially built schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionState {
    prefix: Vec<usize>,
    unscheduled: Vec<usize>,
    elapsed: Time,
    /// `column_sums[j]` = sum of `tau(l, j)` over the filled positions `l`.
    column_sums: Vec<f64>,
}

impl ConstructionState {
    pub fn new(n: usize) -> Self {
        Self {
            prefix: Vec::with_capacity(n),
            unscheduled: (0..n).collect(),
            elapsed: 0,
            column_sums: vec![0.0; n],
        }
    }

    /// State after placing `prefix`, with column sums computed directly
    /// from `source`. Does not trigger placement hooks.
    pub fn from_prefix<S: PheromoneSource>(
        instance: &Instance,
        prefix: &[usize],
        source: &S,
    ) -> Result<Self> {
        let n = instance.len();
        let mut placed = vec![false; n];
        for &j in prefix {
            if j >= n || std::mem::replace(&mut placed[j], true) {
                return Err(Error::NotAPermutation {
                    n,
                    reason: format!("prefix repeats or exceeds job {j}"),
                });
            }
        }
        let column_sums = (0..n)
            .map(|j| (0..prefix.len()).map(|l| source.tau(l, j)).sum())
            .collect();
        Ok(Self {
            prefix: prefix.to_vec(),
            unscheduled: (0..n).filter(|&j| !placed[j]).collect(),
            elapsed: prefix
                .iter()
                .map(|&j| instance.job(j).processing_time)
                .sum(),
            column_sums,
        })
    }

    /// Index of the next position to fill.
    pub fn position(&self) -> usize {
        self.prefix.len()
    }

    pub fn prefix(&self) -> &[usize] {
        &self.prefix
    }

    pub fn unscheduled(&self) -> &[usize] {
        &self.unscheduled
    }

    pub fn elapsed(&self) -> Time {
        self.elapsed
    }

    pub fn column_sum(&self, job: usize) -> f64 {
        self.column_sums[job]
    }

    pub fn is_complete(&self) -> bool {
        self.unscheduled.is_empty()
    }

    /// Places `job` at the next position and notifies `source`. Column sums
    /// of the remaining jobs absorb this position's pheromone before the
    /// source gets a chance to change it.
    pub fn place<S: PheromoneSource>(&mut self, instance: &Instance, job: usize, source: &mut S) {
        let idx = self
            .unscheduled
            .iter()
            .position(|&j| j == job)
            .expect("job must be unscheduled");
        let i = self.position();
        for &j in &self.unscheduled {
            self.column_sums[j] += source.tau(i, j);
        }
        self.commit(instance, idx, source);
    }

    fn commit<S: PheromoneSource>(&mut self, instance: &Instance, idx: usize, source: &mut S) {
        let i = self.position();
        let job = self.unscheduled.swap_remove(idx);
        self.prefix.push(job);
        self.elapsed += instance.job(job).processing_time;
        source.on_placement(i, job);
    }

    #[inline]
    fn score(&self, instance: &Instance, job: usize, tau: f64, policy: &ConstructionPolicy) -> f64 {
        let base = match policy.rule {
            Rule::Plain => tau,
            Rule::Summation => self.column_sums[job] + tau,
        };
        pow(base, policy.alpha) * pow(policy.eta(self.elapsed, instance.job(job)), policy.beta)
    }

    /// Scores of the unscheduled jobs, in `unscheduled()` order. Also
    /// returns the current-position pheromone of each.
    fn scores<S: PheromoneSource>(
        &self,
        instance: &Instance,
        policy: &ConstructionPolicy,
        source: &S,
        taus: &mut Vec<f64>,
        scores: &mut Vec<f64>,
    ) {
        let i = self.position();
        taus.clear();
        scores.clear();
        for &j in &self.unscheduled {
            let tau = source.tau(i, j);
            taus.push(tau);
            scores.push(self.score(instance, j, tau, policy));
        }
    }
}

/// Score of placing `job` at the state's next position.
pub fn desirability<S: PheromoneSource>(
    state: &ConstructionState,
    instance: &Instance,
    job: usize,
    policy: &ConstructionPolicy,
    source: &S,
) -> f64 {
    state.score(instance, job, source.tau(state.position(), job), policy)
}

/// Proportional selection probabilities indexed by job; zero for jobs
/// already placed.
pub fn selection_probabilities<S: PheromoneSource>(
    state: &ConstructionState,
    instance: &Instance,
    policy: &ConstructionPolicy,
    source: &S,
) -> Vec<f64> {
    let mut taus = Vec::new();
    let mut scores = Vec::new();
    state.scores(instance, policy, source, &mut taus, &mut scores);
    let mut probs = vec![0.0; instance.len()];
    let total: f64 = scores.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        let u = 1.0 / scores.len() as f64;
        for &j in state.unscheduled() {
            probs[j] = u;
        }
        return probs;
    }
    for (&j, &s) in state.unscheduled().iter().zip(&scores) {
        probs[j] = s / total;
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        for p in &mut probs {
            *p /= sum;
        }
    }
    probs
}

/// Picks an index into `scores`: a uniformly chosen maximizer with
/// probability `q0`, otherwise a draw proportional to the scores.
fn choose<R: Rng + ?Sized>(scores: &[f64], q0: f64, rng: &mut R) -> usize {
    debug_assert!(!scores.is_empty());
    let u: f64 = rng.random();
    if u < q0 {
        let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties = scores.iter().filter(|&&s| s == best).count();
        let pick = if ties > 1 {
            rng.random_range(0..ties)
        } else {
            0
        };
        return scores
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s == best)
            .nth(pick)
            .map(|(idx, _)| idx)
            .expect("at least one maximizer");
    }
    let total: f64 = scores.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return rng.random_range(0..scores.len());
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (idx, &s) in scores.iter().enumerate() {
        acc += s;
        if target < acc {
            return idx;
        }
    }
    // rounding left target at or beyond the accumulated total
    scores
        .iter()
        .rposition(|&s| s > 0.0)
        .unwrap_or(scores.len() - 1)
}

/// Chooses the next job for the state's open position without placing it.
pub fn select_next<S: PheromoneSource, R: Rng + ?Sized>(
    state: &ConstructionState,
    instance: &Instance,
    policy: &ConstructionPolicy,
    source: &S,
    rng: &mut R,
) -> usize {
    assert!(!state.is_complete(), "no unscheduled jobs left");
    let mut taus = Vec::new();
    let mut scores = Vec::new();
    state.scores(instance, policy, source, &mut taus, &mut scores);
    state.unscheduled[choose(&scores, policy.q0, rng)]
}

/// Builds a complete schedule. The source's placement hook runs after every
/// placement (the local update for a pheromone matrix).
pub fn construct_schedule<S: PheromoneSource, R: Rng + ?Sized>(
    instance: &Instance,
    policy: &ConstructionPolicy,
    source: &mut S,
    rng: &mut R,
) -> Schedule {
    let n = instance.len();
    let mut state = ConstructionState::new(n);
    let mut taus = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    while !state.is_complete() {
        state.scores(instance, policy, source, &mut taus, &mut scores);
        let idx = choose(&scores, policy.q0, rng);
        if policy.rule == Rule::Summation {
            for (&j, &tau) in state.unscheduled.iter().zip(&taus) {
                state.column_sums[j] += tau;
            }
        }
        state.commit(instance, idx, source);
    }
    Schedule::from_vec_unchecked(state.prefix)
}
