//! Problem model for the single-machine total weighted tardiness problem.
//!
//! Jobs are indexed `0..n` internally. Anything user-facing (files, CSV
//! schedule columns, display) uses 1-based indices.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Time = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Job {
    pub processing_time: Time,
    pub due_date: Time,
    pub weight: u64,
}

impl Job {
    pub fn new(processing_time: Time, due_date: Time, weight: u64) -> Result<Self> {
        let job = Self {
            processing_time,
            due_date,
            weight,
        };
        job.validate(0)?;
        Ok(job)
    }

    fn validate(&self, index: usize) -> Result<()> {
        if self.processing_time == 0 {
            return Err(Error::InvalidJob {
                index,
                reason: "processing time must be at least 1",
            });
        }
        if self.weight == 0 {
            return Err(Error::InvalidJob {
                index,
                reason: "weight must be at least 1",
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    id: String,
    jobs: Vec<Job>,
}

impl Instance {
    pub fn new(id: impl Into<String>, jobs: Vec<Job>) -> Result<Self> {
        if jobs.is_empty() {
            return Err(Error::EmptyInstance);
        }
        for (index, job) in jobs.iter().enumerate() {
            job.validate(index)?;
        }
        Ok(Self {
            id: id.into(),
            jobs,
        })
    }

    /// Builds an instance from parallel columns of processing times, due
    /// dates and weights.
    pub fn from_columns(
        id: impl Into<String>,
        processing_times: &[Time],
        due_dates: &[Time],
        weights: &[u64],
    ) -> Result<Self> {
        if processing_times.len() != due_dates.len() || due_dates.len() != weights.len() {
            return Err(Error::Config(format!(
                "column lengths differ: p={}, d={}, w={}",
                processing_times.len(),
                due_dates.len(),
                weights.len()
            )));
        }
        let jobs = processing_times
            .iter()
            .zip(due_dates)
            .zip(weights)
            .map(|((&p, &d), &w)| Job {
                processing_time: p,
                due_date: d,
                weight: w,
            })
            .collect();
        Self::new(id, jobs)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, j: usize) -> &Job {
        &self.jobs[j]
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn total_processing_time(&self) -> Time {
        self.jobs.iter().map(|j| j.processing_time).sum()
    }

    /// Copy of this instance with every weight replaced by 1.
    pub fn with_unit_weights(&self) -> Self {
        Self {
            id: self.id.clone(),
            jobs: self.jobs.iter().map(|j| Job { weight: 1, ..*j }).collect(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// A processing order: `order()[i]` is the job placed at position `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Schedule(Vec<usize>);

impl Schedule {
    /// Validates that `order` is a permutation of `0..order.len()`.
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &j in &order {
            if j >= n {
                return Err(Error::NotAPermutation {
                    n,
                    reason: format!("index {j} out of range"),
                });
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::NotAPermutation {
                    n,
                    reason: format!("index {j} appears twice"),
                });
            }
        }
        Ok(Self(order))
    }

    /// Parses 1-based job numbers, as printed in reports.
    pub fn from_one_based(order: &[usize]) -> Result<Self> {
        let zero_based = order
            .iter()
            .map(|&j| {
                j.checked_sub(1).ok_or_else(|| Error::NotAPermutation {
                    n: order.len(),
                    reason: "job number 0 in a 1-based schedule".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(zero_based)
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub(crate) fn from_vec_unchecked(order: Vec<usize>) -> Self {
        debug_assert!(is_permutation(&order));
        Self(order)
    }

    pub fn order(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `positions()[j]` is the position of job `j`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (i, &j) in self.0.iter().enumerate() {
            pos[j] = i;
        }
        pos
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|j| j + 1).collect()
    }
}

impl TryFrom<Vec<usize>> for Schedule {
    type Error = Error;

    fn try_from(order: Vec<usize>) -> Result<Self> {
        Self::new(order)
    }
}

impl From<Schedule> for Vec<usize> {
    fn from(s: Schedule) -> Self {
        s.0
    }
}

/// Space-separated, 1-based.
impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, j) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", j + 1)?;
        }
        Ok(())
    }
}

pub fn is_permutation(order: &[usize]) -> bool {
    let mut seen = vec![false; order.len()];
    order
        .iter()
        .all(|&j| j < seen.len() && !std::mem::replace(&mut seen[j], true))
}

/// Per-job completion times and tardiness, indexed by job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub completion_times: Vec<Time>,
    pub tardiness: Vec<Time>,
    pub total_weighted_tardiness: u64,
}

pub fn evaluate(instance: &Instance, schedule: &Schedule) -> Result<Evaluation> {
    if schedule.len() != instance.len() {
        return Err(Error::NotAPermutation {
            n: instance.len(),
            reason: format!(
                "schedule has {} entries for {} jobs",
                schedule.len(),
                instance.len()
            ),
        });
    }
    let n = instance.len();
    let mut completion_times = vec![0; n];
    let mut tardiness = vec![0; n];
    let mut total = 0;
    let mut clock = 0;
    for &j in schedule.order() {
        let job = instance.job(j);
        clock += job.processing_time;
        completion_times[j] = clock;
        tardiness[j] = clock.saturating_sub(job.due_date);
        total += job.weight * tardiness[j];
    }
    Ok(Evaluation {
        completion_times,
        tardiness,
        total_weighted_tardiness: total,
    })
}

/// TWT of `order` without building the per-job vectors. `order` is trusted
/// to be a permutation of the instance's jobs.
pub fn total_weighted_tardiness(instance: &Instance, order: &[usize]) -> u64 {
    let mut clock = 0;
    let mut total = 0;
    for &j in order {
        let job = instance.job(j);
        clock += job.processing_time;
        total += job.weight * clock.saturating_sub(job.due_date);
    }
    total
}

/// Earliest due date order, ties by job index.
pub fn edd_schedule(instance: &Instance) -> Schedule {
    let mut order: Vec<usize> = (0..instance.len()).collect();
    order.sort_by_key(|&j| (instance.job(j).due_date, j));
    Schedule::from_vec_unchecked(order)
}

/// EDD desirability `1 / d`, with `d = 0` treated as 1.
pub fn edd_eta(job: &Job) -> f64 {
    1.0 / job.due_date.max(1) as f64
}

/// Modified due date desirability for a job started at `elapsed`:
/// `1 / (max(elapsed + p, d) - elapsed)`. Always in `(0, 1]`.
pub fn mdd_eta(elapsed: Time, job: &Job) -> f64 {
    let completion = elapsed + job.processing_time;
    1.0 / (completion.max(job.due_date) - elapsed) as f64
}
