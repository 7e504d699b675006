//! Racing random search for alpha and beta.
//!
//! Each race samples lattice points, evaluates all survivors on a fresh batch
//! of shared seeds per round and keeps the best fraction by mean TWT until
//! one remains. Later races resample around the previous winner with a
//! shrinking normal spread.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::seeding::mix_seed;
use crate::solver::{run, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TuneSpec {
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    /// Lattice points per unit; 1000 means a step of 0.001.
    pub steps_per_unit: u32,
    /// Upper bound on objective evaluations.
    pub budget: usize,
    pub initial_candidates: usize,
    pub survivor_fraction: f64,
    pub races: usize,
    pub seed: u64,
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self {
            alpha_range: (0.5, 3.0),
            beta_range: (0.5, 3.0),
            steps_per_unit: 1000,
            budget: 2000,
            initial_candidates: 32,
            survivor_fraction: 0.5,
            races: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Point(i64, i64);

#[derive(Debug, Clone, Copy)]
struct Lattice {
    alpha: (i64, i64),
    beta: (i64, i64),
    scale: f64,
}

impl Lattice {
    fn value(&self, i: i64) -> f64 {
        i as f64 / self.scale
    }

    fn clamp(&self, p: Point) -> Point {
        Point(
            p.0.clamp(self.alpha.0, self.alpha.1),
            p.1.clamp(self.beta.0, self.beta.1),
        )
    }

    fn snap(&self, a: f64, b: f64) -> Point {
        self.clamp(Point(
            (a * self.scale).round() as i64,
            (b * self.scale).round() as i64,
        ))
    }
}

impl TuneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 10 {
            return Err(Error::Config("tuning budget must be at least 10".into()));
        }
        if self.steps_per_unit == 0 || self.races == 0 || self.initial_candidates < 2 {
            return Err(Error::Config(
                "tuner needs a lattice, races and two candidates".into(),
            ));
        }
        if !(self.survivor_fraction > 0.0 && self.survivor_fraction < 1.0) {
            return Err(Error::Config("survivor fraction must lie in (0, 1)".into()));
        }
        for (lo, hi) in [self.alpha_range, self.beta_range] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("bad range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    fn lattice(&self) -> Lattice {
        let scale = self.steps_per_unit as f64;
        let span = |(lo, hi): (f64, f64)| ((lo * scale).ceil() as i64, (hi * scale).floor() as i64);
        Lattice {
            alpha: span(self.alpha_range),
            beta: span(self.beta_range),
            scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub alpha: f64,
    pub beta: f64,
    /// Mean objective of the winner over its runs in the final race.
    pub mean_twt: f64,
    pub runs_used: usize,
}

fn survivors(len: usize, fraction: f64) -> usize {
    ((len as f64 * fraction).ceil() as usize).clamp(1, len.saturating_sub(1).max(1))
}

fn halving_rounds(mut len: usize, fraction: f64) -> usize {
    let mut rounds = 1;
    while len > 1 {
        len = survivors(len, fraction);
        if len > 1 {
            rounds += 1;
        }
    }
    rounds
}

fn sample_points(
    spec: &TuneSpec,
    lat: &Lattice,
    race: usize,
    count: usize,
    elite: Option<Point>,
) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, &[race as u64, u64::MAX]));
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    let mut push = |p: Point, out: &mut Vec<Point>| {
        if seen.insert(p) {
            out.push(p);
        }
    };
    match elite {
        None => push(lat.snap(1.0, 2.0), &mut out),
        Some(e) => push(e, &mut out),
    }
    let size = ((lat.alpha.1 - lat.alpha.0 + 1) * (lat.beta.1 - lat.beta.0 + 1)) as usize;
    let target = count.min(size);
    let spread = |(lo, hi): (i64, i64)| (hi - lo) as f64 * 0.25 / race as f64;
    let mut attempts = 0;
    while out.len() < target && attempts < 100 * count {
        attempts += 1;
        let p = match elite {
            Some(e) => {
                let na = Normal::new(e.0 as f64, spread(lat.alpha).max(1.0)).expect("finite sd");
                let nb = Normal::new(e.1 as f64, spread(lat.beta).max(1.0)).expect("finite sd");
                lat.clamp(Point(
                    na.sample(&mut rng).round() as i64,
                    nb.sample(&mut rng).round() as i64,
                ))
            }
            None => Point(
                rng.random_range(lat.alpha.0..=lat.alpha.1),
                rng.random_range(lat.beta.0..=lat.beta.1),
            ),
        };
        push(p, &mut out);
    }
    out
}

/// Minimizes `objective(alpha, beta, seed)` over the lattice within the run
/// budget. Evaluations within a round run in parallel; the result depends
/// only on the spec.
pub fn race<F>(spec: &TuneSpec, objective: F) -> Result<TuneOutcome>
where
    F: Fn(f64, f64, u64) -> Result<u64> + Sync,
{
    spec.validate()?;
    let lat = spec.lattice();
    if lat.alpha.0 > lat.alpha.1 || lat.beta.0 > lat.beta.1 {
        return Err(Error::Config(
            "parameter range holds no lattice point".into(),
        ));
    }
    let mut used = 0usize;
    let mut elite: Option<(Point, f64)> = None;

    for r in 0..spec.races {
        let race_budget = (spec.budget - used) / (spec.races - r);
        let mut n = spec.initial_candidates;
        while n > 2 && n * halving_rounds(n, spec.survivor_fraction) > race_budget {
            n -= 1;
        }
        let rounds = halving_rounds(n, spec.survivor_fraction);
        if race_budget < n {
            break;
        }
        let mut alive = sample_points(spec, &lat, r, n, elite.map(|e| e.0));
        let mut totals: BTreeMap<Point, (u64, usize)> = BTreeMap::new();
        let per_round = race_budget / rounds;
        let mut spent = 0usize;

        for round in 0.. {
            let left = race_budget - spent;
            let mut m = (per_round / alive.len()).max(1);
            if m * alive.len() > left {
                m = left / alive.len();
            }
            if m == 0 {
                break;
            }
            let seeds: Vec<u64> = (0..m)
                .map(|j| mix_seed(spec.seed, &[r as u64, round as u64, j as u64]))
                .collect();
            let tasks: Vec<(Point, u64)> = alive
                .iter()
                .flat_map(|&p| seeds.iter().map(move |&s| (p, s)))
                .collect();
            let values = tasks
                .par_iter()
                .map(|&(p, s)| objective(lat.value(p.0), lat.value(p.1), s))
                .collect::<Result<Vec<u64>>>()?;
            for (&(p, _), v) in tasks.iter().zip(values) {
                let e = totals.entry(p).or_default();
                e.0 += v;
                e.1 += 1;
            }
            spent += tasks.len();
            let mean = |p: &Point| {
                let (s, c) = totals[p];
                s as f64 / c as f64
            };
            alive.sort_by(|a, b| mean(a).total_cmp(&mean(b)).then(a.cmp(b)));
            if alive.len() == 1 {
                break;
            }
            alive.truncate(survivors(alive.len(), spec.survivor_fraction));
            if alive.len() == 1 {
                break;
            }
        }
        used += spent;
        let winner = alive[0];
        let (s, c) = totals.get(&winner).copied().unwrap_or((0, 0));
        if c > 0 {
            elite = Some((winner, s as f64 / c as f64));
        }
    }

    let (p, mean_twt) =
        elite.ok_or_else(|| Error::Config("budget too small to evaluate any point".into()))?;
    Ok(TuneOutcome {
        alpha: lat.value(p.0),
        beta: lat.value(p.1),
        mean_twt,
        runs_used: used,
    })
}

/// Tunes alpha and beta of `base` on one instance; everything else is fixed.
pub fn tune_alpha_beta(
    instance: &Instance,
    spec: &TuneSpec,
    base: &SolverConfig,
) -> Result<TuneOutcome> {
    base.validate()?;
    race(spec, |alpha, beta, seed| {
        let mut cfg = base.clone();
        cfg.policy.alpha = alpha;
        cfg.policy.beta = beta;
        cfg.seed = seed;
        cfg.record_schedules = false;
        Ok(run(instance, &cfg)?.best_twt)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRow {
    pub instance_id: String,
    pub alpha: f64,
    pub beta: f64,
    pub mean_twt: f64,
    pub runs_used: usize,
}

impl TuneRow {
    pub fn new(instance_id: impl Into<String>, o: &TuneOutcome) -> Self {
        Self {
            instance_id: instance_id.into(),
            alpha: o.alpha,
            beta: o.beta,
            mean_twt: o.mean_twt,
            runs_used: o.runs_used,
        }
    }
}

/// `instance_id,alpha,beta,mean_twt,runs_used`
pub fn tune_rows_to_csv(rows: &[TuneRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(["instance_id", "alpha", "beta", "mean_twt", "runs_used"])?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
}

pub fn tune_rows_from_csv(text: &str) -> Result<Vec<TuneRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
