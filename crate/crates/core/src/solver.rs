//! Iteration drivers for ACO, PACO and WPACO.
//!
//! A run owns one ChaCha8 stream seeded from the config. Within an iteration
//! ants construct in index order from that stream, so a run is a pure
//! function of `(instance, config)`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::construction::{construct_schedule, ConstructionPolicy};
use crate::error::{Error, Result};
use crate::model::{edd_schedule, total_weighted_tardiness, Instance, Schedule};
use crate::pheromone::{
    init_tau0, AgePopulation, EvictionRule, PheromoneMatrix, PheromoneParams, PheromoneSource,
    WeightedPopulation,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Aco,
    Paco,
    Wpaco,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Aco => "aco",
            Self::Paco => "paco",
            Self::Wpaco => "wpaco",
        }
    }

    /// Population capacity that performed best in the first tuning stage.
    pub fn default_k(&self) -> usize {
        match self {
            Self::Aco => 1,
            Self::Paco => 5,
            Self::Wpaco => 50,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aco" => Ok(Self::Aco),
            "paco" => Ok(Self::Paco),
            "wpaco" => Ok(Self::Wpaco),
            other => Err(Error::Config(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub ants: usize,
    pub iterations: usize,
    pub policy: ConstructionPolicy,
    pub tau_max: f64,
    /// Population capacity (schedules for PACO, column slots for WPACO).
    pub k: usize,
    /// Evaporation rate, classic ACO only.
    pub rho: f64,
    #[serde(default)]
    pub eviction: EvictionRule,
    /// Fill the initial population with the EDD schedule instead of starting
    /// empty.
    #[serde(default)]
    pub seed_population: bool,
    /// WPACO inserts each job once regardless of its weight.
    #[serde(default)]
    pub unit_insert_weights: bool,
    /// Keep every iteration-best schedule in the trace.
    #[serde(default)]
    pub record_schedules: bool,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        Self {
            algorithm,
            ants: 10,
            iterations: 10_000,
            policy: ConstructionPolicy::default(),
            tau_max: 1.0,
            k: algorithm.default_k(),
            rho: 0.1,
            eviction: EvictionRule::Overflow,
            seed_population: false,
            unit_insert_weights: false,
            record_schedules: false,
            seed,
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.ants < 1 {
            return Err(Error::Config("ants must be at least 1".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        self.policy.validate()
    }

    pub fn pheromone_params(&self, instance: &Instance) -> Result<PheromoneParams> {
        PheromoneParams::new(init_tau0(instance), self.tau_max, self.k, self.rho)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter_best_twt: u64,
    pub best_so_far_twt: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iter_best_schedule: Option<Schedule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn has_schedules(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.iter_best_schedule.is_some())
    }

    /// Iteration-best schedules, if every record carries one.
    pub fn schedules(&self) -> Result<Vec<&Schedule>> {
        self.records
            .iter()
            .map(|r| r.iter_best_schedule.as_ref().ok_or(Error::MissingSchedules))
            .collect()
    }

    /// `iteration,iter_best_twt,best_so_far_twt[,iter_best_schedule]` with
    /// 1-based iterations and space-separated 1-based schedules.
    pub fn to_csv(&self) -> String {
        let with_schedules = self.has_schedules();
        let mut out = String::from("iteration,iter_best_twt,best_so_far_twt");
        if with_schedules {
            out.push_str(",iter_best_schedule");
        }
        out.push('\n');
        for (t, r) in self.records.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{}",
                t + 1,
                r.iter_best_twt,
                r.best_so_far_twt
            ));
            if let (true, Some(s)) = (with_schedules, &r.iter_best_schedule) {
                out.push(',');
                out.push_str(&s.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let expect = ["iteration", "iter_best_twt", "best_so_far_twt"];
        if headers.len() < 3 || headers.iter().take(3).ne(expect) {
            return Err(Error::Csv(format!("unexpected trace header {headers:?}")));
        }
        let with_schedules = headers.get(3) == Some("iter_best_schedule");
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row?;
            let num = |k: usize| -> Result<u64> {
                row[k]
                    .parse()
                    .map_err(|_| Error::Csv(format!("bad integer '{}' in trace", &row[k])))
            };
            let iter_best_schedule = if with_schedules {
                let jobs = row[3]
                    .split_whitespace()
                    .map(|t| t.parse::<usize>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Csv(format!("bad schedule '{}'", &row[3])))?;
                Some(Schedule::from_one_based(&jobs)?)
            } else {
                None
            };
            records.push(TraceRecord {
                iter_best_twt: num(1)?,
                best_so_far_twt: num(2)?,
                iter_best_schedule,
            });
        }
        Ok(Self { records })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub instance_id: String,
    pub best_schedule: Schedule,
    pub best_twt: u64,
    pub trace: RunTrace,
    pub wall_ms: u64,
    pub config: SolverConfig,
}

enum Colony {
    Matrix(PheromoneMatrix),
    Age(AgePopulation),
    Weighted(WeightedPopulation),
}

impl Colony {
    fn new(instance: &Instance, config: &SolverConfig) -> Result<Self> {
        let n = instance.len();
        let params = config.pheromone_params(instance)?;
        let mut colony = match config.algorithm {
            Algorithm::Aco => Colony::Matrix(PheromoneMatrix::new(n, &params)),
            Algorithm::Paco => Colony::Age(AgePopulation::new(n, params)),
            Algorithm::Wpaco => {
                Colony::Weighted(WeightedPopulation::new(n, params, config.eviction))
            }
        };
        if config.seed_population {
            let edd = edd_schedule(instance);
            for _ in 0..params.k() {
                colony.absorb(instance, config, &edd, &edd, 0);
            }
        }
        Ok(colony)
    }

    fn construct(
        &mut self,
        instance: &Instance,
        policy: &ConstructionPolicy,
        rng: &mut ChaCha8Rng,
    ) -> Schedule {
        match self {
            Colony::Matrix(m) => construct_schedule(instance, policy, m, rng),
            Colony::Age(p) => construct_schedule(instance, policy, p, rng),
            Colony::Weighted(w) => construct_schedule(instance, policy, w, rng),
        }
    }

    /// End-of-iteration pheromone update.
    fn absorb(
        &mut self,
        instance: &Instance,
        config: &SolverConfig,
        iter_best: &Schedule,
        best: &Schedule,
        best_twt: u64,
    ) {
        match self {
            Colony::Matrix(m) => m.global_update(best, best_twt),
            Colony::Age(p) => {
                p.insert(iter_best.clone());
            }
            Colony::Weighted(w) => {
                if config.unit_insert_weights {
                    w.insert_weighted(iter_best, |_| 1);
                } else {
                    w.insert(iter_best, instance);
                }
            }
        }
    }

    fn check(&self) -> Result<(), String> {
        match self {
            Colony::Matrix(m) => {
                if m.min_entry() > 0.0 {
                    Ok(())
                } else {
                    Err("non-positive pheromone entry".into())
                }
            }
            Colony::Age(p) => p.check_invariants(),
            Colony::Weighted(w) => w.check_invariants(),
        }
    }

    fn source(&self) -> &dyn PheromoneSource {
        match self {
            Colony::Matrix(m) => m,
            Colony::Age(p) => p,
            Colony::Weighted(w) => w,
        }
    }
}

/// Observer hook for tests and diagnostics: sees the pheromone source after
/// each iteration's update.
pub trait IterationObserver {
    fn after_update(&mut self, iteration: usize, source: &dyn PheromoneSource);
}

impl IterationObserver for () {
    fn after_update(&mut self, _: usize, _: &dyn PheromoneSource) {}
}

pub fn run(instance: &Instance, config: &SolverConfig) -> Result<RunResult> {
    run_observed(instance, config, &mut ())
}

pub fn run_observed(
    instance: &Instance,
    config: &SolverConfig,
    observer: &mut dyn IterationObserver,
) -> Result<RunResult> {
    config.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut colony = Colony::new(instance, config)?;
    let mut best: Option<(Schedule, u64)> = None;
    let mut records = Vec::with_capacity(config.iterations);

    for iteration in 0..config.iterations {
        let mut iter_best: Option<(Schedule, u64)> = None;
        for _ant in 0..config.ants {
            let s = colony.construct(instance, &config.policy, &mut rng);
            let twt = total_weighted_tardiness(instance, s.order());
            if iter_best.as_ref().is_none_or(|(_, b)| twt < *b) {
                iter_best = Some((s, twt));
            }
        }
        let (ib, ib_twt) = iter_best.expect("ants >= 1");
        if best.as_ref().is_none_or(|(_, b)| ib_twt < *b) {
            best = Some((ib.clone(), ib_twt));
        }
        let (bs, bs_twt) = best.as_ref().expect("set above");
        colony.absorb(instance, config, &ib, bs, *bs_twt);
        if cfg!(debug_assertions) || iteration % 100 == 0 {
            if let Err(e) = colony.check() {
                panic!("pheromone invariant violated at iteration {iteration}: {e}");
            }
        }
        observer.after_update(iteration, colony.source());
        records.push(TraceRecord {
            iter_best_twt: ib_twt,
            best_so_far_twt: *bs_twt,
            iter_best_schedule: config.record_schedules.then_some(ib),
        });
    }

    let (best_schedule, best_twt) = best.expect("iterations >= 1");
    Ok(RunResult {
        instance_id: instance.id().to_string(),
        best_schedule,
        best_twt,
        trace: RunTrace { records },
        wall_ms: started.elapsed().as_millis() as u64,
        config: config.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub matches: bool,
    /// First iteration (0-based) whose record differs from the replay.
    pub first_divergence: Option<usize>,
}

/// Re-runs the echoed config and compares the trace and best value.
pub fn replay_check(result: &RunResult, instance: &Instance) -> Result<ReplayReport> {
    if result.trace.len() != result.config.iterations {
        return Err(Error::TruncatedTrace {
            expected: result.config.iterations,
            found: result.trace.len(),
        });
    }
    let replay = run(instance, &result.config)?;
    let first_divergence = result
        .trace
        .records
        .iter()
        .zip(&replay.trace.records)
        .position(|(a, b)| {
            a.iter_best_twt != b.iter_best_twt
                || a.best_so_far_twt != b.best_so_far_twt
                || (a.iter_best_schedule.is_some() && a.iter_best_schedule != b.iter_best_schedule)
        });
    let matches = first_divergence.is_none()
        && replay.best_twt == result.best_twt
        && replay.best_schedule == result.best_schedule;
    Ok(ReplayReport {
        matches,
        first_divergence,
    })
}
