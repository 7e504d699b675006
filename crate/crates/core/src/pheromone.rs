//! Pheromone representations.
//!
//! * [`PheromoneMatrix`]: classic ACO, a dense position x job grid with
//!   local and global updates.
//! * [`AgePopulation`]: PACO, a FIFO of the last `k` iteration-best
//!   schedules. `tau(i, j) = tau0 + tau_s * l(i, j)` where `l(i, j)` counts
//!   population members with job `j` at position `i`.
//! * [`WeightedPopulation`]: one FIFO multiset of jobs per position. A job
//!   entering position `i` is inserted once per unit of weight, so heavy
//!   jobs occupy (and hold) more of the column. Columns need not form valid
//!   schedules.
//!
//! Both populations keep an `n x n` occurrence count that is updated on every
//! insert and eviction, so a lookup is a single multiply-add.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{edd_schedule, evaluate, Instance, Schedule};

/// Read access to `tau(position, job)` for the construction step.
pub trait PheromoneSource {
    /// Number of positions (and jobs).
    fn size(&self) -> usize;

    fn tau(&self, position: usize, job: usize) -> f64;

    /// Called after an ant places `job` at `position`. Only the matrix
    /// representation reacts.
    fn on_placement(&mut self, _position: usize, _job: usize) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PheromoneParams {
    tau0: f64,
    tau_max: f64,
    k: usize,
    tau_s: f64,
    rho: f64,
}

impl PheromoneParams {
    pub fn new(tau0: f64, tau_max: f64, k: usize, rho: f64) -> Result<Self> {
        if !(tau0 > 0.0 && tau0.is_finite()) {
            return Err(Error::Config(format!("tau0 = {tau0} must be positive")));
        }
        if !(tau_max >= tau0) {
            return Err(Error::Config(format!(
                "tau_max = {tau_max} is below tau0 = {tau0}"
            )));
        }
        if k == 0 {
            return Err(Error::Config(
                "population capacity k must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::Config(format!("rho = {rho} is outside [0, 1)")));
        }
        Ok(Self {
            tau0,
            tau_max,
            k,
            tau_s: (tau_max - tau0) / k as f64,
            rho,
        })
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau_s(&self) -> f64 {
        self.tau_s
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    #[inline]
    fn population_tau(&self, count: u32) -> f64 {
        self.tau0 + self.tau_s * count as f64
    }
}

/// `1 / (n * max(T_EDD, 1))`, where `T_EDD` is the TWT of the EDD schedule.
pub fn init_tau0(instance: &Instance) -> f64 {
    let edd = edd_schedule(instance);
    let t_edd = evaluate(instance, &edd)
        .expect("EDD order is a permutation")
        .total_weighted_tardiness;
    1.0 / (instance.len() as f64 * t_edd.max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneMatrix {
    n: usize,
    values: Vec<f64>,
    tau0: f64,
    rho: f64,
}

impl PheromoneMatrix {
    /// All entries start at `tau0`.
    pub fn new(n: usize, params: &PheromoneParams) -> Self {
        Self {
            n,
            values: vec![params.tau0; n * n],
            tau0: params.tau0,
            rho: params.rho,
        }
    }

    pub fn get(&self, position: usize, job: usize) -> f64 {
        self.values[position * self.n + job]
    }

    pub fn set(&mut self, position: usize, job: usize, value: f64) {
        self.values[position * self.n + job] = value;
    }

    /// `tau <- (1 - rho) tau + rho tau0` for one entry.
    pub fn local_update(&mut self, position: usize, job: usize) {
        let v = &mut self.values[position * self.n + job];
        *v = (1.0 - self.rho) * *v + self.rho * self.tau0;
    }

    /// Evaporates every entry, then deposits `1 / max(best_twt, 1)` on each
    /// (position, job) pair of `best`.
    pub fn global_update(&mut self, best: &Schedule, best_twt: u64) {
        let keep = 1.0 - self.rho;
        for v in &mut self.values {
            *v *= keep;
        }
        let deposit = 1.0 / best_twt.max(1) as f64;
        for (i, &j) in best.order().iter().enumerate() {
            self.values[i * self.n + j] += deposit;
        }
    }

    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl PheromoneSource for PheromoneMatrix {
    fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn tau(&self, position: usize, job: usize) -> f64 {
        self.values[position * self.n + job]
    }

    fn on_placement(&mut self, position: usize, job: usize) {
        self.local_update(position, job);
    }
}

/// Age-based PACO population.
#[derive(Debug, Clone, PartialEq)]
pub struct AgePopulation {
    n: usize,
    params: PheromoneParams,
    /// Front is the oldest member.
    members: VecDeque<Schedule>,
    counts: Vec<u32>,
}

impl AgePopulation {
    pub fn new(n: usize, params: PheromoneParams) -> Self {
        Self {
            n,
            params,
            members: VecDeque::with_capacity(params.k),
            counts: vec![0; n * n],
        }
    }

    pub fn capacity(&self) -> usize {
        self.params.k
    }

    pub fn params(&self) -> &PheromoneParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Members from oldest to newest.
    pub fn members(&self) -> impl Iterator<Item = &Schedule> {
        self.members.iter()
    }

    /// Evicts the oldest member when full, then appends `schedule`.
    /// Returns the evicted schedule.
    pub fn insert(&mut self, schedule: Schedule) -> Option<Schedule> {
        assert_eq!(
            schedule.len(),
            self.n,
            "schedule length must match the population"
        );
        let evicted = if self.members.len() == self.params.k {
            let old = self
                .members
                .pop_front()
                .expect("full population is non-empty");
            for (i, &j) in old.order().iter().enumerate() {
                self.counts[i * self.n + j] -= 1;
            }
            Some(old)
        } else {
            None
        };
        for (i, &j) in schedule.order().iter().enumerate() {
            self.counts[i * self.n + j] += 1;
        }
        self.members.push_back(schedule);
        evicted
    }

    /// `l(i, j)`: members with job `j` at position `i`.
    pub fn ell(&self, position: usize, job: usize) -> u32 {
        self.counts[position * self.n + job]
    }

    /// Counts recomputed from the members, ignoring the cached table.
    pub fn recount(&self) -> Vec<u32> {
        let mut counts = vec![0; self.n * self.n];
        for s in &self.members {
            for (i, &j) in s.order().iter().enumerate() {
                counts[i * self.n + j] += 1;
            }
        }
        counts
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Capacity and per-position count sums. Cheap enough to run every
    /// iteration.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.members.len() > self.params.k {
            return Err(format!(
                "population holds {} > k = {}",
                self.members.len(),
                self.params.k
            ));
        }
        for i in 0..self.n {
            let row: u32 = self.counts[i * self.n..(i + 1) * self.n].iter().sum();
            if row as usize != self.members.len() {
                return Err(format!(
                    "row {i} counts sum to {row}, expected {}",
                    self.members.len()
                ));
            }
        }
        Ok(())
    }
}

impl PheromoneSource for AgePopulation {
    fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn tau(&self, position: usize, job: usize) -> f64 {
        self.params
            .population_tau(self.counts[position * self.n + job])
    }
}

/// How a weighted insertion makes room in its column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvictionRule {
    /// Evict the oldest entries only as far as needed so the new copies fit.
    #[default]
    Overflow,
    /// Always evict the oldest `w` entries (or all, if fewer) before adding
    /// `w` copies, even while the column is still filling.
    StrictText,
}

impl std::str::FromStr for EvictionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overflow" => Ok(Self::Overflow),
            "strict-text" => Ok(Self::StrictText),
            other => Err(Error::Config(format!(
                "unknown eviction rule '{other}' (expected overflow or strict-text)"
            ))),
        }
    }
}

impl std::fmt::Display for EvictionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Overflow => "overflow",
            Self::StrictText => "strict-text",
        })
    }
}

/// Per-position multisets of jobs for the weighted population update.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPopulation {
    n: usize,
    params: PheromoneParams,
    rule: EvictionRule,
    /// `columns[i]` is the multiset for position `i`, front is oldest.
    columns: Vec<VecDeque<usize>>,
    counts: Vec<u32>,
}

impl WeightedPopulation {
    pub fn new(n: usize, params: PheromoneParams, rule: EvictionRule) -> Self {
        Self {
            n,
            params,
            rule,
            columns: (0..n).map(|_| VecDeque::with_capacity(params.k)).collect(),
            counts: vec![0; n * n],
        }
    }

    /// Builds a population from explicit column contents, each listed oldest
    /// first.
    pub fn from_columns(
        columns: Vec<Vec<usize>>,
        params: PheromoneParams,
        rule: EvictionRule,
    ) -> Result<Self> {
        let n = columns.len();
        let mut pop = Self::new(n, params, rule);
        for (i, col) in columns.into_iter().enumerate() {
            if col.len() > params.k {
                return Err(Error::Config(format!(
                    "column {i} holds {} entries, capacity is {}",
                    col.len(),
                    params.k
                )));
            }
            for j in col {
                if j >= n {
                    return Err(Error::Config(format!("job {j} out of range in column {i}")));
                }
                pop.counts[i * n + j] += 1;
                pop.columns[i].push_back(j);
            }
        }
        Ok(pop)
    }

    pub fn capacity(&self) -> usize {
        self.params.k
    }

    pub fn params(&self) -> &PheromoneParams {
        &self.params
    }

    pub fn rule(&self) -> EvictionRule {
        self.rule
    }

    /// Column for `position`, oldest entry first.
    pub fn column(&self, position: usize) -> &VecDeque<usize> {
        &self.columns[position]
    }

    /// Inserts `schedule` using the weights of `instance`.
    pub fn insert(&mut self, schedule: &Schedule, instance: &Instance) {
        self.insert_weighted(schedule, |j| instance.job(j).weight);
    }

    /// Inserts job `schedule[i]` into column `i`, `min(weight, k)` times.
    pub fn insert_weighted(&mut self, schedule: &Schedule, weight: impl Fn(usize) -> u64) {
        assert_eq!(
            schedule.len(),
            self.n,
            "schedule length must match the population"
        );
        let k = self.params.k;
        for (i, &j) in schedule.order().iter().enumerate() {
            let copies = weight(j).min(k as u64) as usize;
            let column = &mut self.columns[i];
            let evict = match self.rule {
                EvictionRule::Overflow => (column.len() + copies).saturating_sub(k),
                EvictionRule::StrictText => copies.min(column.len()),
            };
            for _ in 0..evict {
                let old = column
                    .pop_front()
                    .expect("eviction count bounded by column length");
                self.counts[i * self.n + old] -= 1;
            }
            for _ in 0..copies {
                column.push_back(j);
            }
            self.counts[i * self.n + j] += copies as u32;
        }
    }

    /// Multiplicity of `job` in the multiset for `position`.
    pub fn ell(&self, position: usize, job: usize) -> u32 {
        self.counts[position * self.n + job]
    }

    pub fn recount(&self) -> Vec<u32> {
        let mut counts = vec![0; self.n * self.n];
        for (i, col) in self.columns.iter().enumerate() {
            for &j in col {
                counts[i * self.n + j] += 1;
            }
        }
        counts
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        for (i, col) in self.columns.iter().enumerate() {
            if col.len() > self.params.k {
                return Err(format!(
                    "column {i} holds {} > k = {}",
                    col.len(),
                    self.params.k
                ));
            }
            let row: u32 = self.counts[i * self.n..(i + 1) * self.n].iter().sum();
            if row as usize != col.len() {
                return Err(format!(
                    "row {i} counts sum to {row}, column holds {}",
                    col.len()
                ));
            }
        }
        Ok(())
    }
}

impl PheromoneSource for WeightedPopulation {
    fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn tau(&self, position: usize, job: usize) -> f64 {
        self.params
            .population_tau(self.counts[position * self.n + job])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(one_based: &[usize]) -> Schedule {
        Schedule::from_one_based(one_based).unwrap()
    }

    fn params(tau0: f64, tau_max: f64, k: usize) -> PheromoneParams {
        PheromoneParams::new(tau0, tau_max, k, 0.1).unwrap()
    }

    #[test]
    fn tau0_from_edd() {
        let toy = Instance::from_columns("toy", &[2, 3, 1], &[2, 4, 1], &[3, 1, 2]).unwrap();
        assert!((init_tau0(&toy) - 1.0 / 15.0).abs() < 1e-15);
        let easy = Instance::from_columns("easy", &[1, 1], &[10, 10], &[1, 1]).unwrap();
        assert_eq!(init_tau0(&easy), 0.5);
        // n = 100, T_EDD = 1000: a single job carries all the tardiness.
        let mut p = vec![1; 100];
        let mut d = vec![10_000; 100];
        p[0] = 1001;
        d[0] = 1;
        let inst = Instance::from_columns("big", &p, &d, &[1; 100]).unwrap();
        assert_eq!(
            evaluate(&inst, &edd_schedule(&inst))
                .unwrap()
                .total_weighted_tardiness,
            1000
        );
        assert!((init_tau0(&inst) - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn params_validation() {
        let p = params(0.2, 1.0, 4);
        assert!((p.tau_s() - 0.2).abs() < 1e-15);
        assert!(PheromoneParams::new(0.5, 0.4, 1, 0.1).is_err());
        assert!(PheromoneParams::new(0.1, 1.0, 0, 0.1).is_err());
        assert!(PheromoneParams::new(0.1, 1.0, 1, 1.0).is_err());
        assert!(PheromoneParams::new(0.0, 1.0, 1, 0.1).is_err());
    }

    /// Insertion order oldest to newest: (4,2,1,3), (3,2,1,4), (3,1,2,4).
    fn fifo_example_start() -> AgePopulation {
        let mut pop = AgePopulation::new(4, params(0.2, 1.0, 4));
        for sched in [[4, 2, 1, 3], [3, 2, 1, 4], [3, 1, 2, 4]] {
            assert!(pop.insert(s(&sched)).is_none());
        }
        pop
    }

    #[test]
    fn fifo_example_population_update() {
        let mut pop = fifo_example_start();
        assert_eq!(pop.len(), 3);
        assert_eq!(pop.insert(s(&[1, 4, 2, 3])), None);
        assert_eq!(pop.len(), 4);
        // l(1,3) = 2 -> tau = 0.2 + 0.2 * 2
        assert_eq!(pop.ell(0, 2), 2);
        assert!((pop.tau(0, 2) - 0.6).abs() < 1e-12);
        assert_eq!(pop.ell(0, 1), 0);
        assert_eq!(pop.tau(0, 1), 0.2);

        assert_eq!(pop.insert(s(&[2, 3, 4, 1])), Some(s(&[4, 2, 1, 3])));
        let members: Vec<_> = pop.members().map(Schedule::to_one_based).collect();
        assert_eq!(
            members,
            vec![
                vec![3, 2, 1, 4],
                vec![3, 1, 2, 4],
                vec![1, 4, 2, 3],
                vec![2, 3, 4, 1]
            ]
        );
        assert_eq!(pop.counts(), pop.recount().as_slice());
    }

    #[test]
    fn empty_population_accepts_first() {
        let mut pop = AgePopulation::new(3, params(0.1, 1.0, 2));
        pop.insert(s(&[2, 1, 3]));
        assert_eq!(pop.len(), 1);
        assert!(pop.check_invariants().is_ok());
    }

    fn weighted_example_start() -> WeightedPopulation {
        // columns oldest first: P1={3,4} with 4 oldest, P2={2,2}, P3={1,1}, P4={4,3} with 3 oldest
        let cols = vec![vec![4, 3], vec![2, 2], vec![1, 1], vec![3, 4]]
            .into_iter()
            .map(|c| c.into_iter().map(|j: usize| j - 1).collect())
            .collect();
        WeightedPopulation::from_columns(cols, params(0.2, 1.0, 4), EvictionRule::Overflow).unwrap()
    }

    fn column_one_based(pop: &WeightedPopulation, i: usize) -> Vec<usize> {
        pop.column(i).iter().map(|j| j + 1).collect()
    }

    #[test]
    fn weighted_example_weighted_update() {
        let mut pop = weighted_example_start();
        let weights = [1u64, 2, 3, 1];
        pop.insert_weighted(&s(&[3, 1, 2, 4]), |j| weights[j]);
        assert_eq!(column_one_based(&pop, 0), vec![3, 3, 3, 3]);
        assert_eq!(column_one_based(&pop, 1), vec![2, 2, 1]);
        assert_eq!(column_one_based(&pop, 2), vec![1, 1, 2, 2]);
        assert_eq!(column_one_based(&pop, 3), vec![3, 4, 4]);
        // P1 is all job 3: tau reaches tau_max
        assert!((pop.tau(0, 2) - 1.0).abs() < 1e-12);
        assert_eq!(pop.counts(), pop.recount().as_slice());
    }

    #[test]
    fn strict_text_rule_always_evicts() {
        let mut pop = weighted_example_start();
        pop = WeightedPopulation::from_columns(
            (0..4)
                .map(|i| pop.column(i).iter().copied().collect())
                .collect(),
            *pop.params(),
            EvictionRule::StrictText,
        )
        .unwrap();
        let weights = [1u64, 2, 3, 1];
        pop.insert_weighted(&s(&[3, 1, 2, 4]), |j| weights[j]);
        assert_eq!(column_one_based(&pop, 0), vec![3, 3, 3]);
        assert_eq!(column_one_based(&pop, 1), vec![2, 1]);
        assert_eq!(column_one_based(&pop, 2), vec![2, 2]);
        assert_eq!(column_one_based(&pop, 3), vec![4, 4]);
    }

    #[test]
    fn fill_phase_does_not_evict() {
        let mut pop = WeightedPopulation::new(1, params(0.1, 1.0, 4), EvictionRule::Overflow);
        pop.insert_weighted(&Schedule::identity(1), |_| 3);
        assert_eq!(pop.column(0).len(), 3);
    }

    #[test]
    fn weight_clamped_to_capacity() {
        let mut pop = WeightedPopulation::new(2, params(0.1, 1.0, 4), EvictionRule::Overflow);
        pop.insert_weighted(&s(&[1, 2]), |_| 1);
        pop.insert_weighted(&s(&[2, 1]), |_| 9);
        assert_eq!(column_one_based(&pop, 0), vec![2; 4]);
        assert_eq!(
            pop.tau(0, 1),
            pop.params().tau0() + 4.0 * pop.params().tau_s()
        );
    }

    #[test]
    fn matrix_updates() {
        let p = PheromoneParams::new(0.2, 1.0, 1, 0.1).unwrap();
        let mut m = PheromoneMatrix::new(2, &p);
        m.set(0, 0, 1.0);
        m.local_update(0, 0);
        assert!((m.get(0, 0) - 0.92).abs() < 1e-12);
        // tau0 is a fixed point
        m.local_update(1, 1);
        assert_eq!(m.get(1, 1), 0.2);

        let mut m = PheromoneMatrix::new(2, &p);
        m.set(0, 0, 1.0);
        m.set(0, 1, 1.0);
        m.global_update(&Schedule::identity(2), 4);
        assert!((m.get(0, 0) - 1.15).abs() < 1e-12);
        assert!((m.get(0, 1) - 0.9).abs() < 1e-12);

        let mut m = PheromoneMatrix::new(1, &p);
        m.global_update(&Schedule::identity(1), 0);
        assert!((m.get(0, 0) - (0.18 + 1.0)).abs() < 1e-12);

        let still = PheromoneParams::new(0.2, 1.0, 1, 0.0).unwrap();
        let mut m = PheromoneMatrix::new(1, &still);
        m.set(0, 0, 0.7);
        m.local_update(0, 0);
        assert_eq!(m.get(0, 0), 0.7);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;

        fn random_schedule(n: usize, rng: &mut ChaCha8Rng) -> Schedule {
            let mut v: Vec<usize> = (0..n).collect();
            v.shuffle(rng);
            Schedule::new(v).unwrap()
        }

        proptest! {
            #[test]
            fn unit_weight_population_matches_age_population(
                n in 1usize..8, k in 1usize..6, steps in 1usize..30, seed in any::<u64>()
            ) {
                let p = params(0.05, 1.0, k);
                let mut age = AgePopulation::new(n, p);
                let mut weighted = WeightedPopulation::new(n, p, EvictionRule::Overflow);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..steps {
                    let sched = random_schedule(n, &mut rng);
                    weighted.insert_weighted(&sched, |_| 1);
                    age.insert(sched);
                    prop_assert_eq!(age.counts(), weighted.counts());
                }
            }

            #[test]
            fn weighted_population_bounds(
                n in 1usize..7, k in 1usize..12, steps in 1usize..25, seed in any::<u64>(), strict in any::<bool>()
            ) {
                let rule = if strict { EvictionRule::StrictText } else { EvictionRule::Overflow };
                let p = params(0.01, 3.0, k);
                let mut pop = WeightedPopulation::new(n, p, rule);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..=10)).collect();
                for _ in 0..steps {
                    let sched = random_schedule(n, &mut rng);
                    let before: Vec<usize> = (0..n).map(|i| pop.column(i).len()).collect();
                    pop.insert_weighted(&sched, |j| weights[j]);
                    for (i, &j) in sched.order().iter().enumerate() {
                        let copies = weights[j].min(k as u64) as usize;
                        if !strict && before[i] + copies <= k {
                            // no eviction: everything that was there is still there
                            prop_assert_eq!(pop.column(i).len(), before[i] + copies);
                        }
                    }
                    prop_assert!(pop.check_invariants().is_ok());
                    let recount = pop.recount();
                    prop_assert_eq!(pop.counts(), recount.as_slice());
                    for i in 0..n {
                        for j in 0..n {
                            let t = pop.tau(i, j);
                            prop_assert!(t >= p.tau0() && t <= p.tau_max() + 1e-12);
                        }
                    }
                }
            }
        }
    }
}
