//! Full-factorial sweep over q0, tau_max and k.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Instance;
use crate::seeding::mix_seed;
use crate::solver::{run, Algorithm, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Combination {
    pub q0: f64,
    pub tau_max: f64,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub q0_grid: Vec<f64>,
    pub tau_max_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub repetitions: usize,
    /// Everything not swept. Its `seed` is the master seed of the sweep.
    pub base: SolverConfig,
}

impl SweepSpec {
    /// The 3 x 3 x 3 grid with five repetitions.
    pub fn standard(base: SolverConfig) -> Self {
        let k_grid = match base.algorithm {
            Algorithm::Paco => vec![1, 5, 25],
            Algorithm::Wpaco => vec![10, 50, 100],
            Algorithm::Aco => vec![1],
        };
        Self {
            q0_grid: vec![0.1, 0.5, 0.9],
            tau_max_grid: vec![1.0, 3.0, 10.0],
            k_grid,
            repetitions: 5,
            base,
        }
    }

    pub fn combinations(&self) -> Vec<Combination> {
        let mut out = Vec::new();
        for &q0 in &self.q0_grid {
            for &tau_max in &self.tau_max_grid {
                for &k in &self.k_grid {
                    out.push(Combination { q0, tau_max, k });
                }
            }
        }
        out
    }

    /// Seed of repetition `rep` on the instance at `index`. Combinations share
    /// it, so they are compared on common random numbers.
    pub fn run_seed(&self, index: usize, rep: usize) -> u64 {
        mix_seed(self.base.seed, &[index as u64, rep as u64])
    }

    /// Full solver config behind a row.
    pub fn config_for(&self, combo: Combination, seed: u64) -> SolverConfig {
        let mut cfg = self.base.clone();
        cfg.policy.q0 = combo.q0;
        cfg.tau_max = combo.tau_max;
        cfg.k = combo.k;
        cfg.seed = seed;
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions < 1 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.q0_grid.is_empty() || self.tau_max_grid.is_empty() || self.k_grid.is_empty() {
            return Err(Error::Config("sweep grids must not be empty".into()));
        }
        for c in self.combinations() {
            self.config_for(c, 0).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub instance_id: String,
    pub q0: f64,
    pub tau_max: f64,
    pub k: usize,
    pub rep: usize,
    pub seed: u64,
    pub best_twt: u64,
    pub wall_ms: Option<u64>,
}

impl SweepRow {
    pub fn combination(&self) -> Combination {
        Combination {
            q0: self.q0,
            tau_max: self.tau_max,
            k: self.k,
        }
    }
}

/// Runs every (instance, combination, repetition) triple. Rows come back in
/// instance, combination, repetition order whatever the thread count.
pub fn sweep(instances: &[Instance], spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let combos = spec.combinations();
    let mut tasks = Vec::with_capacity(instances.len() * combos.len() * spec.repetitions);
    for (i, inst) in instances.iter().enumerate() {
        for &c in &combos {
            for rep in 0..spec.repetitions {
                tasks.push((inst, c, rep, spec.run_seed(i, rep)));
            }
        }
    }
    tasks
        .into_par_iter()
        .map(|(inst, c, rep, seed)| {
            let r = run(inst, &spec.config_for(c, seed))?;
            Ok(SweepRow {
                algorithm: spec.base.algorithm,
                instance_id: inst.id().to_string(),
                q0: c.q0,
                tau_max: c.tau_max,
                k: c.k,
                rep,
                seed,
                best_twt: r.best_twt,
                wall_ms: Some(r.wall_ms),
            })
        })
        .collect()
}

/// `algorithm,instance_id,q0,tau_max,k,rep,seed,best_twt,wall_ms`; the last
/// column is left empty when `timestamps` is false.
pub fn rows_to_csv(rows: &[SweepRow], timestamps: bool) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        let mut r = r.clone();
        if !timestamps {
            r.wall_ms = None;
        }
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record([
            "algorithm",
            "instance_id",
            "q0",
            "tau_max",
            "k",
            "rep",
            "seed",
            "best_twt",
            "wall_ms",
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboSummary {
    pub algorithm: Algorithm,
    pub q0: f64,
    pub tau_max: f64,
    pub k: usize,
    pub runs: usize,
    pub mean_twt: f64,
    /// `(mean - best mean) / best mean` within the algorithm.
    pub rel_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub algorithm: Algorithm,
    pub parameter: String,
    pub value: f64,
    pub runs: usize,
    pub mean_twt: f64,
}

fn key(a: Algorithm, c: Combination) -> (Algorithm, u64, u64, usize) {
    (a, c.q0.to_bits(), c.tau_max.to_bits(), c.k)
}

fn relative(mean: f64, best: f64) -> f64 {
    if best == 0.0 {
        if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (mean - best) / best
    }
}

/// Mean TWT per combination in first-seen order, with relative deviation
/// from the best combination of the same algorithm.
pub fn aggregate(rows: &[SweepRow]) -> Vec<ComboSummary> {
    let mut order = Vec::new();
    let mut acc: BTreeMap<_, (u64, usize)> = BTreeMap::new();
    for r in rows {
        let k = key(r.algorithm, r.combination());
        let e = acc.entry(k).or_insert_with(|| {
            order.push((r.algorithm, r.combination()));
            (0, 0)
        });
        e.0 += r.best_twt;
        e.1 += 1;
    }
    let mut out: Vec<ComboSummary> = order
        .into_iter()
        .map(|(a, c)| {
            let (sum, runs) = acc[&key(a, c)];
            ComboSummary {
                algorithm: a,
                q0: c.q0,
                tau_max: c.tau_max,
                k: c.k,
                runs,
                mean_twt: sum as f64 / runs as f64,
                rel_deviation: 0.0,
            }
        })
        .collect();
    let mut best: BTreeMap<Algorithm, f64> = BTreeMap::new();
    for s in &out {
        let b = best.entry(s.algorithm).or_insert(f64::INFINITY);
        *b = b.min(s.mean_twt);
    }
    for s in &mut out {
        s.rel_deviation = relative(s.mean_twt, best[&s.algorithm]);
    }
    out
}

/// Mean TWT over all rows sharing one parameter value, per algorithm.
pub fn marginal_means(rows: &[SweepRow]) -> Vec<MarginalSummary> {
    let mut acc: BTreeMap<(Algorithm, &'static str, u64), (f64, u64, usize)> = BTreeMap::new();
    for r in rows {
        for (name, v) in [("q0", r.q0), ("tau_max", r.tau_max), ("k", r.k as f64)] {
            let e = acc
                .entry((r.algorithm, name, v.to_bits()))
                .or_insert((v, 0, 0));
            e.1 += r.best_twt;
            e.2 += 1;
        }
    }
    let mut out: Vec<MarginalSummary> = acc
        .into_iter()
        .map(|((a, name, _), (v, sum, runs))| MarginalSummary {
            algorithm: a,
            parameter: name.to_string(),
            value: v,
            runs,
            mean_twt: sum as f64 / runs as f64,
        })
        .collect();
    out.sort_by(|x, y| {
        (x.algorithm, &x.parameter)
            .cmp(&(y.algorithm, &y.parameter))
            .then(x.value.total_cmp(&y.value))
    });
    out
}

/// Mean of the marginal for `parameter = value`, if present.
pub fn marginal(
    summaries: &[MarginalSummary],
    algorithm: Algorithm,
    parameter: &str,
    value: f64,
) -> Option<f64> {
    summaries
        .iter()
        .find(|m| m.algorithm == algorithm && m.parameter == parameter && m.value == value)
        .map(|m| m.mean_twt)
}
