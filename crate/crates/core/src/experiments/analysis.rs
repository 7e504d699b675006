//! Position-change statistics, correlation and deviation summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::instance_io::ReferenceTable;
use crate::model::Instance;
use crate::solver::RunTrace;

/// Change counts per weight class, additive across runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeCounts {
    /// weight -> (position changes, job-transitions observed)
    classes: BTreeMap<u64, (u64, u64)>,
}

impl ChangeCounts {
    pub fn merge(&mut self, other: &ChangeCounts) {
        for (&w, &(c, o)) in &other.classes {
            let e = self.classes.entry(w).or_default();
            e.0 += c;
            e.1 += o;
        }
    }

    /// `(weight, fraction)` for every weight class observed.
    pub fn fractions(&self) -> Vec<(u64, f64)> {
        self.classes
            .iter()
            .map(|(&w, &(c, o))| (w, if o == 0 { 0.0 } else { c as f64 / o as f64 }))
            .collect()
    }

    /// Fraction over all jobs regardless of weight.
    pub fn overall(&self) -> f64 {
        let (c, o) = self
            .classes
            .values()
            .fold((0, 0), |(c, o), &(ci, oi)| (c + ci, o + oi));
        if o == 0 {
            0.0
        } else {
            c as f64 / o as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }
}

/// Marks for each transition `t -> t+1` which jobs moved.
fn moved_flags(trace: &RunTrace, instance: &Instance) -> Result<Vec<Vec<bool>>> {
    let schedules = trace.schedules()?;
    if schedules.len() < 2 {
        return Err(Error::Statistics(
            "position changes need at least two iterations".into(),
        ));
    }
    if schedules.iter().any(|s| s.len() != instance.len()) {
        return Err(Error::Statistics(
            "trace schedules do not match the instance size".into(),
        ));
    }
    let positions: Vec<Vec<usize>> = schedules.iter().map(|s| s.positions()).collect();
    Ok(positions
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a != b).collect())
        .collect())
}

fn count_span(flags: &[Vec<bool>], instance: &Instance) -> ChangeCounts {
    let mut counts = ChangeCounts::default();
    for (j, job) in instance.jobs().iter().enumerate() {
        let e = counts.classes.entry(job.weight).or_default();
        e.0 += flags.iter().filter(|f| f[j]).count() as u64;
        e.1 += flags.len() as u64;
    }
    counts
}

/// Fraction of consecutive iteration-best pairs in which a job's position
/// differs, averaged over the jobs of each weight.
pub fn position_change_stats(trace: &RunTrace, instance: &Instance) -> Result<ChangeCounts> {
    let flags = moved_flags(trace, instance)?;
    Ok(count_span(&flags, instance))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBlock {
    /// 1-based transitions `first..=last`; transition `t` compares
    /// iterations `t` and `t + 1`.
    pub first: usize,
    pub last: usize,
    pub counts: ChangeCounts,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChangeSeries {
    pub window: usize,
    pub blocks: Vec<SeriesBlock>,
}

impl ChangeSeries {
    /// Adds counts block by block. Blocks only one side has are kept as is.
    pub fn merge(&mut self, other: &ChangeSeries) -> Result<()> {
        if self.blocks.is_empty() {
            *self = other.clone();
            return Ok(());
        }
        if self.window != other.window {
            return Err(Error::Statistics(
                "cannot merge series with different windows".into(),
            ));
        }
        for (i, b) in other.blocks.iter().enumerate() {
            match self.blocks.get_mut(i) {
                Some(mine) => {
                    mine.last = mine.last.max(b.last);
                    mine.counts.merge(&b.counts);
                }
                None => self.blocks.push(b.clone()),
            }
        }
        Ok(())
    }

    /// Running totals from the first transition up to the end of each block.
    pub fn cumulative(&self) -> ChangeSeries {
        let mut acc = ChangeCounts::default();
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                acc.merge(&b.counts);
                SeriesBlock {
                    first: 1,
                    last: b.last,
                    counts: acc.clone(),
                }
            })
            .collect();
        ChangeSeries {
            window: self.window,
            blocks,
        }
    }

    /// `window_start,window_end,weight,fraction`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("window_start,window_end,weight,fraction\n");
        for b in &self.blocks {
            for (w, f) in b.counts.fractions() {
                let _ = writeln!(out, "{},{},{w},{f}", b.first, b.last);
            }
        }
        out
    }
}

/// Per-weight change fractions over consecutive blocks of `window`
/// transitions.
pub fn position_change_series(
    trace: &RunTrace,
    instance: &Instance,
    window: usize,
) -> Result<ChangeSeries> {
    if window < 1 {
        return Err(Error::Statistics("window must be at least 1".into()));
    }
    let flags = moved_flags(trace, instance)?;
    Ok(ChangeSeries {
        window,
        blocks: flags
            .chunks(window)
            .enumerate()
            .map(|(i, c)| SeriesBlock {
                first: i * window + 1,
                last: i * window + c.len(),
                counts: count_span(c, instance),
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub r: f64,
    /// Two-tailed p-value of the t statistic with `n - 2` degrees of freedom.
    pub p: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::Statistics(format!(
            "sample lengths differ ({n} vs {})",
            ys.len()
        )));
    }
    if n < 3 {
        return Err(Error::Statistics("need at least three pairs".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Statistics("zero variance".into()));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation {
        r,
        p: correlation_p_value(r, n)?,
        n,
    })
}

/// Two-tailed p-value for a sample correlation `r` over `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::Statistics("need at least three pairs".into()));
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Statistics(e.to_string()))?;
    Ok(2.0 * dist.sf(t.abs()))
}

/// Final best TWT of one run of `method` on `instance_id`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub method: String,
    pub instance_id: String,
    pub best_twt: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub instances: usize,
    pub mean_twt: f64,
    pub reference_mean: f64,
    /// `None` when the reference mean is zero.
    pub percent_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub method: String,
    pub rdd: f64,
    pub tf: f64,
    pub instances: usize,
    pub mean_twt: f64,
    pub reference_mean: f64,
    pub percent_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DeviationReport {
    pub methods: Vec<MethodSummary>,
    pub groups: Vec<GroupSummary>,
    /// `(method, instance_id)` pairs without a reference value.
    pub missing: Vec<(String, String)>,
}

pub fn percent_deviation(mean: f64, reference: f64) -> Option<f64> {
    (reference != 0.0).then(|| 100.0 * (mean - reference) / reference)
}

/// Averages repetitions per instance, then instances per method, and compares
/// against the reference mean over the same instances. `groups` maps an
/// instance id to its `(RDD, TF)` key in thousandths.
pub fn deviation_report(
    observations: &[Observation],
    reference: &ReferenceTable,
    groups: &BTreeMap<String, (u32, u32)>,
) -> DeviationReport {
    // method -> instance -> (sum, count)
    let mut per: BTreeMap<&str, BTreeMap<&str, (u64, u64)>> = BTreeMap::new();
    for o in observations {
        let e = per
            .entry(&o.method)
            .or_default()
            .entry(&o.instance_id)
            .or_default();
        e.0 += o.best_twt;
        e.1 += 1;
    }

    let mut report = DeviationReport::default();
    for (method, instances) in &per {
        let mut all = (0.0, 0.0, 0usize);
        let mut by_group: BTreeMap<(u32, u32), (f64, f64, usize)> = BTreeMap::new();
        for (id, &(sum, count)) in instances {
            let Some(r) = reference.get(id) else {
                report.missing.push((method.to_string(), id.to_string()));
                continue;
            };
            let mean = sum as f64 / count as f64;
            all.0 += mean;
            all.1 += r as f64;
            all.2 += 1;
            if let Some(&g) = groups.get(*id) {
                let e = by_group.entry(g).or_default();
                e.0 += mean;
                e.1 += r as f64;
                e.2 += 1;
            }
        }
        if all.2 > 0 {
            let (m, r) = (all.0 / all.2 as f64, all.1 / all.2 as f64);
            report.methods.push(MethodSummary {
                method: method.to_string(),
                instances: all.2,
                mean_twt: m,
                reference_mean: r,
                percent_deviation: percent_deviation(m, r),
            });
        }
        for ((rdd, tf), (ms, rs, c)) in by_group {
            let (m, r) = (ms / c as f64, rs / c as f64);
            report.groups.push(GroupSummary {
                method: method.to_string(),
                rdd: rdd as f64 / 1000.0,
                tf: tf as f64 / 1000.0,
                instances: c,
                mean_twt: m,
                reference_mean: r,
                percent_deviation: percent_deviation(m, r),
            });
        }
    }
    report
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DeviationReport {
    /// `method,instances,mean_twt,reference_mean,percent_deviation`
    pub fn methods_csv(&self) -> String {
        let mut out = String::from("method,instances,mean_twt,reference_mean,percent_deviation\n");
        for m in &self.methods {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                m.method,
                m.instances,
                m.mean_twt,
                m.reference_mean,
                opt(m.percent_deviation)
            );
        }
        out
    }

    /// `method,rdd,tf,instances,mean_twt,reference_mean,percent_deviation`
    pub fn groups_csv(&self) -> String {
        let mut out =
            String::from("method,rdd,tf,instances,mean_twt,reference_mean,percent_deviation\n");
        for g in &self.groups {
            let _ = writeln!(
                out,
                "{},{:.1},{:.1},{},{},{},{}",
                g.method,
                g.rdd,
                g.tf,
                g.instances,
                g.mean_twt,
                g.reference_mean,
                opt(g.percent_deviation)
            );
        }
        out
    }

    /// Human-readable summary, deviations rounded to one decimal.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for m in &self.methods {
            let dev = match m.percent_deviation {
                Some(d) => format!("{d:+.1}%"),
                None => "n/a".into(),
            };
            let _ = writeln!(
                out,
                "{:<16} {:>14.1} {:>8}  ({} instances)",
                m.method, m.mean_twt, dev, m.instances
            );
        }
        if !self.missing.is_empty() {
            let _ = writeln!(
                out,
                "{} results without a reference value",
                self.missing.len()
            );
        }
        out
    }
}
