use std::collections::BTreeMap;
use std::fmt;

use anyhow::{anyhow, bail, Context, Result};
use wpaco::experiments::analysis::{ChangeCounts, ChangeSeries};
use wpaco::experiments::sweep::{marginal_means, rows_from_csv, rows_to_csv};
use wpaco::experiments::tune::{tune_rows_from_csv, tune_rows_to_csv};
use wpaco::experiments::{
    aggregate, deviation_report, pearson, position_change_series, position_change_stats, sweep,
    tune_alpha_beta, Observation, SweepSpec, TuneRow, TuneSpec,
};
use wpaco::instance_io::{
    generate_evaluation_set, generate_instance, group_key, load_reference, serialize_orlib,
    FACTOR_GRID,
};
use wpaco::seeding::mix_seed;
use wpaco::solver::replay_check;
use wpaco::{run, GeneratorConfig, Instance};

use crate::args::*;
use crate::io::{self, ManifestRow, SolveRecord};

/// Bad invocation that clap could not catch; exits with the usage code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    Ok(pool.install(f))
}

fn by_id(instances: &[Instance]) -> BTreeMap<&str, &Instance> {
    instances.iter().map(|i| (i.id(), i)).collect()
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    let mut rows = Vec::new();
    let mut instances = Vec::new();
    if a.full_set {
        let set = generate_evaluation_set(a.n, a.per_combo, a.seed)?;
        for e in set.entries {
            rows.push(ManifestRow {
                id: e.instance.id().to_string(),
                tf: e.tf,
                rdd: e.rdd,
                seed: e.seed,
                n: a.n,
            });
            instances.push(e.instance);
        }
    } else {
        let (tf, rdd) = (
            a.tf.expect("required by clap"),
            a.rdd.expect("required by clap"),
        );
        for (name, v) in [("tf", tf), ("rdd", rdd)] {
            if !a.allow_offgrid && !FACTOR_GRID.iter().any(|g| (g - v).abs() < 1e-9) {
                return Err(usage(format!(
                    "--{name} {v} is not one of 0.2 0.4 0.6 0.8 1.0 (use --allow-offgrid)"
                )));
            }
        }
        let cfg = GeneratorConfig::new(a.n, tf, rdd, a.seed);
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        let inst = generate_instance(&cfg)?;
        rows.push(ManifestRow {
            id: inst.id().to_string(),
            tf,
            rdd,
            seed: a.seed,
            n: a.n,
        });
        instances.push(inst);
    }
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for inst in &instances {
        io::write(
            &a.out.join(format!("{}.txt", inst.id())),
            serialize_orlib(std::slice::from_ref(inst)),
        )?;
    }
    io::write_manifest(&a.out.join(io::MANIFEST), &rows)?;
    println!("wrote {} instances to {}", instances.len(), a.out.display());
    Ok(())
}

pub fn solve(a: &SolveArgs) -> Result<()> {
    if a.reps < 1 {
        return Err(usage("--reps must be at least 1"));
    }
    let loaded = io::load_instances(&a.input)?;
    let tuned: BTreeMap<String, TuneRow> = match &a.tune {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            tune_rows_from_csv(&text)?
                .into_iter()
                .map(|r| (r.instance_id.clone(), r))
                .collect()
        }
        None => BTreeMap::new(),
    };
    let mut lines = String::new();
    for algo in a.algo.algorithms() {
        let label = match (&a.label, a.algo) {
            (Some(l), AlgoChoice::Both) => format!("{l}-{algo}"),
            (Some(l), _) => l.clone(),
            (None, _) => algo.to_string(),
        };
        for (index, inst) in loaded.instances.iter().enumerate() {
            let mut cfg = a.run.base(algo);
            a.point.apply(&mut cfg);
            cfg.record_schedules = a.record_schedules;
            if a.tune.is_some() {
                let t = tuned
                    .get(inst.id())
                    .ok_or_else(|| anyhow!("tune file has no row for '{}'", inst.id()))?;
                cfg.policy.alpha = t.alpha;
                cfg.policy.beta = t.beta;
            }
            for rep in 0..a.reps {
                cfg.seed = mix_seed(a.run.seed, &[index as u64, rep as u64]);
                let mut result = run(inst, &cfg)?;
                if a.no_timestamp {
                    result.wall_ms = 0;
                }
                let trace_name = format!(
                    "{}_{}_rep{rep}.csv",
                    io::file_safe(&label),
                    io::file_safe(inst.id())
                );
                io::write(
                    &a.out.join("traces").join(trace_name),
                    result.trace.to_csv(),
                )?;
                println!(
                    "{label} {} rep {rep}: best_twt {}",
                    inst.id(),
                    result.best_twt
                );
                let record = SolveRecord {
                    label: label.clone(),
                    rep,
                    result,
                };
                lines.push_str(&serde_json::to_string(&record)?);
                lines.push('\n');
            }
        }
    }
    io::write(&a.out.join("results.jsonl"), lines)
}

pub fn sweep_cmd(a: &SweepArgs) -> Result<()> {
    let loaded = io::load_instances(&a.input)?;
    let mut rows = Vec::new();
    let mut specs = Vec::new();
    for algo in a.algo.algorithms() {
        let mut spec = SweepSpec::standard(a.run.base(algo));
        spec.repetitions = a.reps;
        spec.q0_grid = a.q0_grid.clone();
        spec.tau_max_grid = a.tau_max_grid.clone();
        if let Some(k) = &a.k_grid {
            spec.k_grid = k.clone();
        }
        spec.validate().map_err(|e| usage(e.to_string()))?;
        eprintln!(
            "{algo}: {} instances x {} combinations x {} reps",
            loaded.instances.len(),
            spec.combinations().len(),
            spec.repetitions
        );
        rows.extend(with_jobs(a.jobs, || sweep(&loaded.instances, &spec))??);
        specs.push(spec);
    }
    io::write(
        &a.out.join("sweep.csv"),
        rows_to_csv(&rows, !a.no_timestamp)?,
    )?;
    io::write(
        &a.out.join("sweep_summary.csv"),
        io::to_csv(&aggregate(&rows))?,
    )?;
    io::write(
        &a.out.join("sweep_marginals.csv"),
        io::to_csv(&marginal_means(&rows))?,
    )?;
    io::write(
        &a.out.join("sweep_config.json"),
        serde_json::to_string_pretty(&specs)? + "\n",
    )?;
    for m in marginal_means(&rows) {
        println!(
            "{} {}={} mean_twt {:.1}",
            m.algorithm, m.parameter, m.value, m.mean_twt
        );
    }
    Ok(())
}

pub fn tune(a: &TuneArgs) -> Result<()> {
    let algos = a.algo.algorithms();
    let [algo] = algos.as_slice() else {
        return Err(usage("tune takes a single algorithm"));
    };
    let loaded = io::load_instances(&a.input)?;
    let mut base = a.run.base(*algo);
    a.point.apply(&mut base);
    let mut rows = Vec::new();
    for (index, inst) in loaded.instances.iter().enumerate() {
        let spec = TuneSpec {
            budget: a.budget,
            initial_candidates: a.candidates,
            races: a.races,
            seed: mix_seed(a.run.seed, &[index as u64]),
            ..TuneSpec::default()
        };
        spec.validate().map_err(|e| usage(e.to_string()))?;
        let o = with_jobs(a.jobs, || tune_alpha_beta(inst, &spec, &base))??;
        println!(
            "{}: alpha {} beta {} mean_twt {:.1} ({} runs)",
            inst.id(),
            o.alpha,
            o.beta,
            o.mean_twt,
            o.runs_used
        );
        rows.push(TuneRow::new(inst.id(), &o));
    }
    io::write(&a.out, tune_rows_to_csv(&rows)?)
}

pub fn analyze(a: &AnalyzeArgs) -> Result<()> {
    if a.window < 1 {
        return Err(usage("--window must be at least 1"));
    }
    let loaded = io::load_instances(&a.input)?;
    let index = by_id(&loaded.instances);
    let mut stats: BTreeMap<String, ChangeCounts> = BTreeMap::new();
    let mut series: BTreeMap<String, ChangeSeries> = BTreeMap::new();
    let mut runs: BTreeMap<String, usize> = BTreeMap::new();
    for path in &a.results {
        for rec in io::read_records(path)? {
            let inst = index.get(rec.result.instance_id.as_str()).ok_or_else(|| {
                anyhow!("no instance '{}' among the inputs", rec.result.instance_id)
            })?;
            let trace = &rec.result.trace;
            let s = position_change_stats(trace, inst).with_context(|| {
                format!("{} {} rep {}", rec.label, rec.result.instance_id, rec.rep)
            })?;
            stats.entry(rec.label.clone()).or_default().merge(&s);
            let ser = position_change_series(trace, inst, a.window)?;
            series.entry(rec.label.clone()).or_default().merge(&ser)?;
            *runs.entry(rec.label.clone()).or_default() += 1;
        }
    }

    let mut fractions = String::from("method,weight,fraction\n");
    let mut corr = String::from("method,r,p,classes,runs\n");
    for (label, counts) in &stats {
        let f = counts.fractions();
        for (w, x) in &f {
            fractions.push_str(&format!("{label},{w},{x}\n"));
        }
        let xs: Vec<f64> = f.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = f.iter().map(|p| p.1).collect();
        match pearson(&xs, &ys) {
            Ok(c) => {
                println!(
                    "{label}: r = {:.3}, p = {:.3e} over {} weights, {} runs",
                    c.r, c.p, c.n, runs[label]
                );
                corr.push_str(&format!(
                    "{label},{},{},{},{}\n",
                    c.r, c.p, c.n, runs[label]
                ));
            }
            Err(e) => {
                eprintln!("{label}: no correlation ({e})");
                corr.push_str(&format!("{label},,,{},{}\n", f.len(), runs[label]));
            }
        }
    }
    let series_csv = |cum: bool| {
        let mut out = String::from("method,window_start,window_end,weight,fraction\n");
        for (label, s) in &series {
            let s = if cum { s.cumulative() } else { s.clone() };
            for line in s.to_csv().lines().skip(1) {
                out.push_str(&format!("{label},{line}\n"));
            }
        }
        out
    };
    io::write(&a.out.join("position_changes.csv"), fractions)?;
    io::write(&a.out.join("position_series.csv"), series_csv(false))?;
    io::write(
        &a.out.join("position_series_cumulative.csv"),
        series_csv(true),
    )?;
    io::write(&a.out.join("correlation.csv"), corr)
}

pub fn report(a: &ReportArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.reference)
        .with_context(|| format!("reading {}", a.reference.display()))?;
    let reference = load_reference(&text)?;
    let groups = match &a.manifest {
        Some(p) => io::manifest_groups(&io::read_manifest(p)?),
        None => BTreeMap::new(),
    };
    if (!a.exclude_tf.is_empty() || !a.exclude_rdd.is_empty()) && groups.is_empty() {
        return Err(usage("--exclude-tf/--exclude-rdd need --manifest"));
    }
    let drop_tf: Vec<u32> = a.exclude_tf.iter().map(|&t| group_key(0.0, t).1).collect();
    let drop_rdd: Vec<u32> = a.exclude_rdd.iter().map(|&r| group_key(r, 0.0).0).collect();
    let keep = |id: &str| match groups.get(id) {
        Some((rdd, tf)) => !drop_tf.contains(tf) && !drop_rdd.contains(rdd),
        None => true,
    };
    let mut obs = Vec::new();
    for p in &a.results {
        for rec in io::read_records(p)? {
            if keep(&rec.result.instance_id) {
                obs.push(Observation {
                    method: rec.label,
                    instance_id: rec.result.instance_id,
                    best_twt: rec.result.best_twt,
                });
            }
        }
    }
    let report = deviation_report(&obs, &reference, &groups);
    for (m, id) in &report.missing {
        eprintln!("warning: {m}: no reference value for '{id}', excluded");
    }
    print!("{}", report.summary_text());
    io::write(&a.out.join("methods.csv"), report.methods_csv())?;
    io::write(&a.out.join("groups.csv"), report.groups_csv())
}

pub fn replay(a: &ReplayArgs) -> Result<()> {
    let loaded = io::load_instances(&a.input)?;
    let index = by_id(&loaded.instances);
    let find = |id: &str| -> Result<&Instance> {
        index
            .get(id)
            .copied()
            .ok_or_else(|| anyhow!("no instance '{id}' among the inputs"))
    };
    let mut failures = 0usize;
    let mut checked = 0usize;
    let wanted = |i: usize| a.row.is_none_or(|r| r == i);
    if let Some(path) = &a.results {
        for (i, rec) in io::read_records(path)?
            .into_iter()
            .enumerate()
            .filter(|(i, _)| wanted(*i))
        {
            let rep = replay_check(&rec.result, find(&rec.result.instance_id)?)?;
            checked += 1;
            if !rep.matches {
                failures += 1;
                println!(
                    "record {i}: diverges at iteration {:?}",
                    rep.first_divergence
                );
            }
        }
    } else if let Some(dir) = &a.sweep {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))
        };
        let specs: Vec<SweepSpec> = serde_json::from_str(&read("sweep_config.json")?)?;
        let rows = rows_from_csv(&read("sweep.csv")?)?;
        for (i, row) in rows.iter().enumerate().filter(|(i, _)| wanted(*i)) {
            let spec = specs
                .iter()
                .find(|s| s.base.algorithm == row.algorithm)
                .ok_or_else(|| anyhow!("no sweep config for {}", row.algorithm))?;
            let mut cfg = spec.config_for(row.combination(), row.seed);
            cfg.record_schedules = true;
            let result = run(find(&row.instance_id)?, &cfg)?;
            let mut again = row.clone();
            again.best_twt = result.best_twt;
            checked += 1;
            let same =
                rows_to_csv(&[again], false)? == rows_to_csv(std::slice::from_ref(row), false)?;
            if !same || !replay_check(&result, find(&row.instance_id)?)?.matches {
                failures += 1;
                println!(
                    "row {i}: recorded {} replayed {}",
                    row.best_twt, result.best_twt
                );
            }
        }
    } else {
        return Err(usage("replay needs --results or --sweep"));
    }
    if a.row.is_some() && checked == 0 {
        bail!("row {} does not exist", a.row.unwrap_or_default());
    }
    println!("{checked} replayed, {failures} mismatched");
    if failures > 0 {
        bail!("{failures} of {checked} replays did not match");
    }
    Ok(())
}
