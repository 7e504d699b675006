//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. `ACCEPTANCE_ONLY=2,3` limits the run to a subset.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wpaco::construction::{construct_schedule, selection_probabilities, ConstructionState};
use wpaco::experiments::sweep::rows_to_csv;
use wpaco::experiments::{
    marginal, marginal_means, pearson, position_change_stats, sweep, ChangeCounts, SweepSpec,
};
use wpaco::instance_io::{generate_evaluation_set, generate_instance};
use wpaco::model::{is_permutation, total_weighted_tardiness};
use wpaco::pheromone::{
    AgePopulation, EvictionRule, PheromoneParams, PheromoneSource, WeightedPopulation,
};
use wpaco::seeding::mix_seed;
use wpaco::solver::replay_check;
use wpaco::{
    run, Algorithm, ConstructionPolicy, GeneratorConfig, Heuristic, Instance, Rule, RunResult,
    Schedule, SolverConfig,
};

const MASTER: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn optimum(inst: &Instance) -> u64 {
    // Heap's algorithm over all n! orders
    let n = inst.len();
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    let mut best = total_weighted_tardiness(inst, &a);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            best = best.min(total_weighted_tardiness(inst, &a));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

fn oracle_optimality() -> Outcome {
    let instances: Vec<Instance> = (0..20)
        .map(|i| {
            generate_instance(&GeneratorConfig::new(
                8,
                0.6,
                0.6,
                mix_seed(MASTER, &[1, i]),
            ))
            .unwrap()
        })
        .collect();
    let optima: Vec<u64> = instances.iter().map(optimum).collect();
    let mut parts = Vec::new();
    let mut pass = true;
    for algo in [Algorithm::Paco, Algorithm::Wpaco] {
        let mut hits = 0;
        for (i, inst) in instances.iter().enumerate() {
            for s in 0..20 {
                let cfg = SolverConfig::new(algo, mix_seed(MASTER, &[2, i as u64, s]))
                    .with_iterations(2000);
                if run(inst, &cfg).unwrap().best_twt == optima[i] {
                    hits += 1;
                }
            }
        }
        let rate = hits as f64 / 400.0;
        pass &= rate >= 0.9;
        parts.push(format!("{algo} {hits}/400 optimal ({:.1}%)", 100.0 * rate));
    }
    outcome(pass, format!("{} [need >= 90%]", parts.join(", ")))
}

struct MiniSetRuns {
    /// algorithm -> per-instance mean best TWT
    means: BTreeMap<Algorithm, Vec<f64>>,
    changes: BTreeMap<Algorithm, ChangeCounts>,
    /// same counts restricted to instances with TF >= 0.6
    tardy_changes: BTreeMap<Algorithm, ChangeCounts>,
}

fn mini_set_runs(iterations: usize, reps: u64) -> MiniSetRuns {
    let set = generate_evaluation_set(100, 1, MASTER).unwrap();
    let mut means = BTreeMap::new();
    let mut changes = BTreeMap::new();
    let mut tardy_changes = BTreeMap::new();
    for algo in [Algorithm::Paco, Algorithm::Wpaco] {
        let mut per = Vec::new();
        let mut counts = ChangeCounts::default();
        let mut tardy = ChangeCounts::default();
        for (i, entry) in set.entries.iter().enumerate() {
            let inst = &entry.instance;
            let mut sum = 0u64;
            for rep in 0..reps {
                let mut cfg = SolverConfig::new(algo, mix_seed(MASTER, &[3, i as u64, rep]))
                    .with_iterations(iterations);
                cfg.record_schedules = true;
                let r = run(inst, &cfg).unwrap();
                sum += r.best_twt;
                let c = position_change_stats(&r.trace, inst).unwrap();
                if entry.tf >= 0.6 - 1e-9 {
                    tardy.merge(&c);
                }
                counts.merge(&c);
            }
            per.push(sum as f64 / reps as f64);
        }
        means.insert(algo, per);
        changes.insert(algo, counts);
        tardy_changes.insert(algo, tardy);
    }
    MiniSetRuns {
        means,
        changes,
        tardy_changes,
    }
}

fn method_ordering(full: &MiniSetRuns, reduced: &MiniSetRuns) -> Outcome {
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let paco = &full.means[&Algorithm::Paco];
    let wpaco = &full.means[&Algorithm::Wpaco];
    let (mp, mw) = (mean(paco), mean(wpaco));
    let wins = paco.iter().zip(wpaco).filter(|(p, w)| w < p).count();
    let ties = paco.iter().zip(wpaco).filter(|(p, w)| w == p).count();
    let n = paco.len();
    let (rp, rw) = (
        mean(&reduced.means[&Algorithm::Paco]),
        mean(&reduced.means[&Algorithm::Wpaco]),
    );
    let pass = mw < mp && wins as f64 >= 0.6 * n as f64 && rw < rp;
    outcome(
        pass,
        format!(
            "10000 iterations: mean TWT paco {mp:.1} vs wpaco {mw:.1}, wpaco strictly better on {wins}/{n} instances ({ties} ties, {wins}/{} of the untied); 2000 iterations: paco {rp:.1} vs wpaco {rw:.1} [need wpaco < paco on both aggregates and on >= 60% of instances]",
            n - ties
        ),
    )
}

fn weight_r(counts: &ChangeCounts) -> Option<f64> {
    let f = counts.fractions();
    let xs: Vec<f64> = f.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = f.iter().map(|p| p.1).collect();
    pearson(&xs, &ys).ok().map(|c| c.r)
}

fn correlation(runs: &MiniSetRuns) -> Outcome {
    let mut parts = Vec::new();
    let mut rs = BTreeMap::new();
    for (algo, counts) in &runs.changes {
        let f = counts.fractions();
        let xs: Vec<f64> = f.iter().map(|p| p.0 as f64).collect();
        let ys: Vec<f64> = f.iter().map(|p| p.1).collect();
        match pearson(&xs, &ys) {
            Ok(c) => {
                rs.insert(*algo, c.r);
                let shown: Vec<String> = f.iter().map(|(w, x)| format!("{w}:{x:.4}")).collect();
                parts.push(format!(
                    "{algo} r={:.3} p={:.2e} [{}]",
                    c.r,
                    c.p,
                    shown.join(" ")
                ));
            }
            Err(e) => parts.push(format!("{algo}: {e}")),
        }
    }
    let tardy: Vec<String> = runs
        .tardy_changes
        .iter()
        .map(|(a, c)| format!("{a} r={:.3}", weight_r(c).unwrap_or(f64::NAN)))
        .collect();
    parts.push(format!(
        "TF >= 0.6 subset only (informational): {}",
        tardy.join(", ")
    ));
    let w_ok = rs.get(&Algorithm::Wpaco).is_some_and(|r| *r <= -0.8);
    let p_ok = rs.get(&Algorithm::Paco).is_some_and(|r| r.abs() <= 0.5);
    outcome(
        w_ok && p_ok,
        format!(
            "{} [need wpaco r <= -0.8: {}, paco |r| <= 0.5: {}]",
            parts.join("; "),
            if w_ok { "ok" } else { "no" },
            if p_ok { "ok" } else { "no" }
        ),
    )
}

fn sweep_shape(iterations: usize) -> Outcome {
    let set = generate_evaluation_set(100, 1, MASTER).unwrap();
    let instances: Vec<Instance> = set.instances().cloned().collect();
    let mut rows = Vec::new();
    for algo in [Algorithm::Paco, Algorithm::Wpaco] {
        let mut spec = SweepSpec::standard(
            SolverConfig::new(algo, mix_seed(MASTER, &[4])).with_iterations(iterations),
        );
        spec.repetitions = 1;
        rows.extend(sweep(&instances, &spec).unwrap());
    }
    let m = marginal_means(&rows);
    let mut pass = true;
    let mut parts = Vec::new();
    for algo in [Algorithm::Paco, Algorithm::Wpaco] {
        let get = |p: &str, v: f64| marginal(&m, algo, p, v).unwrap();
        let (q1, q9) = (get("q0", 0.1), get("q0", 0.9));
        let (t1, t10) = (get("tau_max", 1.0), get("tau_max", 10.0));
        pass &= q1 < q9 && t1 < t10;
        parts.push(format!(
            "{algo} q0 0.1/0.5/0.9 = {q1:.0}/{:.0}/{q9:.0}, tau_max 1/3/10 = {t1:.0}/{:.0}/{t10:.0}",
            get("q0", 0.5),
            get("tau_max", 3.0)
        ));
    }
    outcome(
        pass,
        format!(
            "{} rows, {iterations} iterations; {} [need q0=0.1 < q0=0.9 and tau_max=1 < tau_max=10 for both]",
            rows.len(),
            parts.join("; ")
        ),
    )
}

fn random_policy(rng: &mut ChaCha8Rng) -> ConstructionPolicy {
    ConstructionPolicy {
        rule: if rng.random_bool(0.5) {
            Rule::Summation
        } else {
            Rule::Plain
        },
        heuristic: if rng.random_bool(0.5) {
            Heuristic::Mdd
        } else {
            Heuristic::Edd
        },
        alpha: rng.random_range(500..=3000) as f64 / 1000.0,
        beta: rng.random_range(500..=3000) as f64 / 1000.0,
        q0: [0.0, 0.1, 0.5, 0.9][rng.random_range(0..4)],
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize) -> Instance {
    let tf = [0.2, 0.4, 0.6, 0.8, 1.0][rng.random_range(0..5)];
    let rdd = [0.2, 0.4, 0.6, 0.8, 1.0][rng.random_range(0..5)];
    generate_instance(&GeneratorConfig::new(n, tf, rdd, rng.random())).unwrap()
}

fn metamorphic() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(MASTER, &[5]));
    let mut failures = Vec::new();
    for t in 0..50 {
        let n = rng.random_range(4..=25);
        let inst = random_instance(&mut rng, n);
        let mut paco = SolverConfig::new(Algorithm::Paco, rng.random())
            .with_iterations(rng.random_range(20..=150));
        paco.ants = rng.random_range(1..=10);
        paco.k = rng.random_range(1..=12);
        paco.tau_max = [1.0, 3.0, 10.0][rng.random_range(0..3)];
        paco.policy = random_policy(&mut rng);
        paco.seed_population = rng.random_bool(0.3);
        paco.record_schedules = true;
        let mut wpaco = paco.clone();
        wpaco.algorithm = Algorithm::Wpaco;

        let unit = inst.with_unit_weights();
        let a = run(&unit, &paco).unwrap();
        let b = run(&unit, &wpaco).unwrap();
        if a.trace != b.trace || a.best_schedule != b.best_schedule {
            failures.push(format!("triple {t} (unit-weight instance)"));
        }
        // same question on the weighted objective: insert every job once
        let mut forced = wpaco.clone();
        forced.unit_insert_weights = true;
        let c = run(&inst, &paco).unwrap();
        let d = run(&inst, &forced).unwrap();
        if c.trace != d.trace || c.best_schedule != d.best_schedule {
            failures.push(format!("triple {t} (unit insertion weights)"));
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "50/50 triples bitwise-identical traces (unit-weight instance and unit insertion weights)".into()
        } else {
            format!("mismatches: {}", failures.join(", "))
        },
    )
}

fn random_schedule(rng: &mut ChaCha8Rng, n: usize) -> Schedule {
    let mut v: Vec<usize> = (0..n).collect();
    v.shuffle(rng);
    Schedule::new(v).unwrap()
}

fn check_bounds<S: PheromoneSource>(src: &S, p: &PheromoneParams) -> Result<(), String> {
    let hi = p.tau_max() * (1.0 + 1e-12);
    for i in 0..src.size() {
        for j in 0..src.size() {
            let t = src.tau(i, j);
            if !(t >= p.tau0() && t <= hi) {
                return Err(format!(
                    "tau({i},{j}) = {t} outside [{}, {}]",
                    p.tau0(),
                    p.tau_max()
                ));
            }
        }
    }
    Ok(())
}

fn invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(MASTER, &[6]));
    let mut violations = Vec::new();
    let sequences = 100_000;
    let mut ops = 0usize;
    for s in 0..sequences {
        let n = rng.random_range(1..=8);
        let k = rng.random_range(1..=12);
        let tau0 = rng.random_range(1e-6..0.5);
        let tau_max = tau0 + rng.random_range(0.0..10.0);
        let params = PheromoneParams::new(tau0, tau_max, k, 0.1).unwrap();
        let len = rng.random_range(1..=12);
        let result = if s % 2 == 0 {
            let rule = if rng.random_bool(0.5) {
                EvictionRule::Overflow
            } else {
                EvictionRule::StrictText
            };
            let mut pop = WeightedPopulation::new(n, params, rule);
            let weights: Vec<u64> = (0..n).map(|_| rng.random_range(1..=15)).collect();
            (0..len).try_for_each(|_| {
                let sched = random_schedule(&mut rng, n);
                pop.insert_weighted(&sched, |j| weights[j]);
                ops += 1;
                pop.check_invariants()?;
                if pop.counts() != pop.recount().as_slice() {
                    return Err("counts differ from recount".to_string());
                }
                check_bounds(&pop, &params)
            })
        } else {
            let mut pop = AgePopulation::new(n, params);
            (0..len).try_for_each(|_| {
                pop.insert(random_schedule(&mut rng, n));
                ops += 1;
                pop.check_invariants()?;
                if pop.counts() != pop.recount().as_slice() {
                    return Err("counts differ from recount".to_string());
                }
                check_bounds(&pop, &params)
            })
        };
        if let Err(e) = result {
            violations.push(format!("sequence {s}: {e}"));
        }
    }

    let states = 10_000;
    let mut worst = 0.0f64;
    for s in 0..states {
        let n = rng.random_range(1..=30);
        let inst = random_instance(&mut rng, n);
        let policy = random_policy(&mut rng);
        let k = rng.random_range(1..=20);
        let params = PheromoneParams::new(wpaco::pheromone::init_tau0(&inst), 1.0, k, 0.1).unwrap();
        let mut pop = WeightedPopulation::new(n, params, EvictionRule::Overflow);
        for _ in 0..rng.random_range(0..=5) {
            pop.insert(&random_schedule(&mut rng, n), &inst);
        }
        let full = random_schedule(&mut rng, n);
        let cut = rng.random_range(0..n);
        let state = ConstructionState::from_prefix(&inst, &full.order()[..cut], &pop).unwrap();
        let probs = selection_probabilities(&state, &inst, &policy, &pop);
        let sum: f64 = probs.iter().sum();
        worst = worst.max((sum - 1.0).abs());
        if (sum - 1.0).abs() > 1e-9 || full.order()[..cut].iter().any(|&j| probs[j] != 0.0) {
            violations.push(format!("state {s}: probabilities sum to {sum}"));
        }
        let built = construct_schedule(&inst, &policy, &mut pop, &mut rng);
        if built.len() != n || !is_permutation(built.order()) {
            violations.push(format!(
                "state {s}: constructed schedule is not a permutation"
            ));
        }
    }
    outcome(
        violations.is_empty(),
        format!(
            "{sequences} update sequences ({ops} insertions), {states} construction states, max |sum p - 1| = {worst:.1e}, {} violations{}",
            violations.len(),
            violations.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

fn one_based(v: &[usize]) -> Schedule {
    Schedule::from_one_based(v).unwrap()
}

fn golden() -> Outcome {
    let mut fails = Vec::new();
    let params = PheromoneParams::new(0.2, 1.0, 4, 0.1).unwrap();

    let mut pop = AgePopulation::new(4, params);
    for s in [[4, 2, 1, 3], [3, 2, 1, 4], [3, 1, 2, 4], [1, 4, 2, 3]] {
        if pop.insert(one_based(&s)).is_some() {
            fails.push("population evicted before it was full");
        }
    }
    if pop.ell(0, 2) != 2 || (pop.tau(0, 2) - 0.6).abs() > 1e-12 {
        fails.push("FIFO example: tau for job 3 at position 1 is not 0.6");
    }
    if pop.insert(one_based(&[2, 3, 4, 1])) != Some(one_based(&[4, 2, 1, 3])) {
        fails.push("FIFO example: oldest schedule (4,2,1,3) not evicted");
    }
    let members: Vec<Vec<usize>> = pop.members().map(Schedule::to_one_based).collect();
    if members
        != [
            vec![3, 2, 1, 4],
            vec![3, 1, 2, 4],
            vec![1, 4, 2, 3],
            vec![2, 3, 4, 1],
        ]
    {
        fails.push("FIFO example: population after update differs");
    }

    let cols = [vec![4, 3], vec![2, 2], vec![1, 1], vec![3, 4]]
        .iter()
        .map(|c| c.iter().map(|j| j - 1).collect())
        .collect();
    let mut wp = WeightedPopulation::from_columns(cols, params, EvictionRule::Overflow).unwrap();
    let weights = [1u64, 2, 3, 1];
    wp.insert_weighted(&one_based(&[3, 1, 2, 4]), |j| weights[j]);
    let got: Vec<Vec<usize>> = (0..4)
        .map(|i| wp.column(i).iter().map(|j| j + 1).collect())
        .collect();
    let want = vec![
        vec![3, 3, 3, 3],
        vec![2, 2, 1],
        vec![1, 1, 2, 2],
        vec![3, 4, 4],
    ];
    if got != want {
        fails.push("weighted example: multisets after the weighted update differ");
    }
    // overflow-only eviction: only position 4 loses its oldest entry, job 4
    if wp.ell(3, 3) != 2 || wp.ell(3, 2) != 1 || wp.ell(1, 1) != 2 {
        fails.push("weighted example: eviction touched the wrong entries");
    }
    outcome(
        fails.is_empty(),
        if fails.is_empty() {
            "FIFO and weighted update examples reproduce exactly".into()
        } else {
            fails.join("; ")
        },
    )
}

fn determinism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(MASTER, &[8]));
    let mut fails = Vec::new();
    let mut checked = 0;
    for t in 0..12 {
        let algo = [Algorithm::Aco, Algorithm::Paco, Algorithm::Wpaco][t % 3];
        let n = rng.random_range(10..=40);
        let inst = random_instance(&mut rng, n);
        let mut cfg =
            SolverConfig::new(algo, rng.random()).with_iterations(rng.random_range(50..=300));
        cfg.policy = random_policy(&mut rng);
        cfg.record_schedules = t % 2 == 0;
        let mut stored = run(&inst, &cfg).unwrap();
        stored.wall_ms = 0;
        let line = serde_json::to_string(&stored).unwrap();
        let back: RunResult = serde_json::from_str(&line).unwrap();
        let report = replay_check(&back, &inst).unwrap();
        let mut again = run(&inst, &back.config).unwrap();
        again.wall_ms = 0;
        checked += 1;
        if !report.matches || serde_json::to_string(&again).unwrap() != line {
            fails.push(format!("solve row {t}"));
        }
    }
    let set = generate_evaluation_set(20, 1, MASTER).unwrap();
    let instances: Vec<Instance> = set.instances().cloned().collect();
    for algo in [Algorithm::Paco, Algorithm::Wpaco] {
        let mut spec = SweepSpec::standard(SolverConfig::new(algo, 99).with_iterations(30));
        spec.repetitions = 2;
        let rows = sweep(&instances, &spec).unwrap();
        for row in rows.iter().step_by(37) {
            let inst = instances
                .iter()
                .find(|i| i.id() == row.instance_id)
                .unwrap();
            let mut cfg = spec.config_for(row.combination(), row.seed);
            cfg.record_schedules = true;
            let r = run(inst, &cfg).unwrap();
            let mut replayed = row.clone();
            replayed.best_twt = r.best_twt;
            checked += 1;
            let same = rows_to_csv(&[replayed], false).unwrap()
                == rows_to_csv(std::slice::from_ref(row), false).unwrap();
            if !same || !replay_check(&r, inst).unwrap().matches {
                fails.push(format!("{algo} sweep row {}/{}", row.instance_id, row.rep));
            }
        }
    }
    outcome(
        fails.is_empty(),
        format!(
            "{checked} solve/sweep rows replayed, {} mismatches {}",
            fails.len(),
            fails.join(", ")
        ),
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |c: u32| only.as_ref().is_none_or(|o| o.contains(&c));

    let mut results: Vec<(u32, &str, Outcome, f64)> = Vec::new();
    let mut timed = |c: u32, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        if want(c) {
            let t = Instant::now();
            let o = f();
            let secs = t.elapsed().as_secs_f64();
            println!(
                "{} [{c}] {name}: {} ({secs:.1}s)",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
            results.push((c, name, o, secs));
        }
    };

    timed(7, "golden update semantics", &mut golden);
    timed(5, "metamorphic equivalence", &mut metamorphic);
    timed(6, "invariant suite", &mut invariants);
    timed(8, "replay determinism", &mut determinism);
    timed(1, "oracle optimality n=8", &mut oracle_optimality);
    if want(2) || want(3) {
        let t = Instant::now();
        let full = mini_set_runs(10_000, 5);
        let reduced = mini_set_runs(2000, 5);
        println!("(mini-set runs took {:.0}s)", t.elapsed().as_secs_f64());
        timed(2, "wpaco vs paco ordering", &mut || {
            method_ordering(&full, &reduced)
        });
        timed(3, "weight / position-change correlation", &mut || {
            correlation(&full)
        });
    }
    timed(4, "parameter sweep shape", &mut || sweep_shape(10_000));

    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
