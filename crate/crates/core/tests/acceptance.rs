//! Acceptance suite. Runs every criterion, prints one PASS/FAIL/SKIP line
//! each and exits nonzero if any criterion failed.
//!
//! The external-data criterion reads its files from the environment:
//! `WTIM_BM_ANNOTATIONS`, `WTIM_BM_GOLD`, `WTIM_AC_ANNOTATIONS`,
//! `WTIM_AC_GOLD`, and optionally `WTIM_DATA_COLUMNS` (default `wtl`).

mod common;

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wtim::baselines::{glad_expected_loglik, glad_gradient, zc_estep, GladParams};
use wtim::bench::{assignment_vs_random, mean_std, simulate_seed, Method, SimulationBench};
use wtim::inference::{
    correct_rates, estep_posteriors, run_wtim, update_abilities, LabelPosterior,
};
use wtim::io::{accuracy, parse_annotations, parse_gold, write_task_results, ParseOptions};
use wtim::model::{
    annotation_likelihood, confidence, difficulty_weight, most_discriminating_difficulty, Ability,
    Confidence, Difficulty,
};
use wtim::sim::{run_assignment, AssignmentConfig, Phase, PopulationSpec, PHASE_ONE_REDUNDANCY};
use wtim::{Dataset, InferenceConfig, LabelId};

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

type Criterion = (&'static str, fn() -> Verdict);

const SEEDS: u64 = 30;

fn simulation_benchmark() -> Verdict {
    let start = Instant::now();
    let bench = SimulationBench {
        spec: PopulationSpec::standard(4),
        seeds: (0..SEEDS).collect(),
        methods: Method::ALL.to_vec(),
        config: InferenceConfig::default(),
    };
    let (report, _) = match bench.run() {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("benchmark error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let mean = |m: &str| {
        report
            .row(&bench.name(), m)
            .and_then(|r| r.accuracy)
            .unwrap_or(f64::NAN)
    };
    let (mv, wmv, wtim) = (mean("mv"), mean("wmv"), mean("wtim"));
    let margin = wtim - mv >= 0.08;
    let vs_wmv = wtim >= wmv - 0.01;
    let fast = secs < 60.0;
    let summary: Vec<String> = Method::ALL
        .iter()
        .map(|m| format!("{}={:.3}", m, mean(m.name())))
        .collect();
    verdict(
        margin && vs_wmv && fast,
        format!(
            "{}; wtim-mv={:+.3} (need >= 0.08: {}), wtim-wmv={:+.3} (need >= -0.01: {}), {:.1}s (need < 60: {})",
            summary.join(" "),
            wtim - mv,
            ok_str(margin),
            wtim - wmv,
            ok_str(vs_wmv),
            secs,
            ok_str(fast),
        ),
    )
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "MISSED"
    }
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let inst = common::random_instance(&mut rng, 5, 4, 3);
        let ds = inst.dataset();
        let d: Vec<f64> = (0..inst.n).map(|_| rand::Rng::gen(&mut rng)).collect();
        let e: Vec<f64> = (0..inst.m).map(|_| rand::Rng::gen(&mut rng)).collect();
        let acc: Vec<f64> = (0..inst.m)
            .map(|_| rand::Rng::gen_range(&mut rng, 0.01..0.99))
            .collect();

        let dd: Vec<_> = d.iter().map(|&x| Difficulty::new(x).unwrap()).collect();
        let ee: Vec<_> = e.iter().map(|&x| Ability::new(x).unwrap()).collect();
        let got = estep_posteriors(&ds, &dd, &ee).unwrap();
        worst = worst.max(max_gap(&got, &common::wtim_posteriors(&inst, &d, &e)));

        let got = zc_estep(&ds, &acc);
        worst = worst.max(max_gap(&got, &common::zc_posteriors(&inst, &acc)));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-9 && secs < 5.0,
        format!(
            "200 instances, max |posterior gap| = {worst:.2e} (tol 1e-9), {secs:.2}s (need < 5)"
        ),
    )
}

fn max_gap(got: &[LabelPosterior<f64>], want: &[Vec<f64>]) -> f64 {
    got.iter()
        .zip(want)
        .flat_map(|(g, w)| g.probs().iter().zip(w).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

fn boundary_suite() -> Verdict {
    let start = Instant::now();
    let mut failures = Vec::new();
    for k in 2..=6 {
        for i in 0..=100 {
            let e = Ability::new(i as f64 / 100.0).unwrap();
            let at0 = confidence(Difficulty::new(0.0).unwrap(), e, k)
                .unwrap()
                .get();
            let at1 = confidence(Difficulty::new(1.0).unwrap(), e, k)
                .unwrap()
                .get();
            if at0 != 1.0 {
                failures.push(format!("confidence(0,{},{k})={at0}", e.get()));
            }
            if at1 != 1.0 / k as f64 {
                failures.push(format!("confidence(1,{},{k})={at1}", e.get()));
            }
        }
    }
    for (d, want) in [(0.0, 0.0), (0.4, 1.0), (1.0, 0.0)] {
        let w = difficulty_weight(Difficulty::new(d).unwrap());
        if w != want {
            failures.push(format!("difficulty_weight({d})={w}"));
        }
    }
    let mut worst_norm: f64 = 0.0;
    for k in 2..=8 {
        for i in 1..=50 {
            let p = Confidence::new(i as f64 / 50.0).unwrap();
            for truth in 0..k {
                let total: f64 = (0..k)
                    .map(|a| annotation_likelihood(LabelId(a), LabelId(truth), p, k).unwrap())
                    .sum();
                worst_norm = worst_norm.max((total - 1.0).abs());
            }
        }
    }
    if worst_norm > 1e-12 {
        failures.push(format!("likelihood normalization off by {worst_norm:e}"));
    }
    let mut argmaxes = Vec::new();
    for i in 0..=12 {
        let e2 = 0.1 + 0.05 * i as f64;
        let d = most_discriminating_difficulty(e2 + 0.25, e2, 1e-3).unwrap();
        argmaxes.push(d);
        if !(0.3..=0.5).contains(&d) {
            failures.push(format!("argmax at ({:.2},{e2:.2}) = {d}", e2 + 0.25));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 1.0 {
        failures.push(format!("took {secs:.2}s"));
    }
    let lo = argmaxes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = argmaxes.iter().copied().fold(0.0, f64::max);
    let detail = format!(
        "norm err {worst_norm:.1e}, gap-0.25 argmax in [{lo:.3}, {hi:.3}], {secs:.3}s{}",
        if failures.is_empty() {
            String::new()
        } else {
            format!("; {}", failures.join("; "))
        }
    );
    verdict(failures.is_empty(), detail)
}

fn update_fidelity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..100 {
        let inst = common::random_instance(&mut rng, 8, 6, 4);
        let ds = inst.dataset();
        let labels: Vec<LabelId> = (0..inst.n)
            .map(|_| LabelId(rand::Rng::gen_range(&mut rng, 0..inst.k)))
            .collect();
        let d = rand::Rng::gen::<f64>(&mut rng);
        let uniform = vec![Difficulty::new(d).unwrap(); inst.n];
        let weighted = update_abilities(&ds, &labels, &uniform).unwrap();
        let plain = correct_rates::<f64>(&ds, &labels);
        if weighted != plain {
            mismatches += 1;
        }
    }
    // one worker: correct on a task at d = 0.4, wrong on a task at d = 0.2
    let ds = Dataset::from_triples(2, &[(0, 0, 0), (0, 1, 1)]).unwrap();
    let worked = update_abilities(
        &ds,
        &[LabelId(0), LabelId(0)],
        &[Difficulty::new(0.4).unwrap(), Difficulty::new(0.2).unwrap()],
    )
    .unwrap()[0]
        .get();
    verdict(
        mismatches == 0 && worked == 2.0 / 3.0,
        format!("uniform-difficulty mismatches {mismatches}/100, worked example {worked} (want 2/3 exactly)"),
    )
}

fn convergence_and_determinism() -> Verdict {
    let spec = PopulationSpec::standard(4);
    let config = InferenceConfig::default();
    let mut max_iter = 0;
    let mut unconverged = Vec::new();
    let mut differing = Vec::new();
    for seed in 0..SEEDS {
        let run = || {
            let (_, ds) = simulate_seed(&spec, seed).unwrap();
            let state = run_wtim::<f64>(&ds, &config).unwrap();
            (
                write_task_results(&ds, &state),
                state.iteration,
                state.converged,
            )
        };
        let (a, iters, converged) = run();
        let (b, _, _) = run();
        max_iter = max_iter.max(iters);
        if !converged {
            unconverged.push(seed);
        }
        if a.as_bytes() != b.as_bytes() {
            differing.push(seed);
        }
    }
    verdict(
        max_iter <= 100 && unconverged.is_empty() && differing.is_empty(),
        format!(
            "{SEEDS} seeds, max iterations {max_iter}, unconverged {unconverged:?}, non-identical outputs {differing:?}"
        ),
    )
}

fn assignment() -> Verdict {
    let spec = PopulationSpec::standard(4);
    let config = AssignmentConfig::default();
    let mut problems = Vec::new();
    for (seed, budget) in [(0u64, 300usize), (1, 500), (2, 777), (3, 1000), (4, 5000)] {
        let (pop, _) = simulate_seed(&spec, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = run_assignment(&pop, budget, &config, &mut rng).unwrap();
        let slots = &out.plan.slots;
        let n = pop.tasks.len();
        let cap = budget.min(n * pop.workers.len());
        if slots.len() > budget || slots.len() != cap {
            problems.push(format!("budget {budget}: {} slots", slots.len()));
        }
        let pairs: HashSet<_> = slots.iter().map(|s| (s.worker, s.task)).collect();
        if pairs.len() != slots.len() {
            problems.push(format!("budget {budget}: duplicate pair"));
        }
        let switch = slots
            .iter()
            .position(|s| s.phase == Phase::Matched)
            .unwrap_or(slots.len());
        let tail_random = slots[switch..].iter().any(|s| s.phase == Phase::Random);
        if switch != PHASE_ONE_REDUNDANCY * n || tail_random {
            problems.push(format!("budget {budget}: phase switch at slot {switch}"));
        }
    }
    let mut random = Vec::new();
    let mut assigned = Vec::new();
    for seed in 0..SEEDS {
        let (r, a) = assignment_vs_random(&spec, seed, 5 * spec.n, &config).unwrap();
        random.push(r);
        assigned.push(a);
    }
    let (r, _) = mean_std(&random);
    let (a, _) = mean_std(&assigned);
    if a < r {
        problems.push(format!("assigned mean {a:.4} < random mean {r:.4}"));
    }
    verdict(
        problems.is_empty(),
        format!(
            "budget 5n over {SEEDS} paired seeds: assigned {a:.4} vs random {r:.4}{}",
            if problems.is_empty() {
                String::new()
            } else {
                format!("; {}", problems.join("; "))
            }
        ),
    )
}

fn external_datasets() -> Verdict {
    let columns = std::env::var("WTIM_DATA_COLUMNS").unwrap_or_else(|_| "wtl".into());
    let options = ParseOptions {
        k: None,
        columns: match columns.parse() {
            Ok(c) => c,
            Err(e) => return Verdict::Fail(format!("WTIM_DATA_COLUMNS: {e}")),
        },
    };
    let sets = [("BM", "WTIM_BM", 0.696), ("AC", "WTIM_AC", 0.7597)];
    let mut lines = Vec::new();
    let mut ok = true;
    let mut any = false;
    for (name, prefix, target) in sets {
        let (Ok(ann), Ok(gold)) = (
            std::env::var(format!("{prefix}_ANNOTATIONS")),
            std::env::var(format!("{prefix}_GOLD")),
        ) else {
            lines.push(format!("{name}: files not supplied"));
            continue;
        };
        any = true;
        let load = || -> wtim::Result<(f64, f64)> {
            let text = std::fs::read_to_string(&ann)
                .map_err(|e| wtim::Error::Config(format!("{ann}: {e}")))?;
            let gold_text = std::fs::read_to_string(&gold)
                .map_err(|e| wtim::Error::Config(format!("{gold}: {e}")))?;
            let ds = parse_gold(&gold_text, parse_annotations(&text, &options)?)?;
            let config = InferenceConfig::default();
            let mv = accuracy(&Method::Mv.run::<f64>(&ds, &config)?.labels(), ds.gold())?;
            let wt = accuracy(&Method::Wtim.run::<f64>(&ds, &config)?.labels(), ds.gold())?;
            Ok((mv, wt))
        };
        match load() {
            Ok((mv, wt)) => {
                let pass = (mv - target).abs() <= 0.005 && wt >= mv - 0.005;
                ok &= pass;
                lines.push(format!(
                    "{name}: mv {mv:.4} (target {target}), wtim {wt:.4}"
                ));
            }
            Err(e) => {
                ok = false;
                lines.push(format!("{name}: {e}"));
            }
        }
    }
    if !any {
        return Verdict::Skip(lines.join("; "));
    }
    verdict(ok, lines.join("; "))
}

fn glad_gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let inst = common::random_instance(&mut rng, 5, 4, 3);
        let ds = inst.dataset();
        let mut params = GladParams::<f64>::new(inst.n, inst.m);
        for a in params.ability.iter_mut() {
            *a = rand::Rng::gen_range(&mut rng, -1.0..2.0);
        }
        for g in params.log_difficulty.iter_mut() {
            *g = rand::Rng::gen_range(&mut rng, -1.0..1.0);
        }
        let posteriors: Vec<LabelPosterior<f64>> = (0..inst.n)
            .map(|_| {
                LabelPosterior::from_weights(
                    (0..inst.k)
                        .map(|_| rand::Rng::gen_range(&mut rng, 0.05..1.0))
                        .collect(),
                )
            })
            .collect();
        let analytic = glad_gradient(&ds, &posteriors, &params);
        let f = |p: &GladParams<f64>| glad_expected_loglik(&ds, &posteriors, p);
        for j in 0..inst.m {
            let (mut up, mut down) = (params.clone(), params.clone());
            up.ability[j] += h;
            down.ability[j] -= h;
            let fd = (f(&up) - f(&down)) / (2.0 * h);
            worst = worst.max(rel_err(analytic.ability[j], fd));
        }
        for i in 0..inst.n {
            let (mut up, mut down) = (params.clone(), params.clone());
            up.log_difficulty[i] += h;
            down.log_difficulty[i] -= h;
            let fd = (f(&up) - f(&down)) / (2.0 * h);
            worst = worst.max(rel_err(analytic.log_difficulty[i], fd));
        }
    }
    verdict(
        worst <= 1e-4,
        format!("20 instances, max relative error {worst:.2e} (tol 1e-4)"),
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("simulation benchmark", simulation_benchmark),
        ("oracle equivalence", oracle_equivalence),
        ("model boundaries", boundary_suite),
        ("update fidelity", update_fidelity),
        ("convergence and determinism", convergence_and_determinism),
        ("assignment", assignment),
        ("external datasets", external_datasets),
        ("glad gradient", glad_gradient_check),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {} [{tag}] {name}: {detail}", i + 1);
    }
    println!(
        "acceptance: {} of {} criteria failed",
        failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
