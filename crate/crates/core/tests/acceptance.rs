//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.
//!
//! Run with `cargo test -p ical --test acceptance`. Criteria 3 and 4 need
//! the propulsion and MNIST/digits files in the cache directory.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use ical::datasets::{build_stream, DataOptions, StreamName};
use ical::eval::Summary;
use ical::experiment::{paper_defaults, run_comparison, RunConfig, RunOutput};
use ical::learners::{LearnerKind, StepEvent};
use ical::par::Execution;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const ORDER: [LearnerKind; 4] = LearnerKind::ALL;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// One comparison per seed with the reference preset, timing each seed.
fn sweep(name: StreamName) -> Result<Vec<(RunOutput, f64)>, String> {
    let opts = DataOptions::default();
    SEEDS
        .iter()
        .map(|&seed| {
            let start = Instant::now();
            let stream = build_stream(name, seed, &opts).map_err(|e| e.to_string())?;
            let cfg = RunConfig::new(ORDER.to_vec(), seed, paper_defaults(name));
            let out = run_comparison(&stream, &cfg, Execution::Parallel).map_err(|e| e.to_string())?;
            Ok((out, start.elapsed().as_secs_f64()))
        })
        .collect()
}

fn acc(s: &Summary, kind: LearnerKind) -> f64 {
    100.0 * s.learner(kind).expect("learner present").mean_acc
}

fn mean_acc(runs: &[(RunOutput, f64)], kind: LearnerKind) -> f64 {
    runs.iter().map(|(o, _)| acc(&o.summary, kind)).sum::<f64>() / runs.len() as f64
}

fn means_line(runs: &[(RunOutput, f64)]) -> String {
    ORDER
        .iter()
        .map(|&k| format!("{} {:.2}", k.name(), mean_acc(runs, k)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn stagger_end_to_end(runs: &[(RunOutput, f64)]) -> Outcome {
    let targets = [93.94, 92.61, 68.23, 82.61];
    let mut misses = Vec::new();
    for (&k, &t) in ORDER.iter().zip(&targets) {
        let m = mean_acc(runs, k);
        if (m - t).abs() > 5.0 {
            misses.push(format!("{} {m:.2} outside {t}±5", k.name()));
        }
    }
    let bad_order: Vec<u64> = runs
        .iter()
        .filter(|(o, _)| {
            let a = |k| acc(&o.summary, k);
            !(a(LearnerKind::IcalMem) > a(LearnerKind::Myopic)
                && a(LearnerKind::Myopic) > a(LearnerKind::NonCal)
                && a(LearnerKind::Ical) > a(LearnerKind::Myopic))
        })
        .map(|(o, _)| o.summary.seed)
        .collect();
    if !bad_order.is_empty() {
        misses.push(format!("ordering broken on seeds {bad_order:?}"));
    }
    let slowest = runs.iter().map(|(_, t)| *t).fold(0.0, f64::max);
    if slowest >= 60.0 {
        misses.push(format!("slowest seed {slowest:.1}s"));
    }
    let mut detail = format!("{}; slowest seed {slowest:.2}s", means_line(runs));
    if !misses.is_empty() {
        detail.push_str(&format!("; {}", misses.join("; ")));
    }
    outcome(misses.is_empty(), detail)
}

fn stagger_contexts(runs: &[(RunOutput, f64)]) -> Outcome {
    let mut good = 0;
    let mut per_seed = Vec::new();
    for (out, _) in runs {
        let summary = &out.summary;
        let ical = &out.run(LearnerKind::Ical).unwrap().trace;
        let news = ical.count_events(|e| matches!(e, StepEvent::ContextNew(_)));
        let mem = &out.run(LearnerKind::IcalMem).unwrap().trace;
        let stream_spec = ical::datasets::stagger::stream_spec();
        let early: BTreeSet<u32> = (0..3)
            .flat_map(|p| mem.contexts_in_partition(&stream_spec, p))
            .collect();
        let late: BTreeSet<u32> = (3..6)
            .flat_map(|p| mem.contexts_in_partition(&stream_spec, p))
            .collect();
        let n_mem = mem.distinct_contexts();
        let ok = news == 5 && n_mem <= 4 && late.is_subset(&early);
        good += usize::from(ok);
        per_seed.push(format!(
            "seed {}: ical new={news} mem contexts={n_mem} late⊆early={}",
            summary.seed,
            late.is_subset(&early)
        ));
    }
    outcome(good >= 4, format!("{good}/5 seeds hold ({})", per_seed.join("; ")))
}

fn propulsion(runs: Result<Vec<(RunOutput, f64)>, String>) -> Outcome {
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("no data: {e}")),
    };
    let m = |k| mean_acc(&runs, k);
    let part = |p: usize| {
        runs.iter()
            .map(|(o, _)| o.summary.learner(LearnerKind::IcalMem).unwrap().per_partition_acc[p].unwrap_or(0.0))
            .sum::<f64>()
            / runs.len() as f64
    };
    let band = (m(LearnerKind::IcalMem) - 93.77).abs() <= 6.0;
    let order = m(LearnerKind::IcalMem) > m(LearnerKind::Ical)
        && m(LearnerKind::Ical) > m(LearnerKind::NonCal).max(m(LearnerKind::Myopic));
    let recovery = part(2) > part(1) && part(3) > part(1);
    outcome(
        band && order && recovery,
        format!(
            "{}; ical-mem partitions 2/3/4: {:.3}/{:.3}/{:.3}; band={band} order={order} recovery={recovery}",
            means_line(&runs),
            part(1),
            part(2),
            part(3)
        ),
    )
}

fn mnist(runs: Result<Vec<(RunOutput, f64)>, String>) -> Outcome {
    let runs = match runs {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("no data: {e}")),
    };
    let myopic = mean_acc(&runs, LearnerKind::Myopic);
    let others: Vec<f64> = [LearnerKind::IcalMem, LearnerKind::Ical, LearnerKind::NonCal]
        .iter()
        .map(|&k| mean_acc(&runs, k))
        .collect();
    let lo = others.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = others.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let gap = lo - myopic;
    let spread = hi - lo;
    outcome(
        gap >= 10.0 && spread <= 5.0,
        format!(
            "{}; myopic gap {gap:.2} (need >= 10), others spread {spread:.2} (need <= 5)",
            means_line(&runs)
        ),
    )
}

fn numerics() -> Outcome {
    let grad = [(4, 2), (11, 6)]
        .iter()
        .flat_map(|&(m, h)| (0..5).map(move |s| common::gradient_check(m, h, s)))
        .fold(0.0, f64::max);
    let stats = (0..50).map(common::stats_error).fold(0.0, f64::max);
    let mean = (0..50).map(common::mean_accuracy_error).fold(0.0, f64::max);
    let ewma = (0..50).all(common::ewma_chunked_matches);
    outcome(
        grad < 1e-4 && stats < 1e-9 && mean < 1e-12 && ewma,
        format!("gradient rel err {grad:.2e}, stats rel err {stats:.2e}, mean_accuracy err {mean:.2e}, ewma chunked exact={ewma}"),
    )
}

fn discrimination() -> Outcome {
    let ratios: Vec<f64> = SEEDS
        .iter()
        .map(|&s| {
            let (inside, outside) = common::stagger_discrimination(s);
            outside / inside
        })
        .collect();
    let worst = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let shown: Vec<String> = ratios.iter().map(|r| format!("{r:.2}")).collect();
    outcome(worst >= 2.0, format!("out/in error ratios [{}]", shown.join(", ")))
}

fn oracles() -> Outcome {
    let stagger = common::stagger_table_mismatches();
    let percentile: usize = (0..30).map(common::percentile_mismatches).sum();
    outcome(
        stagger == 0 && percentile == 0,
        format!("stagger truth-table mismatches {stagger}, percentile mismatches {percentile}"),
    )
}

fn main() {
    let stagger = sweep(StreamName::Stagger).expect("stagger needs no external data");
    let results = [
        ("stagger end-to-end", stagger_end_to_end(&stagger)),
        ("stagger context behaviour", stagger_contexts(&stagger)),
        ("propulsion end-to-end", propulsion(sweep(StreamName::Propulsion))),
        ("mnist-digits separation", mnist(sweep(StreamName::MnistDigits))),
        ("numerical properties", numerics()),
        ("autoencoder discrimination", discrimination()),
        ("oracle equivalence", oracles()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        println!(
            "{} {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
