//! Five-seed comparison with context diagnostics.
//!
//! cargo run --release -p ical --example stagger_sweep [stream] [first_seed]

use ical::datasets::{build_stream, DataOptions, StreamName};
use ical::eval::render_table;
use ical::experiment::{paper_defaults, seed_sweep, RunConfig};
use ical::learners::{LearnerKind, StepEvent};
use ical::par::Execution;

fn main() -> ical::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = StreamName::parse(&args.next().unwrap_or_else(|| "stagger".into()))?;
    let first: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let seeds: Vec<u64> = (first..first + 5).collect();
    let opts = DataOptions::default();
    let cfg = RunConfig::new(LearnerKind::ALL.to_vec(), 0, paper_defaults(name));
    let start = std::time::Instant::now();
    let outs = seed_sweep(&seeds, &cfg, Execution::Parallel, |s| build_stream(name, s, &opts))?;
    for out in &outs {
        let s = &out.summary;
        print!("seed {:>3}:", s.seed);
        for l in &s.learners {
            print!(" {}={:.2}", l.learner.name(), 100.0 * l.mean_acc);
        }
        for kind in [LearnerKind::IcalMem, LearnerKind::Ical] {
            let t = &out.run(kind).unwrap().trace;
            let new = t.count_events(|e| matches!(e, StepEvent::ContextNew(_)));
            print!(" | {} new={new} n_ctx={}", kind.name(), t.distinct_contexts());
        }
        println!();
    }
    println!(
        "{}",
        render_table(&outs.iter().map(|o| o.summary.clone()).collect::<Vec<_>>())
    );
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
