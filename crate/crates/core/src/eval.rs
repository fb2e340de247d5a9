//! Prequential metrics: exact mean accuracy, EWMA accuracy curves, per-
//! partition breakdowns and the learner comparison table.
//!
//! Warmup samples are never evaluated; `K` counts post-warmup steps only.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{LearnerKind, StepEvent, StepResult};
use crate::stream::StreamSpec;

pub const DEFAULT_ALPHA: f64 = 0.1;

pub const WARMUP_NOTE: &str = "warmup samples are excluded from every accuracy";

/// `(1/K) * sum(correct)`.
pub fn mean_accuracy(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::InvalidInput("mean accuracy of an empty trace".into()));
    }
    let hits = flags.iter().filter(|&&f| f).count();
    Ok(hits as f64 / flags.len() as f64)
}

/// Streaming EWMA state: `e_0 = x_0`, `e_t = alpha*x_t + (1-alpha)*e_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ewma {
    alpha: f64,
    value: Option<f64>,
}

impl Ewma {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "EWMA alpha must lie in (0, 1], got {alpha}"
            )));
        }
        Ok(Ewma { alpha, value: None })
    }

    pub fn push(&mut self, x: f64) -> f64 {
        let next = match self.value {
            None => x,
            Some(prev) => self.alpha * x + (1.0 - self.alpha) * prev,
        };
        self.value = Some(next);
        next
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}

pub fn ewma(flags: &[bool], alpha: f64) -> Result<Vec<f64>> {
    if flags.is_empty() {
        return Err(Error::InvalidInput("EWMA of an empty trace".into()));
    }
    let mut e = Ewma::new(alpha)?;
    Ok(flags.iter().map(|&f| e.push(if f { 1.0 } else { 0.0 })).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    pub label: usize,
    pub prediction: usize,
    pub correct: bool,
    pub windowed_accuracy: f64,
    pub ewma_accuracy: f64,
    pub context_id: u32,
    pub event: StepEvent,
}

/// One learner's evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationTrace {
    pub learner: LearnerKind,
    pub steps: Vec<TraceStep>,
}

impl EvaluationTrace {
    pub fn from_results(learner: LearnerKind, results: &[StepResult], alpha: f64) -> Result<Self> {
        let mut e = Ewma::new(alpha)?;
        let steps = results
            .iter()
            .map(|r| TraceStep {
                step: r.step,
                label: r.label,
                prediction: r.prediction,
                correct: r.correct,
                windowed_accuracy: r.windowed_accuracy,
                ewma_accuracy: e.push(if r.correct { 1.0 } else { 0.0 }),
                context_id: r.context_id,
                event: r.event,
            })
            .collect();
        Ok(EvaluationTrace { learner, steps })
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn flags(&self) -> Vec<bool> {
        self.steps.iter().map(|s| s.correct).collect()
    }

    pub fn mean_accuracy(&self) -> Result<f64> {
        mean_accuracy(&self.flags())
    }

    pub fn distinct_contexts(&self) -> usize {
        self.steps.iter().map(|s| s.context_id).collect::<BTreeSet<_>>().len()
    }

    /// Context ids active during ground-truth partition `p`.
    pub fn contexts_in_partition(&self, spec: &StreamSpec, p: usize) -> BTreeSet<u32> {
        self.steps
            .iter()
            .filter(|s| spec.partition_of(s.step) == p)
            .map(|s| s.context_id)
            .collect()
    }

    pub fn count_events(&self, pred: impl Fn(StepEvent) -> bool) -> usize {
        self.steps.iter().filter(|s| pred(s.event)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSummary {
    pub learner: LearnerKind,
    pub mean_acc: f64,
    /// `None` for partitions with no evaluated steps.
    pub per_partition_acc: Vec<Option<f64>>,
    pub per_partition_steps: Vec<usize>,
    pub n_contexts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub stream: String,
    pub seed: u64,
    pub config_digest: String,
    pub evaluated_steps: usize,
    pub note: String,
    pub learners: Vec<LearnerSummary>,
}

impl Summary {
    pub fn learner(&self, kind: LearnerKind) -> Option<&LearnerSummary> {
        self.learners.iter().find(|l| l.learner == kind)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Per-learner mean accuracy, per-partition accuracy and context counts.
pub fn summarize(traces: &[EvaluationTrace], spec: &StreamSpec, seed: u64, config_digest: &str) -> Result<Summary> {
    let Some(first) = traces.first() else {
        return Err(Error::InvalidInput("nothing to summarize".into()));
    };
    let k = first.len();
    if let Some(t) = traces.iter().find(|t| t.len() != k) {
        return Err(Error::InvalidInput(format!(
            "trace length mismatch: {} has {} steps, {} has {k}",
            t.learner.name(),
            t.len(),
            first.learner.name()
        )));
    }
    let parts = spec.partitions();
    let learners = traces
        .iter()
        .map(|t| {
            let mut hits = vec![0usize; parts];
            let mut counts = vec![0usize; parts];
            for s in &t.steps {
                let p = spec.partition_of(s.step);
                counts[p] += 1;
                hits[p] += usize::from(s.correct);
            }
            Ok(LearnerSummary {
                learner: t.learner,
                mean_acc: t.mean_accuracy()?,
                per_partition_acc: hits
                    .iter()
                    .zip(&counts)
                    .map(|(&h, &n)| (n > 0).then(|| h as f64 / n as f64))
                    .collect(),
                per_partition_steps: counts,
                n_contexts: t.distinct_contexts(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Summary {
        stream: spec.name.clone(),
        seed,
        config_digest: config_digest.to_string(),
        evaluated_steps: k,
        note: WARMUP_NOTE.into(),
        learners,
    })
}

/// `step,learner,y,y_hat,correct,windowed_acc,ewma_acc,context_id,event`
pub fn write_trace_csv<W: Write>(traces: &[EvaluationTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "step",
        "learner",
        "y",
        "y_hat",
        "correct",
        "windowed_acc",
        "ewma_acc",
        "context_id",
        "event",
    ])?;
    for t in traces {
        for s in &t.steps {
            w.write_record([
                s.step.to_string(),
                t.learner.name().to_string(),
                s.label.to_string(),
                s.prediction.to_string(),
                u8::from(s.correct).to_string(),
                s.windowed_accuracy.to_string(),
                s.ewma_accuracy.to_string(),
                s.context_id.to_string(),
                s.event.label(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Mean and sample standard deviation of a learner's accuracy across runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean: f64,
    pub std_dev: f64,
}

pub fn aggregate(summaries: &[Summary], kind: LearnerKind) -> Option<Aggregate> {
    let accs: Vec<f64> = summaries
        .iter()
        .filter_map(|s| s.learner(kind))
        .map(|l| l.mean_acc)
        .collect();
    if accs.is_empty() {
        return None;
    }
    let n = accs.len() as f64;
    let mean = accs.iter().sum::<f64>() / n;
    let var = if accs.len() > 1 {
        accs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Some(Aggregate {
        runs: accs.len(),
        mean,
        std_dev: var.sqrt(),
    })
}

/// Comparison table: one row per learner, one column per stream. Multiple
/// summaries of the same stream are averaged (shown as `mean ± sd`).
pub fn render_table(summaries: &[Summary]) -> String {
    let mut streams: Vec<&str> = Vec::new();
    for s in summaries {
        if !streams.contains(&s.stream.as_str()) {
            streams.push(&s.stream);
        }
    }
    let mut out = String::new();
    let _ = write!(out, "| {:<14} |", "learner");
    for s in &streams {
        let _ = write!(out, " {s:>16} |");
    }
    out.push('\n');
    let _ = write!(out, "|{}|", "-".repeat(16));
    for _ in &streams {
        let _ = write!(out, "{}|", "-".repeat(18));
    }
    out.push('\n');
    for kind in LearnerKind::ALL {
        if !summaries.iter().any(|s| s.learner(kind).is_some()) {
            continue;
        }
        let _ = write!(out, "| {:<14} |", kind.name());
        for stream in &streams {
            let runs: Vec<Summary> = summaries.iter().filter(|s| s.stream == *stream).cloned().collect();
            let cell = match aggregate(&runs, kind) {
                None => "-".to_string(),
                Some(a) if a.runs == 1 => format!("{:.2}%", 100.0 * a.mean),
                Some(a) => format!("{:.2} ± {:.2}%", 100.0 * a.mean, 100.0 * a.std_dev),
            };
            let _ = write!(out, " {cell:>16} |");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "\n({WARMUP_NOTE})");
    out
}
