//! Runs a set of learners over one stream and collects their traces.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::context::ContextTraceRow;
use crate::datasets::StreamName;
use crate::error::{Error, Result};
use crate::eval::{summarize, EvaluationTrace, Summary, DEFAULT_ALPHA};
use crate::learners::{Learner, LearnerConfig, LearnerKind};
use crate::par::Execution;
use crate::stream::Stream;

/// Locked preset for reference runs: t = 0.9, T = 20 plus the settings
/// below. Propulsion features span wildly different ranges, so its
/// autoencoder inputs are min-max scaled; MNIST refits the tree every 50
/// steps to keep single-core runtimes reasonable.
pub fn paper_defaults(stream: StreamName) -> LearnerConfig {
    let mut cfg = LearnerConfig::default();
    cfg.train.learning_rate = 0.2;
    cfg.myopic_window = 100;
    match stream {
        StreamName::Stagger => {}
        StreamName::Propulsion => cfg.normalize = true,
        StreamName::MnistDigits => cfg.retrain_period = 50,
    }
    cfg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub learners: Vec<LearnerKind>,
    pub seed: u64,
    pub alpha: f64,
    pub learner: LearnerConfig,
}

impl RunConfig {
    pub fn new(learners: Vec<LearnerKind>, seed: u64, learner: LearnerConfig) -> Self {
        RunConfig {
            learners,
            seed,
            alpha: DEFAULT_ALPHA,
            learner,
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON config.
    pub fn digest(&self, stream: &str) -> String {
        #[derive(Serialize)]
        struct Keyed<'a> {
            stream: &'a str,
            config: &'a RunConfig,
        }
        let json = serde_json::to_vec(&Keyed { stream, config: self }).expect("config serializes");
        hex::encode(Sha256::digest(json))[..16].to_string()
    }
}

pub struct LearnerRun {
    pub trace: EvaluationTrace,
    pub context_trace: Vec<ContextTraceRow>,
}

pub struct RunOutput {
    pub config_digest: String,
    pub runs: Vec<LearnerRun>,
    pub summary: Summary,
}

impl RunOutput {
    pub fn traces(&self) -> Vec<EvaluationTrace> {
        self.runs.iter().map(|r| r.trace.clone()).collect()
    }

    pub fn run(&self, kind: LearnerKind) -> Option<&LearnerRun> {
        self.runs.iter().find(|r| r.trace.learner == kind)
    }
}

fn run_one(kind: LearnerKind, cfg: &RunConfig, stream: &Stream) -> Result<LearnerRun> {
    let spec = &stream.spec;
    let mut learner = Learner::new(kind, cfg.learner.clone(), spec.dim, spec.classes, cfg.seed)?;
    if kind.is_context_aware() {
        learner = learner.with_context_trace();
    }
    learner.warmup(&stream.samples)?;
    let results = stream.samples[cfg.learner.warmup_n..]
        .iter()
        .map(|s| learner.step(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(LearnerRun {
        trace: EvaluationTrace::from_results(kind, &results, cfg.alpha)?,
        context_trace: learner.take_context_trace(),
    })
}

/// Runs every learner in `cfg` over `stream`. Learners are independent, so
/// `exec` may run them concurrently; output order follows `cfg.learners`.
pub fn run_comparison(stream: &Stream, cfg: &RunConfig, exec: Execution) -> Result<RunOutput> {
    if cfg.learners.is_empty() {
        return Err(Error::InvalidConfig("no learners selected".into()));
    }
    cfg.learner.validate()?;
    if stream.len() <= cfg.learner.warmup_n {
        return Err(Error::InvalidInput(format!(
            "stream has {} samples, warmup needs more than {}",
            stream.len(),
            cfg.learner.warmup_n
        )));
    }
    let runs = exec
        .map(&cfg.learners, |&kind| run_one(kind, cfg, stream))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let digest = cfg.digest(&stream.spec.name);
    let traces: Vec<_> = runs.iter().map(|r| r.trace.clone()).collect();
    let summary = summarize(&traces, &stream.spec, cfg.seed, &digest)?;
    Ok(RunOutput {
        config_digest: digest,
        runs,
        summary,
    })
}

/// One comparison per seed, each on its own freshly generated stream.
pub fn seed_sweep<F>(seeds: &[u64], cfg: &RunConfig, exec: Execution, make_stream: F) -> Result<Vec<RunOutput>>
where
    F: Fn(u64) -> Result<Stream> + Sync + Send,
{
    exec.map(seeds, |&seed| {
        let stream = make_stream(seed)?;
        let cfg = RunConfig { seed, ..cfg.clone() };
        run_comparison(&stream, &cfg, Execution::Sequential)
    })
    .into_iter()
    .collect()
}
