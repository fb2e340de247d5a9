//! The four compared online learners behind one prequential step interface.
//!
//! Every step predicts first, then scores the prediction, then learns from
//! the labeled sample. The context-aware learners additionally watch a
//! rolling accuracy window: while it stays above the threshold the active
//! context's autoencoder keeps being refined, and once it drops every
//! incoming instance is checked against the context knowledge base.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::context::{ContextConfig, ContextDecision, ContextKnowledgeBase, ContextTraceRow, EntryScore};
use crate::datasets::Normalizer;
use crate::error::{Error, Result};
use crate::neural::TrainConfig;
use crate::stream::{concat_context, LabeledSample, Sample, SeededRng};
use crate::tree::{TreeClassifier, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LearnerKind {
    #[serde(rename = "ical-mem")]
    IcalMem,
    #[serde(rename = "ical")]
    Ical,
    #[serde(rename = "non-cal")]
    NonCal,
    #[serde(rename = "myopic")]
    Myopic,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 4] = [
        LearnerKind::IcalMem,
        LearnerKind::Ical,
        LearnerKind::NonCal,
        LearnerKind::Myopic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::IcalMem => "ical-mem",
            LearnerKind::Ical => "ical",
            LearnerKind::NonCal => "non-cal",
            LearnerKind::Myopic => "myopic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "ical-mem" => Ok(LearnerKind::IcalMem),
            "ical" => Ok(LearnerKind::Ical),
            "non-cal" => Ok(LearnerKind::NonCal),
            "myopic" => Ok(LearnerKind::Myopic),
            other => Err(Error::InvalidConfig(format!(
                "unknown learner `{other}` (expected ical-mem, ical, non-cal or myopic)"
            ))),
        }
    }

    pub fn is_context_aware(self) -> bool {
        matches!(self, LearnerKind::IcalMem | LearnerKind::Ical)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Drift is suspected once the rolling accuracy is not above this.
    pub accuracy_threshold: f64,
    /// Rolling accuracy window, also the autoencoder refresh window.
    pub accuracy_window: usize,
    pub myopic_window: usize,
    /// Refit the classifier every this many steps.
    pub retrain_period: usize,
    pub warmup_n: usize,
    /// Steps after a context switch during which matching is suppressed.
    pub cooldown: usize,
    /// Min-max scale autoencoder inputs using warmup statistics.
    pub normalize: bool,
    pub train: TrainConfig,
    pub context: ContextConfig,
    pub tree: TreeConfig,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            accuracy_threshold: 0.9,
            accuracy_window: 20,
            myopic_window: 50,
            retrain_period: 1,
            warmup_n: 20,
            cooldown: 20,
            normalize: false,
            train: TrainConfig::default(),
            context: ContextConfig::default(),
            tree: TreeConfig::default(),
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.accuracy_threshold > 0.0 && self.accuracy_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "accuracy threshold must lie in (0, 1), got {}",
                self.accuracy_threshold
            )));
        }
        for (name, v) in [
            ("accuracy_window", self.accuracy_window),
            ("myopic_window", self.myopic_window),
            ("retrain_period", self.retrain_period),
            ("warmup_n", self.warmup_n),
            ("cooldown", self.cooldown),
        ] {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.tree.max_depth == 0 || self.tree.min_samples_split == 0 {
            return Err(Error::InvalidConfig("tree limits must be positive".into()));
        }
        self.train.validate()?;
        self.context.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepEvent {
    None,
    DriftSuspected,
    ContextMatched(u32),
    ContextNew(u32),
}

impl StepEvent {
    pub fn label(self) -> String {
        match self {
            StepEvent::None => "none".into(),
            StepEvent::DriftSuspected => "drift-suspected".into(),
            StepEvent::ContextMatched(id) => format!("context-matched:{id}"),
            StepEvent::ContextNew(id) => format!("context-new:{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// Absolute stream position.
    pub step: usize,
    pub label: usize,
    pub prediction: usize,
    pub correct: bool,
    /// Mean of the rolling window (up to T flags since the last reset).
    pub windowed_accuracy: f64,
    pub context_id: u32,
    pub event: StepEvent,
}

#[derive(Debug, Clone)]
struct Row {
    x: Sample,
    y: usize,
    context: u32,
}

#[derive(Clone)]
pub struct Learner {
    kind: LearnerKind,
    cfg: LearnerConfig,
    dim: usize,
    classes: usize,
    rng: SeededRng,
    history: Vec<Row>,
    tree: Option<TreeClassifier>,
    kb: Option<ContextKnowledgeBase>,
    normalizer: Option<Normalizer>,
    window: VecDeque<bool>,
    cooldown_left: usize,
    since_retrain: usize,
    steps: usize,
    trace: Option<Vec<ContextTraceRow>>,
}

impl Learner {
    pub fn new(kind: LearnerKind, cfg: LearnerConfig, dim: usize, classes: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if classes < 2 {
            return Err(Error::InvalidConfig("need at least two classes".into()));
        }
        Ok(Learner {
            kind,
            cfg,
            dim,
            classes,
            rng: SeededRng::new(seed).fork(0xA17E),
            history: Vec::new(),
            tree: None,
            kb: None,
            normalizer: None,
            window: VecDeque::new(),
            cooldown_left: 0,
            since_retrain: 0,
            steps: 0,
            trace: None,
        })
    }

    /// Collect per-step context diagnostics (context-aware learners only).
    pub fn with_context_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn is_ready(&self) -> bool {
        self.tree.is_some()
    }

    pub fn knowledge_base(&self) -> Option<&ContextKnowledgeBase> {
        self.kb.as_ref()
    }

    pub fn classifier(&self) -> Option<&TreeClassifier> {
        self.tree.as_ref()
    }

    pub fn take_context_trace(&mut self) -> Vec<ContextTraceRow> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn current_context(&self) -> u32 {
        self.kb.as_ref().map_or(1, ContextKnowledgeBase::current_id)
    }

    /// Number of rows the classifier currently trains on.
    pub fn buffer_len(&self) -> usize {
        match self.kind {
            LearnerKind::Myopic => self.history.len().min(self.cfg.myopic_window),
            _ => self.history.len(),
        }
    }

    /// Fits the classifier (and, for the context-aware learners, context
    /// 1's autoencoder) on the first `warmup_n` samples.
    pub fn warmup(&mut self, initial: &[LabeledSample]) -> Result<()> {
        if initial.len() < self.cfg.warmup_n || initial.is_empty() {
            return Err(Error::InvalidInput(format!(
                "warmup needs {} samples, got {}",
                self.cfg.warmup_n,
                initial.len()
            )));
        }
        let initial = &initial[..self.cfg.warmup_n];
        for s in initial {
            self.check(s)?;
        }
        self.history = initial
            .iter()
            .map(|s| Row {
                x: s.sample.clone(),
                y: s.label,
                context: 1,
            })
            .collect();

        if self.kind.is_context_aware() {
            if self.cfg.normalize {
                self.normalizer = Some(Normalizer::fit(initial.iter().map(|s| &s.sample))?);
            }
            let mut kb = ContextKnowledgeBase::new(
                self.dim,
                self.classes,
                self.cfg.context,
                self.cfg.train.init_scale,
                self.rng.fork(0xC0DE),
            )?;
            for s in initial {
                let z = self.instance_with(&kb, s)?;
                kb.record_in_context(z)?;
            }
            let all = kb.current().buffer.clone();
            kb.refresh_context_model(&all, &self.cfg.train)?;
            self.kb = Some(kb);
        }
        self.window.clear();
        self.cooldown_left = 0;
        self.since_retrain = 0;
        self.retrain()?;
        Ok(())
    }

    fn check(&self, s: &LabeledSample) -> Result<()> {
        if s.sample.dim() != self.dim {
            return Err(Error::shape(self.dim, s.sample.dim()));
        }
        if s.label >= self.classes {
            return Err(Error::InvalidLabel {
                label: s.label,
                classes: self.classes,
            });
        }
        Ok(())
    }

    fn instance_with(&self, kb: &ContextKnowledgeBase, s: &LabeledSample) -> Result<Vec<f64>> {
        match &self.normalizer {
            Some(n) => kb.instance(&n.apply_sample(&s.sample)?, s.label),
            None => kb.instance(&s.sample, s.label),
        }
    }

    fn classifier_input(&self, x: &Sample, context: u32) -> Result<Vec<f64>> {
        match self.kind {
            LearnerKind::IcalMem => concat_context(x, context),
            _ => Ok(x.features().to_vec()),
        }
    }

    /// Class prediction for `x` under the active context.
    pub fn predict(&self, x: &Sample) -> Result<usize> {
        let tree = self
            .tree
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("learner is not warmed up".into()))?;
        if x.dim() != self.dim {
            return Err(Error::shape(self.dim, x.dim()));
        }
        tree.predict(&self.classifier_input(x, self.current_context())?)
    }

    fn retrain(&mut self) -> Result<()> {
        let rows: &[Row] = match self.kind {
            LearnerKind::Myopic => {
                let start = self.history.len().saturating_sub(self.cfg.myopic_window);
                &self.history[start..]
            }
            _ => &self.history,
        };
        if rows.is_empty() {
            return Ok(());
        }
        let features = rows
            .iter()
            .map(|r| self.classifier_input(&r.x, r.context))
            .collect::<Result<Vec<_>>>()?;
        let labels: Vec<usize> = rows.iter().map(|r| r.y).collect();
        self.tree = Some(TreeClassifier::fit(&features, &labels, self.classes, self.cfg.tree)?);
        self.since_retrain = 0;
        Ok(())
    }

    fn windowed_accuracy(&self) -> f64 {
        if self.window.is_empty() {
            return 1.0;
        }
        self.window.iter().filter(|&&c| c).count() as f64 / self.window.len() as f64
    }

    /// Keeps the active context's autoencoder current: fits it once enough
    /// instances have accumulated, then refreshes it on the last T.
    fn refresh_active(kb: &mut ContextKnowledgeBase, cfg: &LearnerConfig) -> Result<()> {
        let ready = kb.current().trained || kb.current().buffer.len() >= cfg.accuracy_window;
        if ready {
            kb.refresh_from_buffer(cfg.accuracy_window, &cfg.train)?;
        }
        Ok(())
    }

    /// One prequential step: predict, score, then learn.
    pub fn step(&mut self, s: &LabeledSample) -> Result<StepResult> {
        if !self.is_ready() {
            return Err(Error::InvalidInput("learner is not warmed up".into()));
        }
        self.check(s)?;
        let step = self.cfg.warmup_n + self.steps;
        self.steps += 1;

        let prediction = self.predict(&s.sample)?;
        let correct = prediction == s.label;
        self.window.push_back(correct);
        while self.window.len() > self.cfg.accuracy_window {
            self.window.pop_front();
        }
        let windowed_accuracy = self.windowed_accuracy();

        let mut event = StepEvent::None;
        let mut switched = false;
        let mut scores: Vec<EntryScore> = Vec::new();

        if let Some(mut kb) = self.kb.take() {
            let outcome = self.context_update(&mut kb, s, windowed_accuracy, &mut scores);
            self.kb = Some(kb);
            (event, switched) = outcome?;
        }

        if switched && self.kind == LearnerKind::Ical {
            self.history.clear();
            self.tree = None;
        }
        self.history.push(Row {
            x: s.sample.clone(),
            y: s.label,
            context: self.current_context(),
        });
        self.since_retrain += 1;
        if switched {
            self.window.clear();
            self.cooldown_left = self.cfg.cooldown;
        }
        if switched || self.since_retrain >= self.cfg.retrain_period || self.tree.is_none() {
            self.retrain()?;
        }

        let context_id = self.current_context();
        if let Some(trace) = self.trace.as_mut() {
            trace.push(ContextTraceRow {
                step,
                context_id,
                scores,
            });
        }
        Ok(StepResult {
            step,
            label: s.label,
            prediction,
            correct,
            windowed_accuracy,
            context_id,
            event,
        })
    }

    fn record(
        kb: &mut ContextKnowledgeBase,
        z: Vec<f64>,
        cfg: &LearnerConfig,
        scores: &mut Vec<EntryScore>,
    ) -> Result<()> {
        let error = kb.record_in_context(z)?;
        Self::refresh_active(kb, cfg)?;
        scores.push(EntryScore {
            id: kb.current_id(),
            error,
            z_score: None,
        });
        Ok(())
    }

    fn context_update(
        &mut self,
        kb: &mut ContextKnowledgeBase,
        s: &LabeledSample,
        windowed_accuracy: f64,
        scores: &mut Vec<EntryScore>,
    ) -> Result<(StepEvent, bool)> {
        let z = self.instance_with(kb, s)?;
        if self.cooldown_left > 0 {
            self.cooldown_left -= 1;
            // a fresh context collects its first window unconditionally;
            // otherwise only instances the classifier already handles count
            if !kb.current().trained || windowed_accuracy > self.cfg.accuracy_threshold {
                Self::record(kb, z, &self.cfg, scores)?;
            }
            return Ok((StepEvent::None, false));
        }
        if windowed_accuracy > self.cfg.accuracy_threshold {
            Self::record(kb, z, &self.cfg, scores)?;
            return Ok((StepEvent::None, false));
        }
        // the trigger is a mean over T flags; a partial window (right after
        // warmup) is too noisy to act on
        if self.window.len() < self.cfg.accuracy_window {
            return Ok((StepEvent::None, false));
        }

        // Low accuracy while the active context still explains the instance
        // is the classifier lagging, not a context change.
        let before = kb.current_id();
        let current = kb.current();
        if current.is_ready(self.cfg.context.min_stats_count) {
            let error = current.model.reconstruction_error(&z)?;
            let test = kb.is_out_of_context(before, error)?;
            if !test.out_of_context {
                scores.push(EntryScore {
                    id: before,
                    error,
                    z_score: Some(test.z_score),
                });
                return Ok((StepEvent::DriftSuspected, false));
            }
        }
        let outcome = kb.match_or_hypothesize(&z)?;
        *scores = outcome.scores;
        match outcome.decision {
            // only reachable while the active entry is still unfitted
            ContextDecision::Matched(id) if id == before => Ok((StepEvent::DriftSuspected, false)),
            ContextDecision::Matched(id) => {
                kb.record_in_context(z)?;
                Ok((StepEvent::ContextMatched(id), true))
            }
            ContextDecision::NewContext(id) => {
                if self.kind == LearnerKind::Ical {
                    kb.forget_inactive();
                }
                kb.record_in_context(z)?;
                Ok((StepEvent::ContextNew(id), true))
            }
        }
    }
}

/// Warms a learner up on the head of `samples` and steps through the rest.
pub fn run_learner(
    kind: LearnerKind,
    cfg: &LearnerConfig,
    samples: &[LabeledSample],
    dim: usize,
    classes: usize,
    seed: u64,
) -> Result<Vec<StepResult>> {
    let mut learner = Learner::new(kind, cfg.clone(), dim, classes, seed)?;
    learner.warmup(samples)?;
    samples[cfg.warmup_n..].iter().map(|s| learner.step(s)).collect()
}
