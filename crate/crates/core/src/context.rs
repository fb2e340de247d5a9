//! Context knowledge base: one autoencoder per discovered context, each with
//! a running normal model of its own reconstruction errors.
//!
//! A labeled instance `z = x ⊕ onehot(y)` is *out of context* for an entry
//! when its error sits more than `z_threshold` standard deviations above that
//! entry's mean error. Only the upper tail counts; unusually good
//! reconstructions are never evidence of a context change.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{default_bottleneck, Autoencoder, TrainConfig};
use crate::stream::{concat_label, Sample, SeededRng};

/// Floor applied to σ_ε before forming a z-score.
pub const SIGMA_FLOOR: f64 = 1e-9;

/// One-pass (Welford) mean and variance of reconstruction errors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub count: usize,
    pub mean: f64,
    pub m2: f64,
}

impl ErrorStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut s = ErrorStats::default();
        for &v in values {
            s.push(v);
        }
        s
    }

    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    /// Sample variance; `None` below two observations.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| (self.m2 / (self.count - 1) as f64).max(0.0))
    }

    pub fn std_dev(&self) -> Option<f64> {
        self.variance().map(f64::sqrt)
    }
}

/// Result of the out-of-context test for one entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextTest {
    pub z_score: f64,
    pub out_of_context: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextEntry {
    pub id: u32,
    pub model: Autoencoder,
    pub stats: ErrorStats,
    /// Instances verified as belonging to this context, oldest first.
    pub buffer: Vec<Vec<f64>>,
    /// Whether the autoencoder has been fitted at least once.
    pub trained: bool,
}

impl ContextEntry {
    /// One-sided z test of `error` against this entry's error model.
    ///
    /// Fails with [`Error::InsufficientStatistics`] while the autoencoder is
    /// unfitted or fewer than `min_count` errors have been observed; callers
    /// treat that as "in context, keep collecting".
    pub fn test(&self, error: f64, z_threshold: f64, min_count: usize) -> Result<ContextTest> {
        let required = min_count.max(2);
        if !self.trained || self.stats.count < required {
            return Err(Error::InsufficientStatistics {
                count: if self.trained { self.stats.count } else { 0 },
                required,
            });
        }
        let sigma = self.stats.std_dev().unwrap_or(0.0).max(SIGMA_FLOOR);
        let z_score = (error - self.stats.mean) / sigma;
        Ok(ContextTest {
            z_score,
            out_of_context: z_score > z_threshold,
        })
    }

    pub fn is_ready(&self, min_count: usize) -> bool {
        self.trained && self.stats.count >= min_count.max(2)
    }

    fn recompute_stats(&mut self) -> Result<()> {
        let errs = self.model.errors(&self.buffer)?;
        self.stats = ErrorStats::from_values(&errs);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextConfig {
    pub z_threshold: f64,
    pub min_stats_count: usize,
}

impl Default for ContextConfig {
    fn default() -> Self {
        ContextConfig {
            z_threshold: 3.0,
            min_stats_count: 10,
        }
    }
}

impl ContextConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.z_threshold > 0.0 && self.z_threshold.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "z_threshold must be positive, got {}",
                self.z_threshold
            )));
        }
        if self.min_stats_count == 0 {
            return Err(Error::InvalidConfig("min_stats_count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContextDecision {
    Matched(u32),
    NewContext(u32),
}

impl ContextDecision {
    pub fn id(self) -> u32 {
        match self {
            ContextDecision::Matched(id) | ContextDecision::NewContext(id) => id,
        }
    }
}

/// Diagnostic score of one entry for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntryScore {
    pub id: u32,
    pub error: f64,
    /// `None` when the entry lacks statistics.
    pub z_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub decision: ContextDecision,
    pub scores: Vec<EntryScore>,
}

/// The ordered set of per-context autoencoders plus the active context.
#[derive(Debug, Clone)]
pub struct ContextKnowledgeBase {
    entries: Vec<ContextEntry>,
    current: usize,
    next_id: u32,
    dim: usize,
    classes: usize,
    hidden: usize,
    init_scale: f64,
    config: ContextConfig,
    rng: SeededRng,
}

impl ContextKnowledgeBase {
    /// Knowledge base for `dim`-feature, `classes`-class instances, seeded
    /// with one unfitted entry (context 1).
    pub fn new(dim: usize, classes: usize, config: ContextConfig, init_scale: f64, rng: SeededRng) -> Result<Self> {
        config.validate()?;
        if classes == 0 {
            return Err(Error::InvalidConfig("class count must be positive".into()));
        }
        let width = dim + classes;
        let mut kb = ContextKnowledgeBase {
            entries: Vec::new(),
            current: 0,
            next_id: 1,
            dim,
            classes,
            hidden: default_bottleneck(width),
            init_scale,
            config,
            rng,
        };
        kb.push_entry()?;
        Ok(kb)
    }

    fn push_entry(&mut self) -> Result<u32> {
        let id = self.next_id;
        let mut rng = self.rng.fork(u64::from(id));
        let model = Autoencoder::init(self.width(), self.hidden, self.init_scale, &mut rng)?;
        self.entries.push(ContextEntry {
            id,
            model,
            stats: ErrorStats::default(),
            buffer: Vec::new(),
            trained: false,
        });
        self.next_id += 1;
        self.current = self.entries.len() - 1;
        Ok(id)
    }

    /// Instance width `d + C`.
    pub fn width(&self) -> usize {
        self.dim + self.classes
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn config(&self) -> &ContextConfig {
        &self.config
    }

    pub fn entries(&self) -> &[ContextEntry] {
        &self.entries
    }

    pub fn current(&self) -> &ContextEntry {
        &self.entries[self.current]
    }

    pub fn current_id(&self) -> u32 {
        self.entries[self.current].id
    }

    pub fn entry(&self, id: u32) -> Option<&ContextEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Builds the instance `x ⊕ onehot(y)` for this knowledge base.
    pub fn instance(&self, sample: &Sample, label: usize) -> Result<Vec<f64>> {
        if sample.dim() != self.dim {
            return Err(Error::shape(self.dim, sample.dim()));
        }
        concat_label(sample, label, self.classes)
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.width() {
            return Err(Error::shape(self.width(), z.len()));
        }
        Ok(())
    }

    /// Appends `z` to the active context and folds its error into that
    /// context's statistics. Returns the error.
    pub fn record_in_context(&mut self, z: Vec<f64>) -> Result<f64> {
        self.check(&z)?;
        let entry = &mut self.entries[self.current];
        let err = entry.model.reconstruction_error(&z)?;
        entry.stats.push(err);
        entry.buffer.push(z);
        Ok(err)
    }

    /// Out-of-context test of `error` against entry `id`.
    pub fn is_out_of_context(&self, id: u32, error: f64) -> Result<ContextTest> {
        let entry = self
            .entry(id)
            .ok_or_else(|| Error::InvalidInput(format!("no context {id}")))?;
        entry.test(error, self.config.z_threshold, self.config.min_stats_count)
    }

    /// Scores `z` against every entry.
    pub fn score(&self, z: &[f64]) -> Result<Vec<EntryScore>> {
        self.check(z)?;
        self.entries
            .iter()
            .map(|e| {
                let error = e.model.reconstruction_error(z)?;
                let z_score = e
                    .test(error, self.config.z_threshold, self.config.min_stats_count)
                    .ok()
                    .map(|t| t.z_score);
                Ok(EntryScore {
                    id: e.id,
                    error,
                    z_score,
                })
            })
            .collect()
    }

    /// Matches `z` to the in-context entry with the lowest raw error, or
    /// hypothesizes a new context when every statistically ready entry
    /// rejects it.
    ///
    /// While the active entry itself is not yet ready, no new context is
    /// hypothesized: the instance stays with the active context.
    pub fn match_or_hypothesize(&mut self, z: &[f64]) -> Result<MatchOutcome> {
        let scores = self.score(z)?;
        let best = scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.z_score.is_some_and(|zs| zs <= self.config.z_threshold))
            .min_by(|(_, a), (_, b)| a.error.total_cmp(&b.error));
        let decision = match best {
            Some((idx, s)) => {
                self.current = idx;
                ContextDecision::Matched(s.id)
            }
            None if !self.current().is_ready(self.config.min_stats_count) => {
                ContextDecision::Matched(self.current_id())
            }
            None => ContextDecision::NewContext(self.push_entry()?),
        };
        Ok(MatchOutcome { decision, scores })
    }

    /// Fits the active context's autoencoder on `window`, then recomputes
    /// its error statistics over its whole buffer under the updated model.
    pub fn refresh_context_model(&mut self, window: &[Vec<f64>], cfg: &TrainConfig) -> Result<()> {
        if window.is_empty() {
            return Err(Error::InvalidInput("refresh window is empty".into()));
        }
        for z in window {
            self.check(z)?;
        }
        let entry = &mut self.entries[self.current];
        entry.model.train(window, cfg)?;
        entry.trained = true;
        entry.recompute_stats()
    }

    /// Refreshes the active context on the last `window` instances of its
    /// own buffer.
    pub fn refresh_from_buffer(&mut self, window: usize, cfg: &TrainConfig) -> Result<()> {
        let buf = &self.current().buffer;
        let start = buf.len().saturating_sub(window);
        let recent = buf[start..].to_vec();
        self.refresh_context_model(&recent, cfg)
    }

    /// Label-free context inference: scores a batch using `placeholder` in
    /// place of the unknown labels and returns the entry with the lowest
    /// mean error. Never hypothesizes a new context; entries with unfitted
    /// autoencoders are skipped unless none is fitted.
    pub fn infer_context_batch(&self, unlabeled: &[Sample], placeholder: usize) -> Result<u32> {
        if unlabeled.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let batch: Vec<Vec<f64>> = unlabeled
            .iter()
            .map(|s| self.instance(s, placeholder))
            .collect::<Result<_>>()?;
        let any_trained = self.entries.iter().any(|e| e.trained);
        let mut best: Option<(u32, f64)> = None;
        for e in self.entries.iter().filter(|e| e.trained || !any_trained) {
            let mean = e.model.mean_error(&batch)?;
            if best.is_none_or(|(_, b)| mean < b) {
                best = Some((e.id, mean));
            }
        }
        Ok(best.map(|(id, _)| id).unwrap_or_else(|| self.current_id()))
    }

    /// Drops every entry except the active one. Ids are never reused.
    pub fn forget_inactive(&mut self) {
        let keep = self.entries.swap_remove(self.current);
        self.entries.clear();
        self.entries.push(keep);
        self.current = 0;
    }
}

/// Per-step context diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTraceRow {
    pub step: usize,
    pub context_id: u32,
    pub scores: Vec<EntryScore>,
}

/// Writes context rows as CSV: `step,context_id,eps_1,z_1,...,eps_N,z_N`.
/// Cells for entries not scored at a step are left empty.
pub fn write_context_trace<W: Write>(rows: &[ContextTraceRow], out: W) -> Result<()> {
    let max_id = rows
        .iter()
        .flat_map(|r| r.scores.iter().map(|s| s.id))
        .chain(rows.iter().map(|r| r.context_id))
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string(), "context_id".to_string()];
    for id in 1..=max_id {
        header.push(format!("eps_{id}"));
        header.push(format!("z_{id}"));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.step.to_string(), row.context_id.to_string()];
        for id in 1..=max_id {
            match row.scores.iter().find(|s| s.id == id) {
                Some(s) => {
                    rec.push(s.error.to_string());
                    rec.push(s.z_score.map(|z| z.to_string()).unwrap_or_default());
                }
                None => {
                    rec.push(String::new());
                    rec.push(String::new());
                }
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn two_pass(values: &[f64]) -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    fn kb(dim: usize, classes: usize) -> ContextKnowledgeBase {
        ContextKnowledgeBase::new(dim, classes, ContextConfig::default(), 0.3, SeededRng::new(3)).unwrap()
    }

    #[test]
    fn stats_arithmetic() {
        let s = ErrorStats::from_values(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std_dev(), Some(1.0));
        assert_eq!(ErrorStats::from_values(&[4.0]).std_dev(), None);
    }

    #[test]
    fn stats_are_order_invariant() {
        let mut rng = SeededRng::new(10);
        let mut values: Vec<f64> = (0..100).map(|_| rng.gen_range(0.0..5.0)).collect();
        let (mean, sd) = two_pass(&values);
        for _ in 0..5 {
            values.shuffle(&mut rng);
            let s = ErrorStats::from_values(&values);
            assert!(((s.mean - mean) / mean).abs() < 1e-9);
            assert!(((s.std_dev().unwrap() - sd) / sd).abs() < 1e-9);
        }
    }

    fn entry_with(values: &[f64]) -> ContextEntry {
        ContextEntry {
            id: 1,
            model: Autoencoder::zeros(2, 1),
            stats: ErrorStats::from_values(values),
            buffer: Vec::new(),
            trained: true,
        }
    }

    #[test]
    fn z_test_examples() {
        // mean 2, sd 1
        let e = entry_with(&[1.0, 2.0, 3.0]);
        let t = e.test(2.0, 0.5, 3).unwrap();
        assert_eq!(t.z_score, 0.0);
        assert!(!t.out_of_context);

        let t = e.test(6.0, 3.0, 3).unwrap();
        assert_eq!(t.z_score, 4.0);
        assert!(t.out_of_context);

        for below in [1.9, 0.0, -100.0] {
            assert!(!e.test(below, 0.01, 3).unwrap().out_of_context);
        }
    }

    #[test]
    fn z_test_needs_statistics() {
        let e = entry_with(&[1.0]);
        assert!(matches!(
            e.test(1.0, 3.0, 10),
            Err(Error::InsufficientStatistics { .. })
        ));
        let mut untrained = entry_with(&[1.0; 20]);
        untrained.trained = false;
        assert!(untrained.test(1.0, 3.0, 10).is_err());
    }

    #[test]
    fn zero_variance_uses_floor() {
        let e = entry_with(&[0.5; 12]);
        let t = e.test(0.5 + 1e-8, 3.0, 10).unwrap();
        assert!((t.z_score - 10.0).abs() < 1e-6);
        assert!(t.out_of_context);
    }

    #[test]
    fn record_folds_error_into_current_entry() {
        let mut kb = kb(2, 2);
        let z = vec![0.1, 0.2, 1.0, 0.0];
        let e = kb.record_in_context(z.clone()).unwrap();
        assert_eq!(e, kb.current().model.reconstruction_error(&z).unwrap());
        assert_eq!(kb.current().stats.count, 1);
        assert_eq!(kb.current().buffer.len(), 1);
        assert!(matches!(kb.record_in_context(vec![0.0; 3]), Err(Error::Shape { .. })));
    }

    #[test]
    fn refresh_recomputes_stats_over_buffer() {
        let mut kb = kb(3, 2);
        let mut rng = SeededRng::new(1);
        for _ in 0..40 {
            let mut z: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..1.0)).collect();
            z.extend([1.0, 0.0]);
            kb.record_in_context(z).unwrap();
        }
        kb.refresh_from_buffer(20, &TrainConfig::default()).unwrap();
        let entry = kb.current();
        let errs = entry.model.errors(&entry.buffer).unwrap();
        let (mean, sd) = two_pass(&errs);
        assert_eq!(entry.stats.count, 40);
        assert!(((entry.stats.mean - mean) / mean).abs() < 1e-9);
        assert!(((entry.stats.std_dev().unwrap() - sd) / sd).abs() < 1e-9);
        assert!(kb.refresh_context_model(&[], &TrainConfig::default()).is_err());
    }

    #[test]
    fn unready_current_context_never_spawns() {
        let mut kb = kb(1, 2);
        let out = kb.match_or_hypothesize(&[100.0, 0.0, 1.0]).unwrap();
        assert_eq!(out.decision, ContextDecision::Matched(1));
        assert_eq!(kb.entries().len(), 1);
        assert_eq!(out.scores.len(), 1);
        assert!(out.scores[0].z_score.is_none());
    }

    #[test]
    fn infer_batch_rejects_empty() {
        let kb = kb(1, 2);
        assert!(kb.infer_context_batch(&[], 0).is_err());
        let one = [Sample::new(vec![0.3]).unwrap()];
        assert_eq!(kb.infer_context_batch(&one, 0).unwrap(), 1);
    }

    #[test]
    fn context_trace_csv_layout() {
        let rows = vec![
            ContextTraceRow {
                step: 0,
                context_id: 1,
                scores: vec![EntryScore {
                    id: 1,
                    error: 0.25,
                    z_score: Some(1.5),
                }],
            },
            ContextTraceRow {
                step: 1,
                context_id: 2,
                scores: vec![],
            },
        ];
        let mut buf = Vec::new();
        write_context_trace(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "step,context_id,eps_1,z_1,eps_2,z_2\n0,1,0.25,1.5,,\n1,2,,,,\n");
    }
}
