//! Single-bottleneck feed-forward autoencoder trained by plain gradient
//! descent on mean squared reconstruction error.
//!
//! Architecture is `m -> h -> m` with a logistic sigmoid on the hidden layer
//! and identity on the output. All parameters live in one flat buffer laid out
//! as `[w1 (h x m), b1 (h), w2 (m x h), b2 (m)]`, row-major, which keeps the
//! gradient the same shape as the parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::stream::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    /// Mini-batch size; `None` uses the whole window as one batch.
    pub batch_size: Option<usize>,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs_per_update: 20,
            batch_size: None,
            init_scale: 0.3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.epochs_per_update == 0 {
            return Err(Error::InvalidConfig("epochs_per_update must be positive".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "init_scale must be positive, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

/// Bottleneck width used throughout: `ceil(m / 2)`.
pub fn default_bottleneck(m: usize) -> usize {
    m.div_ceil(2)
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    input: usize,
    hidden: usize,
    params: Vec<f64>,
    train_steps: u64,
}

/// Flat JSON snapshot: layer sizes plus row-major parameter arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderSnapshot {
    pub layer_sizes: Vec<usize>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub train_step_count: u64,
}

impl Autoencoder {
    /// Weights uniform in `[-init_scale, init_scale]`, biases zero.
    pub fn init(input: usize, hidden: usize, init_scale: f64, rng: &mut SeededRng) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::InvalidConfig(format!(
                "autoencoder dimensions must be positive, got [{input}, {hidden}, {input}]"
            )));
        }
        if !(init_scale > 0.0 && init_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "init_scale must be positive, got {init_scale}"
            )));
        }
        let mut model = Autoencoder::zeros(input, hidden);
        let (w1, w2) = (model.w1_range(), model.w2_range());
        for i in w1.chain(w2) {
            model.params[i] = rng.gen_range(-init_scale..=init_scale);
        }
        Ok(model)
    }

    /// All-zero parameters.
    pub fn zeros(input: usize, hidden: usize) -> Self {
        let n = 2 * input * hidden + hidden + input;
        Autoencoder {
            input,
            hidden,
            params: vec![0.0; n],
            train_steps: 0,
        }
    }

    pub fn layer_sizes(&self) -> [usize; 3] {
        [self.input, self.hidden, self.input]
    }

    pub fn input_width(&self) -> usize {
        self.input
    }

    pub fn train_step_count(&self) -> u64 {
        self.train_steps
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn w1_range(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }

    fn b1_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden
    }

    fn w2_range(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input + self.hidden;
        s..s + self.input * self.hidden
    }

    fn b2_range(&self) -> std::ops::Range<usize> {
        let s = 2 * self.hidden * self.input + self.hidden;
        s..s + self.input
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.input {
            return Err(Error::shape(self.input, z.len()));
        }
        Ok(())
    }

    fn hidden_into(&self, z: &[f64], act: &mut [f64]) {
        let w1 = &self.params[self.w1_range()];
        let b1 = &self.params[self.b1_range()];
        for (k, a) in act.iter_mut().enumerate() {
            let row = &w1[k * self.input..(k + 1) * self.input];
            let pre: f64 = row.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + b1[k];
            *a = sigmoid(pre);
        }
    }

    fn output_into(&self, act: &[f64], out: &mut [f64]) {
        let w2 = &self.params[self.w2_range()];
        let b2 = &self.params[self.b2_range()];
        for (j, o) in out.iter_mut().enumerate() {
            let row = &w2[j * self.hidden..(j + 1) * self.hidden];
            *o = row.iter().zip(act).map(|(w, a)| w * a).sum::<f64>() + b2[j];
        }
    }

    /// `ẑ = W2·σ(W1·z + b1) + b2`
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check(z)?;
        let mut act = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.input];
        self.hidden_into(z, &mut act);
        self.output_into(&act, &mut out);
        Ok(out)
    }

    /// Mean squared error between `z` and its reconstruction.
    pub fn reconstruction_error(&self, z: &[f64]) -> Result<f64> {
        self.check(z)?;
        let mut act = vec![0.0; self.hidden];
        let mut out = vec![0.0; self.input];
        Ok(self.error_with(z, &mut act, &mut out))
    }

    fn error_with(&self, z: &[f64], act: &mut [f64], out: &mut [f64]) -> f64 {
        self.hidden_into(z, act);
        self.output_into(act, out);
        let sse: f64 = z.iter().zip(out.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        sse / self.input as f64
    }

    /// Per-vector reconstruction errors, in input order.
    pub fn errors(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        for z in batch {
            self.check(z)?;
        }
        let chunk = 64;
        let n_chunks = batch.len().div_ceil(chunk);
        let parts = par::map_range(n_chunks, 8, |c| {
            let mut act = vec![0.0; self.hidden];
            let mut out = vec![0.0; self.input];
            batch[c * chunk..((c + 1) * chunk).min(batch.len())]
                .iter()
                .map(|z| self.error_with(z, &mut act, &mut out))
                .collect::<Vec<_>>()
        });
        Ok(parts.into_iter().flatten().collect())
    }

    /// Mean reconstruction error over a batch (the training loss).
    pub fn mean_error(&self, batch: &[Vec<f64>]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let errs = self.errors(batch)?;
        Ok(errs.iter().sum::<f64>() / errs.len() as f64)
    }

    /// Gradient of [`Autoencoder::mean_error`] over `batch` with respect to
    /// the flat parameter vector.
    pub fn gradient(&self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let (m, h) = (self.input, self.hidden);
        let mut grad = vec![0.0; self.params.len()];
        let (w1r, b1r, w2r, b2r) = (self.w1_range(), self.b1_range(), self.w2_range(), self.b2_range());
        let w2 = &self.params[w2r.clone()];
        let scale = 2.0 / (batch.len() * m) as f64;

        let mut act = vec![0.0; h];
        let mut out = vec![0.0; m];
        let mut d_out = vec![0.0; m];
        let mut d_pre = vec![0.0; h];
        for z in batch {
            self.check(z)?;
            self.hidden_into(z, &mut act);
            self.output_into(&act, &mut out);
            for j in 0..m {
                d_out[j] = scale * (out[j] - z[j]);
            }
            for k in 0..h {
                let mut da = 0.0;
                for j in 0..m {
                    da += w2[j * h + k] * d_out[j];
                }
                d_pre[k] = da * act[k] * (1.0 - act[k]);
            }
            let (g_w1, rest) = grad[w1r.start..].split_at_mut(w1r.len());
            let (g_b1, rest) = rest.split_at_mut(b1r.len());
            let (g_w2, g_b2) = rest.split_at_mut(w2r.len());
            debug_assert_eq!(g_b2.len(), b2r.len());
            for j in 0..m {
                let row = &mut g_w2[j * h..(j + 1) * h];
                for k in 0..h {
                    row[k] += d_out[j] * act[k];
                }
                g_b2[j] += d_out[j];
            }
            for k in 0..h {
                let row = &mut g_w1[k * m..(k + 1) * m];
                for i in 0..m {
                    row[i] += d_pre[k] * z[i];
                }
                g_b1[k] += d_pre[k];
            }
        }
        Ok(grad)
    }

    /// Runs `epochs` passes of mini-batch gradient descent over `batch`.
    pub fn train_epochs(&mut self, batch: &[Vec<f64>], cfg: &TrainConfig, epochs: usize) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("cannot train on an empty batch".into()));
        }
        for z in batch {
            self.check(z)?;
        }
        let bs = cfg.batch_size.unwrap_or(batch.len()).max(1);
        for _ in 0..epochs {
            for chunk in batch.chunks(bs) {
                let grad = self.gradient(chunk)?;
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::InvalidInput(
                        "non-finite gradient; lower the learning rate".into(),
                    ));
                }
                for (p, g) in self.params.iter_mut().zip(&grad) {
                    *p -= cfg.learning_rate * g;
                }
                self.train_steps += 1;
            }
        }
        Ok(())
    }

    /// One update call: `epochs_per_update` passes.
    pub fn train(&mut self, batch: &[Vec<f64>], cfg: &TrainConfig) -> Result<()> {
        self.train_epochs(batch, cfg, cfg.epochs_per_update)
    }

    pub fn snapshot(&self) -> AutoencoderSnapshot {
        AutoencoderSnapshot {
            layer_sizes: self.layer_sizes().to_vec(),
            w1: self.params[self.w1_range()].to_vec(),
            b1: self.params[self.b1_range()].to_vec(),
            w2: self.params[self.w2_range()].to_vec(),
            b2: self.params[self.b2_range()].to_vec(),
            train_step_count: self.train_steps,
        }
    }

    pub fn from_snapshot(snap: &AutoencoderSnapshot) -> Result<Self> {
        let &[m, h, m2] = snap.layer_sizes.as_slice() else {
            return Err(Error::InvalidInput(format!(
                "expected three layer sizes, got {:?}",
                snap.layer_sizes
            )));
        };
        if m != m2 {
            return Err(Error::InvalidInput("first and last layer sizes differ".into()));
        }
        let mut model = Autoencoder::zeros(m, h);
        for (range, src) in [
            (model.w1_range(), &snap.w1),
            (model.b1_range(), &snap.b1),
            (model.w2_range(), &snap.w2),
            (model.b2_range(), &snap.b2),
        ] {
            if range.len() != src.len() {
                return Err(Error::shape(range.len(), src.len()));
            }
            model.params[range].copy_from_slice(src);
        }
        model.train_steps = snap.train_step_count;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.snapshot())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Autoencoder::from_snapshot(&serde_json::from_str(s)?)
    }
}
