//! Stream elements, stream metadata and seeded randomness shared by every
//! other module.
//!
//! Samples are processed strictly in arrival order. Ground-truth partition
//! metadata lives in [`StreamSpec`] and is only ever read by evaluation code.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A feature vector of fixed width `d` for a given stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample(Vec<f64>);

impl Sample {
    /// Wraps a feature vector, rejecting non-finite entries.
    pub fn new(features: Vec<f64>) -> Result<Self> {
        if let Some(j) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "feature {j} is not finite ({})",
                features[j]
            )));
        }
        Ok(Sample(features))
    }

    pub fn features(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample: Sample,
    pub label: usize,
}

impl LabeledSample {
    pub fn new(sample: Sample, label: usize) -> Self {
        LabeledSample { sample, label }
    }

    pub fn features(&self) -> &[f64] {
        self.sample.features()
    }
}

/// Shape and partition layout of a benchmark stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub name: String,
    pub dim: usize,
    pub classes: usize,
    pub partition_length: usize,
    /// Ground-truth concept per partition. Evaluation-only.
    pub partition_sequence: Vec<u32>,
    pub total_length: usize,
}

impl StreamSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        classes: usize,
        partition_length: usize,
        partition_sequence: Vec<u32>,
    ) -> Self {
        let total_length = partition_length * partition_sequence.len();
        StreamSpec {
            name: name.into(),
            dim,
            classes,
            partition_length,
            partition_sequence,
            total_length,
        }
    }

    pub fn partitions(&self) -> usize {
        self.partition_sequence.len()
    }

    /// Partition index (0-based) of absolute stream position `index`.
    pub fn partition_of(&self, index: usize) -> usize {
        (index / self.partition_length.max(1)).min(self.partitions().saturating_sub(1))
    }
}

/// A fully materialized stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub spec: StreamSpec,
    pub samples: Vec<LabeledSample>,
}

impl Stream {
    /// Builds a stream and checks it against its spec.
    pub fn new(spec: StreamSpec, samples: Vec<LabeledSample>) -> Result<Self> {
        if spec.total_length != spec.partition_length * spec.partitions() {
            return Err(Error::InvalidInput(format!(
                "stream `{}`: total length {} != {} x {}",
                spec.name,
                spec.total_length,
                spec.partition_length,
                spec.partitions()
            )));
        }
        if samples.len() != spec.total_length {
            return Err(Error::InvalidInput(format!(
                "stream `{}`: expected {} samples, got {}",
                spec.name,
                spec.total_length,
                samples.len()
            )));
        }
        for s in &samples {
            if s.sample.dim() != spec.dim {
                return Err(Error::shape(spec.dim, s.sample.dim()));
            }
            if s.label >= spec.classes {
                return Err(Error::InvalidLabel {
                    label: s.label,
                    classes: spec.classes,
                });
            }
        }
        Ok(Stream { spec, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Seeded generator. Every random draw in a run goes through one of these,
/// so a seed pins the whole run.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child generator keyed by `stream_id`. Does not advance `self`.
    pub fn fork(&self, stream_id: u64) -> SeededRng {
        // splitmix64 finalizer keeps nearby ids far apart
        let mut z = self.seed ^ stream_id.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeededRng::new(z ^ (z >> 31))
    }
}

impl rand::RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}

/// `x ⊕ onehot(y)`: the autoencoder instance for a labeled sample.
pub fn concat_label(sample: &Sample, label: usize, classes: usize) -> Result<Vec<f64>> {
    if label >= classes {
        return Err(Error::InvalidLabel { label, classes });
    }
    let mut z = Vec::with_capacity(sample.dim() + classes);
    z.extend_from_slice(sample.features());
    z.extend((0..classes).map(|k| if k == label { 1.0 } else { 0.0 }));
    Ok(z)
}

/// `x ⊕ c`: appends the context id as a single real-valued feature.
pub fn concat_context(sample: &Sample, context_id: u32) -> Result<Vec<f64>> {
    if context_id == 0 {
        return Err(Error::InvalidInput("context ids start at 1".into()));
    }
    let mut v = Vec::with_capacity(sample.dim() + 1);
    v.extend_from_slice(sample.features());
    v.push(f64::from(context_id));
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn s(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn concat_label_examples() {
        assert_eq!(concat_label(&s(&[0.5]), 1, 2).unwrap(), vec![0.5, 0.0, 1.0]);

        let stagger = s(&[1., 0., 0., 0., 1., 0., 0., 0., 1.]);
        let z = concat_label(&stagger, 0, 2).unwrap();
        assert_eq!(z.len(), 11);
        assert_eq!(&z[9..], &[1.0, 0.0]);

        let z = concat_label(&s(&[0.0; 64]), 7, 10).unwrap();
        assert_eq!(z.len(), 74);
        assert_eq!(z.iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(z[71], 1.0);
    }

    #[test]
    fn concat_label_rejects_out_of_range() {
        assert!(matches!(
            concat_label(&s(&[0.0]), 2, 2),
            Err(Error::InvalidLabel { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn concat_context_examples() {
        assert_eq!(concat_context(&s(&[0.2, 0.8]), 3).unwrap(), vec![0.2, 0.8, 3.0]);
        assert_eq!(concat_context(&s(&[]), 1).unwrap(), vec![1.0]);
        let a = concat_context(&s(&[1.0, 0.0]), 1).unwrap();
        let b = concat_context(&s(&[1.0, 0.0]), 2).unwrap();
        assert_eq!(a[..2], b[..2]);
        assert_ne!(a[2], b[2]);
        assert!(concat_context(&s(&[1.0]), 0).is_err());
    }

    #[test]
    fn sample_rejects_non_finite() {
        assert!(Sample::new(vec![1.0, f64::NAN]).is_err());
        assert!(Sample::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn rng_is_reproducible_and_forks_differ() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        let xs: Vec<u64> = (0..8).map(|_| a.gen()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.gen()).collect();
        assert_eq!(xs, ys);

        let mut f1 = a.fork(1);
        let mut f2 = a.fork(2);
        assert_ne!(f1.gen::<u64>(), f2.gen::<u64>());
    }

    #[test]
    fn stream_spec_partitions() {
        let spec = StreamSpec::new("t", 1, 2, 200, vec![1, 2, 3, 1, 2, 3]);
        assert_eq!(spec.total_length, 1200);
        assert_eq!(spec.partition_of(0), 0);
        assert_eq!(spec.partition_of(199), 0);
        assert_eq!(spec.partition_of(200), 1);
        assert_eq!(spec.partition_of(1199), 5);
    }

    proptest! {
        #[test]
        fn concat_ops_preserve_length_and_are_injective(
            x in proptest::collection::vec(-10.0f64..10.0, 0..8),
            y1 in 0usize..5, y2 in 0usize..5,
            c1 in 1u32..50, c2 in 1u32..50,
        ) {
            let sx = s(&x);
            let z1 = concat_label(&sx, y1, 5).unwrap();
            let z2 = concat_label(&sx, y2, 5).unwrap();
            prop_assert_eq!(z1.len(), x.len() + 5);
            prop_assert_eq!(z1 == z2, y1 == y2);

            let v1 = concat_context(&sx, c1).unwrap();
            let v2 = concat_context(&sx, c2).unwrap();
            prop_assert_eq!(v1.len(), x.len() + 1);
            prop_assert_eq!(v1 == v2, c1 == c2);
        }
    }
}
