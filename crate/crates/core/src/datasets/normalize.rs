use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::Sample;

/// Per-feature min-max scaling to `[0, 1]`, fitted once and then frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(reference: impl IntoIterator<Item = &'a Sample>) -> Result<Self> {
        let mut iter = reference.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidInput("cannot fit a normalizer on zero samples".into()))?;
        let mut min = first.features().to_vec();
        let mut max = min.clone();
        for s in iter {
            if s.dim() != min.len() {
                return Err(Error::Shape {
                    expected: min.len(),
                    actual: s.dim(),
                });
            }
            for (j, &v) in s.features().iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Normalizer { min, max })
    }

    /// Constant features map to 0.5; values outside the fitted range clamp.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.min.len() {
            return Err(Error::Shape {
                expected: self.min.len(),
                actual: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let span = self.max[j] - self.min[j];
                if span > 0.0 {
                    ((v - self.min[j]) / span).clamp(0.0, 1.0)
                } else {
                    0.5
                }
            })
            .collect())
    }

    pub fn apply_sample(&self, s: &Sample) -> Result<Sample> {
        Sample::new(self.apply(s.features())?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Sample {
        Sample::new(v.to_vec()).unwrap()
    }

    #[test]
    fn examples() {
        let n = Normalizer::fit(&[s(&[0.0]), s(&[10.0])]).unwrap();
        assert_eq!(n.apply(&[5.0]).unwrap(), vec![0.5]);
        assert_eq!(n.apply(&[20.0]).unwrap(), vec![1.0]);
        assert_eq!(n.apply(&[-3.0]).unwrap(), vec![0.0]);

        let c = Normalizer::fit(&[s(&[3.0]), s(&[3.0])]).unwrap();
        assert_eq!(c.apply(&[3.0]).unwrap(), vec![0.5]);
        assert_eq!(c.apply(&[-99.0]).unwrap(), vec![0.5]);
    }

    #[test]
    fn errors() {
        assert!(Normalizer::fit(std::iter::empty::<&Sample>()).is_err());
        assert!(Normalizer::fit(&[s(&[0.0]), s(&[1.0, 2.0])]).is_err());
        let n = Normalizer::fit(&[s(&[0.0])]).unwrap();
        assert!(n.apply(&[1.0, 2.0]).is_err());
    }
}
