//! STAGGER block world: three nominal attributes, three target concepts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{LabeledSample, Sample, SeededRng, Stream, StreamSpec};

pub const PARTITION_LENGTH: usize = 200;
pub const CONCEPT_SEQUENCE: [u32; 6] = [1, 2, 3, 1, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Size {
    Small,
    Medium,
    Large,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Color {
    Red,
    Green,
    Blue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    Square,
    Circular,
    Triangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StaggerItem {
    pub size: Size,
    pub color: Color,
    pub shape: Shape,
}

const SIZES: [Size; 3] = [Size::Small, Size::Medium, Size::Large];
const COLORS: [Color; 3] = [Color::Red, Color::Green, Color::Blue];
const SHAPES: [Shape; 3] = [Shape::Square, Shape::Circular, Shape::Triangular];

impl StaggerItem {
    /// All 27 attribute combinations, size-major.
    pub fn all() -> impl Iterator<Item = StaggerItem> {
        SIZES.into_iter().flat_map(|size| {
            COLORS
                .into_iter()
                .flat_map(move |color| SHAPES.into_iter().map(move |shape| StaggerItem { size, color, shape }))
        })
    }

    pub fn random(rng: &mut SeededRng) -> Self {
        StaggerItem {
            size: SIZES[rng.gen_range(0..3)],
            color: COLORS[rng.gen_range(0..3)],
            shape: SHAPES[rng.gen_range(0..3)],
        }
    }

    /// 9-dim one-hot: `[small, medium, large, red, green, blue, square,
    /// circular, triangular]`.
    pub fn one_hot(&self) -> [f64; 9] {
        let mut v = [0.0; 9];
        v[self.size as usize] = 1.0;
        v[3 + self.color as usize] = 1.0;
        v[6 + self.shape as usize] = 1.0;
        v
    }
}

pub fn stagger_label(item: &StaggerItem, concept: u32) -> Result<usize> {
    let positive = match concept {
        1 => item.size == Size::Small && item.color == Color::Red,
        2 => item.color == Color::Green || item.shape == Shape::Circular,
        3 => matches!(item.size, Size::Medium | Size::Large),
        other => {
            return Err(Error::InvalidInput(format!(
                "stagger concept must be 1, 2 or 3, got {other}"
            )))
        }
    };
    Ok(usize::from(positive))
}

pub fn stream_spec() -> StreamSpec {
    StreamSpec::new("stagger", 9, 2, PARTITION_LENGTH, CONCEPT_SEQUENCE.to_vec())
}

/// 1200 uniformly drawn items, concept switching every 200 samples in the
/// order 1-2-3-1-2-3.
pub fn generate_stagger(rng: &mut SeededRng) -> Stream {
    let spec = stream_spec();
    let samples = (0..spec.total_length)
        .map(|i| {
            let concept = spec.partition_sequence[spec.partition_of(i)];
            let item = StaggerItem::random(rng);
            let label = stagger_label(&item, concept).expect("concept ids are 1..=3");
            let sample = Sample::new(item.one_hot().to_vec()).expect("one-hot is finite");
            LabeledSample::new(sample, label)
        })
        .collect();
    Stream::new(spec, samples).expect("generated stream matches its spec")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_examples() {
        let item = |size, color, shape| StaggerItem { size, color, shape };
        assert_eq!(
            stagger_label(&item(Size::Small, Color::Red, Shape::Triangular), 1).unwrap(),
            1
        );
        assert_eq!(
            stagger_label(&item(Size::Large, Color::Green, Shape::Square), 2).unwrap(),
            1
        );
        assert_eq!(
            stagger_label(&item(Size::Small, Color::Red, Shape::Square), 3).unwrap(),
            0
        );
        assert!(stagger_label(&item(Size::Small, Color::Red, Shape::Square), 4).is_err());
        assert!(stagger_label(&item(Size::Small, Color::Red, Shape::Square), 0).is_err());
    }

    #[test]
    fn one_hot_has_three_ones() {
        for item in StaggerItem::all() {
            let v = item.one_hot();
            assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 3);
            assert_eq!(v.iter().sum::<f64>(), 3.0);
        }
        assert_eq!(StaggerItem::all().count(), 27);
    }

    #[test]
    fn generated_stream_layout() {
        let stream = generate_stagger(&mut SeededRng::new(1));
        assert_eq!(stream.spec.partition_length, 200);
        assert_eq!(stream.spec.partition_sequence, vec![1, 2, 3, 1, 2, 3]);
        assert_eq!(stream.len(), 1200);
        assert_eq!(stream, generate_stagger(&mut SeededRng::new(1)));
        assert_ne!(stream, generate_stagger(&mut SeededRng::new(2)));
    }
}
