#![allow(dead_code)]

use ical::context::ErrorStats;
use ical::datasets::propulsion::{label_propulsion, PercentileMode, PropulsionRecord, FEATURES};
use ical::datasets::stagger::{generate_stagger, stagger_label, StaggerItem};
use ical::eval::{ewma, mean_accuracy, Ewma};
use ical::neural::{Autoencoder, TrainConfig};
use ical::stream::{concat_label, SeededRng};
use rand::Rng;

/// Max relative error between the analytic gradient and central finite
/// differences on a random `m-h-m` model and batch.
pub fn gradient_check(m: usize, h: usize, seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let mut ae = Autoencoder::init(m, h, 0.5, &mut rng).unwrap();
    let batch: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let analytic = ae.gradient(&batch).unwrap();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, &g) in analytic.iter().enumerate() {
        let orig = ae.params()[i];
        ae.params_mut()[i] = orig + eps;
        let up = ae.mean_error(&batch).unwrap();
        ae.params_mut()[i] = orig - eps;
        let down = ae.mean_error(&batch).unwrap();
        ae.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let denom = g.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((g - numeric).abs() / denom);
    }
    worst
}

/// Relative error of the streaming statistics against a two-pass oracle.
pub fn stats_error(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let n = rng.gen_range(2..2000);
    let offset: f64 = rng.gen_range(0.0..1e3);
    let values: Vec<f64> = (0..n).map(|_| offset + rng.gen_range(0.0..1.0f64).powi(3)).collect();
    let s = ErrorStats::from_values(&values);
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    rel(s.mean, mean).max(rel(s.variance().unwrap(), var))
}

pub fn mean_accuracy_error(seed: u64) -> f64 {
    let mut rng = SeededRng::new(seed);
    let n = rng.gen_range(1..5000);
    let flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.7)).collect();
    let mut sum = 0.0;
    for &f in &flags {
        if f {
            sum += 1.0;
        }
    }
    (mean_accuracy(&flags).unwrap() - sum / n as f64).abs()
}

/// Feeds a random trace to a streaming EWMA in random-sized chunks and
/// compares bit patterns with the one-shot curve.
pub fn ewma_chunked_matches(seed: u64) -> bool {
    let mut rng = SeededRng::new(seed);
    let n = rng.gen_range(1..3000);
    let flags: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
    let alpha = rng.gen_range(0.01..1.0);
    let whole = ewma(&flags, alpha).unwrap();
    let mut e = Ewma::new(alpha).unwrap();
    let mut chunked = Vec::with_capacity(n);
    let mut rest = &flags[..];
    while !rest.is_empty() {
        let k = rng.gen_range(1..=rest.len().min(97));
        let (head, tail) = rest.split_at(k);
        chunked.extend(head.iter().map(|&f| e.push(if f { 1.0 } else { 0.0 })));
        rest = tail;
    }
    whole
        .iter()
        .map(|v| v.to_bits())
        .eq(chunked.iter().map(|v| v.to_bits()))
}

/// Mean reconstruction error of an autoencoder trained on stagger concept 1,
/// on held-out concept-1 instances and on concept-2 instances.
pub fn stagger_discrimination(seed: u64) -> (f64, f64) {
    let stream = generate_stagger(&mut SeededRng::new(seed));
    let z: Vec<Vec<f64>> = stream
        .samples
        .iter()
        .map(|s| concat_label(&s.sample, s.label, 2).unwrap())
        .collect();
    let (train, held_out) = (&z[..150], &z[150..200]);
    let concept2 = &z[200..400];
    let mut ae = Autoencoder::init(11, 6, 0.3, &mut SeededRng::new(seed).fork(1)).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.2,
        ..TrainConfig::default()
    };
    ae.train_epochs(train, &cfg, 3000).unwrap();
    (ae.mean_error(held_out).unwrap(), ae.mean_error(concept2).unwrap())
}

/// Cells where the labeler disagrees with the hand-written truth table.
pub fn stagger_table_mismatches() -> usize {
    // rows: size-major over (size, color, shape) in index order 0..27
    // concept 1: small and red
    // concept 2: green or circular
    // concept 3: medium or large
    let mut mismatches = 0;
    for (i, item) in StaggerItem::all().enumerate() {
        let (size, color, shape) = (i / 9, (i / 3) % 3, i % 3);
        assert_eq!(item.one_hot()[size], 1.0);
        assert_eq!(item.one_hot()[3 + color], 1.0);
        assert_eq!(item.one_hot()[6 + shape], 1.0);
        let truth = [
            size == 0 && color == 0,
            color == 1 || shape == 1,
            size == 1 || size == 2,
        ];
        for (c, &t) in truth.iter().enumerate() {
            if stagger_label(&item, c as u32 + 1).unwrap() != usize::from(t) {
                mismatches += 1;
            }
        }
    }
    mismatches
}

/// Records whose label differs from a brute-force `#{v <= d} / N > cutoff`
/// rank oracle, over both modes. Decays are drawn from a coarse grid so
/// ties are common.
pub fn percentile_mismatches(seed: u64) -> usize {
    let mut rng = SeededRng::new(seed);
    let n = rng.gen_range(1..600);
    let records: Vec<PropulsionRecord> = (0..n)
        .map(|_| {
            let d = 0.95 + 0.001 * rng.gen_range(0..51) as f64;
            PropulsionRecord {
                features: [0.0; FEATURES],
                compressor_decay: d,
                turbine_decay: 1.0,
            }
        })
        .collect();
    let mut sorted: Vec<f64> = records.iter().map(|r| r.compressor_decay).collect();
    sorted.sort_by(f64::total_cmp);
    let mut bad = 0;
    for (mode, cutoff) in [(1, 0.1), (2, 0.9)] {
        let labels = label_propulsion(&records, mode, PercentileMode::Rank).unwrap();
        for (r, &got) in records.iter().zip(&labels) {
            let le = sorted.partition_point(|&v| v <= r.compressor_decay);
            let brute = records
                .iter()
                .filter(|o| o.compressor_decay <= r.compressor_decay)
                .count();
            assert_eq!(le, brute);
            if got != usize::from(le as f64 / n as f64 > cutoff) {
                bad += 1;
            }
        }
    }
    bad
}
