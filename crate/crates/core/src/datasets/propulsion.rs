//! Naval propulsion plant condition-based-maintenance data.
//!
//! Each record carries 16 sensor/operating features followed by the
//! compressor and turbine decay coefficients. Labels mark a compressor as
//! unhealthy (1) depending on where its decay falls in the dataset's
//! distribution; the two operating modes use different cut points.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{LabeledSample, Sample, SeededRng, Stream, StreamSpec};

pub const FEATURES: usize = 16;
pub const PARTITION_LENGTH: usize = 300;
pub const MODE_SEQUENCE: [u32; 4] = [1, 2, 1, 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropulsionRecord {
    pub features: [f64; FEATURES],
    pub compressor_decay: f64,
    pub turbine_decay: f64,
}

/// How the decay cut for each mode is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PercentileMode {
    /// Label 1 iff the record's empirical percentile rank `#{v <= decay} / N`
    /// exceeds the mode cutoff.
    #[default]
    Rank,
    /// Label 1 iff the decay exceeds the cutoff-quantile of all decays
    /// (linear interpolation between order statistics).
    Quantile,
}

/// Rank cutoff for operating mode 1 or 2.
pub fn mode_cutoff(mode: u32) -> Result<f64> {
    match mode {
        1 => Ok(0.1),
        2 => Ok(0.9),
        other => Err(Error::InvalidInput(format!(
            "propulsion mode must be 1 or 2, got {other}"
        ))),
    }
}

/// Parses the UCI table: whitespace- or comma-separated, 18 numeric columns.
pub fn parse_propulsion(text: &str, path: &Path) -> Result<Vec<PropulsionRecord>> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let values: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("not a number: `{t}`"))))
            .collect::<Result<_>>()?;
        if values.len() != FEATURES + 2 {
            return Err(parse_err(format!(
                "expected {} columns, found {}",
                FEATURES + 2,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(format!("non-finite value {v}")));
        }
        let mut features = [0.0; FEATURES];
        features.copy_from_slice(&values[..FEATURES]);
        records.push(PropulsionRecord {
            features,
            compressor_decay: values[FEATURES],
            turbine_decay: values[FEATURES + 1],
        });
    }
    if records.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no records".into(),
        });
    }
    Ok(records)
}

pub fn load_propulsion(path: &Path) -> Result<Vec<PropulsionRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Ingestion(format!(
                "propulsion data not found at {}; run `ical fetch propulsion` first",
                path.display()
            ))
        } else {
            Error::Io(e)
        }
    })?;
    parse_propulsion(&text, path)
}

/// Empirical percentile rank `#{j : v_j <= v_i} / N` of every value.
pub fn percentile_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (j + 1) as f64 / n as f64;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// `q`-quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Labels every record for the given operating mode.
pub fn label_propulsion(records: &[PropulsionRecord], mode: u32, how: PercentileMode) -> Result<Vec<usize>> {
    let cutoff = mode_cutoff(mode)?;
    let decays: Vec<f64> = records.iter().map(|r| r.compressor_decay).collect();
    Ok(match how {
        PercentileMode::Rank => percentile_ranks(&decays)
            .into_iter()
            .map(|r| usize::from(r > cutoff))
            .collect(),
        PercentileMode::Quantile => {
            let cut = quantile(&decays, cutoff);
            decays.iter().map(|&d| usize::from(d > cut)).collect()
        }
    })
}

pub fn stream_spec() -> StreamSpec {
    StreamSpec::new("propulsion", FEATURES, 2, PARTITION_LENGTH, MODE_SEQUENCE.to_vec())
}

/// Samples 300 records per partition uniformly with replacement, labeled
/// by the partition's operating mode, in the order C1-C2-C1-C2.
pub fn propulsion_stream(records: &[PropulsionRecord], how: PercentileMode, rng: &mut SeededRng) -> Result<Stream> {
    if records.is_empty() {
        return Err(Error::InvalidInput("no propulsion records".into()));
    }
    let labels1 = label_propulsion(records, 1, how)?;
    let labels2 = label_propulsion(records, 2, how)?;
    let spec = stream_spec();
    let samples = (0..spec.total_length)
        .map(|i| {
            let mode = spec.partition_sequence[spec.partition_of(i)];
            let k = rng.gen_range(0..records.len());
            let label = if mode == 1 { labels1[k] } else { labels2[k] };
            Ok(LabeledSample::new(Sample::new(records[k].features.to_vec())?, label))
        })
        .collect::<Result<_>>()?;
    Stream::new(spec, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(decay: f64) -> PropulsionRecord {
        PropulsionRecord {
            features: [decay; FEATURES],
            compressor_decay: decay,
            turbine_decay: 1.0,
        }
    }

    fn synthetic(n: usize) -> Vec<PropulsionRecord> {
        // 51 decay levels like the real table, repeated
        (0..n).map(|i| record(0.95 + 0.001 * (i % 51) as f64)).collect()
    }

    #[test]
    fn extremes_are_labeled_consistently() {
        let recs = synthetic(510);
        for mode in [1, 2] {
            let labels = label_propulsion(&recs, mode, PercentileMode::Rank).unwrap();
            let max_i = recs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.compressor_decay.total_cmp(&b.1.compressor_decay))
                .unwrap()
                .0;
            let min_i = recs
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.compressor_decay.total_cmp(&b.1.compressor_decay))
                .unwrap()
                .0;
            assert_eq!(labels[max_i], 1);
            assert_eq!(labels[min_i], 0);
        }
    }

    #[test]
    fn positive_rates_flip_between_modes() {
        let recs = synthetic(5100);
        let rate = |mode| {
            let l = label_propulsion(&recs, mode, PercentileMode::Rank).unwrap();
            l.iter().sum::<usize>() as f64 / l.len() as f64
        };
        assert!((rate(1) - 0.9).abs() < 0.03, "{}", rate(1));
        assert!((rate(2) - 0.1).abs() < 0.03, "{}", rate(2));
    }

    #[test]
    fn quantile_mode_matches_rank_on_distinct_values() {
        let recs: Vec<_> = (0..1000).map(|i| record(i as f64)).collect();
        for mode in [1, 2] {
            let a = label_propulsion(&recs, mode, PercentileMode::Rank).unwrap();
            let b = label_propulsion(&recs, mode, PercentileMode::Quantile).unwrap();
            let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
            assert!(diff <= 1, "mode {mode}: {diff}");
        }
    }

    #[test]
    fn parse_reports_line_numbers() {
        let p = Path::new("data.txt");
        let good = vec!["1.0"; 18].join("   ");
        assert_eq!(parse_propulsion(&good, p).unwrap().len(), 1);
        let comma = vec!["2"; 18].join(",");
        assert_eq!(parse_propulsion(&comma, p).unwrap()[0].turbine_decay, 2.0);

        let short = format!("{good}\n1 2 3\n");
        match parse_propulsion(&short, p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let bad = format!("{good}\n{good}\n{}", vec!["x"; 18].join(" "));
        match parse_propulsion(&bad, p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_file_points_at_fetch() {
        let err = load_propulsion(Path::new("/nonexistent/ical/data.txt")).unwrap_err();
        assert!(matches!(err, Error::Ingestion(_)));
        assert!(err.to_string().contains("fetch"));
    }

    #[test]
    fn stream_layout() {
        let recs = synthetic(510);
        let s = propulsion_stream(&recs, PercentileMode::Rank, &mut SeededRng::new(4)).unwrap();
        assert_eq!(s.len(), 1200);
        assert_eq!(s.spec.partition_sequence, vec![1, 2, 1, 2]);
        assert_eq!(s.spec.dim, 16);
        let again = propulsion_stream(&recs, PercentileMode::Rank, &mut SeededRng::new(4)).unwrap();
        assert_eq!(s, again);
    }
}
