//! Canonical stream file: CSV with header `f0..f{d-1},label,gt_partition`.
//!
//! `gt_partition` holds the ground-truth concept id of the partition each
//! row belongs to. On read, partition length is the length of the first run
//! of equal ids and every later run must match it.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::stream::{LabeledSample, Sample, Stream, StreamSpec};

pub fn write_stream<W: Write>(stream: &Stream, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = stream.spec.dim;
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    header.push("gt_partition".into());
    w.write_record(&header)?;
    for (i, s) in stream.samples.iter().enumerate() {
        let mut rec: Vec<String> = s.features().iter().map(|v| v.to_string()).collect();
        rec.push(s.label.to_string());
        rec.push(stream.spec.partition_sequence[stream.spec.partition_of(i)].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a stream file. `classes` defaults to `max(label) + 1` (at least 2).
pub fn read_stream<R: Read>(input: R, name: &str, classes: Option<usize>, path: &Path) -> Result<Stream> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    let n_cols = header.len();
    if n_cols < 2 || &header[n_cols - 2] != "label" || &header[n_cols - 1] != "gt_partition" {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "header must end with `label,gt_partition`".into(),
        });
    }
    let d = n_cols - 2;
    for (j, h) in header.iter().take(d).enumerate() {
        if h != format!("f{j}") {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected column `f{j}`, found `{h}`"),
            });
        }
    }
    let mut samples = Vec::new();
    let mut concepts = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let features = rec
            .iter()
            .take(d)
            .map(|f| f.parse::<f64>().map_err(|_| bad(format!("not a number: `{f}`"))))
            .collect::<Result<Vec<_>>>()?;
        let label: usize = rec[d].parse().map_err(|_| bad(format!("bad label `{}`", &rec[d])))?;
        let concept: u32 = rec[d + 1]
            .parse()
            .map_err(|_| bad(format!("bad gt_partition `{}`", &rec[d + 1])))?;
        let sample = Sample::new(features).map_err(|e| bad(e.to_string()))?;
        samples.push(LabeledSample::new(sample, label));
        concepts.push(concept);
    }
    if samples.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: "no rows".into(),
        });
    }

    let mut runs: Vec<(u32, usize)> = Vec::new();
    for &c in &concepts {
        match runs.last_mut() {
            Some((last, n)) if *last == c => *n += 1,
            _ => runs.push((c, 1)),
        }
    }
    let partition_length = runs[0].1;
    if let Some((c, n)) = runs.iter().find(|(_, n)| *n != partition_length) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("partition of concept {c} has {n} rows, expected {partition_length}"),
        });
    }
    let classes = classes.unwrap_or_else(|| samples.iter().map(|s| s.label + 1).max().unwrap_or(2).max(2));
    let spec = StreamSpec::new(name, d, classes, partition_length, runs.iter().map(|r| r.0).collect());
    Stream::new(spec, samples)
}

pub fn save_stream(stream: &Stream, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_stream(stream, std::io::BufWriter::new(f))
}

pub fn load_stream(path: &Path, classes: Option<usize>) -> Result<Stream> {
    let f = std::fs::File::open(path)
        .map_err(|e| Error::Ingestion(format!("cannot open stream file {}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "stream".into());
    read_stream(std::io::BufReader::new(f), &name, classes, path)
}
