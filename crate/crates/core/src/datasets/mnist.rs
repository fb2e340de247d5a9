//! MNIST / 8x8 digits switching stream.
//!
//! MNIST images are shrunk from 28x28 to the 8x8 grid of the digits set so
//! both sources share one 64-dim feature space with pixels in `[0, 1]`.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{LabeledSample, Sample, SeededRng, Stream, StreamSpec};

pub const SIDE: usize = 8;
pub const DIM: usize = SIDE * SIDE;
pub const MNIST_SIDE: usize = 28;
pub const PARTITION_LENGTH: usize = 1000;
/// 1 = MNIST, 2 = digits.
pub const SOURCE_SEQUENCE: [u32; 6] = [1, 2, 1, 2, 1, 2];
pub const MNIST_SUBSET: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ResizeKernel {
    /// Point-sampled bilinear interpolation at 8x8 pixel centres.
    #[default]
    Bilinear,
    /// Centre 24x24 crop averaged over 3x3 blocks.
    BlockMean,
}

fn read_be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn missing(path: &Path) -> Error {
    Error::Ingestion(format!(
        "MNIST-digits input not found at {}; see README for where to place the files",
        path.display()
    ))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            missing(path)
        } else {
            Error::Io(e)
        }
    })
}

/// Reads an IDX3 image file into row-major `u8` images.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let bytes = read_file(path)?;
    let bad = |m: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: m.to_string(),
    };
    if bytes.len() < 16 || read_be_u32(&bytes, 0) != 2051 {
        return Err(bad("not an IDX3 image file (magic 2051)"));
    }
    let n = read_be_u32(&bytes, 4) as usize;
    let rows = read_be_u32(&bytes, 8) as usize;
    let cols = read_be_u32(&bytes, 12) as usize;
    let size = rows * cols;
    if bytes.len() < 16 + n * size {
        return Err(bad("truncated image data"));
    }
    let images = bytes[16..16 + n * size].chunks(size).map(<[u8]>::to_vec).collect();
    Ok((rows, cols, images))
}

/// Reads an IDX1 label file.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = read_file(path)?;
    let bad = |m: &str| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: m.to_string(),
    };
    if bytes.len() < 8 || read_be_u32(&bytes, 0) != 2049 {
        return Err(bad("not an IDX1 label file (magic 2049)"));
    }
    let n = read_be_u32(&bytes, 4) as usize;
    if bytes.len() < 8 + n {
        return Err(bad("truncated label data"));
    }
    Ok(bytes[8..8 + n].to_vec())
}

/// Shrinks a square grayscale image (values already in `[0, 1]`) to 8x8.
pub fn resize_to_8x8(pixels: &[f64], side: usize, kernel: ResizeKernel) -> Vec<f64> {
    let at = |r: usize, c: usize| pixels[r * side + c];
    let mut out = Vec::with_capacity(DIM);
    match kernel {
        ResizeKernel::Bilinear => {
            let scale = side as f64 / SIDE as f64;
            let coord = |i: usize| ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f64);
            for r in 0..SIDE {
                let y = coord(r);
                let (y0, fy) = (y.floor() as usize, y - y.floor());
                let y1 = (y0 + 1).min(side - 1);
                for c in 0..SIDE {
                    let x = coord(c);
                    let (x0, fx) = (x.floor() as usize, x - x.floor());
                    let x1 = (x0 + 1).min(side - 1);
                    let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
                    let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
                    out.push(top * (1.0 - fy) + bottom * fy);
                }
            }
        }
        ResizeKernel::BlockMean => {
            let block = side / SIDE;
            let offset = (side - block * SIDE) / 2;
            for r in 0..SIDE {
                for c in 0..SIDE {
                    let mut sum = 0.0;
                    for dr in 0..block {
                        for dc in 0..block {
                            sum += at(offset + r * block + dr, offset + c * block + dc);
                        }
                    }
                    out.push(sum / (block * block) as f64);
                }
            }
        }
    }
    out
}

/// Loads the first `limit` MNIST training images, shrunk to 8x8.
pub fn load_mnist(images: &Path, labels: &Path, limit: usize, kernel: ResizeKernel) -> Result<Vec<LabeledSample>> {
    let (rows, cols, imgs) = read_idx_images(images)?;
    let labs = read_idx_labels(labels)?;
    if rows != cols {
        return Err(Error::Parse {
            path: images.to_path_buf(),
            line: 0,
            message: format!("expected square images, got {rows}x{cols}"),
        });
    }
    if imgs.len() != labs.len() {
        return Err(Error::InvalidInput(format!(
            "{} images but {} labels",
            imgs.len(),
            labs.len()
        )));
    }
    imgs.iter()
        .zip(&labs)
        .take(limit)
        .map(|(img, &y)| {
            let px: Vec<f64> = img.iter().map(|&p| f64::from(p) / 255.0).collect();
            Ok(LabeledSample::new(
                Sample::new(resize_to_8x8(&px, rows, kernel))?,
                usize::from(y),
            ))
        })
        .collect()
}

/// Loads the 8x8 digits table: 64 pixel columns (0..=16) then the label.
/// A non-numeric first row is treated as a header.
pub fn load_digits(path: &Path) -> Result<Vec<LabeledSample>> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            missing(path)
        } else {
            Error::Io(e)
        }
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "non-numeric field".into(),
                })
            }
        };
        if values.len() != DIM + 1 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected {} columns, found {}", DIM + 1, values.len()),
            });
        }
        let label = values[DIM];
        if !(0.0..10.0).contains(&label) || label.fract() != 0.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("bad label {label}"),
            });
        }
        let px = values[..DIM].iter().map(|v| (v / 16.0).clamp(0.0, 1.0)).collect();
        out.push(LabeledSample::new(Sample::new(px)?, label as usize));
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no rows".into(),
        });
    }
    Ok(out)
}

pub fn stream_spec() -> StreamSpec {
    StreamSpec::new("mnist-digits", DIM, 10, PARTITION_LENGTH, SOURCE_SEQUENCE.to_vec())
}

/// Builds the M-D-M-D-M-D stream by sampling each partition with
/// replacement from its source.
pub fn mnist_digits_stream(mnist: &[LabeledSample], digits: &[LabeledSample], rng: &mut SeededRng) -> Result<Stream> {
    if mnist.is_empty() || digits.is_empty() {
        return Err(Error::InvalidInput("both sources must be non-empty".into()));
    }
    let spec = stream_spec();
    let samples = (0..spec.total_length)
        .map(|i| {
            let source = if spec.partition_sequence[spec.partition_of(i)] == 1 {
                mnist
            } else {
                digits
            };
            source[rng.gen_range(0..source.len())].clone()
        })
        .collect();
    Stream::new(spec, samples)
}

/// Convenience wrapper: loads both sources and builds the stream.
pub fn load_mnist_digits(
    mnist_images: &Path,
    mnist_labels: &Path,
    digits_csv: &Path,
    kernel: ResizeKernel,
    rng: &mut SeededRng,
) -> Result<Stream> {
    let mnist = load_mnist(mnist_images, mnist_labels, MNIST_SUBSET, kernel)?;
    let digits = load_digits(digits_csv)?;
    mnist_digits_stream(&mnist, &digits, rng)
}
