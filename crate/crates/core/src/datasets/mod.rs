//! Benchmark streams: synthetic STAGGER, UCI naval propulsion and the
//! MNIST / 8x8 digits switching stream, plus feature normalization and the
//! canonical stream file format.

pub mod fetch;
pub mod mnist;
pub mod normalize;
pub mod propulsion;
pub mod stagger;
pub mod stream_file;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::{SeededRng, Stream};

pub use fetch::{fetch_uci, FetchOutcome, UciSource};
pub use mnist::{load_mnist_digits, ResizeKernel};
pub use normalize::Normalizer;
pub use propulsion::{label_propulsion, load_propulsion, PercentileMode, PropulsionRecord};
pub use stagger::{generate_stagger, stagger_label, StaggerItem};
pub use stream_file::{load_stream, save_stream};

/// `$ICAL_CACHE_DIR`, else `$HOME/.cache/ical`, else `./.ical-cache`.
pub fn default_cache_dir() -> PathBuf {
    if let Ok(dir) = std::env::var("ICAL_CACHE_DIR") {
        return PathBuf::from(dir);
    }
    match std::env::var("HOME") {
        Ok(home) => Path::new(&home).join(".cache").join("ical"),
        Err(_) => PathBuf::from(".ical-cache"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StreamName {
    Stagger,
    Propulsion,
    MnistDigits,
}

impl StreamName {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "stagger" => Ok(StreamName::Stagger),
            "propulsion" => Ok(StreamName::Propulsion),
            "mnist-digits" | "mnist" => Ok(StreamName::MnistDigits),
            other => Err(Error::InvalidConfig(format!(
                "unknown stream `{other}` (expected stagger, propulsion or mnist-digits)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StreamName::Stagger => "stagger",
            StreamName::Propulsion => "propulsion",
            StreamName::MnistDigits => "mnist-digits",
        }
    }
}

/// Knobs for building the named streams from the cache directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataOptions {
    pub cache_dir: PathBuf,
    pub percentile: PercentileMode,
    pub resize: ResizeKernel,
}

impl Default for DataOptions {
    fn default() -> Self {
        DataOptions {
            cache_dir: default_cache_dir(),
            percentile: PercentileMode::default(),
            resize: ResizeKernel::default(),
        }
    }
}

impl DataOptions {
    pub fn propulsion_path(&self) -> PathBuf {
        self.cache_dir.join("propulsion").join("data.txt")
    }

    pub fn mnist_images(&self) -> PathBuf {
        self.cache_dir.join("mnist").join("train-images-idx3-ubyte")
    }

    pub fn mnist_labels(&self) -> PathBuf {
        self.cache_dir.join("mnist").join("train-labels-idx1-ubyte")
    }

    pub fn digits_csv(&self) -> PathBuf {
        self.cache_dir.join("digits.csv")
    }
}

/// Materializes a named stream. Deterministic in `seed`.
pub fn build_stream(name: StreamName, seed: u64, opts: &DataOptions) -> Result<Stream> {
    let mut rng = SeededRng::new(seed).fork(0x5354_5245_414d);
    match name {
        StreamName::Stagger => Ok(generate_stagger(&mut rng)),
        StreamName::Propulsion => {
            let records = load_propulsion(&opts.propulsion_path())?;
            propulsion::propulsion_stream(&records, opts.percentile, &mut rng)
        }
        StreamName::MnistDigits => load_mnist_digits(
            &opts.mnist_images(),
            &opts.mnist_labels(),
            &opts.digits_csv(),
            opts.resize,
            &mut rng,
        ),
    }
}
