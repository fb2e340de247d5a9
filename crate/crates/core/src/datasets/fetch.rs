//! Download-and-cache for UCI archives.
//!
//! Layout under the cache directory: `<dataset>/<member>` holds the
//! extracted data file and `<dataset>/archive.sha256` the digest of the
//! archive it came from. A warm cache is served without touching the network.

use std::io::{Cursor, Read};
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const PROPULSION_URL: &str =
    "https://archive.ics.uci.edu/static/public/316/condition+based+maintenance+of+naval+propulsion+plants.zip";

/// Where a dataset comes from and what to pull out of the archive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UciSource {
    pub name: String,
    pub url: String,
    /// Expected SHA-256 of the downloaded archive (lowercase hex). When
    /// `None`, the digest of the first successful download is recorded and
    /// enforced on later fetches.
    pub sha256: Option<String>,
    /// File name to extract from the archive.
    pub member: String,
}

/// Built-in sources. `ICAL_<NAME>_URL` / `ICAL_<NAME>_SHA256` override
/// the defaults.
pub fn known_source(dataset: &str) -> Result<UciSource> {
    match dataset {
        "propulsion" => Ok(UciSource {
            name: "propulsion".into(),
            url: std::env::var("ICAL_PROPULSION_URL").unwrap_or_else(|_| PROPULSION_URL.into()),
            sha256: std::env::var("ICAL_PROPULSION_SHA256").ok(),
            member: "data.txt".into(),
        }),
        other => Err(Error::UnknownDataset(other.into())),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchOutcome {
    pub path: PathBuf,
    pub downloaded: bool,
}

pub fn cached_path(source: &UciSource, cache_dir: &Path) -> PathBuf {
    cache_dir.join(&source.name).join(&source.member)
}

fn lock_path(source: &UciSource, cache_dir: &Path) -> PathBuf {
    cache_dir.join(&source.name).join("archive.sha256")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn download(url: &str) -> Result<Vec<u8>> {
    let net = |message: String| Error::Network {
        url: url.to_string(),
        message,
    };
    if let Some(path) = url.strip_prefix("file://") {
        return std::fs::read(path).map_err(|e| net(e.to_string()));
    }
    if !(url.starts_with("http://") || url.starts_with("https://")) {
        return std::fs::read(url).map_err(|e| net(e.to_string()));
    }
    let agent = ureq::AgentBuilder::new()
        .timeout_connect(Duration::from_secs(20))
        .timeout_read(Duration::from_secs(120))
        .build();
    let resp = agent.get(url).call().map_err(|e| net(e.to_string()))?;
    let mut body = Vec::new();
    resp.into_reader()
        .take(512 * 1024 * 1024)
        .read_to_end(&mut body)
        .map_err(|e| net(e.to_string()))?;
    Ok(body)
}

/// Finds `member` in a zip archive, descending into nested zips.
fn extract_member(archive: &[u8], member: &str) -> Result<Option<Vec<u8>>> {
    let mut zip = zip::ZipArchive::new(Cursor::new(archive))
        .map_err(|e| Error::Ingestion(format!("archive is not a readable zip: {e}")))?;
    let names: Vec<String> = zip.file_names().map(str::to_string).collect();
    let wanted = member.to_ascii_lowercase();
    let read = |zip: &mut zip::ZipArchive<Cursor<&[u8]>>, name: &str| -> Result<Vec<u8>> {
        let mut f = zip
            .by_name(name)
            .map_err(|e| Error::Ingestion(format!("cannot read {name}: {e}")))?;
        let mut buf = Vec::new();
        f.read_to_end(&mut buf)?;
        Ok(buf)
    };
    let direct = names.iter().find(|n| {
        let n = n.to_ascii_lowercase();
        n == wanted || n.ends_with(&format!("/{wanted}"))
    });
    if let Some(name) = direct {
        return read(&mut zip, name).map(Some);
    }
    for name in names.iter().filter(|n| n.to_ascii_lowercase().ends_with(".zip")) {
        let inner = read(&mut zip, name)?;
        if let Some(found) = extract_member(&inner, member)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

/// Fetches `source` into `cache_dir`, verifying the archive digest before
/// anything is written. Idempotent.
pub fn fetch_source(source: &UciSource, cache_dir: &Path) -> Result<FetchOutcome> {
    let target = cached_path(source, cache_dir);
    let lock = lock_path(source, cache_dir);
    let locked = std::fs::read_to_string(&lock).ok().map(|s| s.trim().to_string());

    if target.is_file() {
        if let Some(locked) = &locked {
            if source
                .sha256
                .as_ref()
                .is_none_or(|pin| pin.eq_ignore_ascii_case(locked))
            {
                return Ok(FetchOutcome {
                    path: target,
                    downloaded: false,
                });
            }
        }
    }

    let bytes = download(&source.url)?;
    let actual = sha256_hex(&bytes);
    if let Some(expected) = source.sha256.as_ref().or(locked.as_ref()) {
        if !expected.eq_ignore_ascii_case(&actual) {
            return Err(Error::ChecksumMismatch {
                what: source.url.clone(),
                expected: expected.to_ascii_lowercase(),
                actual,
            });
        }
    }

    let payload = if bytes.starts_with(b"PK\x03\x04") {
        extract_member(&bytes, &source.member)?
            .ok_or_else(|| Error::Ingestion(format!("`{}` not found in archive {}", source.member, source.url)))?
    } else {
        bytes
    };

    let dir = cache_dir.join(&source.name);
    std::fs::create_dir_all(&dir)?;
    let partial = dir.join(format!("{}.partial", source.member));
    std::fs::write(&partial, &payload)?;
    std::fs::rename(&partial, &target)?;
    std::fs::write(&lock, format!("{actual}\n"))?;
    Ok(FetchOutcome {
        path: target,
        downloaded: true,
    })
}

/// Fetches a named UCI dataset and returns the local data file.
pub fn fetch_uci(dataset: &str, cache_dir: &Path) -> Result<PathBuf> {
    Ok(fetch_source(&known_source(dataset)?, cache_dir)?.path)
}
