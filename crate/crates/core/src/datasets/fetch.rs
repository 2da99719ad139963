use flate2::read::GzDecoder;
use log::{info, warn};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::{ArchiveEntry, DatasetError, DatasetName, Manifest, Result, CIFAR_DIR};

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// Overrides the manifest's mirror.
    pub mirror: Option<String>,
    /// Attempts per archive before giving up on transport errors.
    pub attempts: usize,
    pub backoff: Duration,
    pub timeout: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            mirror: None,
            attempts: 3,
            backoff: Duration::from_secs(2),
            timeout: Duration::from_secs(600),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Size and checksums of a local file against its manifest entry.
fn verify(path: &Path, entry: &ArchiveEntry) -> Result<()> {
    let fail = |reason: String| DatasetError::Integrity { file: entry.name.clone(), reason };
    let size = std::fs::metadata(path).map_err(io_err(path))?.len();
    if size != entry.size {
        return Err(fail(format!("size {size}, expected {}", entry.size)));
    }
    use md5::Digest as _;
    let mut md5 = md5::Md5::new();
    let mut sha = <sha2::Sha256 as sha2::Digest>::new();
    let mut reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = reader.read(&mut buf).map_err(io_err(path))?;
        if n == 0 {
            break;
        }
        md5.update(&buf[..n]);
        sha2::Digest::update(&mut sha, &buf[..n]);
    }
    if let Some(want) = &entry.md5 {
        let got = hex(&md5.finalize());
        if !got.eq_ignore_ascii_case(want) {
            return Err(fail(format!("md5 {got}, expected {want}")));
        }
    }
    if let Some(want) = &entry.sha256 {
        let got = hex(&sha2::Digest::finalize(sha));
        if !got.eq_ignore_ascii_case(want) {
            return Err(fail(format!("sha256 {got}, expected {want}")));
        }
    }
    Ok(())
}

/// One GET streamed to `dest`; fails fast if the server announces the wrong length.
fn download_once(agent: &ureq::Agent, url: &str, dest: &Path, entry: &ArchiveEntry) -> std::result::Result<(), String> {
    let response = agent.get(url).call().map_err(|e| e.to_string())?;
    let body = response.into_body();
    if let Some(len) = body.content_length() {
        if len != entry.size {
            return Err(format!("server announced {len} bytes, manifest says {}", entry.size));
        }
    }
    let mut reader = body.into_reader();
    let mut file = File::create(dest).map_err(|e| e.to_string())?;
    std::io::copy(&mut reader, &mut file).map_err(|e| e.to_string())?;
    file.sync_all().map_err(|e| e.to_string())
}

fn download(agent: &ureq::Agent, url: &str, dest: &Path, entry: &ArchiveEntry, opts: &FetchOptions) -> Result<()> {
    let part = dest.with_file_name(format!("{}.part", entry.name));
    let attempts = opts.attempts.max(1);
    let mut last = String::new();
    for attempt in 1..=attempts {
        info!("downloading {url} (attempt {attempt}/{attempts})");
        match download_once(agent, url, &part, entry) {
            Ok(()) => {
                if let Err(e) = verify(&part, entry) {
                    let _ = std::fs::remove_file(&part);
                    return Err(e);
                }
                return std::fs::rename(&part, dest).map_err(io_err(dest));
            }
            Err(message) => {
                let _ = std::fs::remove_file(&part);
                warn!("{url}: {message}");
                last = message;
                if attempt < attempts {
                    std::thread::sleep(opts.backoff);
                }
            }
        }
    }
    Err(DatasetError::Transport { url: url.to_string(), attempts, message: last })
}

/// Writes `archive` inflated next to it, minus the `.gz` suffix.
fn gunzip(archive: &Path) -> Result<PathBuf> {
    let out = archive.with_extension("");
    if out.is_file() {
        return Ok(out);
    }
    let tmp = out.with_extension("tmp");
    {
        let mut dec = GzDecoder::new(BufReader::new(File::open(archive).map_err(io_err(archive))?));
        let mut file = File::create(&tmp).map_err(io_err(&tmp))?;
        std::io::copy(&mut dec, &mut file).map_err(io_err(archive))?;
        file.flush().map_err(io_err(&tmp))?;
    }
    std::fs::rename(&tmp, &out).map_err(io_err(&out))?;
    Ok(out)
}

fn untar(archive: &Path, dir: &Path) -> Result<Vec<PathBuf>> {
    let marker = dir.join(CIFAR_DIR).join("test_batch.bin");
    if !marker.is_file() {
        let dec = GzDecoder::new(BufReader::new(File::open(archive).map_err(io_err(archive))?));
        tar::Archive::new(dec).unpack(dir).map_err(io_err(archive))?;
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir.join(CIFAR_DIR))
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    files.sort();
    Ok(files)
}

/// Downloads `name` from the mirror in the shipped manifest into `<data_dir>/<name>/`.
pub fn fetch(name: DatasetName, data_dir: &Path, mirror: Option<&str>) -> Result<Vec<PathBuf>> {
    let opts = FetchOptions { mirror: mirror.map(str::to_string), ..FetchOptions::default() };
    fetch_with(name, data_dir, &Manifest::default(), &opts)
}

/// Fetches, verifies and unpacks every archive of `name`.
///
/// Archives that are already present and match the manifest are not
/// downloaded again. A download that fails verification is deleted.
pub fn fetch_with(name: DatasetName, data_dir: &Path, manifest: &Manifest, opts: &FetchOptions) -> Result<Vec<PathBuf>> {
    let entry = manifest.entry(name)?;
    let mirror = opts.mirror.as_deref().unwrap_or(&entry.mirror);
    let dir = name.dir(data_dir);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(opts.timeout))
        .build()
        .into();
    let mut produced = Vec::new();
    for archive in &entry.archives {
        let path = dir.join(&archive.name);
        let present = path.is_file() && match verify(&path, archive) {
            Ok(()) => true,
            Err(e) => {
                warn!("{}: {e}; downloading again", path.display());
                std::fs::remove_file(&path).map_err(io_err(&path))?;
                false
            }
        };
        if present {
            info!("{} already verified", path.display());
        } else {
            let url = format!("{}/{}", mirror.trim_end_matches('/'), archive.name);
            download(&agent, &url, &path, archive, opts)?;
        }
        produced.push(path.clone());
        if archive.name.ends_with(".tar.gz") {
            produced.extend(untar(&path, &dir)?);
        } else if archive.name.ends_with(".gz") {
            produced.push(gunzip(&path)?);
        }
    }
    Ok(produced)
}
