use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Holds `<root>/.lock` for the duration of a run; released on drop.
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(root: &Path) -> Result<RunLock, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        let path = root.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Runtime(
                format!("output directory {} is locked by another run (remove {} if stale)",
                    root.display(),
                    path.display()),
            )),
            Err(e) => Err(CliError::Runtime(format!("cannot lock {}: {e}", root.display()))),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Append-only run directory named by UTC timestamp and command.
pub fn create_run_dir(root: &Path, command: &str) -> Result<PathBuf, CliError> {
    let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
    for counter in 0..10_000u32 {
        let name = if counter == 0 {
            format!("{stamp}-{command}")
        } else {
            format!("{stamp}-{command}-{counter}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => {
                return Err(CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
            }
        }
    }
    Err(CliError::Runtime("run directory namespace exhausted".into()))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reproducibility record written next to every artifact set.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    /// Artifact file name -> content hash, sorted for stable output.
    pub artifacts: BTreeMap<String, String>,
}

/// Collects hashes of every file already written to `dir` (excluding the
/// manifest itself) and writes `manifest.json`.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    seed: u64,
    config_json: &str,
) -> Result<(), CliError> {
    let mut artifacts = BTreeMap::new();
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Runtime(format!("cannot list {}: {e}", dir.display())))?;
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Runtime(e.to_string()))?;
        let name = entry.file_name().to_string_lossy().to_string();
        if name == "manifest.json" || !entry.path().is_file() {
            continue;
        }
        let bytes = fs::read(entry.path()).map_err(|e| CliError::Runtime(e.to_string()))?;
        artifacts.insert(name, sha256_hex(&bytes));
    }
    let manifest = Manifest {
        command: command.to_string(),
        version: VERSION.to_string(),
        seed,
        config_sha256: sha256_hex(config_json.as_bytes()),
        artifacts,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let lock = RunLock::acquire(dir.path()).unwrap();
        assert!(RunLock::acquire(dir.path()).is_err());
        drop(lock);
        assert!(RunLock::acquire(dir.path()).is_ok());
    }

    #[test]
    fn run_dirs_never_collide() {
        let dir = tempfile::tempdir().unwrap();
        let a = create_run_dir(dir.path(), "train").unwrap();
        let b = create_run_dir(dir.path(), "train").unwrap();
        assert_ne!(a, b);
        assert!(a.exists() && b.exists());
    }

    #[test]
    fn manifest_lists_artifacts_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.json"), b"{}").unwrap();
        fs::write(dir.path().join("b.csv"), b"x,y\n1,2\n").unwrap();
        write_manifest(dir.path(), "test", 7, "{}").unwrap();
        let manifest: Manifest =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest.artifacts.len(), 2);
        assert_eq!(manifest.artifacts["a.json"], sha256_hex(b"{}"));
        assert_eq!(manifest.seed, 7);
    }
}
