//! Stage artifacts on disk and the manifest written after every run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the output directory for artifacts, absolute otherwise.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn artifact(&self, name: &str) -> Option<&FileDigest> {
        self.artifacts.iter().find(|a| a.path == name)
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut file = fs::File::open(path).map_err(CliError::io(path))?;
    let mut hasher = Sha256::new();
    std::io::copy(&mut file, &mut hasher).map_err(CliError::io(path))?;
    Ok(format!("{:x}", hasher.finalize()))
}

/// Writes through a temporary file in the same directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(CliError::io(path))
}

pub fn manifest_name(stage: &str) -> String {
    format!("{stage}.manifest.json")
}

/// One stage run: checks upstream artifacts against their manifests, writes
/// artifacts, and records everything in this stage's manifest.
pub struct StageRun {
    pub stage: &'static str,
    pub dir: PathBuf,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
    started: Instant,
}

impl StageRun {
    pub fn new(stage: &'static str, dir: &Path) -> Self {
        Self { stage, dir: dir.to_path_buf(), inputs: Vec::new(), artifacts: Vec::new(), started: Instant::now() }
    }

    /// Path of `artifact` produced by `stage`, after checking that the stage
    /// ran and the file still has the recorded digest.
    pub fn require(&mut self, stage: &str, artifact: &str) -> Result<PathBuf> {
        let missing = |detail: String| CliError::MissingUpstream {
            stage: stage.to_string(),
            artifact: artifact.to_string(),
            detail,
        };
        let mpath = self.dir.join(manifest_name(stage));
        if !mpath.exists() {
            return Err(missing(format!("no manifest at {}; run `fatlens {stage}` first", mpath.display())));
        }
        let manifest = RunManifest::read(&mpath)?;
        let recorded = manifest.artifact(artifact).ok_or_else(|| missing("not listed in the stage manifest".into()))?;
        let path = self.dir.join(artifact);
        if !path.exists() {
            return Err(missing(format!("{} does not exist", path.display())));
        }
        let digest = sha256_file(&path)?;
        if digest != recorded.sha256 {
            return Err(missing("file changed since the stage ran (digest mismatch)".into()));
        }
        self.inputs.push(FileDigest { path: artifact.to_string(), sha256: digest });
        Ok(path)
    }

    /// Records an external input file. The path comes from the config, so
    /// an unreadable one is a config error.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path).map_err(|e| CliError::Config(format!("input file: {e}")))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.artifacts.retain(|a| a.path != name);
        self.artifacts.push(FileDigest { path: name.to_string(), sha256: sha256_bytes(bytes) });
        Ok(path)
    }

    pub fn artifacts(&self) -> &[FileDigest] {
        &self.artifacts
    }

    pub fn finish(self, config: &RunConfig, argv: &[String]) -> Result<RunManifest> {
        let manifest = RunManifest {
            command: self.stage.to_string(),
            argv: argv.to_vec(),
            tool_version: TOOL_VERSION.to_string(),
            config: config.clone(),
            inputs: self.inputs,
            artifacts: self.artifacts,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(manifest_name(self.stage)), &json)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn require_checks_manifest_and_digest() {
        let dir = tempfile::tempdir().unwrap();
        let mut run = StageRun::new("segment", dir.path());
        let err = run.require("ingest", "notes.jsonl").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("`ingest`"));

        let mut up = StageRun::new("ingest", dir.path());
        up.write("notes.jsonl", b"{}\n").unwrap();
        up.finish(&RunConfig::default(), &[]).unwrap();
        assert!(run.require("ingest", "notes.jsonl").is_ok());
        assert_eq!(run.require("ingest", "other.csv").unwrap_err().exit_code(), 2);

        fs::write(dir.path().join("notes.jsonl"), b"changed").unwrap();
        assert_eq!(run.require("ingest", "notes.jsonl").unwrap_err().exit_code(), 2);
    }

    #[test]
    fn atomic_write_leaves_no_temp_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"x").unwrap();
        write_atomic(&p, b"y").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"y");
        assert_eq!(fs::read_dir(dir.path().join("sub")).unwrap().count(), 1);
        assert_eq!(sha256_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
