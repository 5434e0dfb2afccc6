use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Describes one invocation well enough to repeat it.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    /// Input path to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub version: String,
    pub duration_secs: f64,
}

/// Collects input digests while a command runs.
pub struct Recorder {
    started: Instant,
    inputs: BTreeMap<String, String>,
}

impl Recorder {
    pub fn new() -> Self {
        Recorder { started: Instant::now(), inputs: BTreeMap::new() }
    }

    /// Read a file as UTF-8 and remember its digest.
    pub fn read(&mut self, path: &Path) -> Result<String, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.insert(path.display().to_string(), hex);
        String::from_utf8(bytes).map_err(|_| format!("{}: not valid UTF-8", path.display()))
    }

    pub fn finish(self, subcommand: &str, seed: Option<u64>) -> RunManifest {
        RunManifest {
            subcommand: subcommand.to_string(),
            args: std::env::args().skip(1).collect(),
            seed,
            inputs: self.inputs,
            version: env!("CARGO_PKG_VERSION").to_string(),
            duration_secs: self.started.elapsed().as_secs_f64(),
        }
    }
}

/// `<out>.manifest.json`
pub fn beside(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
