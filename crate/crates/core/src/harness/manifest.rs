//! `manifest.txt`: provenance comments followed by the full config.
//!
//! Provenance lines start with `#`, so the manifest itself is a valid config
//! file and `--config manifest.txt` repeats the run.

use std::io::Read;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Every seed the run consumed, labelled.
    pub seeds: Vec<(String, u64)>,
    /// `(file name, sha256 hex)` of each output.
    pub digests: Vec<(String, String)>,
    pub config: RunConfig,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# command {}\n# version {}\n# started_unix {}\n# finished_unix {}\n",
            self.command, self.version, self.started_unix, self.finished_unix
        );
        for (label, seed) in &self.seeds {
            out.push_str(&format!("# seed {label} = {seed}\n"));
        }
        for (file, digest) in &self.digests {
            out.push_str(&format!("# digest {file} = {digest}\n"));
        }
        out.push_str(&self.config.to_text());
        out
    }

    /// `(file, digest)` pairs listed in a manifest text.
    pub fn parse_digests(text: &str) -> Vec<(String, String)> {
        text.lines()
            .filter_map(|l| l.strip_prefix("# digest "))
            .filter_map(|l| l.split_once(" = "))
            .map(|(f, d)| (f.to_string(), d.to_string()))
            .collect()
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}
