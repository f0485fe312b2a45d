use std::io::IsTerminal;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::commands::CliError;

#[derive(Clone, Copy)]
pub enum Color {
    Red,
    Green,
}

fn color_allowed() -> bool {
    std::env::var_os("HIEREVAL_NO_COLOR").is_none()
}

pub fn stdout_color() -> bool {
    color_allowed() && std::io::stdout().is_terminal()
}

pub fn stderr_color() -> bool {
    color_allowed() && std::io::stderr().is_terminal()
}

pub fn paint(text: &str, color: Color, enabled: bool) -> String {
    if !enabled {
        return text.to_string();
    }
    let code = match color {
        Color::Red => 31,
        Color::Green => 32,
    };
    format!("\x1b[{code}m{text}\x1b[0m")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct InputRecord {
    role: String,
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct ArtifactRecord {
    name: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Value,
    inputs: &'a [InputRecord],
    artifacts: Vec<ArtifactRecord>,
}

/// Collects the files one command writes, then records them in
/// `manifest.json`. The worker count is not part of `config`, so runs that
/// differ only in parallelism produce identical manifests.
pub struct Run {
    command: &'static str,
    config: Value,
    inputs: Vec<InputRecord>,
    out: PathBuf,
    written: Vec<(String, String)>,
}

impl Run {
    pub fn new(command: &'static str, config: Value, out: &Path) -> Self {
        Run {
            command,
            config,
            inputs: Vec::new(),
            out: out.to_path_buf(),
            written: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputRecord {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.written
            .push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        let artifacts = self
            .written
            .drain(..)
            .map(|(name, sha256)| ArtifactRecord { name, sha256 })
            .collect();
        let manifest = Manifest {
            tool: "hiereval",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: &self.config,
            inputs: &self.inputs,
            artifacts,
        };
        let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        text.push('\n');
        let path = self.out.join("manifest.json");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(self.out)
    }
}
