use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use glass_entropy::netspec::BoxLabel;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::Format;

/// Metadata attached to every artifact.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub parameters: BTreeMap<&'static str, String>,
}

impl Provenance {
    pub fn new(command: &'static str) -> Self {
        Provenance {
            tool: "glass-entropy",
            version: env!("CARGO_PKG_VERSION"),
            command,
            spec_sha256: None,
            seed: None,
            parameters: BTreeMap::new(),
        }
    }

    pub fn param(&mut self, key: &'static str, value: impl ToString) {
        self.parameters.insert(key, value.to_string());
    }

    /// `key=value` pairs for comment headers.
    fn header_fields(&self) -> Vec<String> {
        let mut out = vec![
            format!("tool={}", self.tool),
            format!("version={}", self.version),
            format!("command={}", self.command),
        ];
        if let Some(h) = &self.spec_sha256 {
            out.push(format!("spec_sha256={h}"));
        }
        if let Some(s) = self.seed {
            out.push(format!("seed={s}"));
        }
        out.extend(self.parameters.iter().map(|(k, v)| format!("{k}={v}")));
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub enum Artifact {
    Json(serde_json::Value),
    Csv { header: Vec<&'static str>, rows: Vec<Vec<String>> },
    Dot(String),
    Symbols { format: Format, symbols: Vec<BoxLabel> },
}

impl Artifact {
    pub fn json(value: impl Serialize) -> Result<Self> {
        Ok(Artifact::Json(serde_json::to_value(value)?))
    }
}

fn render(artifact: &Artifact, prov: &Provenance) -> Result<Vec<u8>> {
    let comment = |prefix: &str| -> String {
        prov.header_fields().iter().map(|f| format!("{prefix} {f}\n")).collect()
    };
    Ok(match artifact {
        Artifact::Json(v) => {
            let doc = serde_json::json!({ "provenance": prov, "result": v });
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            s.into_bytes()
        }
        Artifact::Csv { header, rows } => {
            let mut s = comment("#");
            s.push_str(&header.join(","));
            s.push('\n');
            for r in rows {
                s.push_str(&r.join(","));
                s.push('\n');
            }
            s.into_bytes()
        }
        Artifact::Dot(dot) => {
            let mut s = comment("//");
            s.push_str(dot);
            s.into_bytes()
        }
        Artifact::Symbols { format: Format::U16, symbols } => {
            symbols.iter().flat_map(|b| (b.code() as u16).to_le_bytes()).collect()
        }
        Artifact::Symbols { symbols, .. } => {
            let mut s = comment("#");
            for b in symbols {
                s.push_str(&b.to_string());
                s.push('\n');
            }
            s.into_bytes()
        }
    })
}

/// Writes `artifact` to `out` or standard output. Binary symbol runs cannot
/// carry a header, so their provenance goes to a `.json` sidecar.
pub fn emit(artifact: &Artifact, prov: &Provenance, out: Option<&Path>) -> Result<()> {
    let bytes = render(artifact, prov)?;
    if let Artifact::Symbols { format: Format::U16, .. } = artifact {
        let Some(path) = out else { bail!("binary output needs --out") };
        let mut side = PathBuf::from(path).into_os_string();
        side.push(".json");
        let meta = serde_json::to_string_pretty(&serde_json::json!({ "provenance": prov }))? + "\n";
        fs::write(&side, meta).with_context(|| format!("writing {}", Path::new(&side).display()))?;
    }
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}
