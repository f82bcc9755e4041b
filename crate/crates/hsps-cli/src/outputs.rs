//! Output-file conventions: every text output starts with a comment
//! header carrying the tool version, scenario hash and seed, plus a
//! timestamp unless suppressed for byte-identical reruns.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug)]
pub struct OutputContext {
    pub out_dir: PathBuf,
    pub scenario_hash: String,
    pub seed: Option<u64>,
    pub deterministic: bool,
}

impl OutputContext {
    pub fn new(
        out_dir: PathBuf,
        scenario_hash: String,
        seed: Option<u64>,
        deterministic: bool,
    ) -> anyhow::Result<Self> {
        std::fs::create_dir_all(&out_dir)
            .with_context(|| format!("cannot create {}", out_dir.display()))?;
        Ok(Self {
            out_dir,
            scenario_hash,
            seed,
            deterministic,
        })
    }

    pub fn subdir(&self, name: &str) -> anyhow::Result<Self> {
        Self::new(
            self.out_dir.join(name),
            self.scenario_hash.clone(),
            self.seed,
            self.deterministic,
        )
    }

    pub fn header(&self) -> String {
        let mut header = String::new();
        let _ = writeln!(header, "# tool: hsps {TOOL_VERSION}");
        let _ = writeln!(header, "# scenario_hash: {}", self.scenario_hash);
        match self.seed {
            Some(seed) => {
                let _ = writeln!(header, "# seed: {seed}");
            }
            None => {
                let _ = writeln!(header, "# seed: none");
            }
        }
        if !self.deterministic {
            let now = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let _ = writeln!(header, "# timestamp: {now}");
        }
        header
    }

    /// Write a text file with the standard header prepended.
    pub fn write_text(&self, name: &str, body: &str) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(name);
        let content = format!("{}{}", self.header(), body);
        std::fs::write(&path, content)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    /// Write raw bytes (no header; used for the pinned binary format).
    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Hash scenario text plus applied overrides (hex SHA-256).
pub fn scenario_hash(text: &str, overrides: &[(String, String)]) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    for (key, value) in overrides {
        hasher.update(b"\x00set\x00");
        hasher.update(key.as_bytes());
        hasher.update(b"=");
        hasher.update(value.as_bytes());
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Render rows as an aligned two-space-separated table.
pub fn aligned_table(columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            if i < widths.len() {
                widths[i] = widths[i].max(cell.len());
            }
        }
    }
    let mut out = String::new();
    let render = |cells: &[String], widths: &[usize], out: &mut String| {
        let mut first = true;
        for (cell, width) in cells.iter().zip(widths) {
            if !first {
                out.push_str("  ");
            }
            first = false;
            let _ = write!(out, "{cell:<width$}");
        }
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    render(
        &columns.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        &widths,
        &mut out,
    );
    for row in rows {
        render(row, &widths, &mut out);
    }
    out
}

/// Deterministic float formatting for CSV bodies (shortest round-trip).
pub fn fmt_float(value: f64) -> String {
    if value.is_nan() {
        "nan".to_string()
    } else if value.is_infinite() {
        if value > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{value}")
    }
}

pub fn file_stem(reference: &str) -> String {
    let name = reference
        .rsplit('/')
        .next()
        .unwrap_or(reference)
        .trim_start_matches("builtin:");
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}
