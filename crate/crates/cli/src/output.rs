use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use planecell::{Field, RotationVector};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA: &str = "planecell-v1";
pub const DUMP_MAGIC: &str = "PCF1";
pub const DUMP_HEADER_LEN: usize = 32;

/// Writes the artifacts of one command into the configured output directory.
pub struct Writer {
    dir: PathBuf,
    config_json: String,
}

impl Writer {
    pub fn new(cfg: &RunConfig) -> anyhow::Result<Self> {
        fs::create_dir_all(&cfg.output_dir)
            .with_context(|| format!("creating {}", cfg.output_dir.display()))?;
        Ok(Writer {
            dir: cfg.output_dir.clone(),
            config_json: serde_json::to_string(cfg)?,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn preamble(&self) -> String {
        format!("# schema: {SCHEMA}\n# config: {}\n", self.config_json)
    }

    /// A comma-separated table headed by the schema and config lines.
    pub fn csv(
        &self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> anyhow::Result<PathBuf> {
        self.table(name, columns, rows, ",")
    }

    /// A whitespace-separated table for gnuplot.
    pub fn dat(
        &self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> anyhow::Result<PathBuf> {
        self.table(name, columns, rows, " ")
    }

    fn table(
        &self,
        name: &str,
        columns: &[&str],
        rows: &[Vec<String>],
        sep: &str,
    ) -> anyhow::Result<PathBuf> {
        let mut text = self.preamble();
        if sep == " " {
            text.push_str("# ");
        }
        text.push_str(&columns.join(sep));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            text.push_str(&row.join(sep));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    /// A JSON object with `schema` and `config` members ahead of the body's members.
    pub fn json<T: Serialize>(&self, name: &str, body: &T) -> anyhow::Result<PathBuf> {
        let mut doc = serde_json::Map::new();
        doc.insert("schema".into(), Value::String(SCHEMA.into()));
        doc.insert("config".into(), serde_json::from_str(&self.config_json)?);
        match serde_json::to_value(body)? {
            Value::Object(map) => doc.extend(map),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn field_dump(
        &self,
        name: &str,
        field: &Field,
        epsilon: f64,
        omega: &RotationVector,
    ) -> anyhow::Result<PathBuf> {
        let bytes = encode_dump(field, epsilon, omega, &self.config_json)?;
        self.write(name, &bytes)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Shortest round-trip formatting, identical across runs.
pub fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Layout: 32-byte ASCII header `PCF1 d=<d> N=<N> m=<m>` padded with
/// spaces and closed by `\n`; then `ε` and the `d` components of `ω` as
/// little-endian `f64`; then the `m^d` nodal values of `z` in row-major
/// order (last axis fastest); then the config JSON up to end of file.
pub fn encode_dump(
    field: &Field,
    epsilon: f64,
    omega: &RotationVector,
    config_json: &str,
) -> anyhow::Result<Vec<u8>> {
    let t = field.torus();
    let mut header = format!("{DUMP_MAGIC} d={} N={} m={}", t.d, t.period, t.m);
    if header.len() >= DUMP_HEADER_LEN {
        bail!("dump header does not fit in {DUMP_HEADER_LEN} bytes");
    }
    while header.len() < DUMP_HEADER_LEN - 1 {
        header.push(' ');
    }
    header.push('\n');
    let mut out = Vec::with_capacity(
        DUMP_HEADER_LEN + 8 * (1 + t.d + field.values().len()) + config_json.len(),
    );
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&epsilon.to_le_bytes());
    for w in omega.components() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(config_json.as_bytes());
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dump {
    pub d: usize,
    pub period: u32,
    pub m: usize,
    pub epsilon: f64,
    pub omega: Vec<f64>,
    pub values: Vec<f64>,
    pub config: Value,
}

pub fn decode_dump(bytes: &[u8]) -> anyhow::Result<Dump> {
    if bytes.len() < DUMP_HEADER_LEN || bytes[DUMP_HEADER_LEN - 1] != b'\n' {
        bail!("truncated dump header");
    }
    let header = std::str::from_utf8(&bytes[..DUMP_HEADER_LEN])?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(DUMP_MAGIC) {
        bail!("not a {DUMP_MAGIC} dump");
    }
    let mut field = |key: &str| -> anyhow::Result<usize> {
        let part = parts.next().unwrap_or_default();
        let value = part
            .strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .with_context(|| format!("header lacks {key}"))?;
        Ok(value.parse()?)
    };
    let d = field("d")?;
    let period = field("N")? as u32;
    let m = field("m")?;
    let count = m.pow(d as u32);
    let body = &bytes[DUMP_HEADER_LEN..];
    let floats = 1 + d + count;
    if body.len() < 8 * floats {
        bail!("dump body holds fewer than {floats} values");
    }
    let read = |i: usize| f64::from_le_bytes(body[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    let config = serde_json::from_slice(&body[8 * floats..]).context("trailing config")?;
    Ok(Dump {
        d,
        period,
        m,
        epsilon: read(0),
        omega: (1..=d).map(read).collect(),
        values: (1 + d..floats).map(read).collect(),
        config,
    })
}

pub fn read_dump(path: &Path) -> anyhow::Result<Dump> {
    decode_dump(&fs::read(path).with_context(|| format!("reading {}", path.display()))?)
}

/// `key: value` lines for the terminal.
pub fn summary_line(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if i > 0 {
            s.push_str("  ");
        }
        let _ = write!(s, "{k}={v}");
    }
    s
}
