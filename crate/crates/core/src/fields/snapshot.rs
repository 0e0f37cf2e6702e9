//! Binary snapshot format.
//!
//! Layout: the magic bytes `QNS1`, a little-endian `u32` header length, the
//! UTF-8 header as `key=value` lines, then every field as row-major
//! little-endian `f64` samples in the order listed under `fields`.

use std::io::{Read, Write};

use crate::error::{QnsError, Result};
use crate::params::ModelParams;

pub const MAGIC: &[u8; 4] = b"QNS1";

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
    pub time: f64,
    pub params: ModelParams,
    /// `primitive` or `effective`.
    pub formulation: String,
    /// Transform constant; 0 for the primitive formulation.
    pub c: f64,
    pub fields: Vec<String>,
    /// Additional single-line `key=value` entries, such as the resolved run configuration.
    pub extra: Vec<(String, String)>,
}

const KNOWN_KEYS: [&str; 11] = [
    "dim", "n", "length", "time", "formulation", "c", "nu", "kappa", "gamma", "eps", "fields",
];

impl SnapshotHeader {
    fn to_text(&self) -> Result<String> {
        let p = &self.params;
        let mut text = format!(
            "dim={}\nn={}\nlength={:e}\ntime={:e}\nformulation={}\nc={:e}\nnu={:e}\nkappa={:e}\ngamma={:e}\neps={:e}\nfields={}\n",
            self.dim,
            self.n,
            self.length,
            self.time,
            self.formulation,
            self.c,
            p.nu,
            p.kappa,
            p.gamma,
            p.eps,
            self.fields.join(",")
        );
        for (k, v) in &self.extra {
            if k.contains(['=', '\n']) || v.contains('\n') || KNOWN_KEYS.contains(&k.as_str()) {
                return Err(QnsError::Format(format!("bad extra header entry {k:?}")));
            }
            text.push_str(&format!("{k}={v}\n"));
        }
        Ok(text)
    }

    fn from_text(text: &str) -> Result<Self> {
        let mut kv = std::collections::HashMap::new();
        let mut extra = Vec::new();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| QnsError::Format(format!("bad header line {line:?}")))?;
            if KNOWN_KEYS.contains(&k) {
                kv.insert(k, v);
            } else {
                extra.push((k.to_string(), v.to_string()));
            }
        }
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| QnsError::Format(format!("missing header key {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| QnsError::Format(format!("bad number for {k}")))
        };
        let int = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| QnsError::Format(format!("bad integer for {k}")))
        };
        let dim = int("dim")?;
        Ok(Self {
            dim,
            n: int("n")?,
            length: num("length")?,
            time: num("time")?,
            params: ModelParams::new(num("nu")?, num("kappa")?, num("gamma")?, num("eps")?, dim),
            formulation: get("formulation")?.to_string(),
            c: num("c")?,
            fields: get("fields")?
                .split(',')
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect(),
            extra,
        })
    }

    fn samples_per_field(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
}

pub fn write_snapshot<W: Write>(w: &mut W, header: &SnapshotHeader, fields: &[&[f64]]) -> Result<()> {
    if fields.len() != header.fields.len() {
        return Err(QnsError::Format(format!(
            "header lists {} fields, got {}",
            header.fields.len(),
            fields.len()
        )));
    }
    let expected = header.samples_per_field();
    if let Some(bad) = fields.iter().find(|f| f.len() != expected) {
        return Err(QnsError::Format(format!(
            "field has {} samples, expected {expected}",
            bad.len()
        )));
    }
    let text = header.to_text()?;
    w.write_all(MAGIC)?;
    w.write_all(&(text.len() as u32).to_le_bytes())?;
    w.write_all(text.as_bytes())?;
    let mut buf = Vec::with_capacity(expected * 8);
    for f in fields {
        buf.clear();
        for v in *f {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_snapshot<R: Read>(r: &mut R) -> Result<(SnapshotHeader, Vec<Vec<f64>>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(QnsError::Format(format!("bad magic {magic:?}")));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut text = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|e| QnsError::Format(e.to_string()))?;
    let header = SnapshotHeader::from_text(&text)?;
    let count = header.samples_per_field();
    let mut bytes = vec![0u8; count * 8];
    let mut fields = Vec::with_capacity(header.fields.len());
    for _ in &header.fields {
        r.read_exact(&mut bytes)?;
        fields.push(
            bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect(),
        );
    }
    Ok((header, fields))
}
