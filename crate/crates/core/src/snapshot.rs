//! Binary field snapshots with a text sidecar header.
//!
//! A snapshot `NAME` is two files:
//!
//! - `NAME.bin`: the fields `rho, u1[, u2], theta` one after another, each
//!   `n1 * n2` little-endian IEEE-754 `f64` values with `y1` varying fastest
//!   (node `(i1, i2)` at offset `i2 * n1 + i1`).
//! - `NAME.hdr`: `key = value` lines, see [`SnapshotHeader`]. Floats are
//!   written in shortest round-trip form, so reading back is bit-exact.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::FlattenedGrid;
use crate::solver::FieldState;

pub const FORMAT: &str = "outflow-snapshot";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n1: usize,
    pub n2: usize,
    pub h1: f64,
    pub h2: f64,
    pub length: f64,
    pub t: f64,
    pub fields: Vec<String>,
}

impl SnapshotHeader {
    pub fn new(grid: &FlattenedGrid, t: f64) -> Self {
        let d = grid.d();
        let mut fields = vec!["rho".to_string()];
        fields.extend((1..=d).map(|k| format!("u{k}")));
        fields.push("theta".into());
        Self {
            dim: d,
            n1: grid.n1,
            n2: grid.n2,
            h1: grid.h1,
            h2: grid.h2,
            length: grid.length,
            t,
            fields,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "format = {FORMAT}\nversion = {FORMAT_VERSION}\nbyte_order = little_endian\nvalue_type = f64\n\
             layout = field_major_y1_fastest\ndim = {}\nn1 = {}\nn2 = {}\nh1 = {:?}\nh2 = {:?}\nlength = {:?}\nt = {:?}\nfields = {}\n",
            self.dim,
            self.n1,
            self.n2,
            self.h1,
            self.h2,
            self.length,
            self.t,
            self.fields.join(",")
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Io(format!("snapshot header: {m}"));
        let mut kv = std::collections::BTreeMap::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("malformed line `{line}`")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing key `{k}`")));
        if get("format")? != FORMAT || get("version")? != &FORMAT_VERSION.to_string() {
            return Err(bad("unsupported format or version".into()));
        }
        if get("byte_order")? != "little_endian" || get("value_type")? != "f64" {
            return Err(bad("unsupported encoding".into()));
        }
        let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|e| bad(format!("`{k}`: {e}"))) };
        let float = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|e| bad(format!("`{k}`: {e}"))) };
        let h = Self {
            dim: int("dim")?,
            n1: int("n1")?,
            n2: int("n2")?,
            h1: float("h1")?,
            h2: float("h2")?,
            length: float("length")?,
            t: float("t")?,
            fields: get("fields")?.split(',').map(|s| s.trim().to_string()).collect(),
        };
        if !(h.dim == 1 || h.dim == 2) || h.fields.len() != h.dim + 2 {
            return Err(bad(format!("{} fields for dimension {}", h.fields.len(), h.dim)));
        }
        Ok(h)
    }

    pub fn nodes(&self) -> usize {
        self.n1 * self.n2
    }

    /// Grid compatibility (sizes and spacings, bitwise).
    pub fn matches(&self, grid: &FlattenedGrid) -> bool {
        self.dim == grid.d()
            && self.n1 == grid.n1
            && self.n2 == grid.n2
            && self.h1.to_bits() == grid.h1.to_bits()
            && self.h2.to_bits() == grid.h2.to_bits()
    }
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("hdr"))
}

/// Write `state` to `stem.bin` / `stem.hdr`; returns the two paths.
pub fn write_snapshot(stem: &Path, state: &FieldState, grid: &FlattenedGrid) -> Result<(PathBuf, PathBuf)> {
    let n = grid.len();
    if state.len() != n || state.u.len() != grid.d() {
        return Err(Error::GridMismatch("snapshot state does not match grid".into()));
    }
    let (bin, hdr) = paths(stem);
    let mut bytes = Vec::with_capacity(8 * n * (grid.d() + 2));
    for f in state.fields() {
        for v in f {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(&bin, bytes)?;
    fs::write(&hdr, SnapshotHeader::new(grid, state.t).to_text())?;
    Ok((bin, hdr))
}

/// Read a snapshot written by [`write_snapshot`]; `path` may name either file
/// or the common stem.
pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, FieldState)> {
    let (bin, hdr) = paths(path);
    let header = SnapshotHeader::parse(&fs::read_to_string(&hdr)?)?;
    let bytes = fs::read(&bin)?;
    let n = header.nodes();
    let nf = header.dim + 2;
    if bytes.len() != 8 * n * nf {
        return Err(Error::Io(format!(
            "snapshot body has {} bytes, header implies {}",
            bytes.len(),
            8 * n * nf
        )));
    }
    let mut fields: Vec<Vec<f64>> = bytes
        .chunks_exact(8 * n)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    let theta = fields.pop().unwrap();
    let rho = fields.remove(0);
    Ok((
        header.clone(),
        FieldState {
            t: header.t,
            rho,
            u: fields,
            theta,
        },
    ))
}
