//! On-disk eigenpair cache.
//!
//! Layout (version 2):
//!
//! ```text
//! billiard-eigencache 2
//! profile <key>=<value> ...
//! grid ns=<ns> nt=<nt> dofs=<n>
//! solver residual_tol=<x> ritz_tol=<x> seed=<n>
//! windows <count>
//! window <lo> <hi>                     (count lines)
//! pairs <count>
//! pair <index> <E> <residual> <shift>  (then n little-endian f64, then '\n')
//! ...
//! sha256 <hex of every preceding byte>
//! ```
//!
//! Floats in text lines are written in shortest round-trip form; `shift` is `nan` when no
//! refinement certificate was computed. Pairs are stored in index order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::eigen::{EigenPair, Spectrum};
use crate::error::{Error, Result};

pub const MAGIC: &str = "billiard-eigencache";
pub const VERSION: u32 = 2;

/// Shortest text that parses back to the same bits.
fn exact(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CacheHeader {
    pub profile: Vec<(String, String)>,
    pub ns: usize,
    pub nt: usize,
    pub dofs: usize,
    pub residual_tol: f64,
    pub ritz_tol: f64,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct CachedPair {
    pub pair: EigenPair,
    /// Relative shift against the coarse grid, if certified.
    pub shift: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EigenCache {
    pub header: CacheHeader,
    windows: Vec<(f64, f64)>,
    pairs: BTreeMap<usize, CachedPair>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_f64(tok: &str) -> Result<f64> {
    tok.parse().map_err(|_| Error::Cache(format!("bad number '{tok}'")))
}

fn parse_usize(tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| Error::Cache(format!("bad integer '{tok}'")))
}

fn kv<'a>(tok: &'a str, key: &str) -> Result<&'a str> {
    tok.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| Error::Cache(format!("expected {key}=..., found '{tok}'")))
}

/// Byte cursor reading `\n`-terminated text lines and raw blocks.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<&'a str> {
        let rest = &self.buf[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Cache("truncated file".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::Cache("non-text header line".into()))
    }

    fn words(&mut self, tag: &str) -> Result<Vec<&'a str>> {
        let line = self.line()?;
        let mut it = line.split(' ');
        if it.next() != Some(tag) {
            return Err(Error::Cache(format!("expected '{tag}' line, found '{line}'")));
        }
        Ok(it.collect())
    }

    fn block(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.buf.len() {
            return Err(Error::Cache("truncated vector block".into()));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }
}

impl EigenCache {
    pub fn new(header: CacheHeader) -> Self {
        Self { header, windows: Vec::new(), pairs: BTreeMap::new() }
    }

    pub fn windows(&self) -> &[(f64, f64)] {
        &self.windows
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Parts of `[lo, hi]` not yet covered by stored windows.
    pub fn missing(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let mut covered = self.windows.clone();
        covered.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out = Vec::new();
        let mut cur = lo;
        for (a, b) in covered {
            if b < cur {
                continue;
            }
            if a > hi {
                break;
            }
            if a > cur {
                out.push((cur, a));
            }
            cur = cur.max(b);
            if cur >= hi {
                break;
            }
        }
        if cur < hi {
            out.push((cur, hi));
        }
        out
    }

    /// Adds a solved window; pairs already present (same index) are kept.
    pub fn insert(&mut self, spectrum: &Spectrum, shifts: &[Option<f64>]) {
        assert_eq!(spectrum.pairs.len(), shifts.len());
        for (p, s) in spectrum.pairs.iter().zip(shifts) {
            self.pairs.entry(p.index).or_insert_with(|| CachedPair { pair: p.clone(), shift: *s });
        }
        self.windows.push(spectrum.window);
        self.merge_windows();
    }

    fn merge_windows(&mut self) {
        self.windows.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for w in self.windows.drain(..) {
            match merged.last_mut() {
                Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
                _ => merged.push(w),
            }
        }
        self.windows = merged;
    }

    /// Stored pairs with energy in `[lo, hi]`, ascending.
    pub fn pairs_in(&self, lo: f64, hi: f64) -> Vec<&CachedPair> {
        self.pairs.values().filter(|c| c.pair.energy >= lo && c.pair.energy <= hi).collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &CachedPair> {
        self.pairs.values()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::new();
        let text = |out: &mut Vec<u8>, s: String| {
            out.extend_from_slice(s.as_bytes());
            out.push(b'\n');
        };
        text(&mut out, format!("{MAGIC} {VERSION}"));
        let prof: Vec<String> = h.profile.iter().map(|(k, v)| format!("{k}={v}")).collect();
        text(&mut out, format!("profile {}", prof.join(" ")));
        text(&mut out, format!("grid ns={} nt={} dofs={}", h.ns, h.nt, h.dofs));
        text(
            &mut out,
            format!("solver residual_tol={} ritz_tol={} seed={}", exact(h.residual_tol), exact(h.ritz_tol), h.seed),
        );
        text(&mut out, format!("windows {}", self.windows.len()));
        for (lo, hi) in &self.windows {
            text(&mut out, format!("window {} {}", exact(*lo), exact(*hi)));
        }
        text(&mut out, format!("pairs {}", self.pairs.len()));
        for c in self.pairs.values() {
            let shift = c.shift.map_or("nan".to_string(), exact);
            text(
                &mut out,
                format!("pair {} {} {} {}", c.pair.index, exact(c.pair.energy), exact(c.pair.residual), shift),
            );
            for v in &c.pair.vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
            out.push(b'\n');
        }
        let digest = Sha256::digest(&out);
        text(&mut out, format!("sha256 {}", hex(&digest)));
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor { buf, pos: 0 };
        let first = cur.line()?;
        let mut it = first.split(' ');
        if it.next() != Some(MAGIC) {
            return Err(Error::Cache("not an eigenpair cache file".into()));
        }
        let version: u32 = it.next().and_then(|v| v.parse().ok()).unwrap_or(0);
        if version != VERSION {
            return Err(Error::Cache(format!(
                "cache format version {version} is not supported (expected {VERSION}); delete the file and rerun `spectrum` to rebuild it"
            )));
        }
        let profile = cur
            .words("profile")?
            .into_iter()
            .map(|w| {
                w.split_once('=')
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .ok_or_else(|| Error::Cache(format!("bad profile field '{w}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let g = cur.words("grid")?;
        if g.len() != 3 {
            return Err(Error::Cache("grid line needs ns, nt, dofs".into()));
        }
        let (ns, nt, dofs) =
            (parse_usize(kv(g[0], "ns")?)?, parse_usize(kv(g[1], "nt")?)?, parse_usize(kv(g[2], "dofs")?)?);
        let s = cur.words("solver")?;
        if s.len() != 3 {
            return Err(Error::Cache("solver line needs three fields".into()));
        }
        let header = CacheHeader {
            profile,
            ns,
            nt,
            dofs,
            residual_tol: parse_f64(kv(s[0], "residual_tol")?)?,
            ritz_tol: parse_f64(kv(s[1], "ritz_tol")?)?,
            seed: kv(s[2], "seed")?.parse().map_err(|_| Error::Cache("bad seed".into()))?,
        };
        let nw = parse_usize(cur.words("windows")?.first().copied().unwrap_or(""))?;
        let mut windows = Vec::with_capacity(nw);
        for _ in 0..nw {
            let w = cur.words("window")?;
            if w.len() != 2 {
                return Err(Error::Cache("window line needs two bounds".into()));
            }
            windows.push((parse_f64(w[0])?, parse_f64(w[1])?));
        }
        let np = parse_usize(cur.words("pairs")?.first().copied().unwrap_or(""))?;
        let mut pairs = BTreeMap::new();
        for _ in 0..np {
            let w = cur.words("pair")?;
            if w.len() != 4 {
                return Err(Error::Cache("pair line needs index, E, residual, shift".into()));
            }
            let index = parse_usize(w[0])?;
            let energy = parse_f64(w[1])?;
            let residual = parse_f64(w[2])?;
            let shift = if w[3] == "nan" { None } else { Some(parse_f64(w[3])?) };
            let raw = cur.block(8 * dofs)?;
            let vector = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            if cur.block(1)? != b"\n" {
                return Err(Error::Cache(format!("vector block of pair {index} is not terminated")));
            }
            pairs.insert(index, CachedPair { pair: EigenPair { index, energy, vector, residual }, shift });
        }
        let body_end = cur.pos;
        let trailer = cur.words("sha256")?;
        let expected = hex(&Sha256::digest(&buf[..body_end]));
        if trailer.first().copied() != Some(expected.as_str()) {
            return Err(Error::Cache("checksum mismatch".into()));
        }
        Ok(Self { header, windows, pairs })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Writes atomically (temporary file + rename).
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, self.to_bytes())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Refuses caches produced for a different profile, grid or solver setup.
    pub fn check_compatible(&self, header: &CacheHeader) -> Result<()> {
        if &self.header != header {
            return Err(Error::Cache(
                "cache was built for a different profile/grid/solver configuration; point `cache.path` at a new file or delete the old one".into(),
            ));
        }
        Ok(())
    }
}
