//! Run artifacts: a binary header followed by flat parameter arrays.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "EPAR" | version u32 | header_len u32 | header JSON
//! epochs u32 | per epoch:
//!   index u32 | queried u32 | fresh u8 | radius f64
//!   param_len u32 | params f64 * param_len
//!   anchors u32 | anchor coordinates f64 * anchors * d
//! ```
//!
//! The header carries the class, surrogate and the fully resolved
//! configuration, so an artifact is self-describing and the stitched
//! classifier can be rebuilt from it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcclass::{ClassSpec, Params};
use crate::learner::{EpochRecord, RunTrace, StitchedClassifier};
use crate::surrogate::SurrogateSpec;
use crate::version_space::VersionSpace;

pub const MAGIC: &[u8; 4] = b"EPAR";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactHeader {
    pub class: ClassSpec,
    pub surrogate: SurrogateSpec,
    pub trial: usize,
    pub n: usize,
    pub trace: RunTrace,
    /// The resolved experiment configuration.
    pub config: serde_json::Value,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Artifact(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f64s(out: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(header: &ArtifactHeader, sc: &StitchedClassifier) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let json = serde_json::to_vec(header).map_err(|e| Error::Artifact(e.to_string()))?;
    put_u32(&mut out, json.len())?;
    out.extend_from_slice(&json);
    put_u32(&mut out, sc.epochs.len())?;
    for e in &sc.epochs {
        put_u32(&mut out, e.index)?;
        put_u32(&mut out, e.queried_count)?;
        out.push(e.fresh as u8);
        put_f64s(&mut out, &[e.vspace.radius_b]);
        put_u32(&mut out, e.fitted.theta.len())?;
        put_f64s(&mut out, &e.fitted.theta);
        put_u32(&mut out, e.vspace.anchor_points.len())?;
        for x in &e.vspace.anchor_points {
            put_f64s(&mut out, x);
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::Artifact(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Artifact("length overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode(buf: &[u8]) -> Result<(ArtifactHeader, StitchedClassifier)> {
    let mut c = Cursor { buf, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Artifact("bad magic".into()));
    }
    let version = c.u32()?;
    if version != VERSION as usize {
        return Err(Error::Artifact(format!("unsupported version {version}")));
    }
    let hlen = c.u32()?;
    let header: ArtifactHeader =
        serde_json::from_slice(c.take(hlen)?).map_err(|e| Error::Artifact(format!("header: {e}")))?;
    let cls = header.class.clone();
    let count = c.u32()?;
    let mut epochs = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let index = c.u32()?;
        let queried = c.u32()?;
        let fresh = c.u8()? != 0;
        let radius = c.f64s(1)?[0];
        let plen = c.u32()?;
        if plen != cls.param_dim() {
            return Err(Error::Artifact(format!("epoch {index}: {plen} parameters")));
        }
        let theta = c.f64s(plen)?;
        let na = c.u32()?;
        let flat = c.f64s(na.checked_mul(cls.d).ok_or_else(|| Error::Artifact("length overflow".into()))?)?;
        let anchors: Vec<Vec<f64>> = flat.chunks(cls.d.max(1)).map(|s| s.to_vec()).collect();
        let fitted = Params::new(theta);
        let vspace = VersionSpace::new(&cls, fitted.clone(), anchors, radius)?;
        let range = crate::learner::epoch_range(index.max(1));
        epochs.push(EpochRecord {
            index,
            fitted,
            vspace,
            queried_count: queried,
            epoch_range: range,
            fresh,
        });
    }
    if c.pos != buf.len() {
        return Err(Error::Artifact(format!("{} trailing bytes", buf.len() - c.pos)));
    }
    let sc = StitchedClassifier::new(epochs, header.surrogate, cls)?;
    Ok((header, sc))
}

pub fn write(path: &std::path::Path, header: &ArtifactHeader, sc: &StitchedClassifier) -> Result<()> {
    let bytes = encode(header, sc)?;
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read(path: &std::path::Path) -> Result<(ArtifactHeader, StitchedClassifier)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf)
}
