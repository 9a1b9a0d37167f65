//! Model checkpoint serialization.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic "MGS1" (4 bytes)
//! format version   u32
//! width            u32
//! height           u32
//! N                u64
//! background       3 x f32
//! criterion tag    u8
//! N records of:
//!   id             u64
//!   mu             2 x f64
//!   log_scale      2 x f64
//!   theta          f64
//!   opacity_raw    f64
//!   color_raw      3 x f64
//!   depth          f64
//! ```
//!
//! Records are stored in importance (storage) order, so deserializing
//! reproduces the model bit-exactly, including its nesting order.
//!
//! Next to a checkpoint, trainers write a JSON sidecar with the optimizer
//! moments and an echo of the resolved training configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::error::{Error, Result};
use crate::grad::SplatGrad;
use crate::ordering::{Direction, OrderingCriterion, ScoreKind};
use crate::splat::{Splat, SplatModel};
use crate::train::TrainConfig;

pub const MAGIC: [u8; 4] = *b"MGS1";
pub const FORMAT_VERSION: u32 = 1;

/// Stable one-byte tags for the ordering criterion.
pub fn criterion_tag(criterion: OrderingCriterion) -> u8 {
    let dir = match criterion.direction {
        Direction::Descending => 0,
        Direction::Ascending => 1,
    };
    match criterion.kind {
        ScoreKind::Opacity => dir,
        ScoreKind::Area => 2 + dir,
        ScoreKind::ColorEnergy => 4 + dir,
        ScoreKind::ColorVariance => 6 + dir,
        ScoreKind::FixedAppend => 8,
        ScoreKind::FixedPrepend => 9,
    }
}

pub fn criterion_from_tag(tag: u8) -> Result<OrderingCriterion> {
    let dir = |t: u8| {
        if t.is_multiple_of(2) {
            Direction::Descending
        } else {
            Direction::Ascending
        }
    };
    let criterion = match tag {
        0 | 1 => OrderingCriterion::new(ScoreKind::Opacity, dir(tag)),
        2 | 3 => OrderingCriterion::new(ScoreKind::Area, dir(tag)),
        4 | 5 => OrderingCriterion::new(ScoreKind::ColorEnergy, dir(tag)),
        6 | 7 => OrderingCriterion::new(ScoreKind::ColorVariance, dir(tag)),
        8 => OrderingCriterion::new(ScoreKind::FixedAppend, Direction::Descending),
        9 => OrderingCriterion::new(ScoreKind::FixedPrepend, Direction::Descending),
        other => {
            return Err(Error::Checkpoint(format!(
                "unknown criterion tag {other}"
            )))
        }
    };
    Ok(criterion)
}

/// Header: magic + version + dims + N + background + criterion tag.
pub const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 12 + 1;
/// One splat record in bytes.
pub const RECORD_LEN: usize = 8 + 16 + 16 + 8 + 8 + 24 + 8;

pub fn encode(model: &SplatModel) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + model.len() * RECORD_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&model.width.to_le_bytes());
    out.extend_from_slice(&model.height.to_le_bytes());
    out.extend_from_slice(&(model.len() as u64).to_le_bytes());
    for c in model.background {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.push(criterion_tag(model.criterion));
    for s in &model.splats {
        out.extend_from_slice(&s.id.to_le_bytes());
        for v in s.mu {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in s.log_scale {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.theta.to_le_bytes());
        out.extend_from_slice(&s.opacity_raw.to_le_bytes());
        for v in s.color_raw {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&s.depth.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint(format!(
                "truncated: needed {} bytes at offset {}, have {}",
                n,
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<SplatModel> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not an MGS1 file".into()));
    }
    let version = c.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let width = c.u32()?;
    let height = c.u32()?;
    let n = c.u64()? as usize;
    let background = [c.f32()?, c.f32()?, c.f32()?];
    let criterion = criterion_from_tag(c.u8()?)?;
    let mut splats = Vec::with_capacity(n);
    for _ in 0..n {
        splats.push(Splat {
            id: c.u64()?,
            mu: [c.f64()?, c.f64()?],
            log_scale: [c.f64()?, c.f64()?],
            theta: c.f64()?,
            opacity_raw: c.f64()?,
            color_raw: [c.f64()?, c.f64()?, c.f64()?],
            depth: c.f64()?,
        });
    }
    if c.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after {} records",
            bytes.len() - c.pos,
            n
        )));
    }
    Ok(SplatModel {
        splats,
        width,
        height,
        background,
        criterion,
    })
}

pub fn write_checkpoint(model: &SplatModel, path: &Path) -> Result<()> {
    fs::write(path, encode(model))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<SplatModel> {
    let bytes = fs::read(path)?;
    decode(&bytes)
}

/// Optimizer state and config echo stored next to a checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sidecar {
    pub step: u64,
    pub config: TrainConfig,
    pub adam_t: u64,
    /// Rows of 9 values: mu x2, log_scale x2, theta, opacity_raw, color_raw x3.
    pub adam_m: Vec<[f64; 9]>,
    pub adam_v: Vec<[f64; 9]>,
}

fn pack(g: &SplatGrad) -> [f64; 9] {
    [
        g.d_mu[0],
        g.d_mu[1],
        g.d_log_scale[0],
        g.d_log_scale[1],
        g.d_theta,
        g.d_opacity_raw,
        g.d_color_raw[0],
        g.d_color_raw[1],
        g.d_color_raw[2],
    ]
}

fn unpack(row: &[f64; 9]) -> SplatGrad {
    SplatGrad {
        d_mu: [row[0], row[1]],
        d_log_scale: [row[2], row[3]],
        d_theta: row[4],
        d_opacity_raw: row[5],
        d_color_raw: [row[6], row[7], row[8]],
    }
}

impl Sidecar {
    pub fn new(step: u64, config: &TrainConfig, adam: &AdamState) -> Self {
        Self {
            step,
            config: config.clone(),
            adam_t: adam.t,
            adam_m: adam.m.iter().map(pack).collect(),
            adam_v: adam.v.iter().map(pack).collect(),
        }
    }

    pub fn adam_state(&self) -> AdamState {
        AdamState {
            m: self.adam_m.iter().map(unpack).collect(),
            v: self.adam_v.iter().map(unpack).collect(),
            t: self.adam_t,
        }
    }
}

pub fn write_sidecar(sidecar: &Sidecar, path: &Path) -> Result<()> {
    let json = serde_json::to_string(sidecar)
        .map_err(|e| Error::Checkpoint(format!("sidecar encode: {e}")))?;
    fs::write(path, json)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar> {
    let json = fs::read_to_string(path)?;
    serde_json::from_str(&json).map_err(|e| Error::Checkpoint(format!("sidecar decode: {e}")))
}
