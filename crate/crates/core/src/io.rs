//! Detection text files and the TSDW1 weights container.
//!
//! Detection files hold one frame per line:
//! `sequence_id frame_index x1 y1 x2 y2 score x1 y1 x2 y2 score ...`.
//! Ground-truth files use 4-tuples without a score. Values are written with
//! six decimals, which is the canonical form compared by golden tests.
//! Blank lines and lines starting with `#` are skipped. Frame indices must
//! not decrease within a sequence; repeated `(sequence, frame)` lines are
//! merged.
//!
//! TSDW1 layout, all integers little-endian:
//!
//! ```text
//! magic  "TSDW1\n"
//! entry* u16 name_len | name (printable ASCII) | u8 rank | u32 extent * rank
//!        | f32 value * product(extents), row-major
//! ```
//!
//! The smallest non-empty file is 23 bytes: magic, `06 00`, `weight`,
//! `01`, `01 00 00 00`, `00 00 80 3f` decodes to a `[1]` tensor holding 1.0.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::geom::{BBox, FrameDetections, SequenceDataset};
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {reason}")]
    Line { line: usize, reason: String },
}

/// Whether box tuples carry a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxKind {
    Scored,
    GroundTruth,
}

impl BoxKind {
    fn arity(self) -> usize {
        match self {
            BoxKind::Scored => 5,
            BoxKind::GroundTruth => 4,
        }
    }
}

fn line_err(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Line {
        line,
        reason: reason.into(),
    }
}

/// Parses a detection or ground-truth stream.
pub fn read_detections<R: BufRead>(reader: R, kind: BoxKind) -> Result<SequenceDataset, FormatError> {
    let mut frames: Vec<FrameDetections> = Vec::new();
    let mut last: HashMap<String, (u32, usize)> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let seq = tokens.next().expect("non-empty line has a token");
        let frame: u32 = tokens
            .next()
            .ok_or_else(|| line_err(line_no, "missing frame index"))?
            .parse()
            .map_err(|e| line_err(line_no, format!("bad frame index: {e}")))?;
        let values: Vec<f64> = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| line_err(line_no, format!("bad number {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        let arity = kind.arity();
        if !values.len().is_multiple_of(arity) {
            return Err(line_err(
                line_no,
                format!("{} values is not a multiple of {arity}", values.len()),
            ));
        }
        let boxes = values
            .chunks(arity)
            .enumerate()
            .map(|(j, c)| {
                let score = if arity == 5 { c[4] } else { 1.0 };
                BBox::new(c[0], c[1], c[2], c[3], score)
                    .map_err(|e| line_err(line_no, format!("box {}: {e}", j + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;

        match last.get(seq) {
            Some(&(prev, _)) if frame < prev => {
                return Err(line_err(
                    line_no,
                    format!("frame {frame} of sequence {seq} follows frame {prev}"),
                ));
            }
            Some(&(prev, at)) if frame == prev => {
                frames[at].boxes.extend(boxes);
            }
            _ => {
                last.insert(seq.to_string(), (frame, frames.len()));
                frames.push(FrameDetections::new(seq, frame, boxes));
            }
        }
    }
    Ok(SequenceDataset::new(frames))
}

/// Canonical text form of a dataset.
pub fn format_detections(ds: &SequenceDataset, kind: BoxKind) -> String {
    let mut s = String::new();
    for f in &ds.frames {
        let _ = write!(s, "{} {}", f.sequence_id, f.frame_index);
        for b in &f.boxes {
            let _ = write!(s, " {:.6} {:.6} {:.6} {:.6}", b.x1(), b.y1(), b.x2(), b.y2());
            if kind == BoxKind::Scored {
                let _ = write!(s, " {:.6}", b.score());
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_detections<W: Write>(ds: &SequenceDataset, kind: BoxKind, mut out: W) -> std::io::Result<()> {
    out.write_all(format_detections(ds, kind).as_bytes())
}

pub type WeightMap = BTreeMap<String, Tensor>;

pub const WEIGHTS_MAGIC: &[u8; 6] = b"TSDW1\n";

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("missing TSDW1 magic")]
    BadMagic,
    #[error("truncated {what} at byte {offset}")]
    Truncated { what: &'static str, offset: usize },
    #[error("duplicate weight name {0:?}")]
    DuplicateName(String),
    #[error("extents of {name:?} overflow")]
    ExtentOverflow { name: String },
    #[error("invalid weight name at byte {offset}")]
    InvalidName { offset: usize },
    #[error("weight {name:?} has rank 0")]
    ZeroRank { name: String },
    #[error("weight {name:?} has a zero extent")]
    ZeroExtent { name: String },
    #[error("weight {name:?}: {reason}")]
    Unwritable { name: String, reason: String },
}

fn valid_name(name: &[u8]) -> bool {
    !name.is_empty() && name.iter().all(|b| (0x21..=0x7e).contains(b))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WeightsError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or(WeightsError::Truncated {
            what,
            offset: self.pos,
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

/// Decodes a TSDW1 byte buffer.
pub fn decode_weights(bytes: &[u8]) -> Result<WeightMap, WeightsError> {
    if !bytes.starts_with(WEIGHTS_MAGIC) {
        return Err(WeightsError::BadMagic);
    }
    let mut cur = Cursor {
        bytes,
        pos: WEIGHTS_MAGIC.len(),
    };
    let mut map = WeightMap::new();
    while cur.pos < bytes.len() {
        let len_bytes = cur.take(2, "name length")?;
        let name_len = u16::from_le_bytes([len_bytes[0], len_bytes[1]]) as usize;
        let name_at = cur.pos;
        let raw = cur.take(name_len, "name")?;
        if !valid_name(raw) {
            return Err(WeightsError::InvalidName { offset: name_at });
        }
        let name = String::from_utf8(raw.to_vec()).expect("printable ASCII");
        let rank = cur.take(1, "rank")?[0] as usize;
        if rank == 0 {
            return Err(WeightsError::ZeroRank { name });
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let e = cur.take(4, "extent")?;
            dims.push(u32::from_le_bytes([e[0], e[1], e[2], e[3]]) as usize);
        }
        if dims.contains(&0) {
            return Err(WeightsError::ZeroExtent { name });
        }
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4).map(|_| n))
            .ok_or_else(|| WeightsError::ExtentOverflow { name: name.clone() })?;
        let raw = cur.take(count * 4, "values")?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if map.contains_key(&name) {
            return Err(WeightsError::DuplicateName(name));
        }
        let tensor = Tensor::new(dims, data).expect("count matches extents");
        map.insert(name, tensor);
    }
    Ok(map)
}

/// Encodes a weight map; values are stored as `f32`.
pub fn encode_weights(map: &WeightMap) -> Result<Vec<u8>, WeightsError> {
    let mut out = WEIGHTS_MAGIC.to_vec();
    for (name, t) in map {
        let unwritable = |reason: &str| WeightsError::Unwritable {
            name: name.clone(),
            reason: reason.to_string(),
        };
        if !valid_name(name.as_bytes()) {
            return Err(unwritable("name must be printable ASCII without spaces"));
        }
        let len = u16::try_from(name.len()).map_err(|_| unwritable("name too long"))?;
        let rank = u8::try_from(t.rank()).map_err(|_| unwritable("rank above 255"))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(rank);
        for &d in t.dims() {
            let d = u32::try_from(d).map_err(|_| unwritable("extent above u32"))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_weights(path: &std::path::Path) -> Result<WeightMap, WeightsError> {
    decode_weights(&std::fs::read(path)?)
}

pub fn write_weights(map: &WeightMap, path: &std::path::Path) -> Result<(), WeightsError> {
    std::fs::write(path, encode_weights(map)?)?;
    Ok(())
}
