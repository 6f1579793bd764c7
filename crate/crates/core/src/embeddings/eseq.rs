use std::fs;
use std::path::Path;

use super::{EmbeddingSequence, DEFAULT_FPS};
use crate::error::{Error, Result};

pub const ESEQ_MAGIC: &[u8; 4] = b"ESEQ";
pub const ESEQ_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

/// Reads an embedding sequence, dispatching on extension: `.csv` is parsed as
/// one comma-separated frame per line, anything else as ESEQ binary.
pub fn read_eseq(path: impl AsRef<Path>) -> Result<EmbeddingSequence> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let mut seq = if is_csv {
        parse_csv(path, &bytes)?
    } else {
        decode(path, &bytes)?
    };
    if seq.source_id().is_empty() {
        if let Some(stem) = path.file_stem() {
            seq.set_source_id(stem.to_string_lossy());
        }
    }
    Ok(seq)
}

/// Writes ESEQ binary (little-endian, f32 payload). Output bytes depend only
/// on the sequence contents.
pub fn write_eseq(seq: &EmbeddingSequence, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(seq)).map_err(|e| Error::io(path, e))
}

pub(crate) fn encode(seq: &EmbeddingSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + seq.values().len() * 4);
    out.extend_from_slice(ESEQ_MAGIC);
    out.extend_from_slice(&ESEQ_VERSION.to_le_bytes());
    out.extend_from_slice(&(seq.frames() as u32).to_le_bytes());
    out.extend_from_slice(&(seq.dim() as u32).to_le_bytes());
    out.extend_from_slice(&seq.fps().to_le_bytes());
    for &v in seq.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], off: usize) -> u32 {
    u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
}

pub(crate) fn decode(path: &Path, bytes: &[u8]) -> Result<EmbeddingSequence> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            path,
            format!("byte {}", bytes.len()),
            format!("truncated header ({} of {HEADER_LEN} bytes)", bytes.len()),
        ));
    }
    if &bytes[..4] != ESEQ_MAGIC {
        return Err(Error::format(
            path,
            "byte 0",
            format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4])),
        ));
    }
    let version = u32_at(bytes, 4);
    if version != ESEQ_VERSION {
        return Err(Error::UnsupportedVersion {
            format: "ESEQ",
            found: version,
            expected: ESEQ_VERSION,
        });
    }
    let frames = u32_at(bytes, 8) as usize;
    let dim = u32_at(bytes, 12) as usize;
    let fps = f32::from_le_bytes(bytes[16..20].try_into().unwrap());
    if frames == 0 {
        return Err(Error::format(path, "byte 8", "zero frames"));
    }
    if dim == 0 {
        return Err(Error::format(path, "byte 12", "zero dim"));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::format(path, "byte 16", format!("invalid fps {fps}")));
    }
    let expected = frames
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::format(path, "byte 8", "frame/dim product overflows"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("byte {}", bytes.len().min(expected)),
            format!("payload is {} bytes, expected {expected}", bytes.len()),
        ));
    }
    let mut values = Vec::with_capacity(frames * dim);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(
                path,
                format!("byte {}", HEADER_LEN + 4 * i),
                format!("non-finite value {v}"),
            ));
        }
        values.push(v as f64);
    }
    EmbeddingSequence::with_meta(frames, dim, fps, values, "")
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<EmbeddingSequence> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::format(path, format!("byte {}", e.valid_up_to()), "not UTF-8"))?;
    let mut values = Vec::new();
    let mut dim = None;
    let mut frames = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row_at = || format!("row {}", lineno + 1);
        let mut n = 0;
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::format(path, row_at(), format!("bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::format(path, row_at(), format!("non-finite value {field}")));
            }
            values.push(v);
            n += 1;
        }
        match dim {
            None => dim = Some(n),
            Some(d) if d != n => {
                return Err(Error::format(
                    path,
                    row_at(),
                    format!("{n} columns, expected {d}"),
                ))
            }
            _ => {}
        }
        frames += 1;
    }
    let Some(dim) = dim else {
        return Err(Error::format(path, "row 1", "zero frames"));
    };
    EmbeddingSequence::with_meta(frames, dim, DEFAULT_FPS, values, "")
}
