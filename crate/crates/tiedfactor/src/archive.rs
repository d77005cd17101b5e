//! Binary feature archives and TSV import.
//!
//! Layout (little-endian): magic `TFDA`, `u16` version, header `u32 D`,
//! `u64 T`, `u32 F`, `u32 S`, then `T` records of `u32 session`,
//! `u32 speaker` and `D` `f64` values.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use tiedfactor_core::{Dataset, Matrix};

use crate::error::{IoError, IoResult};
use crate::fsutil::write_atomic;

pub const ARCHIVE_MAGIC: &[u8; 4] = b"TFDA";
pub const ARCHIVE_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 8 + 4 + 4;

pub fn encode_archive(data: &Dataset) -> Vec<u8> {
    let d = data.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + data.len() * (8 + 8 * d));
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    out.extend_from_slice(&(data.num_sessions() as u32).to_le_bytes());
    out.extend_from_slice(&(data.num_speakers() as u32).to_le_bytes());
    for t in 0..data.len() {
        out.extend_from_slice(&data.session_labels()[t].to_le_bytes());
        out.extend_from_slice(&data.speaker_labels()[t].to_le_bytes());
        for v in data.frame(t) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

fn take<const N: usize>(bytes: &[u8], pos: &mut usize) -> Option<[u8; N]> {
    let s = bytes.get(*pos..*pos + N)?;
    *pos += N;
    s.try_into().ok()
}

pub fn decode_archive(bytes: &[u8]) -> IoResult<Dataset> {
    if bytes.len() < 6 || &bytes[..4] != ARCHIVE_MAGIC {
        return Err(IoError::Format("not a feature archive (bad magic)".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != ARCHIVE_VERSION {
        return Err(IoError::Version {
            found: version,
            expected: ARCHIVE_VERSION,
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(IoError::Format(format!(
            "archive header is {} bytes, expected {HEADER_LEN}",
            bytes.len()
        )));
    }
    let mut pos = 6;
    let d = u32::from_le_bytes(take(bytes, &mut pos).unwrap()) as usize;
    let t = u64::from_le_bytes(take(bytes, &mut pos).unwrap());
    let f = u32::from_le_bytes(take(bytes, &mut pos).unwrap());
    let s = u32::from_le_bytes(take(bytes, &mut pos).unwrap());
    if d == 0 {
        return Err(IoError::Format(
            "archive header declares zero feature dimension".into(),
        ));
    }
    let record = 8 + 8 * d;
    let body = (bytes.len() - HEADER_LEN) as u64;
    let whole = body / record as u64;
    if whole < t {
        return Err(IoError::Truncated {
            record: whole,
            declared: t,
        });
    }
    if body != t * record as u64 {
        return Err(IoError::Format(format!(
            "{} trailing bytes after {t} records",
            body - t * record as u64
        )));
    }
    let t = t as usize;
    let mut sessions = Vec::with_capacity(t);
    let mut speakers = Vec::with_capacity(t);
    let mut frames = Vec::with_capacity(t * d);
    for i in 0..t {
        let ses = u32::from_le_bytes(take(bytes, &mut pos).unwrap());
        let spk = u32::from_le_bytes(take(bytes, &mut pos).unwrap());
        if ses >= f {
            return Err(IoError::LabelRange {
                record: i as u64,
                kind: "session",
                value: ses,
                limit: f,
            });
        }
        if spk >= s {
            return Err(IoError::LabelRange {
                record: i as u64,
                kind: "speaker",
                value: spk,
                limit: s,
            });
        }
        sessions.push(ses);
        speakers.push(spk);
        for _ in 0..d {
            let v = f64::from_le_bytes(take(bytes, &mut pos).unwrap());
            if !v.is_finite() {
                return Err(IoError::Format(format!(
                    "record {i}: non-finite feature value"
                )));
            }
            frames.push(v);
        }
    }
    let frames = Matrix::from_vec(t, d, frames)?;
    Ok(Dataset::new(
        frames, sessions, speakers, f as usize, s as usize,
    )?)
}

pub fn write_archive(path: &Path, data: &Dataset) -> IoResult<()> {
    write_atomic(path, &encode_archive(data))
}

pub fn read_archive(path: &Path) -> IoResult<Dataset> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|f| BufReader::new(f).read_to_end(&mut bytes))
        .map_err(|e| IoError::at(path, e))?;
    decode_archive(&bytes).map_err(|e| e.in_file(path))
}

/// Parses `session<TAB>speaker<TAB>f1 … fD` lines. Blank lines and lines
/// starting with `#` are skipped. Session and speaker counts are one past the
/// largest label seen.
pub fn parse_tsv<R: BufRead>(reader: R) -> IoResult<Dataset> {
    let mut sessions = Vec::new();
    let mut speakers = Vec::new();
    let mut frames = Vec::new();
    let mut dim: Option<usize> = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| IoError::Io(format!("line {}: {e}", n + 1)))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| IoError::Format(format!("line {}: {msg}", n + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 3 {
            return Err(bad(
                "expected session, speaker and at least one feature".into()
            ));
        }
        let ses: u32 = fields[0]
            .trim()
            .parse()
            .map_err(|e| bad(format!("session label: {e}")))?;
        let spk: u32 = fields[1]
            .trim()
            .parse()
            .map_err(|e| bad(format!("speaker label: {e}")))?;
        let values: Vec<f64> = fields[2..]
            .iter()
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| bad(format!("feature value: {e}")))?;
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(bad(format!(
                    "{} features, earlier lines have {d}",
                    values.len()
                )));
            }
            _ => {}
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite feature value".into()));
        }
        sessions.push(ses);
        speakers.push(spk);
        frames.extend(values);
    }
    let d = dim.ok_or_else(|| IoError::Format("no feature lines".into()))?;
    let f = sessions.iter().max().map_or(0, |m| *m as usize + 1);
    let s = speakers.iter().max().map_or(0, |m| *m as usize + 1);
    let t = sessions.len();
    Ok(Dataset::new(
        Matrix::from_vec(t, d, frames)?,
        sessions,
        speakers,
        f,
        s,
    )?)
}

pub fn import_tsv(path: &Path) -> IoResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| IoError::at(path, e))?;
    parse_tsv(BufReader::new(file)).map_err(|e| e.in_file(path))
}

/// Writes a dataset as TSV with full round-trip precision.
pub fn write_tsv<W: Write>(data: &Dataset, out: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(out);
    for t in 0..data.len() {
        write!(
            w,
            "{}\t{}",
            data.session_labels()[t],
            data.speaker_labels()[t]
        )?;
        for v in data.frame(t) {
            write!(w, "\t{v:?}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// Frames of one session as a matrix, in archive order.
pub fn session_matrix(data: &Dataset, session: usize) -> Matrix {
    let idx = data.session_frames(session);
    let mut v = Vec::with_capacity(idx.len() * data.dim());
    for &t in idx {
        v.extend_from_slice(data.frame(t));
    }
    Matrix::from_vec(idx.len(), data.dim(), v).expect("finite frames")
}

/// Frames of one speaker as a matrix, in archive order.
pub fn speaker_matrix(data: &Dataset, speaker: usize) -> Matrix {
    let idx = data.speaker_frames(speaker);
    let mut v = Vec::with_capacity(idx.len() * data.dim());
    for &t in idx {
        v.extend_from_slice(data.frame(t));
    }
    Matrix::from_vec(idx.len(), data.dim(), v).expect("finite frames")
}
