//! Binary RF frame files.
//!
//! Layout: the 8-byte magic `ACERF001`, `num_lines` and `samples_per_line` as
//! little-endian `u32`, then `num_lines × samples_per_line` little-endian
//! `f32` samples, line 0 first.

use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"ACERF001";
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfFileHeader {
    pub num_lines: u32,
    pub samples_per_line: u32,
}

impl RfFileHeader {
    pub fn num_samples(&self) -> usize {
        self.num_lines as usize * self.samples_per_line as usize
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RfFormatError {
    #[error("file is {0} bytes, shorter than the {HEADER_LEN}-byte header")]
    TooShort(usize),
    #[error("bad magic {0:?}")]
    BadMagic([u8; 8]),
    #[error("header declares {expected} payload bytes, file has {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dimensions {0} x {1} do not fit the header")]
    Oversized(usize, usize),
    #[error("sample {index} is {value}, not representable as a finite f32")]
    NonFinite { index: usize, value: f64 },
}

pub fn encode_rf(num_lines: usize, samples_per_line: usize, samples: &[f64]) -> Result<Vec<u8>, RfFormatError> {
    let (Ok(lines), Ok(spl)) = (u32::try_from(num_lines), u32::try_from(samples_per_line)) else {
        return Err(RfFormatError::Oversized(num_lines, samples_per_line));
    };
    let header = RfFileHeader {
        num_lines: lines,
        samples_per_line: spl,
    };
    if samples.len() != header.num_samples() {
        return Err(RfFormatError::LengthMismatch {
            expected: header.num_samples() * 4,
            actual: samples.len() * 4,
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + samples.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&lines.to_le_bytes());
    out.extend_from_slice(&spl.to_le_bytes());
    for (index, &value) in samples.iter().enumerate() {
        let single = value as f32;
        if !single.is_finite() {
            return Err(RfFormatError::NonFinite { index, value });
        }
        out.extend_from_slice(&single.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_rf(bytes: &[u8]) -> Result<(RfFileHeader, Vec<f64>), RfFormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(RfFormatError::TooShort(bytes.len()));
    }
    let magic: [u8; 8] = bytes[..8].try_into().expect("8-byte slice");
    if &magic != MAGIC {
        return Err(RfFormatError::BadMagic(magic));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"));
    let header = RfFileHeader {
        num_lines: word(8),
        samples_per_line: word(12),
    };
    let payload = &bytes[HEADER_LEN..];
    let expected = header.num_samples().checked_mul(4);
    if expected != Some(payload.len()) {
        return Err(RfFormatError::LengthMismatch {
            expected: expected.unwrap_or(usize::MAX),
            actual: payload.len(),
        });
    }
    let samples = payload
        .chunks_exact(4)
        .enumerate()
        .map(|(index, c)| {
            let v = f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
            if v.is_finite() {
                Ok(f64::from(v))
            } else {
                Err(RfFormatError::NonFinite { index, value: f64::from(v) })
            }
        })
        .collect::<Result<_, _>>()?;
    Ok((header, samples))
}
