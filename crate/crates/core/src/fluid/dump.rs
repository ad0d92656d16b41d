//! Binary particle dump.
//!
//! A dump is a sequence of frames, each laid out little-endian as
//! `f64 time, u32 count, count × (f32 x, f32 y, f32 z)`.

use std::io::{self, Write};

use crate::error::DumpError;
use crate::math::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleFrame {
    pub time: f64,
    pub positions: Vec<[f32; 3]>,
}

pub fn write_frame<'a, W: Write>(
    out: &mut W,
    time: f64,
    positions: impl ExactSizeIterator<Item = &'a Vec3>,
) -> io::Result<()> {
    let count = u32::try_from(positions.len())
        .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "too many particles for one frame"))?;
    let mut buf = Vec::with_capacity(12 + 12 * count as usize);
    buf.extend_from_slice(&time.to_le_bytes());
    buf.extend_from_slice(&count.to_le_bytes());
    for p in positions {
        for c in p.iter() {
            buf.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)
}

pub fn encode_frame(time: f64, positions: &[Vec3]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_frame(&mut buf, time, positions.iter()).expect("writing to a Vec cannot fail");
    buf
}

fn take<'a>(bytes: &'a [u8], offset: &mut usize, n: usize) -> Result<&'a [u8], DumpError> {
    let rest = bytes.len() - *offset;
    if rest < n {
        return Err(DumpError::Truncated { offset: *offset, needed: n - rest });
    }
    let s = &bytes[*offset..*offset + n];
    *offset += n;
    Ok(s)
}

/// Decode every frame in a dump. Trailing partial frames are an error.
pub fn decode_frames(bytes: &[u8]) -> Result<Vec<ParticleFrame>, DumpError> {
    let mut frames = Vec::new();
    let mut offset = 0;
    while offset < bytes.len() {
        let start = offset;
        let time = f64::from_le_bytes(take(bytes, &mut offset, 8)?.try_into().expect("8 bytes"));
        if !time.is_finite() {
            return Err(DumpError::BadTime { offset: start });
        }
        let count = u32::from_le_bytes(take(bytes, &mut offset, 4)?.try_into().expect("4 bytes")) as usize;
        let body = take(bytes, &mut offset, count.saturating_mul(12))?;
        let positions = body
            .chunks_exact(12)
            .map(|c| {
                let f = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().expect("4 bytes"));
                [f(0), f(1), f(2)]
            })
            .collect();
        frames.push(ParticleFrame { time, positions });
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let pts = vec![Vec3::new(0.5, -1.0, 2.25), Vec3::new(1e-3, 0.0, 7.0)];
        let mut bytes = encode_frame(0.004, &pts);
        bytes.extend(encode_frame(0.008, &[]));
        let frames = decode_frames(&bytes).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].time, 0.004);
        assert_eq!(frames[0].positions, vec![[0.5, -1.0, 2.25], [1e-3, 0.0, 7.0]]);
        assert!(frames[1].positions.is_empty());
    }

    #[test]
    fn layout_is_little_endian() {
        let bytes = encode_frame(1.0, &[Vec3::new(1.0, 2.0, 3.0)]);
        assert_eq!(bytes.len(), 8 + 4 + 12);
        assert_eq!(&bytes[0..8], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &1.0f32.to_le_bytes());
    }

    #[test]
    fn truncation_is_reported() {
        let bytes = encode_frame(0.0, &[Vec3::zeros(); 3]);
        let err = decode_frames(&bytes[..bytes.len() - 1]).unwrap_err();
        assert_eq!(err, DumpError::Truncated { offset: 12, needed: 1 });
        let mut huge = 0.0f64.to_le_bytes().to_vec();
        huge.extend(u32::MAX.to_le_bytes());
        assert!(decode_frames(&huge).is_err());
    }
}
