//! Middlebury `.flo` files.
//!
//! Layout (little-endian): `f32` magic 202021.25 (the bytes `PIEH`), `i32`
//! width, `i32` height, then `width * height` interleaved `(u, v)` `f32`
//! pairs, row-major from the top row.

use std::fs;
use std::path::Path;

use flowfusion_core::FlowField;

use crate::error::{Error, Result};

pub const FLO_MAGIC: f32 = 202021.25;
pub const MAX_SIDE: i64 = 100_000;
const HEADER: usize = 12;

pub fn encode_flo(flow: &FlowField) -> Result<Vec<u8>> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(HEADER + 8 * w * h);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for (i, (u, v)) in flow.u().iter().zip(flow.v()).enumerate() {
        if !(u.is_finite() && v.is_finite()) {
            return Err(flowfusion_core::Error::NonFinite { index: i }.into());
        }
        out.extend_from_slice(&(*u as f32).to_le_bytes());
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

/// Parses `.flo` bytes; `path` is only used in diagnostics.
pub fn decode_flo(bytes: &[u8], path: &Path) -> Result<FlowField> {
    if bytes.len() < HEADER {
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER,
            found: bytes.len(),
        });
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().expect("4 bytes") };
    if f32::from_le_bytes(word(0)) != FLO_MAGIC {
        return Err(Error::BadMagic {
            path: path.into(),
            found: word(0),
        });
    }
    let (w, h) = (i32::from_le_bytes(word(4)) as i64, i32::from_le_bytes(word(8)) as i64);
    if !(1..=MAX_SIDE).contains(&w) || !(1..=MAX_SIDE).contains(&h) {
        return Err(Error::BadDimensions {
            path: path.into(),
            width: w,
            height: h,
        });
    }
    let (w, h) = (w as usize, h as usize);
    let expected = HEADER + 8 * w * h;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            found: bytes.len(),
        });
    }
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for px in bytes[HEADER..expected].chunks_exact(8) {
        u.push(f32::from_le_bytes(px[..4].try_into().expect("4 bytes")) as f64);
        v.push(f32::from_le_bytes(px[4..].try_into().expect("4 bytes")) as f64);
    }
    Ok(FlowField::from_components(w, h, u, v)?)
}

pub fn read_flo(path: impl AsRef<Path>) -> Result<FlowField> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_flo(&bytes, path)
}

pub fn write_flo(path: impl AsRef<Path>, flow: &FlowField) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_flo(flow)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pixel_layout() {
        let f = FlowField::constant(1, 1, 1.5, -2.0);
        let b = encode_flo(&f).unwrap();
        assert_eq!(b.len(), 20);
        assert_eq!(&b[..4], b"PIEH");
        assert_eq!(&b[4..12], &[1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&b[12..16], &1.5f32.to_le_bytes());
        assert_eq!(&b[16..20], &(-2.0f32).to_le_bytes());
        assert_eq!(decode_flo(&b, Path::new("x")).unwrap(), f);
    }

    #[test]
    fn diagnostics() {
        let p = Path::new("x.flo");
        let mut b = encode_flo(&FlowField::zeros(3, 2)).unwrap();
        assert!(matches!(
            decode_flo(&b[..30], p),
            Err(Error::Truncated { expected: 60, .. })
        ));
        assert!(matches!(decode_flo(&b[..5], p), Err(Error::Truncated { .. })));
        b[0] = b'X';
        let e = decode_flo(&b, p).unwrap_err();
        assert!(e.to_string().contains("bad magic"), "{e}");
        let mut b = encode_flo(&FlowField::zeros(1, 1)).unwrap();
        b[4..8].copy_from_slice(&(-4i32).to_le_bytes());
        assert!(matches!(decode_flo(&b, p), Err(Error::BadDimensions { width: -4, .. })));
        b[4..8].copy_from_slice(&200_000i32.to_le_bytes());
        assert!(matches!(decode_flo(&b, p), Err(Error::BadDimensions { .. })));
        let nan = FlowField::constant(1, 1, f64::NAN, 0.0);
        assert!(encode_flo(&nan).is_err());
    }
}
