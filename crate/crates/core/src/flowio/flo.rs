//! Middlebury `.flo` files: magic `202021.25` (bytes `PIEH`), `i32` width,
//! `i32` height, then row-major interleaved `(u, v)` pairs, all little
//! endian 32-bit. Unknown flow is any component above `1e9` in magnitude.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{FlowField, FlowFieldError};
use crate::grid::Grid;
use crate::Scalar;

pub const FLO_MAGIC: f32 = 202021.25;
pub const UNKNOWN_FLOW_THRESHOLD: f32 = 1e9;
/// Value written for both components of an invalid pixel.
pub const UNKNOWN_FLOW: f32 = 1e10;

const MAX_PIXELS: u64 = 1 << 28;

#[derive(Debug, Error)]
pub enum FloError {
    #[error("bad .flo magic {0} (expected 202021.25)")]
    BadMagic(f32),
    #[error("truncated .flo stream")]
    Truncated,
    #[error("non-positive .flo dimensions {width}x{height}")]
    NonPositiveDimensions { width: i32, height: i32 },
    #[error(".flo dimensions {width}x{height} exceed the supported size")]
    TooLarge { width: i32, height: i32 },
    #[error("flow at ({x}, {y}) is not representable as a valid .flo value")]
    Unrepresentable { x: usize, y: usize },
    #[error(transparent)]
    Field(#[from] FlowFieldError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn write_flo<T: Scalar, W: Write>(field: &FlowField<T>, mut sink: W) -> Result<(), FloError> {
    let (w, h) = field.dims();
    let too_large = || FloError::TooLarge {
        width: i32::try_from(w).unwrap_or(i32::MAX),
        height: i32::try_from(h).unwrap_or(i32::MAX),
    };
    let wi = i32::try_from(w).map_err(|_| too_large())?;
    let hi = i32::try_from(h).map_err(|_| too_large())?;
    if wi <= 0 || hi <= 0 {
        return Err(FloError::NonPositiveDimensions {
            width: wi,
            height: hi,
        });
    }
    let mut buf = Vec::with_capacity(12 + 8 * w * h);
    buf.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    buf.extend_from_slice(&wi.to_le_bytes());
    buf.extend_from_slice(&hi.to_le_bytes());
    for y in 0..h {
        for x in 0..w {
            let (u, v) = match field.get(x, y) {
                Some((u, v)) => {
                    let (u, v) = (to_f32(u), to_f32(v));
                    if !(u.abs() <= UNKNOWN_FLOW_THRESHOLD && v.abs() <= UNKNOWN_FLOW_THRESHOLD) {
                        return Err(FloError::Unrepresentable { x, y });
                    }
                    (u, v)
                }
                None => (UNKNOWN_FLOW, UNKNOWN_FLOW),
            };
            buf.extend_from_slice(&u.to_le_bytes());
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    sink.write_all(&buf)?;
    Ok(())
}

pub fn read_flo<T: Scalar, R: Read>(mut source: R) -> Result<FlowField<T>, FloError> {
    let mut header = [0u8; 12];
    read_exact(&mut source, &mut header)?;
    let word = |i: usize| [header[i], header[i + 1], header[i + 2], header[i + 3]];
    let magic = f32::from_le_bytes(word(0));
    if magic != FLO_MAGIC {
        return Err(FloError::BadMagic(magic));
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(FloError::NonPositiveDimensions { width, height });
    }
    if width as u64 * height as u64 > MAX_PIXELS {
        return Err(FloError::TooLarge { width, height });
    }
    let (w, h) = (width as usize, height as usize);
    let mut data = vec![0u8; 8 * w * h];
    read_exact(&mut source, &mut data)?;

    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for px in data.chunks_exact(8) {
        let fu = f32::from_le_bytes([px[0], px[1], px[2], px[3]]);
        let fv = f32::from_le_bytes([px[4], px[5], px[6], px[7]]);
        let ok = fu.abs() <= UNKNOWN_FLOW_THRESHOLD && fv.abs() <= UNKNOWN_FLOW_THRESHOLD;
        u.push(T::lit(fu as f64));
        v.push(T::lit(fv as f64));
        valid.push(ok);
    }
    let grid = |d| Grid::from_vec(w, h, d).expect("buffer sized from header");
    Ok(FlowField::new(grid(u), grid(v), Grid::from_vec(w, h, valid).expect("sized"))?)
}

fn read_exact<R: Read>(source: &mut R, buf: &mut [u8]) -> Result<(), FloError> {
    source.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FloError::Truncated,
        _ => FloError::Io(e),
    })
}

fn to_f32<T: Scalar>(x: T) -> f32 {
    x.to_f32().unwrap_or(f32::NAN)
}

pub fn encode_flo<T: Scalar>(field: &FlowField<T>) -> Result<Vec<u8>, FloError> {
    let mut out = Vec::new();
    write_flo(field, &mut out)?;
    Ok(out)
}

pub fn decode_flo<T: Scalar>(bytes: &[u8]) -> Result<FlowField<T>, FloError> {
    read_flo(bytes)
}

pub fn write_flo_file<T: Scalar>(field: &FlowField<T>, path: impl AsRef<Path>) -> Result<(), FloError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_flo(field, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_flo_file<T: Scalar>(path: impl AsRef<Path>) -> Result<FlowField<T>, FloError> {
    read_flo(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn golden_single_pixel_file() {
        let bytes = encode_flo(&FlowField::<f32>::zeros(1, 1)).unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(&202021.25f32.to_le_bytes());
        expected.extend_from_slice(&1i32.to_le_bytes());
        expected.extend_from_slice(&1i32.to_le_bytes());
        expected.extend_from_slice(&0.0f32.to_le_bytes());
        expected.extend_from_slice(&0.0f32.to_le_bytes());
        assert_eq!(bytes, expected);
        assert_eq!(&bytes[..4], b"PIEH");
    }

    #[test]
    fn distinct_errors() {
        let good = encode_flo(&FlowField::<f32>::zeros(2, 2)).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[..4].copy_from_slice(&202021.26f32.to_le_bytes());
        assert!(matches!(decode_flo::<f32>(&bad_magic), Err(FloError::BadMagic(_))));

        assert!(matches!(decode_flo::<f32>(&good[..good.len() - 1]), Err(FloError::Truncated)));
        assert!(matches!(decode_flo::<f32>(&good[..6]), Err(FloError::Truncated)));

        let mut zero_w = good.clone();
        zero_w[4..8].copy_from_slice(&0i32.to_le_bytes());
        assert!(matches!(
            decode_flo::<f32>(&zero_w),
            Err(FloError::NonPositiveDimensions { width: 0, height: 2 })
        ));
        let mut neg_h = good;
        neg_h[8..12].copy_from_slice(&(-3i32).to_le_bytes());
        assert!(matches!(decode_flo::<f32>(&neg_h), Err(FloError::NonPositiveDimensions { .. })));
    }

    #[test]
    fn invalid_pixels_use_sentinel() {
        let f = FlowField::<f32>::from_fn(2, 1, |x, _| (x == 0).then_some((0.5, -0.25))).unwrap();
        let bytes = encode_flo(&f).unwrap();
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), UNKNOWN_FLOW);
        assert_eq!(decode_flo::<f32>(&bytes).unwrap(), f);
    }

    #[test]
    fn huge_valid_values_rejected() {
        let f = FlowField::<f64>::from_fn(1, 1, |_, _| Some((2e9, 0.0))).unwrap();
        assert!(matches!(encode_flo(&f), Err(FloError::Unrepresentable { x: 0, y: 0 })));
    }

    fn field_strategy() -> impl Strategy<Value = FlowField<f32>> {
        (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
            proptest::collection::vec((any::<bool>(), -1e6f32..1e6, -1e6f32..1e6), w * h).prop_map(
                move |px| {
                    FlowField::from_fn(w, h, |x, y| {
                        let (ok, u, v) = px[y * w + x];
                        ok.then_some((u, v))
                    })
                    .unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(f in field_strategy()) {
            let bytes = encode_flo(&f).unwrap();
            let back: FlowField<f32> = decode_flo(&bytes).unwrap();
            prop_assert_eq!(&back, &f);
            prop_assert_eq!(encode_flo(&back).unwrap(), bytes);
        }
    }
}
