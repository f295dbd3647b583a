//! PFM depth-map codec.
//!
//! Only grayscale maps (magic `Pf`) with a negative (little-endian) scale are
//! supported. A file is the header tokens `Pf`, width, height, scale — each
//! followed by whitespace, the last by exactly one whitespace byte — then
//! `width*height` little-endian `f32` samples in bottom-up scanline order.
//! Samples that are zero, negative, or non-finite mark invalid pixels;
//! writing stores invalid pixels as `0.0` and the canonical scale `-1.0`, so
//! `write ∘ read` is byte-identical.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::DepthImage;
use crate::num::{to_f64, Real};

/// Header fields plus the offset where sample data begins.
struct PfmHeader {
    width: usize,
    height: usize,
    data_start: usize,
}

fn is_ws(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n')
}

/// Next whitespace-delimited token and its byte offset.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize, origin: &str) -> Result<(usize, &'a [u8])> {
    while *pos < bytes.len() && is_ws(bytes[*pos]) {
        *pos += 1;
    }
    if *pos >= bytes.len() {
        return Err(Error::format(
            origin,
            format!("unexpected end of header at byte {pos}", pos = *pos),
        ));
    }
    let start = *pos;
    while *pos < bytes.len() && !is_ws(bytes[*pos]) {
        *pos += 1;
    }
    Ok((start, &bytes[start..*pos]))
}

fn parse_header(bytes: &[u8], origin: &str) -> Result<PfmHeader> {
    let mut pos = 0;
    let (off, magic) = next_token(bytes, &mut pos, origin)?;
    if magic != b"Pf" {
        let shown = String::from_utf8_lossy(&magic[..magic.len().min(8)]);
        let detail = if magic == b"PF" {
            format!("color PFM unsupported at byte {off}: expected grayscale magic \"Pf\"")
        } else {
            format!("bad magic at byte {off}: expected \"Pf\", found \"{shown}\"")
        };
        return Err(Error::format(origin, detail));
    }

    let mut dims = [0usize; 2];
    for (k, dim) in dims.iter_mut().enumerate() {
        let name = ["width", "height"][k];
        let (off, tok) = next_token(bytes, &mut pos, origin)?;
        *dim = std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .filter(|&d| d >= 1)
            .ok_or_else(|| {
                Error::format(
                    origin,
                    format!(
                        "bad {name} at byte {off}: \"{}\"",
                        String::from_utf8_lossy(tok)
                    ),
                )
            })?;
    }

    let (off, tok) = next_token(bytes, &mut pos, origin)?;
    let scale: f64 = std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|s: &f64| s.is_finite() && *s != 0.0)
        .ok_or_else(|| {
            Error::format(
                origin,
                format!(
                    "bad scale at byte {off}: \"{}\"",
                    String::from_utf8_lossy(tok)
                ),
            )
        })?;
    if scale > 0.0 {
        return Err(Error::format(
            origin,
            format!("big-endian PFM unsupported (scale {scale} at byte {off}); expected a negative little-endian scale"),
        ));
    }

    // Exactly one whitespace byte separates the scale from the samples.
    if pos >= bytes.len() || !is_ws(bytes[pos]) {
        return Err(Error::format(
            origin,
            format!("missing whitespace after scale at byte {pos}"),
        ));
    }
    let data_start = pos + 1;

    let need = dims[0]
        .checked_mul(dims[1])
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(origin, "image dimensions overflow"))?;
    let have = bytes.len() - data_start;
    if have < need {
        return Err(Error::format(
            origin,
            format!("truncated: need {need} sample bytes at byte {data_start}, found {have}"),
        ));
    }
    if have > need {
        return Err(Error::format(
            origin,
            format!(
                "trailing data: {extra} unexpected bytes after samples at byte {end}",
                extra = have - need,
                end = data_start + need
            ),
        ));
    }
    Ok(PfmHeader {
        width: dims[0],
        height: dims[1],
        data_start,
    })
}

/// Decode raw samples in top-down row-major order, preserving values exactly.
///
/// Unlike [`parse_pfm`], no validity interpretation is applied; NaNs and
/// negatives come back verbatim. Used for non-depth payloads such as
/// confidence maps.
pub fn parse_pfm_raw(bytes: &[u8], origin: &str) -> Result<(usize, usize, Vec<f32>)> {
    let h = parse_header(bytes, origin)?;
    let mut values = vec![0f32; h.width * h.height];
    for file_row in 0..h.height {
        let v = h.height - 1 - file_row; // scanlines are stored bottom-up
        for u in 0..h.width {
            let at = h.data_start + (file_row * h.width + u) * 4;
            let raw: [u8; 4] = bytes[at..at + 4].try_into().unwrap();
            values[v * h.width + u] = f32::from_le_bytes(raw);
        }
    }
    Ok((h.width, h.height, values))
}

/// Decode a depth map; samples that are non-finite or `<= 0` become invalid
/// pixels.
pub fn parse_pfm<T: Real>(bytes: &[u8], origin: &str) -> Result<DepthImage<T>> {
    let (width, height, raw) = parse_pfm_raw(bytes, origin)?;
    let mut img = DepthImage::new_invalid(width, height);
    for v in 0..height {
        for u in 0..width {
            let x = raw[v * width + u];
            if x.is_finite() && x > 0.0 {
                img.set(u, v, T::from_f32(x).expect("f32 sample representable"));
            }
        }
    }
    Ok(img)
}

/// Encode a depth map in canonical form: scale `-1.0`, invalid pixels as
/// `0.0`, values narrowed to `f32`.
pub fn encode_pfm<T: Real>(img: &DepthImage<T>) -> Vec<u8> {
    let (w, h) = (img.width(), img.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for file_row in 0..h {
        let v = h - 1 - file_row;
        for u in 0..w {
            let x = img.get(u, v).map_or(0.0f32, |d| to_f64(d) as f32);
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

/// Encode raw samples (top-down row-major, no validity interpretation) in
/// canonical form. Counterpart of [`parse_pfm_raw`].
pub fn encode_pfm_raw(width: usize, height: usize, values: &[f32]) -> Vec<u8> {
    assert_eq!(values.len(), width * height, "sample buffer shape");
    let mut out = format!("Pf\n{width} {height}\n-1.0\n").into_bytes();
    out.reserve(width * height * 4);
    for file_row in 0..height {
        let v = height - 1 - file_row;
        for u in 0..width {
            out.extend_from_slice(&values[v * width + u].to_le_bytes());
        }
    }
    out
}

pub fn read_depth_pfm<T: Real>(path: impl AsRef<Path>) -> Result<DepthImage<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_pfm(&bytes, &path.display().to_string())
}

pub fn write_depth_pfm<T: Real>(path: impl AsRef<Path>, img: &DepthImage<T>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pfm(img)).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read raw samples (top-down row-major) from a PFM file without validity
/// interpretation.
pub fn read_pfm_raw(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_pfm_raw(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sample_image() -> DepthImage<f32> {
        let mut img = DepthImage::new_invalid(2, 2);
        img.set(0, 0, 1.5);
        img.set(1, 0, 2.5);
        img.set(0, 1, 3.25);
        // (1, 1) left invalid
        img
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let bytes = encode_pfm(&sample_image());
        let img = parse_pfm::<f32>(&bytes, "mem").unwrap();
        assert_eq!(encode_pfm(&img), bytes);
    }

    #[test]
    fn canonical_header_layout() {
        let bytes = encode_pfm(&sample_image());
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        assert_eq!(bytes.len(), "Pf\n2 2\n-1.0\n".len() + 16);
    }

    #[test]
    fn scanlines_are_bottom_up() {
        let bytes = encode_pfm(&sample_image());
        let data = &bytes["Pf\n2 2\n-1.0\n".len()..];
        // First stored sample is the bottom-left pixel (0, 1) = 3.25.
        let first = f32::from_le_bytes(data[0..4].try_into().unwrap());
        assert_eq!(first, 3.25);
    }

    #[test]
    fn negative_sample_reads_as_invalid() {
        let mut bytes = format!("Pf\n1 1\n-1.0\n").into_bytes();
        bytes.extend_from_slice(&(-1.0f32).to_le_bytes());
        let img = parse_pfm::<f64>(&bytes, "mem").unwrap();
        assert_eq!(img.get(0, 0), None);
        assert_eq!(img.valid_count(), 0);
    }

    #[test]
    fn nan_sample_reads_as_invalid_but_raw_preserves_it() {
        let mut bytes = format!("Pf\n1 1\n-1.0\n").into_bytes();
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(parse_pfm::<f64>(&bytes, "mem").unwrap().valid_count(), 0);
        let (_, _, raw) = parse_pfm_raw(&bytes, "mem").unwrap();
        assert!(raw[0].is_nan());
    }

    #[test]
    fn big_endian_scale_is_rejected() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        let err = parse_pfm::<f64>(&bytes, "mem").unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("big-endian"), "{err}");
    }

    #[test]
    fn malformed_headers_are_categorized_errors() {
        let cases: Vec<Vec<u8>> = vec![
            b"Px\n1 1\n-1.0\n\0\0\0\0".to_vec(),      // bad magic
            b"PF\n1 1\n-1.0\n\0\0\0\0".to_vec(),      // color map
            b"Pf\n0 1\n-1.0\n".to_vec(),              // zero width
            b"Pf\n1 x\n-1.0\n\0\0\0\0".to_vec(),      // non-numeric height
            b"Pf\n1 1\nzzz\n\0\0\0\0".to_vec(),       // bad scale
            b"Pf\n1 1\n-1.0\n\0\0".to_vec(),          // truncated data
            b"Pf\n1 1\n-1.0\n\0\0\0\0\0".to_vec(),    // trailing byte
            b"Pf\n2 2".to_vec(),                      // header cut short
            b"Pf\n1 1\n-1.0".to_vec(),                // no separator after scale
        ];
        for bytes in cases {
            let err = parse_pfm::<f64>(&bytes, "mem").unwrap_err();
            assert_eq!(err.category(), "format", "{err}");
            assert!(err.to_string().contains("byte"), "offset missing: {err}");
        }
    }

    #[test]
    fn fuzzed_images_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let w = rng.random_range(1..12);
            let h = rng.random_range(1..12);
            let img = DepthImage::<f32>::from_fn(w, h, |_, _| {
                rng.random_bool(0.8)
                    .then(|| rng.random_range(1e-3..1e4f32))
            });
            let bytes = encode_pfm(&img);
            let back = parse_pfm::<f32>(&bytes, "mem").unwrap();
            assert_eq!(back, img);
            assert_eq!(encode_pfm(&back), bytes);
        }
    }

    #[test]
    fn raw_round_trip_preserves_all_values() {
        let values = vec![0.0f32, -2.5, 0.75, f32::NAN, 1.0, 3.5];
        let bytes = encode_pfm_raw(3, 2, &values);
        let (w, h, back) = parse_pfm_raw(&bytes, "mem").unwrap();
        assert_eq!((w, h), (3, 2));
        for (a, b) in back.iter().zip(&values) {
            assert!(a.to_bits() == b.to_bits(), "{a} vs {b}");
        }
    }

    #[test]
    fn file_round_trip_and_io_error() {
        let dir = std::env::temp_dir().join(format!("radfuse-pfm-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("depth.pfm");
        let img = sample_image();
        write_depth_pfm(&path, &img).unwrap();
        assert_eq!(read_depth_pfm::<f32>(&path).unwrap(), img);

        let missing = read_depth_pfm::<f32>(dir.join("absent.pfm")).unwrap_err();
        assert_eq!(missing.category(), "io");
        std::fs::remove_dir_all(&dir).ok();
    }
}
