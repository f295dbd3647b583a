//! Calibration JSON codec.
//!
//! A calibration document carries the pinhole intrinsics `K` (9 row-major
//! floats), the radar-to-camera extrinsic `T_cam_radar` (16 row-major floats,
//! last row `0 0 0 1`), and the image size:
//!
//! ```json
//! {
//!   "K": [500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0],
//!   "T_cam_radar": [1.0, 0.0, 0.0, 0.0,  0.0, 1.0, 0.0, 0.0,
//!                   0.0, 0.0, 1.0, 0.0,  0.0, 0.0, 0.0, 1.0],
//!   "width": 640,
//!   "height": 480
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{CameraModel, RigidTransform};
use crate::num::{cast, to_f64, Real};

#[derive(Debug, Serialize, Deserialize)]
struct CalibDoc {
    #[serde(rename = "K")]
    k: [f64; 9],
    #[serde(rename = "T_cam_radar")]
    t_cam_radar: [f64; 16],
    width: usize,
    height: usize,
}

/// Entries of `K` that must vanish (skew, off-diagonal) and the fixed corner.
const K_STRUCTURE_TOL: f64 = 1e-9;

pub fn parse_calib<T: Real>(
    text: &str,
    origin: &str,
) -> Result<(CameraModel<T>, RigidTransform<T>)> {
    let doc: CalibDoc =
        serde_json::from_str(text).map_err(|e| Error::format(origin, e.to_string()))?;

    let k = &doc.k;
    for (idx, expect) in [(1, 0.0), (3, 0.0), (6, 0.0), (7, 0.0), (8, 1.0)] {
        if (k[idx] - expect).abs() > K_STRUCTURE_TOL {
            return Err(Error::format(
                origin,
                format!("K[{idx}] = {}, expected {expect} (axis-aligned pinhole only)", k[idx]),
            ));
        }
    }
    let cam = CameraModel::new(
        cast::<T>(k[0]),
        cast::<T>(k[4]),
        cast::<T>(k[2]),
        cast::<T>(k[5]),
        doc.width,
        doc.height,
    )
    .map_err(|e| Error::format(origin, e.to_string()))?;

    let t = &doc.t_cam_radar;
    for (idx, expect) in [(12, 0.0), (13, 0.0), (14, 0.0), (15, 1.0)] {
        if (t[idx] - expect).abs() > K_STRUCTURE_TOL {
            return Err(Error::format(
                origin,
                format!("T_cam_radar[{idx}] = {}, expected {expect} (last row must be 0 0 0 1)", t[idx]),
            ));
        }
    }
    let rotation = [
        [cast::<T>(t[0]), cast::<T>(t[1]), cast::<T>(t[2])],
        [cast::<T>(t[4]), cast::<T>(t[5]), cast::<T>(t[6])],
        [cast::<T>(t[8]), cast::<T>(t[9]), cast::<T>(t[10])],
    ];
    let translation = [cast::<T>(t[3]), cast::<T>(t[7]), cast::<T>(t[11])];
    let extrinsic = RigidTransform::new(rotation, translation)
        .map_err(|e| Error::format(origin, e.to_string()))?;
    Ok((cam, extrinsic))
}

pub fn encode_calib<T: Real>(cam: &CameraModel<T>, extrinsic: &RigidTransform<T>) -> String {
    let r = &extrinsic.rotation;
    let t = &extrinsic.translation;
    let doc = CalibDoc {
        k: [
            to_f64(cam.fx),
            0.0,
            to_f64(cam.cx),
            0.0,
            to_f64(cam.fy),
            to_f64(cam.cy),
            0.0,
            0.0,
            1.0,
        ],
        t_cam_radar: [
            to_f64(r[0][0]),
            to_f64(r[0][1]),
            to_f64(r[0][2]),
            to_f64(t[0]),
            to_f64(r[1][0]),
            to_f64(r[1][1]),
            to_f64(r[1][2]),
            to_f64(t[1]),
            to_f64(r[2][0]),
            to_f64(r[2][1]),
            to_f64(r[2][2]),
            to_f64(t[2]),
            0.0,
            0.0,
            0.0,
            1.0,
        ],
        width: cam.width,
        height: cam.height,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("calibration serializes");
    text.push('\n');
    text
}

pub fn read_calib<T: Real>(path: impl AsRef<Path>) -> Result<(CameraModel<T>, RigidTransform<T>)> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_calib(&text, &path.display().to_string())
}

pub fn write_calib<T: Real>(
    path: impl AsRef<Path>,
    cam: &CameraModel<T>,
    extrinsic: &RigidTransform<T>,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_calib(cam, extrinsic))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (CameraModel<f64>, RigidTransform<f64>) {
        let cam = CameraModel::new(501.25, 499.5, 320.75, 240.125, 640, 480).unwrap();
        let th = 0.1f64;
        let (s, c) = th.sin_cos();
        let ext = RigidTransform::new(
            [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            [0.05, -0.21, 1.37],
        )
        .unwrap();
        (cam, ext)
    }

    #[test]
    fn round_trip_is_value_identical() {
        let (cam, ext) = sample();
        let text = encode_calib(&cam, &ext);
        let (cam2, ext2) = parse_calib::<f64>(&text, "mem").unwrap();
        assert_eq!(cam2, cam);
        assert_eq!(ext2, ext);
    }

    #[test]
    fn skewed_intrinsics_are_rejected() {
        let (cam, ext) = sample();
        let text = encode_calib(&cam, &ext).replace("501.25", "501.25").replacen(
            "0.0,\n    320.75",
            "0.5,\n    320.75",
            1,
        );
        let err = parse_calib::<f64>(&text, "mem").unwrap_err();
        assert_eq!(err.category(), "format");
    }

    #[test]
    fn bad_last_row_is_rejected() {
        let (cam, ext) = sample();
        let text = encode_calib(&cam, &ext);
        // Last row of T_cam_radar must be 0 0 0 1; break the trailing 1.0.
        let broken = {
            let idx = text.rfind("1.0").unwrap();
            format!("{}2.0{}", &text[..idx], &text[idx + 3..])
        };
        let err = parse_calib::<f64>(&broken, "mem").unwrap_err();
        assert_eq!(err.category(), "format");
    }

    #[test]
    fn non_rotation_extrinsic_is_rejected() {
        let text = r#"{
            "K": [500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0],
            "T_cam_radar": [2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0,
                            0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            "width": 640, "height": 480
        }"#;
        let err = parse_calib::<f64>(text, "mem").unwrap_err();
        assert_eq!(err.category(), "format");
        assert!(err.to_string().contains("orthonormal"), "{err}");
    }

    #[test]
    fn malformed_documents_are_format_errors() {
        for text in [
            "",
            "{",
            "{\"K\": [1,2,3], \"T_cam_radar\": [], \"width\": 1, \"height\": 1}",
            "{\"width\": 640, \"height\": 480}",
        ] {
            let err = parse_calib::<f64>(text, "mem").unwrap_err();
            assert_eq!(err.category(), "format", "{text:?}");
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("radfuse-calib-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("calib.json");
        let (cam, ext) = sample();
        write_calib(&path, &cam, &ext).unwrap();
        let (cam2, ext2) = read_calib::<f64>(&path).unwrap();
        assert_eq!((cam2, ext2), (cam, ext));
        std::fs::remove_dir_all(&dir).ok();
    }
}
