//! External confidence-map exchange format.
//!
//! A learned association model can replace the built-in heuristic provider
//! by writing, per frame, an index file `<dir>/<frame_id>.json` holding a
//! JSON array of entries
//!
//! ```json
//! [{"point_index": 0, "u0": 245, "v0": 215, "w": 150, "h": 50,
//!   "pfm_path": "conf_000.pfm"}]
//! ```
//!
//! with the per-pixel confidences stored as raw PFM files (paths relative to
//! `dir`). Values are clamped into `[0, 1]` on load; the number of clamped
//! samples is reported so sloppy producers are visible.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::augment::{ConfidenceMap, PatchRect};
use crate::error::{Error, Result};
use crate::io::pfm;
use crate::num::{cast, to_f64, Real};

/// One line of the per-frame index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfidenceIndexEntry {
    pub point_index: usize,
    pub u0: usize,
    pub v0: usize,
    pub w: usize,
    pub h: usize,
    pub pfm_path: String,
}

/// Load all confidence maps of one frame, sorted by point index.
///
/// Returns the maps plus the count of samples that had to be clamped into
/// `[0, 1]`. Rects must lie inside the `width × height` image and each PFM
/// must match its declared rect size.
pub fn load_external_confidence<T: Real>(
    dir: impl AsRef<Path>,
    frame_id: &str,
    width: usize,
    height: usize,
) -> Result<(Vec<ConfidenceMap<T>>, usize)> {
    let dir = dir.as_ref();
    let index_path = dir.join(format!("{frame_id}.json"));
    let origin = index_path.display().to_string();
    let text = std::fs::read_to_string(&index_path)
        .map_err(|e| Error::format(&origin, format!("cannot read confidence index: {e}")))?;
    let mut entries: Vec<ConfidenceIndexEntry> =
        serde_json::from_str(&text).map_err(|e| Error::format(&origin, e.to_string()))?;
    entries.sort_by_key(|e| e.point_index);
    for pair in entries.windows(2) {
        if pair[0].point_index == pair[1].point_index {
            return Err(Error::format(
                &origin,
                format!("duplicate point_index {}", pair[0].point_index),
            ));
        }
    }

    let mut maps = Vec::with_capacity(entries.len());
    let mut clamped = 0usize;
    for e in &entries {
        if e.w < 1 || e.h < 1 || e.u0 + e.w > width || e.v0 + e.h > height {
            return Err(Error::format(
                &origin,
                format!(
                    "point {}: rect ({}, {}) {}x{} outside {width}x{height} image",
                    e.point_index, e.u0, e.v0, e.w, e.h
                ),
            ));
        }
        let pfm_path = dir.join(&e.pfm_path);
        let pfm_origin = pfm_path.display().to_string();
        let (w, h, raw) = pfm::read_pfm_raw(&pfm_path)?;
        if (w, h) != (e.w, e.h) {
            return Err(Error::format(
                &pfm_origin,
                format!("{w}x{h} samples for a declared {}x{} rect", e.w, e.h),
            ));
        }
        let mut values = Vec::with_capacity(raw.len());
        for &x in &raw {
            if x.is_nan() {
                return Err(Error::format(&pfm_origin, "NaN confidence sample"));
            }
            if !(0.0..=1.0).contains(&x) {
                clamped += 1;
            }
            values.push(cast::<T>(f64::from(x).clamp(0.0, 1.0)));
        }
        let rect = PatchRect {
            u0: e.u0,
            v0: e.v0,
            w: e.w,
            h: e.h,
            // The pre-clip center is not part of the exchange format; the
            // geometric center stands in (it only matters to the heuristic
            // provider, which never runs for external maps).
            center_u: e.u0 + e.w / 2,
            center_v: e.v0 + e.h / 2,
        };
        maps.push(
            ConfidenceMap::new(e.point_index, rect, values)
                .map_err(|err| Error::format(&pfm_origin, err.to_string()))?,
        );
    }
    Ok((maps, clamped))
}

/// Write maps in the exchange format (index + one raw PFM per map).
/// Counterpart of [`load_external_confidence`].
pub fn write_external_confidence<T: Real>(
    dir: impl AsRef<Path>,
    frame_id: &str,
    maps: &[ConfidenceMap<T>],
) -> Result<()> {
    let dir = dir.as_ref();
    let io_err = |p: &Path, e: std::io::Error| Error::io(p.display().to_string(), e);
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut entries = Vec::with_capacity(maps.len());
    for map in maps {
        let name = format!("{frame_id}_conf_{:06}.pfm", map.point_index);
        let raw: Vec<f32> = map.values().iter().map(|&x| to_f64(x) as f32).collect();
        let bytes = pfm::encode_pfm_raw(map.rect.w, map.rect.h, &raw);
        let path = dir.join(&name);
        std::fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        entries.push(ConfidenceIndexEntry {
            point_index: map.point_index,
            u0: map.rect.u0,
            v0: map.rect.v0,
            w: map.rect.w,
            h: map.rect.h,
            pfm_path: name,
        });
    }
    let index_path = dir.join(format!("{frame_id}.json"));
    let text = serde_json::to_string_pretty(&entries).expect("index serializes");
    std::fs::write(&index_path, text + "\n").map_err(|e| io_err(&index_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn temp_dir(tag: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("radfuse-conf-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    fn rect_at(u0: usize, v0: usize, w: usize, h: usize) -> PatchRect {
        PatchRect {
            u0,
            v0,
            w,
            h,
            center_u: u0 + w / 2,
            center_v: v0 + h / 2,
        }
    }

    #[test]
    fn round_trip_in_point_index_order() {
        let dir = temp_dir("roundtrip");
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut maps: Vec<ConfidenceMap<f64>> = (0..3)
            .map(|i| {
                let rect = rect_at(i * 5, i * 2, 4, 3);
                let values = (0..12)
                    .map(|_| f64::from(rng.random_range(0.0..1.0f32)))
                    .collect();
                ConfidenceMap::new(2 - i, rect, values).unwrap()
            })
            .collect();
        write_external_confidence(&dir, "frame7", &maps).unwrap();
        let (loaded, clamped) = load_external_confidence::<f64>(&dir, "frame7", 64, 48).unwrap();
        assert_eq!(clamped, 0);
        maps.sort_by_key(|m| m.point_index);
        // Centers are re-derived geometrically on load; these rects are
        // unclipped so they agree.
        assert_eq!(loaded, maps);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn out_of_range_values_are_clamped_and_counted() {
        let dir = temp_dir("clamp");
        let bytes = pfm::encode_pfm_raw(2, 1, &[1.2, -0.3]);
        std::fs::write(dir.join("c.pfm"), bytes).unwrap();
        std::fs::write(
            dir.join("f.json"),
            r#"[{"point_index": 0, "u0": 0, "v0": 0, "w": 2, "h": 1, "pfm_path": "c.pfm"}]"#,
        )
        .unwrap();
        let (maps, clamped) = load_external_confidence::<f64>(&dir, "f", 8, 8).unwrap();
        assert_eq!(clamped, 2);
        assert_eq!(maps[0].values(), &[1.0, 0.0]);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn malformed_inputs_are_format_errors() {
        let dir = temp_dir("malformed");
        let write_index = |body: &str| std::fs::write(dir.join("f.json"), body).unwrap();

        // Missing index file.
        let err = load_external_confidence::<f64>(&dir, "absent", 8, 8).unwrap_err();
        assert_eq!(err.category(), "format");

        // Unparseable index.
        write_index("[{");
        assert_eq!(
            load_external_confidence::<f64>(&dir, "f", 8, 8)
                .unwrap_err()
                .category(),
            "format"
        );

        // Rect extending past the image.
        write_index(r#"[{"point_index": 0, "u0": 6, "v0": 0, "w": 4, "h": 1, "pfm_path": "c.pfm"}]"#);
        let err = load_external_confidence::<f64>(&dir, "f", 8, 8).unwrap_err();
        assert!(err.to_string().contains("outside"), "{err}");

        // Shape mismatch between index and PFM.
        std::fs::write(dir.join("c.pfm"), pfm::encode_pfm_raw(1, 1, &[0.5])).unwrap();
        write_index(r#"[{"point_index": 0, "u0": 0, "v0": 0, "w": 2, "h": 1, "pfm_path": "c.pfm"}]"#);
        let err = load_external_confidence::<f64>(&dir, "f", 8, 8).unwrap_err();
        assert!(err.to_string().contains("declared"), "{err}");

        // NaN confidence sample.
        std::fs::write(dir.join("c.pfm"), pfm::encode_pfm_raw(1, 1, &[f32::NAN])).unwrap();
        write_index(r#"[{"point_index": 0, "u0": 0, "v0": 0, "w": 1, "h": 1, "pfm_path": "c.pfm"}]"#);
        assert_eq!(
            load_external_confidence::<f64>(&dir, "f", 8, 8)
                .unwrap_err()
                .category(),
            "format"
        );

        // Duplicate point index.
        std::fs::write(dir.join("c.pfm"), pfm::encode_pfm_raw(1, 1, &[0.5])).unwrap();
        write_index(
            r#"[{"point_index": 3, "u0": 0, "v0": 0, "w": 1, "h": 1, "pfm_path": "c.pfm"},
                {"point_index": 3, "u0": 1, "v0": 0, "w": 1, "h": 1, "pfm_path": "c.pfm"}]"#,
        );
        let err = load_external_confidence::<f64>(&dir, "f", 8, 8).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        std::fs::remove_dir_all(&dir).ok();
    }
}
