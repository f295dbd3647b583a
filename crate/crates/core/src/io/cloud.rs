//! Radar point-cloud codecs: ASCII PLY and CSV.
//!
//! Both formats carry `x y z` in meters with optional `doppler` (m/s) and
//! `rcs` (dB) columns. Floats are written with Rust's shortest round-trip
//! formatting, so `write ∘ read` is value-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{RadarPoint, RadarPointCloud};
use crate::num::{cast, to_f64, Real};

/// Column layout shared by both codecs: `x y z` plus optional extras.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Columns {
    x: usize,
    y: usize,
    z: usize,
    doppler: Option<usize>,
    rcs: Option<usize>,
    total: usize,
}

impl Columns {
    fn from_names<'a>(names: impl Iterator<Item = &'a str>, origin: &str) -> Result<Columns> {
        let (mut x, mut y, mut z, mut doppler, mut rcs) = (None, None, None, None, None);
        let mut total = 0;
        for (i, name) in names.enumerate() {
            total = i + 1;
            let slot = match name {
                "x" => &mut x,
                "y" => &mut y,
                "z" => &mut z,
                "doppler" => &mut doppler,
                "rcs" => &mut rcs,
                _ => continue, // unknown columns are read and ignored
            };
            if slot.replace(i).is_some() {
                return Err(Error::format(origin, format!("duplicate column \"{name}\"")));
            }
        }
        match (x, y, z) {
            (Some(x), Some(y), Some(z)) => Ok(Columns {
                x,
                y,
                z,
                doppler,
                rcs,
                total,
            }),
            _ => Err(Error::format(origin, "missing x/y/z columns")),
        }
    }

    fn parse_row<T: Real>(&self, fields: &[&str], line_no: usize, origin: &str) -> Result<RadarPoint<T>> {
        if fields.len() != self.total {
            return Err(Error::format(
                origin,
                format!(
                    "line {line_no}: expected {} fields, found {}",
                    self.total,
                    fields.len()
                ),
            ));
        }
        let num = |i: usize| -> Result<T> {
            let raw = fields[i].trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(cast::<T>)
                .ok_or_else(|| {
                    Error::format(origin, format!("line {line_no}: bad number \"{raw}\""))
                })
        };
        Ok(RadarPoint {
            x: num(self.x)?,
            y: num(self.y)?,
            z: num(self.z)?,
            doppler: self.doppler.map(num).transpose()?,
            rcs: self.rcs.map(num).transpose()?,
        })
    }
}

/// Optional columns are emitted only when every point carries them; a cloud
/// mixing present and absent values has no faithful row encoding.
fn optional_columns<T: Real>(cloud: &RadarPointCloud<T>) -> Result<(bool, bool)> {
    let all = |f: fn(&RadarPoint<T>) -> bool| cloud.points.iter().all(f);
    let any = |f: fn(&RadarPoint<T>) -> bool| cloud.points.iter().any(f);
    let doppler = any(|p| p.doppler.is_some());
    if doppler && !all(|p| p.doppler.is_some()) {
        return Err(Error::InputMismatch(
            "doppler present on some points but not all".into(),
        ));
    }
    let rcs = any(|p| p.rcs.is_some());
    if rcs && !all(|p| p.rcs.is_some()) {
        return Err(Error::InputMismatch(
            "rcs present on some points but not all".into(),
        ));
    }
    Ok((doppler, rcs))
}

fn push_row<T: Real>(out: &mut String, p: &RadarPoint<T>, sep: char) {
    write!(out, "{}{sep}{}{sep}{}", to_f64(p.x), to_f64(p.y), to_f64(p.z)).unwrap();
    if let Some(d) = p.doppler {
        write!(out, "{sep}{}", to_f64(d)).unwrap();
    }
    if let Some(r) = p.rcs {
        write!(out, "{sep}{}", to_f64(r)).unwrap();
    }
    out.push('\n');
}

pub fn parse_cloud_ply<T: Real>(text: &str, origin: &str) -> Result<RadarPointCloud<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let mut header_line = |expect: &str| -> Result<(usize, String)> {
        loop {
            let (no, line) = lines.next().ok_or_else(|| {
                Error::format(origin, format!("header ended before \"{expect}\""))
            })?;
            if line.is_empty() || line.starts_with("comment") {
                continue;
            }
            return Ok((no, line.to_string()));
        }
    };

    let (no, magic) = header_line("ply")?;
    if magic != "ply" {
        return Err(Error::format(origin, format!("line {no}: not a PLY file")));
    }
    let (no, fmt) = header_line("format")?;
    if fmt != "format ascii 1.0" {
        return Err(Error::format(
            origin,
            format!("line {no}: unsupported format \"{fmt}\" (only \"format ascii 1.0\")"),
        ));
    }
    let (no, element) = header_line("element vertex")?;
    let count: usize = element
        .strip_prefix("element vertex ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| {
            Error::format(
                origin,
                format!("line {no}: expected \"element vertex <count>\", found \"{element}\""),
            )
        })?;

    let mut names = Vec::new();
    loop {
        let (no, line) = header_line("end_header")?;
        if line == "end_header" {
            break;
        }
        let mut it = line.split_ascii_whitespace();
        match (it.next(), it.next(), it.next(), it.next()) {
            (Some("property"), Some(ty), Some(name), None)
                if matches!(ty, "float" | "float32" | "double" | "float64") =>
            {
                names.push(name.to_string());
            }
            _ => {
                return Err(Error::format(
                    origin,
                    format!("line {no}: unsupported header line \"{line}\""),
                ));
            }
        }
    }
    let cols = Columns::from_names(names.iter().map(String::as_str), origin)?;

    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let (no, line) = loop {
            let (no, line) = lines
                .next()
                .ok_or_else(|| Error::format(origin, "fewer data rows than declared"))?;
            if !line.is_empty() {
                break (no, line);
            }
        };
        let fields: Vec<&str> = line.split_ascii_whitespace().collect();
        points.push(cols.parse_row(&fields, no, origin)?);
    }
    if let Some((no, line)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::format(
            origin,
            format!("line {no}: unexpected data after declared rows: \"{line}\""),
        ));
    }
    RadarPointCloud::new(points)
}

pub fn encode_cloud_ply<T: Real>(cloud: &RadarPointCloud<T>) -> Result<String> {
    let (doppler, rcs) = optional_columns(cloud)?;
    let mut out = String::from("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", cloud.len()).unwrap();
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if doppler {
        out.push_str("property float doppler\n");
    }
    if rcs {
        out.push_str("property float rcs\n");
    }
    out.push_str("end_header\n");
    for p in &cloud.points {
        push_row(&mut out, p, ' ');
    }
    Ok(out)
}

pub fn parse_cloud_csv<T: Real>(text: &str, origin: &str) -> Result<RadarPointCloud<T>> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::format(origin, "empty file, expected a CSV header"))?;
    let cols = Columns::from_names(header.split(',').map(str::trim), origin)?;
    let mut points = Vec::new();
    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        points.push(cols.parse_row(&fields, no, origin)?);
    }
    RadarPointCloud::new(points)
}

pub fn encode_cloud_csv<T: Real>(cloud: &RadarPointCloud<T>) -> Result<String> {
    let (doppler, rcs) = optional_columns(cloud)?;
    let mut out = String::from("x,y,z");
    if doppler {
        out.push_str(",doppler");
    }
    if rcs {
        out.push_str(",rcs");
    }
    out.push('\n');
    for p in &cloud.points {
        push_row(&mut out, p, ',');
    }
    Ok(out)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read a cloud, dispatching on the file extension (`.ply` or `.csv`).
pub fn read_cloud<T: Real>(path: impl AsRef<Path>) -> Result<RadarPointCloud<T>> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => parse_cloud_ply(&read_text(path)?, &origin),
        Some("csv") => parse_cloud_csv(&read_text(path)?, &origin),
        _ => Err(Error::format(
            origin,
            "unknown point-cloud extension (expected .ply or .csv)",
        )),
    }
}

/// Write a cloud, dispatching on the file extension (`.ply` or `.csv`).
pub fn write_cloud<T: Real>(path: impl AsRef<Path>, cloud: &RadarPointCloud<T>) -> Result<()> {
    let path = path.as_ref();
    let origin = path.display().to_string();
    match path.extension().and_then(|e| e.to_str()) {
        Some("ply") => write_text(path, &encode_cloud_ply(cloud)?),
        Some("csv") => write_text(path, &encode_cloud_csv(cloud)?),
        _ => Err(Error::format(
            origin,
            "unknown point-cloud extension (expected .ply or .csv)",
        )),
    }
}
