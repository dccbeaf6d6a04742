//! File formats: binary PPM (P6) and PNG images, pachymetry, point and
//! manifest CSVs.
//!
//! Every decoder works on in-memory bytes so it can be exercised directly
//! on untrusted input; the path helpers only add file access.

use crate::curvefit::Point2;
use crate::error::{Error, Result};
use crate::features::PachymetryReading;
use crate::imgprep::{PixelGrid, Rgb};
use crate::Label;
use serde::Deserialize;
use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Largest image accepted by the decoders, in pixels.
pub const MAX_PIXELS: usize = 1 << 26;

fn header_token(data: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        match data.get(*pos) {
            Some(b'#') => {
                while let Some(&c) = data.get(*pos) {
                    *pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            }
            Some(c) if c.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Parse("truncated PPM header".into())),
        }
    }
    let start = *pos;
    while let Some(c) = data.get(*pos) {
        if c.is_ascii_whitespace() || *c == b'#' {
            break;
        }
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

fn header_number(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = header_token(data, pos)?;
    tok.parse::<usize>()
        .map_err(|_| Error::Parse(format!("bad PPM {what} `{tok}`")))
}

/// Decodes a binary `P6` pixmap with maxval 255.
pub fn decode_ppm(data: &[u8]) -> Result<PixelGrid> {
    let mut pos = 0;
    if header_token(data, &mut pos)? != "P6" {
        return Err(Error::Parse("not a binary PPM (P6)".into()));
    }
    let width = header_number(data, &mut pos, "width")?;
    let height = header_number(data, &mut pos, "height")?;
    let maxval = header_number(data, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::Parse(format!("unsupported PPM maxval {maxval}")));
    }
    match data.get(pos) {
        Some(c) if c.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Parse("missing whitespace after PPM header".into())),
    }
    let n = width
        .checked_mul(height)
        .filter(|&n| n > 0 && n <= MAX_PIXELS)
        .ok_or_else(|| Error::Parse(format!("unsupported PPM size {width}x{height}")))?;
    let raster = &data[pos..];
    if raster.len() < n * 3 {
        return Err(Error::Parse(format!(
            "PPM raster holds {} bytes, need {}",
            raster.len(),
            n * 3
        )));
    }
    let pixels: Vec<Rgb> = raster[..n * 3]
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    PixelGrid::new(width, height, pixels)
}

pub fn encode_ppm(image: &PixelGrid) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    out.reserve(image.pixels().len() * 3);
    for p in image.pixels() {
        out.extend_from_slice(p);
    }
    out
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Decodes a PPM or an 8-bit RGB(A) PNG, chosen by magic bytes.
pub fn decode_image(data: &[u8]) -> Result<PixelGrid> {
    if data.starts_with(PNG_MAGIC) {
        let mut reader = image::ImageReader::with_format(std::io::Cursor::new(data), image::ImageFormat::Png);
        let mut limits = image::Limits::default();
        limits.max_image_width = Some(1 << 13);
        limits.max_image_height = Some(1 << 13);
        limits.max_alloc = Some((MAX_PIXELS * 4) as u64);
        reader.limits(limits);
        let img = reader.decode().map_err(|e| Error::Parse(format!("PNG: {e}")))?;
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        if w * h > MAX_PIXELS {
            return Err(Error::Parse("PNG too large".into()));
        }
        let pixels = rgb.pixels().map(|p| p.0).collect();
        PixelGrid::new(w, h, pixels)
    } else {
        decode_ppm(data)
    }
}

pub fn read_image(path: &Path) -> Result<PixelGrid> {
    decode_image(&fs::read(path)?)
}

pub fn write_ppm(path: &Path, image: &PixelGrid) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_ppm(image))?;
    Ok(())
}

pub fn decode_pachymetry(data: &[u8]) -> Result<PachymetryReading> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data);
    check_headers(&mut rdr, &["center", "up", "down", "left", "right"])?;
    let mut rows = rdr.deserialize::<PachymetryReading>();
    let reading = match rows.next() {
        Some(r) => r?,
        None => return Err(Error::Parse("pachymetry CSV has no data row".into())),
    };
    if rows.next().is_some() {
        return Err(Error::Parse("pachymetry CSV has more than one data row".into()));
    }
    reading.validate()?;
    Ok(reading)
}

pub fn read_pachymetry(path: &Path) -> Result<PachymetryReading> {
    decode_pachymetry(&fs::read(path)?)
}

pub fn encode_pachymetry(p: &PachymetryReading) -> String {
    format!(
        "center,up,down,left,right\n{},{},{},{},{}\n",
        p.center, p.up, p.down, p.left, p.right
    )
}

pub fn decode_points(data: &[u8]) -> Result<Vec<Point2>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data);
    check_headers(&mut rdr, &["x", "y"])?;
    let mut points = Vec::new();
    for row in rdr.deserialize::<Point2>() {
        let p = row?;
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(Error::Parse(format!("non-finite point on row {}", points.len() + 1)));
        }
        points.push(p);
    }
    Ok(points)
}

pub fn read_points(path: &Path) -> Result<Vec<Point2>> {
    decode_points(&fs::read(path)?)
}

/// One row of a dataset manifest. Relative paths are resolved against the
/// manifest's directory by [`read_manifest`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub image_path: PathBuf,
    pub pachy_path: PathBuf,
    pub label: Label,
}

#[derive(Deserialize)]
struct ManifestRow {
    sample_id: String,
    image_path: String,
    pachy_path: String,
    label: String,
}

pub fn decode_manifest(data: &[u8]) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(data);
    check_headers(&mut rdr, &["sample_id", "image_path", "pachy_path", "label"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rdr.deserialize::<ManifestRow>() {
        let row = row?;
        if row.sample_id.is_empty() {
            return Err(Error::Parse("empty sample_id".into()));
        }
        if !seen.insert(row.sample_id.clone()) {
            return Err(Error::Parse(format!("duplicate sample_id `{}`", row.sample_id)));
        }
        out.push(ManifestEntry {
            label: row.label.parse()?,
            sample_id: row.sample_id,
            image_path: PathBuf::from(row.image_path),
            pachy_path: PathBuf::from(row.pachy_path),
        });
    }
    Ok(out)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut entries = decode_manifest(&fs::read(path)?)?;
    for e in &mut entries {
        if e.image_path.is_relative() {
            e.image_path = base.join(&e.image_path);
        }
        if e.pachy_path.is_relative() {
            e.pachy_path = base.join(&e.pachy_path);
        }
    }
    Ok(entries)
}

pub fn encode_manifest(entries: &[ManifestEntry]) -> String {
    let mut s = String::from("sample_id,image_path,pachy_path,label\n");
    for e in entries {
        s.push_str(&format!(
            "{},{},{},{}\n",
            e.sample_id,
            e.image_path.display(),
            e.pachy_path.display(),
            e.label
        ));
    }
    s
}

fn check_headers<R: std::io::Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let headers = rdr.headers()?;
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "expected CSV header `{}`, found `{}`",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(())
}
