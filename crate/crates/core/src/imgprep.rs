//! Image preparation: cropping, dark grid-line removal and channel contrast.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

pub type Rgb = [u8; 3];

/// Row-major RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams("image dimensions must be positive".into()));
        }
        if width.checked_mul(height) != Some(pixels.len()) {
            return Err(Error::InvalidParams(format!(
                "{} pixels do not fill a {width}x{height} image",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, c: Rgb) {
        self.pixels[y * self.width + x] = c;
    }
}

/// Row-major real-valued map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams("grid dimensions must be positive".into()));
        }
        if width.checked_mul(height) != Some(values.len()) {
            return Err(Error::InvalidParams(format!(
                "{} values do not fill a {width}x{height} grid",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("grid values must be finite".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.values[y * self.width..(y + 1) * self.width]
    }

    /// Full-width band of rows `start..start + rows`.
    pub fn rows(&self, start: usize, rows: usize) -> Result<ScalarGrid> {
        if rows == 0 || start + rows > self.height {
            return Err(Error::InvalidParams(format!(
                "row band {start}+{rows} outside grid of height {}",
                self.height
            )));
        }
        Ok(ScalarGrid {
            width: self.width,
            height: rows,
            values: self.values[start * self.width..(start + rows) * self.width].to_vec(),
        })
    }

    pub fn mirrored(&self) -> ScalarGrid {
        let values = (0..self.height)
            .flat_map(|y| self.row(y).iter().rev().copied().collect::<Vec<_>>())
            .collect();
        ScalarGrid {
            width: self.width,
            height: self.height,
            values,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarGrid> {
        ScalarGrid::new(self.width, self.height, self.values.iter().map(|&v| f(v)).collect())
    }
}

/// Cuts the `side`×`side` square centred on `center` (x, y). The square's
/// top-left corner is `center - side / 2`.
pub fn crop_map(image: &PixelGrid, center: (i64, i64), side: usize) -> Result<PixelGrid> {
    let (cx, cy) = center;
    let half = (side / 2) as i64;
    let (x0, y0) = (cx - half, cy - half);
    let oob = || Error::OutOfBounds {
        cx,
        cy,
        side,
        width: image.width,
        height: image.height,
    };
    if side == 0
        || x0 < 0
        || y0 < 0
        || x0 as usize + side > image.width
        || y0 as usize + side > image.height
    {
        return Err(oob());
    }
    let (x0, y0) = (x0 as usize, y0 as usize);
    let mut pixels = Vec::with_capacity(side * side);
    for y in y0..y0 + side {
        let start = y * image.width + x0;
        pixels.extend_from_slice(&image.pixels[start..start + side]);
    }
    PixelGrid::new(side, side, pixels)
}

/// Parameters of the dark-line filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineRemoval {
    /// A pixel is dark iff every channel is below this value.
    pub darkness_threshold: u8,
    pub window_radius: usize,
}

impl Default for LineRemoval {
    fn default() -> Self {
        Self {
            darkness_threshold: 60,
            window_radius: 2,
        }
    }
}

/// What the dark-line filter did.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairReport {
    pub dark_pixels: usize,
    pub repaired: usize,
    /// Repairs that needed a neighbourhood wider than the requested radius.
    pub widened: usize,
    /// Dark pixels with no non-dark pixel within reach, left unchanged.
    pub unrepaired: Vec<(usize, usize)>,
}

pub fn is_dark(c: Rgb, threshold: u8) -> bool {
    c[0].max(c[1]).max(c[2]) < threshold
}

/// Modified median filter. Only dark pixels are touched: each is replaced by
/// the channel-wise (lower) median of the non-dark pixels in its square
/// neighbourhood of the input image. Dark pixels are excluded from the
/// median. A neighbourhood without any non-dark pixel is widened by doubling
/// the radius, up to `min(width, height) / 2`.
pub fn remove_dark_lines(image: &PixelGrid, params: LineRemoval) -> (PixelGrid, RepairReport) {
    let threshold = params.darkness_threshold;
    let max_radius = (image.width.min(image.height) / 2).max(1);
    let mut out = image.clone();
    let mut report = RepairReport::default();
    let mut channels: [Vec<u8>; 3] = Default::default();

    for y in 0..image.height {
        for x in 0..image.width {
            if !is_dark(image.get(x, y), threshold) {
                continue;
            }
            report.dark_pixels += 1;
            let mut radius = params.window_radius.min(max_radius);
            let repaired = loop {
                for c in channels.iter_mut() {
                    c.clear();
                }
                let (x_lo, x_hi) = (x.saturating_sub(radius), (x + radius).min(image.width - 1));
                let (y_lo, y_hi) = (y.saturating_sub(radius), (y + radius).min(image.height - 1));
                for ny in y_lo..=y_hi {
                    for nx in x_lo..=x_hi {
                        let c = image.get(nx, ny);
                        if !is_dark(c, threshold) {
                            for (k, ch) in channels.iter_mut().enumerate() {
                                ch.push(c[k]);
                            }
                        }
                    }
                }
                if !channels[0].is_empty() {
                    let mut median = [0u8; 3];
                    for (k, ch) in channels.iter_mut().enumerate() {
                        let mid = (ch.len() - 1) / 2;
                        median[k] = *ch.select_nth_unstable(mid).1;
                    }
                    break Some(median);
                }
                if radius >= max_radius {
                    break None;
                }
                radius = (radius * 2).clamp(1, max_radius);
            };
            match repaired {
                Some(c) => {
                    out.set(x, y, c);
                    report.repaired += 1;
                    if radius > params.window_radius {
                        report.widened += 1;
                    }
                }
                None => report.unrepaired.push((x, y)),
            }
        }
    }
    (out, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Red,
    Green,
    Blue,
}

impl Channel {
    fn index(self) -> usize {
        match self {
            Channel::Red => 0,
            Channel::Green => 1,
            Channel::Blue => 2,
        }
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "red" | "r" => Ok(Channel::Red),
            "green" | "g" => Ok(Channel::Green),
            "blue" | "b" => Ok(Channel::Blue),
            other => Err(Error::Parse(format!("unknown channel `{other}`"))),
        }
    }
}

/// One channel scaled to `[0, 1]`.
pub fn channel_contrast(image: &PixelGrid, channel: Channel) -> ScalarGrid {
    let k = channel.index();
    ScalarGrid {
        width: image.width,
        height: image.height,
        values: image.pixels.iter().map(|p| f64::from(p[k]) / 255.0).collect(),
    }
}
