//! Seeded synthetic corneal thickness maps.
//!
//! Healthy corneas are radially symmetric and thicken towards the periphery.
//! LASIK corneas have a thin centre, thin out towards the periphery and
//! carry an off-axis superior bump that breaks left/right and up/down
//! symmetry. Maps are rendered to RGB with a palette whose red channel is
//! linear in thickness and whose colours are never dark, optionally with a
//! black overlay grid like the one drawn by topography devices.

use crate::error::{Error, Result};
use crate::features::PachymetryReading;
use crate::imgprep::{PixelGrid, Rgb, ScalarGrid};
use crate::Label;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

/// Clinical thickness band for healthy corneas, µm.
pub const CLINICAL_BAND_UM: (f64, f64) = (420.0, 800.0);
/// Thickness mapped to the ends of the render palette, µm.
pub const RENDER_RANGE_UM: (f64, f64) = (300.0, 800.0);

const PACHY_PATCH_RADIUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub healthy_center_range: (f64, f64),
    pub lasik_center_range: (f64, f64),
    /// Healthy thickening from centre to mid-edge, µm.
    pub healthy_peripheral_rise: f64,
    /// LASIK thinning from centre to mid-edge, µm.
    pub lasik_peripheral_drop: f64,
    /// Peak height of the off-axis LASIK bump, µm.
    pub lasik_asymmetry_amp: f64,
    /// Per-pixel Gaussian noise, µm.
    pub noise_std: f64,
    pub grid_side: usize,
    /// Spacing of the rendered dark overlay grid; `None` renders no grid.
    pub overlay_spacing: Option<usize>,
    pub seed: u64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            healthy_center_range: (500.0, 600.0),
            lasik_center_range: (360.0, 450.0),
            healthy_peripheral_rise: 120.0,
            lasik_peripheral_drop: 60.0,
            lasik_asymmetry_amp: 40.0,
            noise_std: 5.0,
            grid_side: 159,
            overlay_spacing: Some(20),
            seed: 0,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParams(m.to_string()));
        let (hl, hh) = self.healthy_center_range;
        let (ll, lh) = self.lasik_center_range;
        let (cl, ch) = CLINICAL_BAND_UM;
        if !(hl.is_finite() && hh.is_finite() && cl <= hl && hl <= hh && hh <= ch) {
            return bad("healthy centre range must lie inside the clinical band");
        }
        if !(ll.is_finite() && lh.is_finite() && 0.0 < ll && ll <= lh && lh <= hl) {
            return bad("LASIK centre range must be positive and below the healthy range");
        }
        for (name, v) in [
            ("healthy_peripheral_rise", self.healthy_peripheral_rise),
            ("lasik_peripheral_drop", self.lasik_peripheral_drop),
            ("lasik_asymmetry_amp", self.lasik_asymmetry_amp),
            ("noise_std", self.noise_std),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be finite and non-negative"));
            }
        }
        if ll - self.lasik_peripheral_drop <= 0.0 || hh + self.healthy_peripheral_rise >= 2000.0 {
            return bad("peripheral thickness leaves (0, 2000) µm");
        }
        if self.grid_side < 32 {
            return bad("grid_side must be at least 32");
        }
        if self.overlay_spacing == Some(0) {
            return bad("overlay spacing must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    /// Thickness map in µm.
    pub thickness: ScalarGrid,
    pub reading: PachymetryReading,
    /// Rendered colour map, with the overlay grid when configured.
    pub image: PixelGrid,
}

pub fn thickness_color(um: f64) -> Rgb {
    let (lo, hi) = RENDER_RANGE_UM;
    let t = ((um - lo) / (hi - lo)).clamp(0.0, 1.0);
    [(255.0 * t).round() as u8, 160, (255.0 * (1.0 - t)).round() as u8]
}

/// Inverse of the palette's red channel: `[0, 1]` contrast back to µm.
pub fn red_contrast_to_um(v: f64) -> f64 {
    let (lo, hi) = RENDER_RANGE_UM;
    lo + v * (hi - lo)
}

pub fn render(thickness: &ScalarGrid) -> PixelGrid {
    let pixels = thickness.values().iter().map(|&v| thickness_color(v)).collect();
    PixelGrid::new(thickness.width(), thickness.height(), pixels).expect("same shape as the thickness grid")
}

/// Draws 1-pixel lines of `color` on every row and column congruent to
/// `offset` modulo `spacing`.
pub fn overlay_grid(image: &mut PixelGrid, spacing: usize, offset: usize, color: Rgb) {
    let spacing = spacing.max(1);
    for y in 0..image.height() {
        for x in 0..image.width() {
            if x % spacing == offset % spacing || y % spacing == offset % spacing {
                image.set(x, y, color);
            }
        }
    }
}

fn patch_mean(g: &ScalarGrid, cx: usize, cy: usize) -> f64 {
    let r = PACHY_PATCH_RADIUS;
    let (x0, x1) = (cx.saturating_sub(r), (cx + r).min(g.width() - 1));
    let (y0, y1) = (cy.saturating_sub(r), (cy + r).min(g.height() - 1));
    let mut sum = 0.0;
    let mut n = 0.0;
    for y in y0..=y1 {
        for x in x0..=x1 {
            sum += g.get(x, y);
            n += 1.0;
        }
    }
    sum / n
}

/// Five-point reading: the centre and the four mid-edge points, each
/// averaged over a 5×5 patch kept inside the map.
pub fn read_pachymetry(thickness: &ScalarGrid) -> PachymetryReading {
    let (w, h) = (thickness.width(), thickness.height());
    let inset = PACHY_PATCH_RADIUS;
    PachymetryReading {
        center: patch_mean(thickness, w / 2, h / 2),
        up: patch_mean(thickness, w / 2, inset),
        down: patch_mean(thickness, w / 2, h - 1 - inset),
        left: patch_mean(thickness, inset, h / 2),
        right: patch_mean(thickness, w - 1 - inset, h / 2),
    }
}

/// Generates one sample. Output depends only on `(params, sample_seed)`.
pub fn synth_topography(label: Label, params: &SyntheticParams, sample_seed: u64) -> Result<SyntheticSample> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(sample_seed.wrapping_mul(2).wrapping_add(label as u64));

    let side = params.grid_side;
    let c0 = (side as f64 - 1.0) / 2.0;
    let radius2 = c0 * c0;
    let range = match label {
        Label::Healthy => params.healthy_center_range,
        Label::Lasik => params.lasik_center_range,
    };
    let center = if range.0 < range.1 {
        Uniform::new(range.0, range.1)
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .sample(&mut rng)
    } else {
        range.0
    };
    let (bx, by, sigma2) = (c0 + 0.4 * c0, c0 - 0.4 * c0, (0.2 * c0) * (0.2 * c0));
    let surface = |x: usize, y: usize| {
        let (dx, dy) = (x as f64 - c0, y as f64 - c0);
        let rho2 = (dx * dx + dy * dy) / radius2;
        match label {
            Label::Healthy => center + params.healthy_peripheral_rise * rho2,
            Label::Lasik => {
                let (ex, ey) = (x as f64 - bx, y as f64 - by);
                let bump = params.lasik_asymmetry_amp * (-(ex * ex + ey * ey) / (2.0 * sigma2)).exp();
                center - params.lasik_peripheral_drop * rho2 + bump
            }
        }
    };
    let noise = Normal::new(0.0, params.noise_std).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut values = Vec::with_capacity(side * side);
    for y in 0..side {
        for x in 0..side {
            let n = if params.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            values.push(surface(x, y) + n);
        }
    }
    let thickness = ScalarGrid::new(side, side, values)?;
    let reading = read_pachymetry(&thickness);
    reading.validate()?;
    let mut image = render(&thickness);
    if let Some(spacing) = params.overlay_spacing {
        overlay_grid(&mut image, spacing, spacing / 2, [0, 0, 0]);
    }
    Ok(SyntheticSample {
        thickness,
        reading,
        image,
    })
}
