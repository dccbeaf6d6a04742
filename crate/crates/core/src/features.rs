//! Per-sample features: mirror-symmetry correlation, radial FFT band
//! energies and the pachymetry Max/Min Power differences.

use crate::error::{Error, Result};
use crate::imgprep::ScalarGrid;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

pub const DEFAULT_BANDS: usize = 8;

/// Five-point corneal thickness reading in µm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PachymetryReading {
    pub center: f64,
    pub up: f64,
    pub down: f64,
    pub left: f64,
    pub right: f64,
}

impl PachymetryReading {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("center", self.center),
            ("up", self.up),
            ("down", self.down),
            ("left", self.left),
            ("right", self.right),
        ] {
            if !(v.is_finite() && v > 0.0 && v < 2000.0) {
                return Err(Error::InvalidReading(format!("{name} = {v} µm outside (0, 2000)")));
            }
        }
        Ok(())
    }

    fn sides(&self) -> [f64; 4] {
        [self.up, self.down, self.left, self.right]
    }
}

/// Centre thickness minus the thickest side.
pub fn max_power(p: &PachymetryReading) -> f64 {
    p.center - p.sides().into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Centre thickness minus the thinnest side.
pub fn min_power(p: &PachymetryReading) -> f64 {
    p.center - p.sides().into_iter().fold(f64::INFINITY, f64::min)
}

/// Pearson correlation between the left half of the map and the mirrored
/// right half. Odd widths drop the centre column. Zero when either half is
/// constant.
pub fn symmetry_correlation(map: &ScalarGrid) -> f64 {
    let w = map.width();
    let half = w / 2;
    if half == 0 {
        return 0.0;
    }
    let n = (half * map.height()) as f64;
    let pairs = || {
        (0..map.height()).flat_map(move |y| {
            let row = map.row(y);
            (0..half).map(move |j| (row[j], row[w - 1 - j]))
        })
    };
    let (mut sl, mut sr) = (0.0, 0.0);
    for (l, r) in pairs() {
        sl += l;
        sr += r;
    }
    let (ml, mr) = (sl / n, sr / n);
    let (mut cov, mut vl, mut vr) = (0.0, 0.0, 0.0);
    for (l, r) in pairs() {
        let (dl, dr) = (l - ml, r - mr);
        cov += dl * dr;
        vl += dl * dl;
        vr += dr * dr;
    }
    if vl == 0.0 || vr == 0.0 {
        return 0.0;
    }
    (cov / (vl * vr).sqrt()).clamp(-1.0, 1.0)
}

/// Radius of the farthest frequency from DC, in index units.
pub fn max_radius(width: usize, height: usize) -> f64 {
    let (hu, hv) = ((height / 2) as f64, (width / 2) as f64);
    (hu * hu + hv * hv).sqrt()
}

/// Largest accepted band count for a map of this size.
pub fn max_bands(width: usize, height: usize) -> usize {
    max_radius(width, height).floor() as usize
}

/// Signed frequency of DFT index `k` out of `n`.
pub fn signed_frequency(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// Band of a non-DC frequency at radius `r`: bands split `(0, r_max]` into
/// `bands` equal-width annuli, each closed on its outer edge.
pub fn band_of(r: f64, r_max: f64, bands: usize) -> usize {
    let width = r_max / bands as f64;
    let b = (r / width).ceil() as usize;
    b.clamp(1, bands) - 1
}

/// Unnormalised 2-D DFT of `values` (row-major `width`×`height`).
pub fn dft2(values: &[f64], width: usize, height: usize) -> Vec<Complex64> {
    let mut planner = FftPlanner::<f64>::new();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let row_fft = planner.plan_fft_forward(width);
    for row in buf.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(height);
    let mut col = vec![Complex64::default(); height];
    for x in 0..width {
        for (y, c) in col.iter_mut().enumerate() {
            *c = buf[y * width + x];
        }
        col_fft.process(&mut col);
        for (y, c) in col.iter().enumerate() {
            buf[y * width + x] = *c;
        }
    }
    buf
}

/// Squared DFT magnitudes of the mean-removed map, summed into `bands`
/// equal-width radial annuli. DC is excluded.
pub fn fft_spectrum_energy(map: &ScalarGrid, bands: usize) -> Result<Vec<f64>> {
    let (w, h) = (map.width(), map.height());
    let max = max_bands(w, h);
    if bands == 0 || bands > max {
        return Err(Error::InvalidBands { bands, max });
    }
    let mean = map.values().iter().sum::<f64>() / map.values().len() as f64;
    let centred: Vec<f64> = map.values().iter().map(|v| v - mean).collect();
    let spectrum = dft2(&centred, w, h);
    let r_max = max_radius(w, h);
    let mut energy = vec![0.0; bands];
    for u in 0..h {
        let fu = signed_frequency(u, h);
        for v in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let fv = signed_frequency(v, w);
            let r = (fu * fu + fv * fv).sqrt();
            energy[band_of(r, r_max, bands)] += spectrum[u * w + v].norm_sqr();
        }
    }
    Ok(energy)
}

/// The three feature combinations compared in the evaluation report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureCombo {
    #[serde(rename = "maxdiff")]
    CorrFftMaxDiff,
    #[serde(rename = "mindiff")]
    CorrFftMinDiff,
    #[serde(rename = "maxmindiff")]
    CorrFftMaxMinDiff,
}

impl FeatureCombo {
    pub const ALL: [FeatureCombo; 3] = [
        FeatureCombo::CorrFftMaxDiff,
        FeatureCombo::CorrFftMinDiff,
        FeatureCombo::CorrFftMaxMinDiff,
    ];

    pub fn key(self) -> &'static str {
        match self {
            FeatureCombo::CorrFftMaxDiff => "maxdiff",
            FeatureCombo::CorrFftMinDiff => "mindiff",
            FeatureCombo::CorrFftMaxMinDiff => "maxmindiff",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            FeatureCombo::CorrFftMaxDiff => "Correlation & FFT & Max Diff",
            FeatureCombo::CorrFftMinDiff => "Correlation & FFT & Min Diff",
            FeatureCombo::CorrFftMaxMinDiff => "Correlation & FFT & Max-Min Diff",
        }
    }

    pub fn uses_max_power(self) -> bool {
        matches!(self, FeatureCombo::CorrFftMaxDiff | FeatureCombo::CorrFftMaxMinDiff)
    }

    pub fn uses_min_power(self) -> bool {
        matches!(self, FeatureCombo::CorrFftMinDiff | FeatureCombo::CorrFftMaxMinDiff)
    }

    /// Pachymetry-derived values of this combo, in layout order.
    pub fn pachymetry_values(self, p: &PachymetryReading) -> Vec<f64> {
        let mut v = Vec::with_capacity(2);
        if self.uses_max_power() {
            v.push(max_power(p));
        }
        if self.uses_min_power() {
            v.push(min_power(p));
        }
        v
    }

    pub fn layout(self, bands: usize) -> Vec<String> {
        let mut names = vec!["correlation".to_string()];
        names.extend((0..bands).map(|b| format!("fft_band_{b}")));
        if self.uses_max_power() {
            names.push("max_power".into());
        }
        if self.uses_min_power() {
            names.push("min_power".into());
        }
        names
    }
}

impl fmt::Display for FeatureCombo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for FeatureCombo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureCombo::ALL
            .into_iter()
            .find(|c| c.key() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown feature combo `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub combo: FeatureCombo,
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bands(&self) -> usize {
        self.names.iter().filter(|n| n.starts_with("fft_band_")).count()
    }
}

/// Everything needed to assemble any combo for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFeatures {
    pub correlation: f64,
    pub fft_bands: Vec<f64>,
    pub reading: PachymetryReading,
}

impl SampleFeatures {
    pub fn compute(map: &ScalarGrid, reading: &PachymetryReading, bands: usize) -> Result<Self> {
        reading.validate()?;
        Ok(Self {
            correlation: symmetry_correlation(map),
            fft_bands: fft_spectrum_energy(map, bands)?,
            reading: *reading,
        })
    }

    pub fn assemble(&self, combo: FeatureCombo) -> FeatureVector {
        let mut values = Vec::with_capacity(3 + self.fft_bands.len());
        values.push(self.correlation);
        values.extend_from_slice(&self.fft_bands);
        values.extend(combo.pachymetry_values(&self.reading));
        FeatureVector {
            combo,
            names: combo.layout(self.fft_bands.len()),
            values,
        }
    }
}

pub fn build_feature_vector(
    map: &ScalarGrid,
    reading: &PachymetryReading,
    combo: FeatureCombo,
    bands: usize,
) -> Result<FeatureVector> {
    Ok(SampleFeatures::compute(map, reading, bands)?.assemble(combo))
}
