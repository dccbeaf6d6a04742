//! Sliding full-width row bands over a map.

use crate::error::{Error, Result};
use crate::features::symmetry_correlation;
use crate::imgprep::ScalarGrid;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowParams {
    /// Band height in rows.
    pub height: usize,
    pub stride: usize,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self { height: 10, stride: 5 }
    }
}

/// Summary of one band: mean, population variance and left/right mirror
/// correlation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowFeatures {
    pub mean: f64,
    pub variance: f64,
    pub correlation: f64,
}

impl WindowFeatures {
    pub const DIM: usize = 3;

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.mean, self.variance, self.correlation]
    }
}

/// Band start rows: `0, s, 2s, …` while the band fits, plus a final band
/// anchored at `map_height - w` when the strided bands stop short.
pub fn window_starts(map_height: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if stride == 0 || window == 0 || window > map_height {
        return Err(Error::InvalidWindow {
            window,
            stride,
            map_height,
        });
    }
    let mut starts: Vec<usize> = (0..)
        .map(|i| i * stride)
        .take_while(|s| s + window <= map_height)
        .collect();
    let last = *starts.last().expect("window fits at row 0");
    if last + window < map_height {
        starts.push(map_height - window);
    }
    Ok(starts)
}

pub fn extract_observation_windows(map: &ScalarGrid, window: usize, stride: usize) -> Result<Vec<WindowFeatures>> {
    window_starts(map.height(), window, stride)?
        .into_iter()
        .map(|start| {
            let band = map.rows(start, window)?;
            let n = band.values().len() as f64;
            let mean = band.values().iter().sum::<f64>() / n;
            let variance = band.values().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            Ok(WindowFeatures {
                mean,
                variance,
                correlation: symmetry_correlation(&band),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlapping_windows_with_anchor() {
        let s = window_starts(159, 10, 5).unwrap();
        assert_eq!(s.len(), 31);
        assert_eq!(s[29], 145);
        assert_eq!(s[30], 149);
        assert!(s[..30].iter().enumerate().all(|(i, &v)| v == 5 * i));
    }

    #[test]
    fn full_height_window() {
        assert_eq!(window_starts(40, 40, 3).unwrap(), vec![0]);
    }

    #[test]
    fn non_overlapping_exact_tiling() {
        let s = window_starts(100, 10, 10).unwrap();
        assert_eq!(s, (0..10).map(|i| i * 10).collect::<Vec<_>>());
    }

    #[test]
    fn invalid_windows() {
        assert!(matches!(window_starts(10, 11, 1), Err(Error::InvalidWindow { .. })));
        assert!(window_starts(10, 5, 0).is_err());
        assert!(window_starts(10, 0, 1).is_err());
    }

    #[test]
    fn band_statistics() {
        let g = ScalarGrid::from_fn(4, 6, |x, y| if y < 3 { x as f64 } else { 1.0 }).unwrap();
        let w = extract_observation_windows(&g, 3, 3).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].mean, 1.5);
        assert_eq!(w[0].variance, 1.25);
        // columns 0,1 against mirrored 3,2
        assert!((w[0].correlation + 1.0).abs() < 1e-12);
        assert_eq!(w[1].variance, 0.0);
        assert_eq!(w[1].correlation, 0.0);
    }
}
