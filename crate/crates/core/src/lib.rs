//! Corneal topography classification toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! 1. [`imgprep`] crops the topography square out of a device screenshot,
//!    removes the overlaid dark grid lines with a modified median filter and
//!    extracts per-channel contrast maps.
//! 2. [`features`] computes mirror-symmetry correlation, radial FFT band
//!    energies and the pachymetry Max/Min Power differences, and assembles
//!    them into the three feature combinations used for comparison.
//! 3. [`knn`] is a k-nearest-neighbour classifier with a reject option.
//! 4. [`hmm`] converts a map into a sequence of overlapping full-width
//!    bands, quantises them into discrete symbols and classifies with a bank
//!    of per-class discrete HMMs (Baum-Welch training, Viterbi decoding).
//! 5. [`synth`], [`pipeline`] and [`persist`] generate synthetic corpora,
//!    run the HMM-vs-KNN evaluation and store trained models.
//!
//! [`curvefit`] holds the stagewise line/quadratic least-squares fitting
//! that each stage warm-starts from the previous stage's model.

pub mod curvefit;
pub mod error;
pub mod features;
pub mod hmm;
pub mod imgprep;
pub mod io;
pub mod knn;
pub mod persist;
pub mod pipeline;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Class label of a cornea.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Healthy,
    Lasik,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Healthy, Label::Lasik];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Healthy => "Healthy",
            Label::Lasik => "Lasik",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "healthy" => Ok(Label::Healthy),
            "lasik" => Ok(Label::Lasik),
            other => Err(Error::Parse(format!("unknown label `{other}`"))),
        }
    }
}
