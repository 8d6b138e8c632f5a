//! Labeled shape collections.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::contour::{contour_landmarks, polygon_landmarks, Contour};
use crate::error::{Error, Result};
use crate::shape::{to_pre_shape, LandmarkSet, PreShape};

/// Binary class of a sample. Malignant is the positive class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Benign,
    Malignant,
}

impl Label {
    /// `-1` for benign, `+1` for malignant.
    pub fn sign(self) -> f64 {
        match self {
            Label::Benign => -1.0,
            Label::Malignant => 1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Label::Benign => -1,
            Label::Malignant => 1,
        }
    }

    pub fn from_sign(v: f64) -> Result<Self> {
        if v == 1.0 {
            Ok(Label::Malignant)
        } else if v == -1.0 {
            Ok(Label::Benign)
        } else {
            Err(Error::InvalidConfig(format!("label must be -1 or +1, got {v}")))
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Malignant
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "1" | "+1" | "malignant" | "m" => Ok(Label::Malignant),
            "-1" | "0" | "benign" | "b" => Ok(Label::Benign),
            other => Err(Error::InvalidConfig(format!("unrecognized label '{other}'"))),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

/// Geometry of one sample before landmarking.
#[derive(Clone, Debug, PartialEq)]
pub enum Outline {
    /// Landmarks read from a file or generated synthetically.
    Landmarks(LandmarkSet),
    /// A traced pixel boundary.
    Contour(Contour),
}

impl Outline {
    /// Landmarks at count `n`. A landmark outline that already has `n`
    /// points is used as given; anything else is resampled equidistantly
    /// and canonically indexed.
    pub fn landmarks(&self, n: usize) -> Result<LandmarkSet> {
        match self {
            Outline::Landmarks(lm) if lm.len() == n => Ok(lm.clone()),
            Outline::Landmarks(lm) => polygon_landmarks(lm.points(), n),
            Outline::Contour(c) => contour_landmarks(c, n),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub label: Label,
    pub outline: Outline,
}

/// An ordered labeled collection of outlines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShapeDataset {
    samples: Vec<Sample>,
}

impl ShapeDataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        ShapeDataset { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: Sample) {
        self.samples.push(sample);
    }

    pub fn labels(&self) -> Vec<Label> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.samples.iter().map(|s| s.id.clone()).collect()
    }

    /// `(benign, malignant)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.samples.iter().filter(|s| s.label.is_positive()).count();
        (self.samples.len() - pos, pos)
    }

    /// Pre-shapes of every sample at `n` landmarks, in dataset order.
    pub fn pre_shapes(&self, n: usize) -> Result<Vec<PreShape>> {
        self.samples
            .iter()
            .map(|s| {
                s.outline
                    .landmarks(n)
                    .and_then(|lm| to_pre_shape(&lm))
                    .map_err(|e| Error::InvalidConfig(format!("sample '{}': {e}", s.id)))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_label_spellings() {
        for s in ["1", "+1", "Malignant", " m "] {
            assert_eq!(s.parse::<Label>().unwrap(), Label::Malignant);
        }
        for s in ["-1", "0", "BENIGN"] {
            assert_eq!(s.parse::<Label>().unwrap(), Label::Benign);
        }
        assert!("2".parse::<Label>().is_err());
        assert_eq!(Label::Benign.to_string(), "-1");
        assert_eq!(Label::from_sign(1.0).unwrap(), Label::Malignant);
        assert!(Label::from_sign(0.5).is_err());
    }

    #[test]
    fn landmark_outline_at_own_count_is_untouched() {
        let lm = LandmarkSet::from_xy(&[(0., 0.), (2., 0.), (2., 1.), (0., 3.)]).unwrap();
        let o = Outline::Landmarks(lm.clone());
        assert_eq!(o.landmarks(4).unwrap(), lm);
        assert_eq!(o.landmarks(9).unwrap().len(), 9);
    }
}
