//! The resolved run description and the optional JSON config file that
//! feeds it.

use std::fs;
use std::path::{Path, PathBuf};

use kendall_shape::svm::HyperGrid;
use kendall_shape::DistanceKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_COUNTS: [usize; 4] = [25, 50, 100, 200];
pub const DEFAULT_BOOTSTRAP: usize = 2000;
pub const DEFAULT_FOLDS: usize = 5;

/// Everything an evaluation run depends on, with defaults filled in.
/// Written next to the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: PathBuf,
    pub landmark_counts: Vec<usize>,
    pub sigmas: Vec<f64>,
    #[serde(rename = "C")]
    pub cs: Vec<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub folds: usize,
    pub nested_cv: bool,
    pub bias: bool,
    pub distance: DistanceKind,
    pub bootstrap: usize,
}

/// A partial [`RunManifest`] as read from `--config`.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub dataset: Option<PathBuf>,
    pub landmark_counts: Option<Vec<usize>>,
    pub sigmas: Option<Vec<f64>>,
    #[serde(rename = "C")]
    pub cs: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub folds: Option<usize>,
    pub nested_cv: Option<bool>,
    pub bias: Option<bool>,
    pub distance: Option<DistanceKind>,
    pub bootstrap: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("bad config {}: {e}", path.display())))
    }
}

impl RunManifest {
    pub fn grid(&self) -> HyperGrid {
        HyperGrid {
            sigmas: self.sigmas.clone(),
            cs: self.cs.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !self.dataset.is_file() {
            return bad(format!("dataset manifest {} does not exist", self.dataset.display()));
        }
        if self.landmark_counts.is_empty() {
            return bad("at least one landmark count is required".into());
        }
        if let Some(n) = self.landmark_counts.iter().find(|&&n| n < 3) {
            return bad(format!("landmark counts must be at least 3, got {n}"));
        }
        if self.sigmas.is_empty() || self.cs.is_empty() {
            return bad("sigma and C grids must be non-empty".into());
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return bad(format!("sigma must be positive, got {s}"));
        }
        if let Some(c) = self.cs.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
            return bad(format!("C must be positive, got {c}"));
        }
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        Ok(())
    }
}

/// Parses `σ₁,σ₂,...:C₁,C₂,...`.
pub fn parse_grid(text: &str) -> Result<HyperGrid, CliError> {
    let (s, c) = text
        .split_once(':')
        .ok_or_else(|| CliError::Config(format!("grid '{text}' must look like 'sigmas:Cs', e.g. 0.1,0.2:1,10")))?;
    let list = |part: &str| -> Result<Vec<f64>, CliError> {
        part.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad number '{v}' in grid '{text}'")))
            })
            .collect()
    };
    Ok(HyperGrid {
        sigmas: list(s)?,
        cs: list(c)?,
    })
}

/// Parses `lo,hi`.
pub fn parse_range(text: &str) -> Result<(f64, f64), CliError> {
    let err = || CliError::Config(format!("range '{text}' must look like 'lo,hi'"));
    let (a, b) = text.split_once(',').ok_or_else(err)?;
    Ok((
        a.trim().parse().map_err(|_| err())?,
        b.trim().parse().map_err(|_| err())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_syntax() {
        let g = parse_grid("0.1, 0.2:1,10").unwrap();
        assert_eq!(g.sigmas, vec![0.1, 0.2]);
        assert_eq!(g.cs, vec![1.0, 10.0]);
        assert!(parse_grid("0.1,0.2").is_err());
        assert!(parse_grid("a:1").is_err());
        assert_eq!(parse_range("0.1,0.35").unwrap(), (0.1, 0.35));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<ConfigFile>(r#"{"sigma": [0.1]}"#);
        assert!(err.is_err());
        let ok: ConfigFile =
            serde_json::from_str(r#"{"sigmas": [0.1], "C": [1], "distance": "cyclic_procrustes"}"#).unwrap();
        assert_eq!(ok.distance, Some(DistanceKind::CyclicProcrustes));
    }
}
