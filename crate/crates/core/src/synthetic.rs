//! Synthetic labeled outlines: smooth ellipses (benign) and lobulated
//! radial curves (malignant).
//!
//! Each outline is a radial function `r(φ)` sampled densely on the unit
//! scale, resampled to equidistant canonical landmarks, jittered radially
//! with Gaussian noise (fraction of the radius), then scaled, rotated and
//! translated at random. Every sample draws from its own ChaCha8 stream
//! (`seed`, stream = class tag << 32 | index), so a sample's geometry does
//! not depend on how many other samples are generated or in which order.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::contour::{canonical_start, polygon_landmarks};
use crate::dataset::{Label, Outline, Sample, ShapeDataset};
use crate::error::{Error, Result};
use crate::shape::LandmarkSet;

/// Vertices of the dense curve that gets resampled.
pub const OUTLINE_RESOLUTION: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_benign: usize,
    pub n_malignant: usize,
    pub n_landmarks: usize,
    pub eccentricity_range: (f64, f64),
    pub lobe_count_range: (u32, u32),
    /// Lobe amplitude as a fraction of the radius.
    pub lobe_amplitude_range: (f64, f64),
    /// Radial noise standard deviation as a fraction of the radius.
    pub noise_std: f64,
    /// Radius in pixels.
    pub radius_range: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_benign: 60,
            n_malignant: 60,
            n_landmarks: 50,
            eccentricity_range: (0.2, 0.8),
            lobe_count_range: (3, 8),
            lobe_amplitude_range: (0.1, 0.35),
            noise_std: 0.02,
            radius_range: (20.0, 60.0),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let (e0, e1) = self.eccentricity_range;
        let (k0, k1) = self.lobe_count_range;
        let (a0, a1) = self.lobe_amplitude_range;
        let (r0, r1) = self.radius_range;
        if self.n_landmarks < 3 {
            return bad("n_landmarks must be at least 3");
        }
        if !(0.0 <= e0 && e0 <= e1 && e1 < 1.0) {
            return bad("eccentricity range must satisfy 0 <= lo <= hi < 1");
        }
        if !(1 <= k0 && k0 <= k1) {
            return bad("lobe count range must satisfy 1 <= lo <= hi");
        }
        if !(0.0 <= a0 && a0 <= a1 && a1 < 1.0) {
            return bad("lobe amplitude range must satisfy 0 <= lo <= hi < 1");
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad("noise_std must be non-negative");
        }
        if !(0.0 < r0 && r0 <= r1 && r1.is_finite()) {
            return bad("radius range must be positive");
        }
        Ok(())
    }
}

/// Similarity transform applied to a unit-scale outline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placement {
    pub radius: f64,
    pub rotation: f64,
    pub translation: Complex64,
}

impl Default for Placement {
    fn default() -> Self {
        Placement {
            radius: 1.0,
            rotation: 0.0,
            translation: Complex64::new(0.0, 0.0),
        }
    }
}

impl Placement {
    pub fn sample<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Self {
        Placement {
            radius: uniform(rng, cfg.radius_range),
            rotation: rng.random_range(0.0..TAU),
            translation: Complex64::new(rng.random_range(64.0..192.0), rng.random_range(64.0..192.0)),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Polar radius of a unit-semi-major-axis ellipse centered at the origin.
pub fn ellipse_radius(eccentricity: f64) -> impl Fn(f64) -> f64 {
    let b = (1.0 - eccentricity * eccentricity).sqrt();
    move |phi: f64| b / (1.0 - (eccentricity * phi.cos()).powi(2)).sqrt()
}

/// `1 + a·cos(kφ + φ₀)`.
pub fn lobed_radius(lobes: u32, amplitude: f64, phase: f64) -> impl Fn(f64) -> f64 {
    move |phi: f64| 1.0 + amplitude * (lobes as f64 * phi + phase).cos()
}

/// Samples `r(φ)` densely, resamples to `n` canonical equidistant
/// landmarks, adds radial noise, then applies `placement`.
pub fn radial_outline<R: Rng + ?Sized>(
    radius: impl Fn(f64) -> f64,
    placement: &Placement,
    n_landmarks: usize,
    noise_std: f64,
    rng: &mut R,
) -> Result<LandmarkSet> {
    let dense: Vec<Complex64> = (0..OUTLINE_RESOLUTION)
        .map(|j| {
            let phi = TAU * j as f64 / OUTLINE_RESOLUTION as f64;
            Complex64::from_polar(radius(phi), phi)
        })
        .collect();
    let lm = polygon_landmarks(&dense, n_landmarks)?;
    let centroid = lm.centroid();
    let mut points = lm.into_points();
    if noise_std > 0.0 {
        for p in points.iter_mut() {
            let eps: f64 = StandardNormal.sample(rng);
            let d = *p - centroid;
            let r = d.norm();
            if r > 0.0 {
                *p += d / r * (noise_std * eps);
            }
        }
    }
    let scale = Complex64::from_polar(placement.radius, placement.rotation);
    let moved = LandmarkSet::new(points)?.transformed(scale, placement.translation);
    Ok(canonical_start(&moved))
}

pub fn gen_benign<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<LandmarkSet> {
    let ecc = uniform(rng, cfg.eccentricity_range);
    let placement = Placement::sample(cfg, rng);
    radial_outline(ellipse_radius(ecc), &placement, cfg.n_landmarks, cfg.noise_std, rng)
}

pub fn gen_malignant<R: Rng + ?Sized>(cfg: &SynthConfig, rng: &mut R) -> Result<LandmarkSet> {
    let (k0, k1) = cfg.lobe_count_range;
    let lobes = rng.random_range(k0..=k1);
    let amplitude = uniform(rng, cfg.lobe_amplitude_range);
    let phase = rng.random_range(0.0..TAU);
    let placement = Placement::sample(cfg, rng);
    radial_outline(
        lobed_radius(lobes, amplitude, phase),
        &placement,
        cfg.n_landmarks,
        cfg.noise_std,
        rng,
    )
}

/// The generator stream for sample `index` of `label`.
pub fn sample_rng(seed: u64, label: Label, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tag: u64 = if label.is_positive() { 1 } else { 0 };
    rng.set_stream((tag << 32) | index as u64);
    rng
}

/// `n_benign` benign samples (`benign_000`, ...) followed by `n_malignant`
/// malignant ones.
pub fn generate(cfg: &SynthConfig) -> Result<ShapeDataset> {
    cfg.validate()?;
    let mut ds = ShapeDataset::default();
    for (label, count, name) in [
        (Label::Benign, cfg.n_benign, "benign"),
        (Label::Malignant, cfg.n_malignant, "malignant"),
    ] {
        for i in 0..count {
            let mut rng = sample_rng(cfg.seed, label, i);
            let lm = match label {
                Label::Benign => gen_benign(cfg, &mut rng)?,
                Label::Malignant => gen_malignant(cfg, &mut rng)?,
            };
            ds.push(Sample {
                id: format!("{name}_{i:03}"),
                label,
                outline: Outline::Landmarks(lm),
            });
        }
    }
    Ok(ds)
}
