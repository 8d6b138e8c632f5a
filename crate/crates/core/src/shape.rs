//! Kendall pre-shapes and the full Procrustes metric.
//!
//! A landmark configuration of `n` planar points is coded as a complex
//! `n`-vector (real part = axial coordinate, imaginary part = lateral
//! coordinate). Centering and scaling to unit norm yields a *pre-shape*;
//! the shape itself is the orbit of the pre-shape under rotations
//! `z -> e^{iθ} z`. Every quantity here is computed from the modulus of the
//! Hermitian inner product, so it is constant on that orbit and no explicit
//! quotient is ever formed.
//!
//! Inner-product convention, used throughout the crate:
//! `⟨a, b⟩ = Σ_k conj(a_k) · b_k` (conjugate-linear in the first argument).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Centered-norm threshold below which a configuration is rejected.
pub const DEGENERACY_EPS: f64 = 1e-12;

/// An ordered closed polygon of at least three finite landmarks.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkSet {
    points: Vec<Complex64>,
}

impl LandmarkSet {
    pub fn new(points: Vec<Complex64>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::InvalidLandmarks(format!(
                "need at least 3 points, got {}",
                points.len()
            )));
        }
        if let Some(k) = points.iter().position(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::InvalidLandmarks(format!("point {k} is not finite")));
        }
        Ok(LandmarkSet { points })
    }

    /// Builds a landmark set from `(axial, lateral)` pairs.
    pub fn from_xy(coords: &[(f64, f64)]) -> Result<Self> {
        Self::new(coords.iter().map(|&(a, l)| Complex64::new(a, l)).collect())
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Complex64> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Complex64 {
        mean(&self.points)
    }

    /// Applies `p -> scale · p + translation` to every landmark. A complex
    /// `scale` rotates as well as scales.
    pub fn transformed(&self, scale: Complex64, translation: Complex64) -> Self {
        LandmarkSet {
            points: self.points.iter().map(|&p| scale * p + translation).collect(),
        }
    }

    /// Twice the signed polygon area; positive for counterclockwise traversal
    /// in the (axial, lateral) plane.
    pub fn signed_area2(&self) -> f64 {
        signed_area2(&self.points)
    }
}

pub(crate) fn mean(points: &[Complex64]) -> Complex64 {
    let sum: Complex64 = points.iter().sum();
    sum / points.len() as f64
}

pub(crate) fn signed_area2(points: &[Complex64]) -> f64 {
    let n = points.len();
    (0..n)
        .map(|k| {
            let p = points[k];
            let q = points[(k + 1) % n];
            p.re * q.im - q.re * p.im
        })
        .sum()
}

/// A centered, unit-norm complex vector representing a Kendall shape.
#[derive(Clone, Debug, PartialEq)]
pub struct PreShape {
    z: Vec<Complex64>,
}

impl PreShape {
    pub fn coords(&self) -> &[Complex64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Re-indexes cyclically so that output index `k` holds input index
    /// `k + shift (mod n)`. Centering and norm are unaffected.
    pub fn cyclic_shift(&self, shift: usize) -> PreShape {
        let mut z = self.z.clone();
        if !z.is_empty() {
            z.rotate_left(shift % self.z.len());
        }
        PreShape { z }
    }

    /// Multiplies every coordinate by the unit complex number `e^{iθ}`.
    pub fn rotated(&self, theta: f64) -> PreShape {
        let r = Complex64::from_polar(1.0, theta);
        PreShape {
            z: self.z.iter().map(|&c| r * c).collect(),
        }
    }

    /// The pre-shape read back as a landmark configuration.
    pub fn to_landmarks(&self) -> LandmarkSet {
        LandmarkSet { points: self.z.clone() }
    }
}

/// Centers the landmarks and scales them to unit Euclidean norm.
pub fn to_pre_shape(lm: &LandmarkSet) -> Result<PreShape> {
    let c = lm.centroid();
    let centered: Vec<Complex64> = lm.points.iter().map(|&p| p - c).collect();
    let norm = centered.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt();
    if !(norm >= DEGENERACY_EPS) {
        return Err(Error::DegenerateShape);
    }
    Ok(PreShape {
        z: centered.into_iter().map(|p| p / norm).collect(),
    })
}

/// `⟨a, b⟩ = Σ conj(a_k) b_k`.
pub fn inner_product(a: &PreShape, b: &PreShape) -> Result<Complex64> {
    check_len(a, b)?;
    Ok(a.z.iter().zip(&b.z).map(|(x, y)| x.conj() * y).sum())
}

fn check_len(a: &PreShape, b: &PreShape) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Full Procrustes distance `sqrt(1 - |⟨a, b⟩|²)`, in `[0, 1]`.
///
/// For unit vectors `1 - |⟨a,b⟩|²` is the squared residual of projecting
/// one pre-shape onto the complex line through the other. The radicand is
/// evaluated in that form, averaged over both projection directions, which
/// keeps near-identical shapes at ~1e-16 instead of the ~1e-8 floor of
/// subtracting from one, and makes the result exactly symmetric. It is then
/// clamped to `[0, 1]`.
pub fn fp_distance(a: &PreShape, b: &PreShape) -> Result<f64> {
    check_len(a, b)?;
    let ab: Complex64 = a.z.iter().zip(&b.z).map(|(x, y)| x.conj() * y).sum();
    let ba = ab.conj();
    let res_a: f64 = a.z.iter().zip(&b.z).map(|(x, y)| (x - ba * y).norm_sqr()).sum();
    let res_b: f64 = a.z.iter().zip(&b.z).map(|(x, y)| (y - ab * x).norm_sqr()).sum();
    Ok((0.5 * (res_a + res_b)).clamp(0.0, 1.0).sqrt())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

/// Gaussian kernel on the full Procrustes distance:
/// `exp(-d²/(2σ²))`, with values in `(0, 1]`.
pub fn fp_kernel(a: &PreShape, b: &PreShape, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    let d = fp_distance(a, b)?;
    Ok(gaussian(d, sigma))
}

#[inline]
pub(crate) fn gaussian(d: f64, sigma: f64) -> f64 {
    (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Rotation angle `θ ∈ (-π, π]` minimizing `‖a - e^{iθ} b‖`.
///
/// With the project convention this is `arg⟨b, a⟩ = -arg⟨a, b⟩`.
pub fn optimal_rotation(a: &PreShape, b: &PreShape) -> Result<f64> {
    let ip = inner_product(b, a)?;
    if ip.norm() < 1e-12 {
        return Err(Error::UndefinedRotation);
    }
    let theta = ip.arg();
    // atan2 returns [-π, π]; fold -π onto π.
    Ok(if theta <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        theta
    })
}

/// Which landmark-correspondence rule a kernel uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    /// Landmark `k` of one shape corresponds to landmark `k` of the other.
    #[default]
    Procrustes,
    /// Minimum of the Procrustes distance over all cyclic re-indexings.
    CyclicProcrustes,
}

/// A Procrustes-Gaussian kernel with a fixed width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kernel {
    sigma: f64,
    distance: DistanceKind,
}

impl Kernel {
    pub fn new(sigma: f64, distance: DistanceKind) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Kernel { sigma, distance })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.distance
    }

    pub fn distance(&self, a: &PreShape, b: &PreShape) -> Result<f64> {
        match self.distance {
            DistanceKind::Procrustes => fp_distance(a, b),
            DistanceKind::CyclicProcrustes => crate::contour::fp_distance_cyclic(a, b),
        }
    }

    pub fn eval(&self, a: &PreShape, b: &PreShape) -> Result<f64> {
        Ok(gaussian(self.distance(a, b)?, self.sigma))
    }

    /// Gram matrix over `shapes`. Each entry is computed independently, so
    /// the result does not depend on the thread schedule.
    pub fn gram(&self, shapes: &[PreShape]) -> Result<GramMatrix> {
        if shapes.is_empty() {
            return Err(Error::InvalidConfig("gram matrix needs at least one shape".into()));
        }
        let n0 = shapes[0].len();
        if let Some(bad) = shapes.iter().find(|s| s.len() != n0) {
            return Err(Error::LengthMismatch {
                left: n0,
                right: bad.len(),
            });
        }
        let n = shapes.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| self.eval(&shapes[i], &shapes[j]))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut data = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            data[i * n + i] = 1.0;
            for (off, v) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Ok(GramMatrix { n, data })
    }
}

/// `G[i][j] = fp_kernel(shapes[i], shapes[j], sigma)`.
pub fn gram_matrix(shapes: &[PreShape], sigma: f64) -> Result<GramMatrix> {
    Kernel::new(sigma, DistanceKind::Procrustes)?.gram(shapes)
}

/// Dense symmetric matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    n: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    /// Wraps a row-major `n × n` buffer. Symmetry is checked exactly.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::InvalidConfig(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                data.len()
            )));
        }
        for i in 0..n {
            for j in i + 1..n {
                if data[i * n + j] != data[j * n + i] {
                    return Err(Error::InvalidConfig(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(GramMatrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Principal sub-matrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> GramMatrix {
        let m = indices.len();
        let mut data = Vec::with_capacity(m * m);
        for &i in indices {
            let row = self.row(i);
            data.extend(indices.iter().map(|&j| row[j]));
        }
        GramMatrix { n: m, data }
    }
}
