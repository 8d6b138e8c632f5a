//! Binary masks to equidistant, canonically indexed landmarks.
//!
//! The pipeline is `trace_boundary` (outer boundary of the largest
//! 4-connected region, Moore-neighbor tracing) followed by arc-length
//! resampling and `canonical_start`. Pixel `(row, col)` maps to the complex
//! landmark `row + i·col`, i.e. axial + i·lateral.

use std::collections::VecDeque;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::shape::{fp_distance, mean, signed_area2, LandmarkSet, PreShape};

/// Row-major boolean image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("mask dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidConfig(format!(
                "mask data has {} pixels, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(BinaryMask { width, height, data })
    }

    /// Builds a mask by evaluating `f(row, col)` on every pixel.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        BinaryMask { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    /// The image rotated a quarter turn; pixel `(r, c)` moves to
    /// `(c, height - 1 - r)`.
    pub fn rotate90(&self) -> BinaryMask {
        let (w, h) = (self.height, self.width);
        BinaryMask::from_fn(w, h, |r, c| self.get(self.height - 1 - c, r))
    }

    /// Labels of the largest 4-connected foreground component. Ties go to
    /// the component reached first in raster order.
    fn largest_component(&self) -> Option<Vec<bool>> {
        let mut label = vec![usize::MAX; self.data.len()];
        let mut best: Option<(usize, usize)> = None;
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.data.len() {
            if !self.data[start] || label[start] != usize::MAX {
                continue;
            }
            let id = next;
            next += 1;
            let mut size = 0;
            label[start] = id;
            queue.push_back(start);
            while let Some(p) = queue.pop_front() {
                size += 1;
                let (r, c) = (p / self.width, p % self.width);
                let mut visit = |q: usize| {
                    if self.data[q] && label[q] == usize::MAX {
                        label[q] = id;
                        queue.push_back(q);
                    }
                };
                if r > 0 {
                    visit(p - self.width);
                }
                if r + 1 < self.height {
                    visit(p + self.width);
                }
                if c > 0 {
                    visit(p - 1);
                }
                if c + 1 < self.width {
                    visit(p + 1);
                }
            }
            if best.is_none_or(|(_, s)| size > s) {
                best = Some((id, size));
            }
        }
        best.map(|(id, _)| label.iter().map(|&l| l == id).collect())
    }
}

/// A closed boundary loop of pixel coordinates `(row, col)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Contour {
    path: Vec<(usize, usize)>,
}

impl Contour {
    pub fn path(&self) -> &[(usize, usize)] {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.path.len()
    }

    pub fn is_empty(&self) -> bool {
        self.path.is_empty()
    }

    /// Path vertices as complex numbers `row + i·col`.
    pub fn to_complex(&self) -> Vec<Complex64> {
        self.path
            .iter()
            .map(|&(r, c)| Complex64::new(r as f64, c as f64))
            .collect()
    }

    pub fn perimeter(&self) -> f64 {
        perimeter(&self.to_complex())
    }
}

// Clockwise in display orientation (row grows downward), starting west.
const MOORE: [(isize, isize); 8] = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)];

fn direction_of(dr: isize, dc: isize) -> usize {
    MOORE
        .iter()
        .position(|&d| d == (dr, dc))
        .expect("backtrack pixel must be an 8-neighbor")
}

/// Outer boundary of the largest 4-connected foreground component.
///
/// Moore-neighbor tracing from the first component pixel in raster order.
/// Tracing stops when the first boundary step is about to be repeated
/// (Jacob's criterion), so pixels on one-pixel-wide necks are visited once
/// per side. Holes are ignored. The loop is returned counterclockwise in
/// the (axial, lateral) plane, starting at the raster-first pixel.
pub fn trace_boundary(mask: &BinaryMask) -> Result<Contour> {
    let region = mask.largest_component().ok_or(Error::EmptyMask)?;
    let (w, h) = (mask.width as isize, mask.height as isize);
    let inside = |r: isize, c: isize| r >= 0 && c >= 0 && r < h && c < w && region[(r * w + c) as usize];

    let first = region.iter().position(|&v| v).expect("component is non-empty");
    let start = ((first / mask.width) as isize, (first % mask.width) as isize);

    // Returns the next boundary pixel and the new backtrack direction
    // (relative to that pixel).
    let step = |p: (isize, isize), back: usize| -> Option<((isize, isize), usize)> {
        for k in 1..=8 {
            let d = (back + k) % 8;
            let q = (p.0 + MOORE[d].0, p.1 + MOORE[d].1);
            if inside(q.0, q.1) {
                let prev = (back + k - 1) % 8;
                let b = (p.0 + MOORE[prev].0, p.1 + MOORE[prev].1);
                return Some((q, direction_of(b.0 - q.0, b.1 - q.1)));
            }
        }
        None
    };

    let mut path = vec![start];
    // West of the raster-first pixel is never in the component.
    if let Some((second, back)) = step(start, 0) {
        let limit = 4 * region.iter().filter(|&&v| v).count() + 8;
        let (mut p, mut b) = (second, back);
        while path.len() <= limit {
            let (q, nb) = step(p, b).expect("traced pixel has a neighbor");
            if p == start && q == second {
                break;
            }
            path.push(p);
            p = q;
            b = nb;
        }
    }

    let mut distinct: Vec<_> = path.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::DegenerateRegion(distinct.len()));
    }

    let mut path: Vec<(usize, usize)> = path.into_iter().map(|(r, c)| (r as usize, c as usize)).collect();
    let pts: Vec<Complex64> = path.iter().map(|&(r, c)| Complex64::new(r as f64, c as f64)).collect();
    if signed_area2(&pts) < 0.0 {
        path[1..].reverse();
    }
    Ok(Contour { path })
}

pub(crate) fn perimeter(points: &[Complex64]) -> f64 {
    let n = points.len();
    (0..n).map(|k| (points[(k + 1) % n] - points[k]).norm()).sum()
}

/// Resamples a closed polyline to `n` points equally spaced in arc length,
/// the first at `points[0]`, interpolating linearly along segments.
pub fn resample_closed(points: &[Complex64], n: usize) -> Result<Vec<Complex64>> {
    if n < 3 {
        return Err(Error::TooFewLandmarks(n));
    }
    let m = points.len();
    let seg: Vec<f64> = (0..m).map(|k| (points[(k + 1) % m] - points[k]).norm()).collect();
    let total: f64 = seg.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateShape);
    }
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    let mut seg_start = 0.0;
    for i in 0..n {
        let target = i as f64 * total / n as f64;
        while k + 1 < m && seg_start + seg[k] <= target {
            seg_start += seg[k];
            k += 1;
        }
        let p = points[k];
        let q = points[(k + 1) % m];
        let t = if seg[k] > 0.0 {
            ((target - seg_start) / seg[k]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(p + (q - p) * t);
    }
    Ok(out)
}

/// `n` landmarks equidistant along the contour, starting at path vertex 0.
///
/// Use [`contour_landmarks`] for the canonically indexed variant.
pub fn resample_equidistant(c: &Contour, n: usize) -> Result<LandmarkSet> {
    LandmarkSet::new(resample_closed(&c.to_complex(), n)?)
}

/// Index of the point farthest from `centroid`; near-ties (relative 1e-9)
/// are broken by the smallest polar angle in `[0, 2π)`.
fn farthest_index(points: &[Complex64], centroid: Complex64) -> usize {
    let radii: Vec<f64> = points.iter().map(|&p| (p - centroid).norm()).collect();
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-9 * rmax;
    let angle = |p: Complex64| {
        let a = (p - centroid).arg();
        if a < 0.0 {
            a + std::f64::consts::TAU
        } else {
            a
        }
    };
    (0..points.len())
        .filter(|&k| radii[k] >= rmax - tol)
        .min_by(|&i, &j| angle(points[i]).total_cmp(&angle(points[j])))
        .expect("at least one candidate")
}

fn orient_and_rotate(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts = points.to_vec();
    if signed_area2(&pts) < 0.0 {
        pts.reverse();
    }
    let k = farthest_index(&pts, mean(&pts));
    pts.rotate_left(k);
    pts
}

/// Counterclockwise orientation with index 0 at the landmark farthest from
/// the centroid (ties: smallest polar angle about the centroid).
pub fn canonical_start(lm: &LandmarkSet) -> LandmarkSet {
    LandmarkSet::new(orient_and_rotate(lm.points())).expect("valid input stays valid")
}

/// Equidistant resampling of a closed polygon whose arc-length origin is
/// its farthest vertex, followed by [`canonical_start`].
pub fn polygon_landmarks(points: &[Complex64], n: usize) -> Result<LandmarkSet> {
    if n < 3 {
        return Err(Error::TooFewLandmarks(n));
    }
    let rotated = orient_and_rotate(points);
    let lm = LandmarkSet::new(resample_closed(&rotated, n)?)?;
    Ok(canonical_start(&lm))
}

/// Contour to `n` canonically indexed equidistant landmarks.
pub fn contour_landmarks(c: &Contour, n: usize) -> Result<LandmarkSet> {
    polygon_landmarks(&c.to_complex(), n)
}

/// Minimum full Procrustes distance over every cyclic re-indexing of `b`.
///
/// The best shift is found from `|⟨a, shift(b)⟩|`; the distance is then
/// evaluated with [`fp_distance`] and never exceeds the unshifted value.
pub fn fp_distance_cyclic(a: &PreShape, b: &PreShape) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (za, zb) = (a.coords(), b.coords());
    let n = za.len();
    let mut best = (0, f64::NEG_INFINITY);
    for s in 0..n {
        let ip: Complex64 = (0..n).map(|k| za[k].conj() * zb[(k + s) % n]).sum();
        if ip.norm_sqr() > best.1 {
            best = (s, ip.norm_sqr());
        }
    }
    let unshifted = fp_distance(a, b)?;
    if best.0 == 0 {
        return Ok(unshifted);
    }
    Ok(fp_distance(a, &b.cyclic_shift(best.0))?.min(unshifted))
}
