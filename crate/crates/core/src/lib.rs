//! Closed-contour classification on Kendall's shape space.
//!
//! Outlines (traced from binary masks or given as landmark files) are
//! resampled into equidistant landmarks, mapped to pre-shapes, compared
//! with the full Procrustes distance and classified by an SVM whose kernel
//! is a Gaussian of that distance. The [`eval`] module provides the
//! leave-one-out harness, ROC/AUC analysis and DeLong's test.
//!
//! ```
//! use kendall_shape::shape::{fp_distance, to_pre_shape, LandmarkSet};
//!
//! let tri = LandmarkSet::from_xy(&[(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]).unwrap();
//! let big = LandmarkSet::from_xy(&[(10.0, 10.0), (18.0, 10.0), (10.0, 16.0)]).unwrap();
//! let d = fp_distance(&to_pre_shape(&tri).unwrap(), &to_pre_shape(&big).unwrap()).unwrap();
//! assert!(d < 1e-7);
//! ```

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod shape;
pub mod svm;
pub mod synthetic;

pub use dataset::{Label, Outline, Sample, ShapeDataset};
pub use error::{Error, Result};
pub use shape::{fp_distance, fp_kernel, to_pre_shape, DistanceKind, GramMatrix, Kernel, LandmarkSet, PreShape};
pub use svm::{SvmModel, TrainConfig};
