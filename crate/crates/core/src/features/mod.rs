//! Fixed-dimension feature vectors from recordings.
//!
//! A feature list is an ordered sequence of [`FeatureSpec`]s; [`compose`]
//! concatenates their outputs. The dimension of every spec is known without
//! looking at data.

mod bitmap;
mod global;
mod local;
mod standardize;

pub use bitmap::bitmap;
pub use global::{
    aspect_ratio, center_of_mass, height, ink, re_curvature, stroke_center, stroke_count,
    stroke_intersections, time, width,
};
pub use local::{constant_point_coordinates, curvature, direction, first_n_points, point_directions};
pub use standardize::{Standardization, StandardizationMode};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::recording::Recording;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("feature list is empty")]
    Empty,
    #[error("{feature}: {reason}")]
    Invalid { feature: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointCoordinates {
    /// 0 means: all strokes concatenated into one sequence.
    pub strokes: usize,
    pub points_per_stroke: usize,
    pub fill_empty_with: f64,
    pub pen_down: bool,
}

impl Default for PointCoordinates {
    fn default() -> Self {
        PointCoordinates {
            strokes: 4,
            points_per_stroke: 20,
            fill_empty_with: 0.0,
            pen_down: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FirstN {
    pub n: usize,
    pub fill_empty_with: f64,
}

impl Default for FirstN {
    fn default() -> Self {
        FirstN {
            n: 81,
            fill_empty_with: 0.0,
        }
    }
}

/// Per-point local features, truncated like [`PointCoordinates`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalWindow {
    pub strokes: usize,
    pub points_per_stroke: usize,
    pub fill_empty_with: f64,
}

impl Default for LocalWindow {
    fn default() -> Self {
        LocalWindow {
            strokes: 4,
            points_per_stroke: 20,
            fill_empty_with: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Strokes {
    pub strokes: usize,
}

impl Default for Strokes {
    fn default() -> Self {
        Strokes { strokes: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BitmapSize {
    pub n: usize,
}

impl Default for BitmapSize {
    fn default() -> Self {
        BitmapSize { n: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FeatureSpec {
    ConstantPointCoordinates(PointCoordinates),
    FirstNPoints(FirstN),
    StrokeCount,
    Bitmap(BitmapSize),
    Ink,
    AspectRatio,
    Width,
    Height,
    Time,
    CenterOfMass,
    StrokeCenter(Strokes),
    StrokeIntersections(Strokes),
    ReCurvature(Strokes),
    Direction(LocalWindow),
    Curvature(LocalWindow),
}

impl FeatureSpec {
    pub const NAMES: [&'static str; 15] = [
        "ConstantPointCoordinates",
        "FirstNPoints",
        "StrokeCount",
        "Bitmap",
        "Ink",
        "AspectRatio",
        "Width",
        "Height",
        "Time",
        "CenterOfMass",
        "StrokeCenter",
        "StrokeIntersections",
        "ReCurvature",
        "Direction",
        "Curvature",
    ];

    pub fn name(&self) -> &'static str {
        use FeatureSpec::*;
        match self {
            ConstantPointCoordinates(_) => "ConstantPointCoordinates",
            FirstNPoints(_) => "FirstNPoints",
            StrokeCount => "StrokeCount",
            Bitmap(_) => "Bitmap",
            Ink => "Ink",
            AspectRatio => "AspectRatio",
            Width => "Width",
            Height => "Height",
            Time => "Time",
            CenterOfMass => "CenterOfMass",
            StrokeCenter(_) => "StrokeCenter",
            StrokeIntersections(_) => "StrokeIntersections",
            ReCurvature(_) => "ReCurvature",
            Direction(_) => "Direction",
            Curvature(_) => "Curvature",
        }
    }

    /// Output length, computed from the parameters alone.
    pub fn dimension(&self) -> usize {
        use FeatureSpec::*;
        match *self {
            ConstantPointCoordinates(p) => {
                let per_point = if p.pen_down { 3 } else { 2 };
                per_point * p.points_per_stroke * p.strokes.max(1)
            }
            FirstNPoints(p) => 2 * p.n,
            Bitmap(b) => b.n * b.n,
            StrokeCount | Ink | AspectRatio | Width | Height | Time => 1,
            CenterOfMass => 2,
            StrokeCenter(s) => 2 * s.strokes,
            StrokeIntersections(s) => s.strokes * (s.strokes + 1) / 2,
            ReCurvature(s) => s.strokes,
            Direction(w) | Curvature(w) => 2 * w.points_per_stroke * w.strokes.max(1),
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        use FeatureSpec::*;
        let bad = |reason: &str| {
            Err(FeatureError::Invalid {
                feature: self.name(),
                reason: reason.to_string(),
            })
        };
        match *self {
            ConstantPointCoordinates(PointCoordinates { points_per_stroke: 0, .. })
            | Direction(LocalWindow { points_per_stroke: 0, .. })
            | Curvature(LocalWindow { points_per_stroke: 0, .. }) => bad("points_per_stroke must be at least 1"),
            FirstNPoints(FirstN { n: 0, .. }) | Bitmap(BitmapSize { n: 0 }) => bad("n must be at least 1"),
            StrokeCenter(Strokes { strokes: 0 })
            | StrokeIntersections(Strokes { strokes: 0 })
            | ReCurvature(Strokes { strokes: 0 }) => bad("strokes must be at least 1"),
            _ => Ok(()),
        }
    }

    pub fn compute(&self, rec: &Recording) -> Vec<f64> {
        use FeatureSpec::*;
        match *self {
            ConstantPointCoordinates(p) => constant_point_coordinates(rec, &p),
            FirstNPoints(p) => first_n_points(rec, p.n, p.fill_empty_with),
            StrokeCount => vec![stroke_count(rec)],
            Bitmap(b) => bitmap(rec, b.n),
            Ink => vec![ink(rec)],
            AspectRatio => vec![aspect_ratio(rec)],
            Width => vec![width(rec)],
            Height => vec![height(rec)],
            Time => vec![time(rec)],
            CenterOfMass => center_of_mass(rec).to_vec(),
            StrokeCenter(s) => stroke_center(rec, s.strokes),
            StrokeIntersections(s) => stroke_intersections(rec, s.strokes),
            ReCurvature(s) => re_curvature(rec, s.strokes),
            Direction(w) => direction(rec, &w),
            Curvature(w) => curvature(rec, &w),
        }
    }
}

/// The feature list used by the baseline systems: 160 point coordinates.
pub fn baseline_features() -> Vec<FeatureSpec> {
    vec![FeatureSpec::ConstantPointCoordinates(PointCoordinates::default())]
}

/// Baseline coordinates plus re-curvature, ink, stroke count and aspect ratio.
pub fn optimized_features() -> Vec<FeatureSpec> {
    vec![
        FeatureSpec::ConstantPointCoordinates(PointCoordinates::default()),
        FeatureSpec::ReCurvature(Strokes::default()),
        FeatureSpec::Ink,
        FeatureSpec::StrokeCount,
        FeatureSpec::AspectRatio,
    ]
}

pub fn total_dimension(specs: &[FeatureSpec]) -> usize {
    specs.iter().map(FeatureSpec::dimension).sum()
}

pub fn validate_features(specs: &[FeatureSpec]) -> Result<(), FeatureError> {
    if specs.is_empty() {
        return Err(FeatureError::Empty);
    }
    specs.iter().try_for_each(FeatureSpec::validate)
}

/// Concatenates the features in list order.
///
/// # Panics
///
/// If a feature produces a vector whose length differs from its declared
/// dimension.
pub fn compose(rec: &Recording, specs: &[FeatureSpec]) -> Vec<f64> {
    let mut out = Vec::with_capacity(total_dimension(specs));
    for spec in specs {
        let v = spec.compute(rec);
        assert_eq!(
            v.len(),
            spec.dimension(),
            "{} produced {} values, declared {}",
            spec.name(),
            v.len(),
            spec.dimension()
        );
        out.extend(v);
    }
    out
}

/// Hex SHA-256 of the canonical JSON form of a feature list. Stored next to
/// models and feature files so mismatched inputs are caught on load.
pub fn features_hash(specs: &[FeatureSpec]) -> String {
    let json = serde_json::to_vec(specs).expect("feature specs serialize");
    hex::encode(Sha256::digest(&json))
}
