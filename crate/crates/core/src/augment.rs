//! Training-set expansion by copying and rotating recordings.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recording::{Point, Recording};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("multiply: nr must be at least 1")]
    ZeroCopies,
    #[error("rotate: min {min} greater than max {max}")]
    EmptyRange { min: f64, max: f64 },
    #[error("rotate: num must be at least 1")]
    ZeroVariants,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AugmentationStep {
    Multiply { nr: usize },
    Rotate { min: f64, max: f64, num: usize },
}

impl AugmentationStep {
    pub fn validate(&self) -> Result<(), AugmentError> {
        match *self {
            AugmentationStep::Multiply { nr: 0 } => Err(AugmentError::ZeroCopies),
            AugmentationStep::Rotate { num: 0, .. } => Err(AugmentError::ZeroVariants),
            AugmentationStep::Rotate { min, max, .. } if !(min <= max) => {
                Err(AugmentError::EmptyRange { min, max })
            }
            AugmentationStep::Rotate { min, max, .. } => {
                if min.abs() >= 22.5 || max.abs() >= 22.5 {
                    tracing::warn!(min, max, "rotations of 22.5 degrees or more can change the symbol");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, recs: &[Recording]) -> Result<Vec<Recording>, AugmentError> {
        match *self {
            AugmentationStep::Multiply { nr } => multiply(recs, nr),
            AugmentationStep::Rotate { min, max, num } => rotate(recs, min, max, num),
        }
    }
}

/// `nr` copies of the whole list, one after another.
pub fn multiply(recs: &[Recording], nr: usize) -> Result<Vec<Recording>, AugmentError> {
    if nr == 0 {
        return Err(AugmentError::ZeroCopies);
    }
    let mut out = Vec::with_capacity(recs.len() * nr);
    for _ in 0..nr {
        out.extend_from_slice(recs);
    }
    Ok(out)
}

/// `num` angles in degrees spaced evenly over `[min, max]`, endpoints
/// included. A single angle sits in the middle.
pub fn rotation_angles(min: f64, max: f64, num: usize) -> Vec<f64> {
    match num {
        0 => vec![],
        1 => vec![(min + max) / 2.0],
        _ => (0..num)
            .map(|i| min + (max - min) * i as f64 / (num - 1) as f64)
            .collect(),
    }
}

/// Keeps every recording and appends `num` rotated variants of each, rotated
/// around its center of mass. Output order: originals, then variants of the
/// first recording, then of the second, and so on.
pub fn rotate(recs: &[Recording], min: f64, max: f64, num: usize) -> Result<Vec<Recording>, AugmentError> {
    if num == 0 {
        return Err(AugmentError::ZeroVariants);
    }
    if !(min <= max) {
        return Err(AugmentError::EmptyRange { min, max });
    }
    let angles = rotation_angles(min, max, num);
    let mut out = Vec::with_capacity(recs.len() * (num + 1));
    out.extend_from_slice(recs);
    for rec in recs {
        out.extend(angles.iter().map(|&a| rotate_recording(rec, a)));
    }
    Ok(out)
}

pub fn center_of_mass(rec: &Recording) -> (f64, f64) {
    let n = rec.point_count() as f64;
    let (sx, sy) = rec.points().fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    (sx / n, sy / n)
}

/// Rotates counterclockwise in a y-up frame by `degrees` around the center of
/// mass. Timestamps are unchanged.
pub fn rotate_recording(rec: &Recording, degrees: f64) -> Recording {
    let (cx, cy) = center_of_mass(rec);
    let (sin, cos) = degrees.to_radians().sin_cos();
    let strokes = rec
        .strokes
        .iter()
        .map(|s| {
            s.iter()
                .map(|p| {
                    let (dx, dy) = (p.x - cx, p.y - cy);
                    Point {
                        x: cx + cos * dx - sin * dy,
                        y: cy + sin * dx + cos * dy,
                        ..*p
                    }
                })
                .collect()
        })
        .collect();
    rec.with_strokes(strokes)
}
