//! Cleaning and normalization of recordings, composable into an ordered queue.
//!
//! Every algorithm is a pure `&Recording -> Recording` function. A
//! [`PreprocessingQueue`] validates step parameters up front and applies the
//! steps left to right; duplicates are allowed (scale, resample, scale again is
//! a common queue).

mod noise;
mod normalize;

pub use noise::{
    dehook, dehook_with, dot_reduction, douglas_peucker, douglas_peucker_indices,
    remove_dots, remove_duplicate_time, stroke_connect, turning_angle_deg,
    weighted_average_smoothing, wild_point_filter, AngleFn, DEHOOK_ANGLE,
};
pub use normalize::{
    scale_and_shift, scale_and_shift_to, space_evenly, space_evenly_per_stroke,
    space_evenly_per_stroke_diag, Interpolation, ShiftVariant,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recording::Recording;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("{step}: parameter {param} = {value} outside {range}")]
    OutOfRange {
        step: &'static str,
        param: &'static str,
        value: String,
        range: &'static str,
    },
    #[error("unknown preprocessing step {0:?}")]
    UnknownStep(String),
    #[error("{step}: {reason}")]
    Invalid { step: &'static str, reason: String },
}

/// One parameterized preprocessing algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PreprocessingStep {
    RemoveDuplicateTime,
    RemoveDots,
    DotReduction {
        threshold: f64,
    },
    WildPointFilter {
        threshold: f64,
    },
    StrokeConnect {
        minimum_distance: f64,
    },
    WeightedAverageSmoothing {
        theta: [f64; 3],
    },
    Dehook {
        angle_threshold: f64,
    },
    DouglasPeucker {
        epsilon: f64,
    },
    ScaleAndShift {
        variant: ShiftVariant,
        max_width: f64,
        max_height: f64,
    },
    SpaceEvenly {
        number: usize,
    },
    SpaceEvenlyPerStroke {
        number: usize,
        kind: Interpolation,
    },
}

impl PreprocessingStep {
    pub const NAMES: [&'static str; 11] = [
        "RemoveDuplicateTime",
        "RemoveDots",
        "DotReduction",
        "WildPointFilter",
        "StrokeConnect",
        "WeightedAverageSmoothing",
        "Dehook",
        "DouglasPeucker",
        "ScaleAndShift",
        "SpaceEvenly",
        "SpaceEvenlyPerStroke",
    ];

    pub fn name(&self) -> &'static str {
        use PreprocessingStep::*;
        match self {
            RemoveDuplicateTime => "RemoveDuplicateTime",
            RemoveDots => "RemoveDots",
            DotReduction { .. } => "DotReduction",
            WildPointFilter { .. } => "WildPointFilter",
            StrokeConnect { .. } => "StrokeConnect",
            WeightedAverageSmoothing { .. } => "WeightedAverageSmoothing",
            Dehook { .. } => "Dehook",
            DouglasPeucker { .. } => "DouglasPeucker",
            ScaleAndShift { .. } => "ScaleAndShift",
            SpaceEvenly { .. } => "SpaceEvenly",
            SpaceEvenlyPerStroke { .. } => "SpaceEvenlyPerStroke",
        }
    }

    /// `ScaleAndShift` with unit target size.
    pub fn scale_and_shift(variant: ShiftVariant) -> Self {
        PreprocessingStep::ScaleAndShift {
            variant,
            max_width: 1.0,
            max_height: 1.0,
        }
    }

    /// Checks the parameter ranges of the preprocessing parameter table.
    pub fn validate(&self) -> Result<(), PreprocessError> {
        use PreprocessingStep::*;
        let name = self.name();
        let out = |param: &'static str, value: f64, range: &'static str| {
            Err(PreprocessError::OutOfRange {
                step: name,
                param,
                value: value.to_string(),
                range,
            })
        };
        match *self {
            RemoveDuplicateTime | RemoveDots => Ok(()),
            DotReduction { threshold } if !(threshold >= 0.0 && threshold.is_finite()) => {
                out("threshold", threshold, "[0, inf)")
            }
            WildPointFilter { threshold } if !(threshold > 0.0) => {
                out("threshold", threshold, "(0, inf]")
            }
            StrokeConnect { minimum_distance }
                if !(minimum_distance >= 0.0 && minimum_distance.is_finite()) =>
            {
                out("minimum_distance", minimum_distance, "[0, inf)")
            }
            WeightedAverageSmoothing { theta } => {
                for t in theta {
                    if !(0.0..=1.0).contains(&t) {
                        return out("theta", t, "[0, 1]");
                    }
                }
                if theta.iter().sum::<f64>() <= 0.0 {
                    return Err(PreprocessError::Invalid {
                        step: name,
                        reason: "theta must not be all zero".into(),
                    });
                }
                Ok(())
            }
            Dehook { angle_threshold } if !(angle_threshold > 0.0 && angle_threshold <= 360.0) => {
                out("angle_threshold", angle_threshold, "(0, 360]")
            }
            DouglasPeucker { epsilon } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                out("epsilon", epsilon, "[0, inf)")
            }
            ScaleAndShift {
                max_width,
                max_height,
                ..
            } => {
                if !(max_width > 0.0 && max_width.is_finite()) {
                    return out("max_width", max_width, "(0, inf)");
                }
                if !(max_height > 0.0 && max_height.is_finite()) {
                    return out("max_height", max_height, "(0, inf)");
                }
                Ok(())
            }
            SpaceEvenly { number } | SpaceEvenlyPerStroke { number, .. } if number < 2 => {
                out("number", number as f64, "{2, 3, ...}")
            }
            _ => Ok(()),
        }
    }

    /// Runs the step. Parameters are assumed valid.
    pub fn apply(&self, rec: &Recording) -> Recording {
        use PreprocessingStep::*;
        match *self {
            RemoveDuplicateTime => remove_duplicate_time(rec),
            RemoveDots => remove_dots(rec),
            DotReduction { threshold } => dot_reduction(rec, threshold),
            WildPointFilter { threshold } => wild_point_filter(rec, threshold),
            StrokeConnect { minimum_distance } => stroke_connect(rec, minimum_distance),
            WeightedAverageSmoothing { theta } => {
                weighted_average_smoothing(rec, theta).unwrap_or_else(|_| rec.clone())
            }
            Dehook { angle_threshold } => dehook(rec, angle_threshold),
            DouglasPeucker { epsilon } => douglas_peucker(rec, epsilon),
            ScaleAndShift {
                variant,
                max_width,
                max_height,
            } => scale_and_shift_to(rec, variant, max_width, max_height),
            SpaceEvenly { number } => space_evenly(rec, number),
            SpaceEvenlyPerStroke { number, kind } => space_evenly_per_stroke(rec, number, kind),
        }
    }

    fn changes_point_count(&self) -> bool {
        use PreprocessingStep::*;
        matches!(
            self,
            RemoveDuplicateTime
                | RemoveDots
                | DotReduction { .. }
                | WildPointFilter { .. }
                | WeightedAverageSmoothing { .. }
                | Dehook { .. }
                | DouglasPeucker { .. }
        )
    }

    fn is_resampling(&self) -> bool {
        matches!(
            self,
            PreprocessingStep::SpaceEvenly { .. } | PreprocessingStep::SpaceEvenlyPerStroke { .. }
        )
    }

    fn changes_bounding_box(&self) -> bool {
        matches!(
            self,
            PreprocessingStep::WildPointFilter { .. }
                | PreprocessingStep::WeightedAverageSmoothing { .. }
        )
    }
}

/// A queue step placed where the step dependency graph says it should not be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderingWarning {
    pub step_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreprocessingQueue {
    steps: Vec<PreprocessingStep>,
}

impl PreprocessingQueue {
    /// Validates every step. Ordering problems are reported through
    /// [`PreprocessingQueue::ordering_warnings`] and logged, not rejected.
    pub fn new(steps: Vec<PreprocessingStep>) -> Result<Self, PreprocessError> {
        for step in &steps {
            step.validate()?;
        }
        let queue = PreprocessingQueue { steps };
        for w in queue.ordering_warnings() {
            tracing::warn!(step = w.step_index, "{}", w.message);
        }
        Ok(queue)
    }

    pub fn steps(&self) -> &[PreprocessingStep] {
        &self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn apply(&self, rec: &Recording) -> Recording {
        apply_queue(rec, self)
    }

    pub fn ordering_warnings(&self) -> Vec<OrderingWarning> {
        let mut warnings = Vec::new();
        for (i, step) in self.steps.iter().enumerate() {
            let before = &self.steps[..i];
            let after = &self.steps[i + 1..];
            if matches!(step, PreprocessingStep::WildPointFilter { .. })
                && after
                    .iter()
                    .any(|s| matches!(s, PreprocessingStep::DotReduction { .. }))
            {
                warnings.push(OrderingWarning {
                    step_index: i,
                    message: "DotReduction should run before WildPointFilter".into(),
                });
            }
            let scaled_before = before
                .iter()
                .any(|s| matches!(s, PreprocessingStep::ScaleAndShift { .. }));
            let scaled_after = after
                .iter()
                .any(|s| matches!(s, PreprocessingStep::ScaleAndShift { .. }));
            if step.changes_bounding_box() && scaled_before && !scaled_after {
                warnings.push(OrderingWarning {
                    step_index: i,
                    message: format!(
                        "{} changes the bounding box and should run before ScaleAndShift",
                        step.name()
                    ),
                });
            }
            if step.changes_point_count() && before.iter().any(PreprocessingStep::is_resampling) {
                warnings.push(OrderingWarning {
                    step_index: i,
                    message: format!("{} changes the point count and should run before resampling", step.name()),
                });
            }
        }
        warnings
    }
}

pub fn apply_queue(rec: &Recording, queue: &PreprocessingQueue) -> Recording {
    queue
        .steps
        .iter()
        .fold(rec.clone(), |acc, step| step.apply(&acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recording::Point;

    fn stroke(n: usize, x0: f64) -> Vec<Point> {
        (0..n).map(|i| Point::new(x0 + i as f64, (i * i) as f64, (10 * i) as f64)).collect()
    }

    #[test]
    fn empty_queue_is_identity() {
        let rec = Recording::new(vec![stroke(5, 0.0)]).unwrap();
        let q = PreprocessingQueue::new(vec![]).unwrap();
        assert_eq!(q.apply(&rec), rec);
    }

    #[test]
    fn baseline_queue_resamples_to_twenty() {
        let rec = Recording::new(vec![stroke(7, 0.0), stroke(3, 50.0), stroke(30, 9.0)]).unwrap();
        let q = PreprocessingQueue::new(vec![
            PreprocessingStep::scale_and_shift(ShiftVariant::I1),
            PreprocessingStep::SpaceEvenlyPerStroke {
                number: 20,
                kind: Interpolation::Linear,
            },
        ])
        .unwrap();
        let out = q.apply(&rec);
        let lens: Vec<usize> = out.strokes.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![20, 3, 20]);
    }

    #[test]
    fn wild_point_filter_before_dot_reduction_warns() {
        let q = PreprocessingQueue::new(vec![
            PreprocessingStep::WildPointFilter { threshold: 3.0 },
            PreprocessingStep::DotReduction { threshold: 5.0 },
        ])
        .unwrap();
        let w = q.ordering_warnings();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].step_index, 0);

        let ok = PreprocessingQueue::new(vec![
            PreprocessingStep::DotReduction { threshold: 5.0 },
            PreprocessingStep::WildPointFilter { threshold: 3.0 },
        ])
        .unwrap();
        assert!(ok.ordering_warnings().is_empty());
    }

    #[test]
    fn other_ordering_rules() {
        let q = PreprocessingQueue::new(vec![
            PreprocessingStep::scale_and_shift(ShiftVariant::I1),
            PreprocessingStep::SpaceEvenlyPerStroke {
                number: 20,
                kind: Interpolation::Linear,
            },
            PreprocessingStep::WeightedAverageSmoothing {
                theta: [1.0, 4.0 / 6.0, 1.0],
            },
        ])
        .unwrap();
        // smoothing after scaling with no rescale, and after resampling
        assert_eq!(q.ordering_warnings().len(), 2);

        // scale, resample, scale again is fine
        let q = PreprocessingQueue::new(vec![
            PreprocessingStep::RemoveDuplicateTime,
            PreprocessingStep::StrokeConnect {
                minimum_distance: 10.0,
            },
            PreprocessingStep::scale_and_shift(ShiftVariant::I1),
            PreprocessingStep::SpaceEvenlyPerStroke {
                number: 20,
                kind: Interpolation::Linear,
            },
            PreprocessingStep::scale_and_shift(ShiftVariant::I1),
        ])
        .unwrap();
        assert!(q.ordering_warnings().is_empty());
    }

    #[test]
    fn out_of_range_parameters_rejected_before_running() {
        let bad = [
            PreprocessingStep::WildPointFilter { threshold: 0.0 },
            PreprocessingStep::Dehook {
                angle_threshold: 361.0,
            },
            PreprocessingStep::Dehook {
                angle_threshold: 0.0,
            },
            PreprocessingStep::WeightedAverageSmoothing {
                theta: [0.0, 0.0, 0.0],
            },
            PreprocessingStep::WeightedAverageSmoothing {
                theta: [0.5, 1.5, 0.0],
            },
            PreprocessingStep::DotReduction { threshold: -1.0 },
            PreprocessingStep::SpaceEvenlyPerStroke {
                number: 1,
                kind: Interpolation::Linear,
            },
            PreprocessingStep::ScaleAndShift {
                variant: ShiftVariant::I2,
                max_width: 0.0,
                max_height: 1.0,
            },
        ];
        for step in bad {
            assert!(
                PreprocessingQueue::new(vec![PreprocessingStep::RemoveDots, step.clone()]).is_err(),
                "{step:?} accepted"
            );
        }
    }
}
